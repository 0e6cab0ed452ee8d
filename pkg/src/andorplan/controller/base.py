"""Controller contract: the decision operators the engine delegates to.

A controller answers localized tree-operation queries (expand, repair, global
update, completion check, summarization) plus constraint extraction, memory
maintenance, and final-response composition. Implementations must be safe to
call from the engine thread and present blocking one-call-at-a-time semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Protocol

from .directives import (
    CompletionVerdict,
    ExpansionDirective,
    GlobalUpdateDirective,
    ItemConstraints,
    RepairDirective,
    SummaryUpdate,
)

if TYPE_CHECKING:
    from ..environment import Observation
    from ..tree import Node


class ControllerError(Exception):
    """Base class for controller failures."""


class ControllerTransportError(ControllerError):
    """The controller backend is unreachable or returned a transport fault."""


class ScriptMissError(ControllerError):
    """A scripted controller had no fixture for the requested key."""


@dataclass
class ContextBundle:
    """Everything a controller call may condition on.

    Every field is always present (possibly empty); the engine refreshes the
    summaries after each observation-changing action and the local tree info
    before each node-scoped call.
    """

    task_description: str = ""
    item_constraints: list[ItemConstraints] = field(default_factory=list)
    task_progress_summary: str = ""
    notes_summary: str = ""
    observation_summary: str = ""
    action_history: list[str] = field(default_factory=list)
    interaction_history: list[tuple[str, str]] = field(default_factory=list)
    current_observation: Optional["Observation"] = None
    local_tree_info: str = ""
    candidate_table_excerpt: str = ""


class Controller(Protocol):
    """High-level decision component; scripted or LLM-backed."""

    def expand_node(self, node: "Node", ctx: ContextBundle) -> ExpansionDirective: ...

    def revise_and_node(
        self, node: "Node", ctx: ContextBundle, reason: str
    ) -> RepairDirective: ...

    def revise_or_node(
        self, node: "Node", ctx: ContextBundle, reason: str
    ) -> RepairDirective: ...

    def global_tree_update(
        self, tree_text: str, ctx: ContextBundle
    ) -> GlobalUpdateDirective: ...

    def check_for_completion_and(
        self, node: "Node", ctx: ContextBundle
    ) -> CompletionVerdict: ...

    def full_update(
        self, ctx: ContextBundle, observation: "Observation"
    ) -> SummaryUpdate: ...

    def extract_constraints(self, task_description: str) -> list[ItemConstraints]: ...

    def update_memory(
        self, ctx: ContextBundle, observation: "Observation", table_text: str
    ) -> str: ...

    def compose_final_response(
        self, task_description: str, notes: list[str], tree_text: str
    ) -> str: ...
