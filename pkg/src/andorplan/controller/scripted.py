"""Fixture-driven deterministic controller.

Fixtures are keyed raw directive texts; every lookup result goes through the
same parsers as remote model output, so a scripted run exercises the full wire
format. Script files are plain text: ``[kind key]`` headers introduce one raw
directive each.

Key forms, most specific wins:

* ``[expand 1.2]`` / ``[expand 1.2 @2]`` (execution count) with an optional
  ``obs:<hash8>`` refinement token.
* ``[repair 1.2]`` / ``[repair 1.2 #2]`` (per-node call index).
* ``[complete 1]`` / ``[complete 1 #2]``.
* ``[update]`` / ``[update #3]``, ``[summary]`` / ``[summary #3]``,
  ``[memory]`` / ``[memory #3]`` (global call index).
* ``[constraints]``, ``[response]`` (single entries).
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

from . import directives as wire
from .base import ContextBundle, ScriptMissError

if TYPE_CHECKING:
    from ..environment import Observation
    from ..tree import Node

logger = logging.getLogger(__name__)

_SECTION_KINDS = (
    "expand",
    "repair",
    "complete",
    "update",
    "summary",
    "memory",
    "constraints",
    "response",
)


class ScriptError(Exception):
    """A controller script file is malformed."""


@dataclass
class ControllerScript:
    """Raw directive texts keyed per operator."""

    expansions: dict[str, str] = field(default_factory=dict)
    repairs: dict[str, str] = field(default_factory=dict)
    completions: dict[str, str] = field(default_factory=dict)
    updates: dict[str, str] = field(default_factory=dict)
    summaries: dict[str, str] = field(default_factory=dict)
    memory: dict[str, str] = field(default_factory=dict)
    constraints: Optional[str] = None
    response: Optional[str] = None

    @classmethod
    def from_text(cls, text: str) -> "ControllerScript":
        script = cls()
        current_key: Optional[tuple[str, str]] = None
        body: list[str] = []
        for raw_line in text.splitlines():
            line = raw_line.rstrip()
            if line.startswith("[") and line.endswith("]"):
                header = line[1:-1].strip()
                parts = header.split(None, 1)
                if parts and parts[0] in _SECTION_KINDS:
                    if current_key is not None:
                        script._store(current_key, "\n".join(body).strip())
                    current_key = (parts[0], parts[1].strip() if len(parts) > 1 else "")
                    body = []
                    continue
                if current_key is None:
                    raise ScriptError(f"unknown section header: {line!r}")
            if current_key is None:
                if line.strip():
                    raise ScriptError(f"content before first section: {line!r}")
                continue
            body.append(raw_line)
        if current_key is not None:
            script._store(current_key, "\n".join(body).strip())
        return script

    @classmethod
    def from_file(cls, path: str) -> "ControllerScript":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def _store(self, key: tuple[str, str], body: str) -> None:
        kind, name = key
        if kind == "constraints":
            self.constraints = body
        elif kind == "response":
            self.response = body
        else:
            table = {
                "expand": self.expansions,
                "repair": self.repairs,
                "complete": self.completions,
                "update": self.updates,
                "summary": self.summaries,
                "memory": self.memory,
            }[kind]
            if name in table:
                raise ScriptError(f"duplicate [{kind} {name}] section")
            table[name] = body


def observation_hash(observation: Optional["Observation"]) -> str:
    if observation is None:
        return "none"
    digest = hashlib.sha1(
        f"{observation.url}\n{observation.page_text}".encode("utf-8")
    ).hexdigest()
    return digest[:8]


class ScriptedController:
    """Deterministic controller backed by a ControllerScript.

    ``default_mode`` governs unmatched keys: ``"noop"`` substitutes a neutral
    directive (empty repair/update, COMPLETE verdict, echo summaries) while
    ``"fail"`` raises. Expansion misses always raise: there is no neutral way
    to type a node.
    """

    def __init__(self, script: ControllerScript, default_mode: str = "noop"):
        if default_mode not in ("noop", "fail"):
            raise ValueError(f"unknown default_mode {default_mode!r}")
        self.script = script
        self.default_mode = default_mode
        self._call_counts: dict[tuple[str, str], int] = {}

    # -- lookup helpers ----------------------------------------------------

    def _next_call(self, kind: str, name: str) -> int:
        key = (kind, name)
        self._call_counts[key] = self._call_counts.get(key, 0) + 1
        return self._call_counts[key]

    @staticmethod
    def _first_hit(table: dict[str, str], candidates: list[str]) -> Optional[str]:
        for cand in candidates:
            if cand in table:
                return table[cand]
        return None

    def _miss(self, what: str) -> None:
        raise ScriptMissError(f"no scripted entry for {what}")

    # -- controller surface --------------------------------------------------

    def expand_node(self, node: "Node", ctx: ContextBundle) -> wire.ExpansionDirective:
        obs = observation_hash(ctx.current_observation)
        candidates = [
            f"{node.id} @{node.execution_count} obs:{obs}",
            f"{node.id} @{node.execution_count}",
            f"{node.id} obs:{obs}",
            node.id,
        ]
        raw = self._first_hit(self.script.expansions, candidates)
        if raw is None:
            self._miss(f"expand {node.id} @{node.execution_count}")
        return wire.parse_expansion(raw)

    def _revise(self, node: "Node") -> wire.RepairDirective:
        call = self._next_call("repair", node.id)
        raw = self._first_hit(self.script.repairs, [f"{node.id} #{call}", node.id])
        if raw is None:
            if self.default_mode == "fail":
                self._miss(f"repair {node.id} #{call}")
            return wire.RepairDirective(reasoning="no scripted repair")
        return wire.parse_repair(raw)

    def revise_and_node(self, node, ctx, reason):
        return self._revise(node)

    def revise_or_node(self, node, ctx, reason):
        return self._revise(node)

    def global_tree_update(self, tree_text: str, ctx: ContextBundle) -> wire.GlobalUpdateDirective:
        call = self._next_call("update", "")
        raw = self._first_hit(self.script.updates, [f"#{call}", ""])
        if raw is None:
            if self.default_mode == "fail":
                self._miss(f"update #{call}")
            return wire.GlobalUpdateDirective()
        return wire.parse_global_update(raw)

    def check_for_completion_and(self, node: "Node", ctx: ContextBundle) -> wire.CompletionVerdict:
        call = self._next_call("complete", node.id)
        raw = self._first_hit(self.script.completions, [f"{node.id} #{call}", node.id])
        if raw is None:
            if self.default_mode == "fail":
                self._miss(f"complete {node.id} #{call}")
            return wire.CompletionVerdict(
                complete=True, node_id=node.id, reasoning="default verdict"
            )
        return wire.parse_completion(raw)

    def full_update(self, ctx: ContextBundle, observation: "Observation") -> wire.SummaryUpdate:
        call = self._next_call("summary", "")
        raw = self._first_hit(self.script.summaries, [f"#{call}", ""])
        if raw is None:
            if self.default_mode == "fail":
                self._miss(f"summary #{call}")
            return self._echo_summary(ctx, observation)
        return wire.parse_summary_update(raw)

    @staticmethod
    def _echo_summary(ctx: ContextBundle, observation: "Observation") -> wire.SummaryUpdate:
        """Deterministic fallback summarizer grounded in the fixture page."""
        first_line = observation.page_text.splitlines()[0] if observation.page_text else ""
        return wire.SummaryUpdate(
            observation_summary=f"Page {observation.url}: {first_line}",
            observation_highlights=observation.element_ids(),
            task_progress=f"{len(ctx.action_history) + 1} actions taken toward: "
            f"{ctx.task_description}",
            task_feedback="Continue with the remaining subgoals.",
            new_notes="",
            task_response="",
        )

    def extract_constraints(self, task_description: str) -> list[wire.ItemConstraints]:
        if self.script.constraints is None:
            if self.default_mode == "fail":
                self._miss("constraints")
            return []
        return wire.parse_item_constraints(self.script.constraints)

    def update_memory(
        self, ctx: ContextBundle, observation: "Observation", table_text: str
    ) -> str:
        call = self._next_call("memory", "")
        raw = self._first_hit(self.script.memory, [f"#{call}", ""])
        if raw is None:
            if self.default_mode == "fail":
                self._miss(f"memory #{call}")
            return ""
        return raw

    def compose_final_response(
        self, task_description: str, notes: list[str], tree_text: str
    ) -> str:
        if self.script.response is not None:
            return wire.parse_task_response(self.script.response)
        if self.default_mode == "fail":
            self._miss("response")
        return compose_response_from_notes(task_description, notes)


def compose_response_from_notes(task_description: str, notes: list[str]) -> str:
    """Grounded best-effort response used when no response is scripted."""
    if not notes:
        return (
            "No grounded answer was found for the task; "
            "no notes were collected during the run."
        )
    joined = " ".join(notes)
    return f"Based on the collected notes: {joined}"
