"""Modified greedy iterative DFS over a dynamic AND/OR plan tree.

The loop pops one stack entry per iteration and dispatches on its processing
state (ENTERING / EXITING / FAILED). The controller is consulted only for
localized operations: typing and expanding a node, repairing a failed one,
verifying completion, summarizing observations, and maintaining candidate
memory. All controller output passes the strict directive parsers; parse
failures are retried with the same context and then degraded per operation,
while transport failures abort the run.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .controller.base import (
    ContextBundle,
    Controller,
    ControllerTransportError,
    ScriptMissError,
)
from .controller.directives import (
    CompletionVerdict,
    DirectiveParseError,
    ExpansionDirective,
    GlobalUpdateDirective,
    RepairDirective,
    positional_score,
)
from .controller.scripted import compose_response_from_notes
from .environment import Action, ActionParseError, BrowserEnvironment, parse_action
from .memory import MemoryTableSet, apply_commands, top_k, validate_tables
from .snapshot import render_local_tree_info, render_tree_text, tree_snapshot
from .trajectory import TrajectoryLog
from .tree import (
    CLOSED_STATUSES,
    FAILED_OR_PRUNED,
    Node,
    NodeStatus,
    NodeType,
    PlanTree,
    StackEntry,
    StackState,
)

logger = logging.getLogger(__name__)


class EngineError(Exception):
    pass


class RunAborted(EngineError):
    """The controller became unreachable; the run ends with FAIL."""


class RunOutcome(str, Enum):
    SUCCESS = "SUCCESS"
    FAIL = "FAIL"
    BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"
    STEPS_EXHAUSTED = "STEPS_EXHAUSTED"


@dataclass
class EngineConfig:
    """Traversal budgets. Zero budgets are legal and exhaust immediately."""

    budget: int = 200
    max_steps: int = 60
    max_retry_count: int = 2
    max_revision_count: int = 2
    max_children: int = 8
    completion_check_root_only: bool = True

    def __post_init__(self):
        if self.budget < 0 or self.max_steps < 0:
            raise ValueError("budget and max_steps must be >= 0")
        if self.max_retry_count < 1 or self.max_children < 1:
            raise ValueError("max_retry_count and max_children must be >= 1")
        if self.max_revision_count < 0:
            raise ValueError("max_revision_count must be >= 0")

    def as_dict(self) -> dict:
        return {
            "budget": self.budget,
            "max_steps": self.max_steps,
            "max_retry_count": self.max_retry_count,
            "max_revision_count": self.max_revision_count,
            "max_children": self.max_children,
            "completion_check_root_only": self.completion_check_root_only,
        }


@dataclass
class TrajectoryEntry:
    observation_summary: str
    action: str
    ok: bool

    def as_dict(self) -> dict:
        return {
            "observation_summary": self.observation_summary,
            "action": self.action,
            "ok": self.ok,
        }


@dataclass
class RunResult:
    outcome: RunOutcome
    final_response: str
    trajectory: list[TrajectoryEntry]
    snapshot: dict
    iterations: int
    steps: int
    notes: list[str]

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "final_response": self.final_response,
            "trajectory": [t.as_dict() for t in self.trajectory],
            "iterations": self.iterations,
            "steps": self.steps,
            "notes": list(self.notes),
        }


@dataclass
class InterventionDirective:
    """Operator directive applied at a step boundary of a live run."""

    kind: str  # inject_children | prune | pause | resume
    node_id: str = ""
    descriptions: list[str] = field(default_factory=list)
    after_iteration: int = 0


@dataclass
class InterventionResult:
    accepted: bool
    reason: str


class _Reply:
    """One-shot synchronization cell for mailbox answers."""

    def __init__(self):
        self._event = threading.Event()
        self.value: Optional[InterventionResult] = None

    def set(self, value: InterventionResult) -> None:
        self.value = value
        self._event.set()

    def wait(self, timeout: float) -> Optional[InterventionResult]:
        if self._event.wait(timeout):
            return self.value
        return None


Probe = Callable[[str, "Engine", dict], None]


class Engine:
    """Runs one task against one environment under one controller."""

    def __init__(
        self,
        task_description: str,
        controller: Controller,
        environment: BrowserEnvironment,
        config: Optional[EngineConfig] = None,
        log: Optional[TrajectoryLog] = None,
        root_id: str = "1",
    ):
        self.task = task_description
        self.controller = controller
        self.env = environment
        self.config = config or EngineConfig()
        self.log = log or TrajectoryLog()
        self.tree = PlanTree(task_description, root_id=root_id)
        self.tree.status_listener = self._on_status_change
        self.stack: list[StackEntry] = []
        self.ctx = ContextBundle(task_description=task_description)
        self.memory = MemoryTableSet([])
        self.notes: list[str] = []
        self.trajectory: list[TrajectoryEntry] = []
        self.iterations = 0
        self.current_url = ""
        self.state = "created"  # created | running | paused | finished
        self.outcome: Optional[RunOutcome] = None
        self.last_feedback = ""

        # Live-run plumbing (optional).
        self.mailbox: Optional[queue.Queue] = None
        self.snapshot_sink: Optional[Callable[[dict], None]] = None
        self.probe: Optional[Probe] = None
        self._paused = False
        self._pause_at: Optional[int] = None
        self._abort_requested = False
        self._steps_exhausted = False

    # ------------------------------------------------------------------
    # Event helpers
    # ------------------------------------------------------------------

    def _on_status_change(self, node: Node, old: NodeStatus, new: NodeStatus) -> None:
        self.log.emit("status_change", node=node.id, old=old.value, new=new.value)

    def _set_status(self, node: Node, status: NodeStatus) -> None:
        self.tree.set_status(node, status)

    def _push(self, node: Node, state: StackState) -> None:
        self.stack.append(StackEntry(node, state))
        self.log.emit("push", node=node.id, state=state.value)

    def _purge(self, removed: list[Node], reason: str) -> None:
        if not removed:
            return
        before = len(self.stack)
        self.stack = self.tree.purge_stack(removed, self.stack)
        self.log.emit(
            "purge",
            removed=[n.id for n in removed],
            dropped=before - len(self.stack),
            reason=reason,
        )
        self._probe("after_purge", removed=removed)

    def _backtrack(self, node: Node) -> None:
        self.stack, deleted = self.tree.backtrack_failure(node, self.stack)
        self.log.emit("backtrack", node=node.id, deleted=[n.id for n in deleted])
        self._probe("after_backtrack", node=node, deleted=deleted)

    def _probe(self, phase: str, **info) -> None:
        if self.probe is not None:
            self.probe(phase, self, info)

    def _publish_snapshot(self) -> None:
        if self.snapshot_sink is None:
            return
        snap = self.build_snapshot()
        self.snapshot_sink(snap)

    def build_snapshot(self) -> dict:
        snap = tree_snapshot(self.tree, self.stack, self.memory)
        snap["state"] = self.state
        snap["outcome"] = self.outcome.value if self.outcome else None
        snap["iterations"] = self.iterations
        snap["steps"] = self.env.steps
        snap["seq"] = self.log.seq
        return snap

    # ------------------------------------------------------------------
    # Controller access with bounded retry
    # ------------------------------------------------------------------

    def _controller_call(self, op: str, fn: Callable, validate: Optional[Callable] = None):
        """Call a controller op; retry parse faults, abort on transport loss.

        Returns None when every attempt failed with a parse/script fault; each
        operation degrades as its contract specifies.
        """
        attempts = 1 + self.config.max_retry_count
        last_exc: Optional[Exception] = None
        for _ in range(attempts):
            try:
                result = fn()
                if validate is not None:
                    validate(result)
                return result
            except (DirectiveParseError, ScriptMissError) as exc:
                last_exc = exc
            except ControllerTransportError as exc:
                last_exc = exc
        if isinstance(last_exc, ControllerTransportError):
            raise RunAborted(f"controller unreachable during {op}: {last_exc}")
        self.log.emit("degraded", op=op, error=str(last_exc))
        return None

    def _node_ctx(self, node: Node) -> ContextBundle:
        self.ctx.local_tree_info = render_local_tree_info(node)
        return self.ctx

    # ------------------------------------------------------------------
    # Main loop
    # ------------------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.config
        self.state = "running"
        self.log.emit(
            "run_start", task=self.task, config=cfg.as_dict(), root=self.tree.root.id
        )
        self._bootstrap_context()
        self._push(self.tree.root, StackState.ENTERING)

        try:
            while True:
                self._service_mailbox()
                if self._abort_requested:
                    raise RunAborted("aborted by operator")
                if not self.stack:
                    break
                if self.iterations >= cfg.budget:
                    self.outcome = RunOutcome.BUDGET_EXHAUSTED
                    break
                self.iterations += 1
                self._probe("boundary")
                entry = self.stack.pop()
                node = entry.node
                self.log.emit(
                    "pop", node=node.id, state=entry.state.value, status=node.status.value
                )
                if (
                    node.status is NodeStatus.SUCCESS
                    and node.revision_count >= cfg.max_revision_count
                ) or node.status is NodeStatus.DELETED:
                    continue
                if node.status is NodeStatus.PRUNED:
                    self._backtrack(node)
                    continue

                if entry.state is StackState.ENTERING:
                    self._process_node_entering(node)
                elif entry.state is StackState.EXITING:
                    self._process_node_exiting(node)
                else:
                    self._process_node_failed(node)

                if self._steps_exhausted:
                    self.outcome = RunOutcome.STEPS_EXHAUSTED
                    break
                if self.env.done():
                    break
                self._publish_snapshot()
        except RunAborted as exc:
            self.log.emit("abort", reason=str(exc))
            self.outcome = RunOutcome.FAIL

        if self.outcome is None:
            self.outcome = (
                RunOutcome.SUCCESS
                if self.tree.root.status is NodeStatus.SUCCESS
                else RunOutcome.FAIL
            )
        final_response = self._compose_final_response()
        self.log.emit(
            "run_end",
            outcome=self.outcome.value,
            iterations=self.iterations,
            steps=self.env.steps,
            final_response=final_response,
        )
        self.state = "finished"
        self._publish_snapshot()
        return RunResult(
            outcome=self.outcome,
            final_response=final_response,
            trajectory=list(self.trajectory),
            snapshot=self.build_snapshot(),
            iterations=self.iterations,
            steps=self.env.steps,
            notes=list(self.notes),
        )

    def _bootstrap_context(self) -> None:
        self.ctx.current_observation = self.env.observe()
        self.current_url = self.env.get_url()
        items = self._controller_call(
            "extract_constraints",
            lambda: self.controller.extract_constraints(self.task),
        )
        if items is None:
            items = []
        self.ctx.item_constraints = items
        self.memory = MemoryTableSet(items)
        if items:
            self.log.emit(
                "constraints",
                items=[{"item": i.item, "constraints": list(i.constraints)} for i in items],
            )

    def _compose_final_response(self) -> str:
        tree_text = render_tree_text(self.tree)
        try:
            response = self._controller_call(
                "final_response",
                lambda: self.controller.compose_final_response(
                    self.task, list(self.notes), tree_text
                ),
            )
        except RunAborted:
            response = None
        if response is None:
            response = compose_response_from_notes(self.task, self.notes)
        return response

    # ------------------------------------------------------------------
    # ENTERING
    # ------------------------------------------------------------------

    def _process_node_entering(self, node: Node) -> None:
        parent = node.parent
        if parent is not None and parent.type is NodeType.OR:
            if self._perform_rollback(parent):
                self.current_url = parent.url
        node.execution_count += 1
        if node.type is NodeType.UNKNOWN and node.status not in CLOSED_STATUSES:
            if not self._expand(node):
                self._set_status(node, NodeStatus.FAIL)
                self._push(node, StackState.FAILED)
                return
        if node.status not in CLOSED_STATUSES:
            self._set_status(node, NodeStatus.VISITED)
        if node.type is NodeType.ACTION:
            self._process_action_node(node)
        elif node.type is NodeType.AND:
            self._process_and_node(node)
        elif node.type is NodeType.OR:
            self._process_or_node(node)
        else:  # still untyped after a degraded expansion
            self._set_status(node, NodeStatus.FAIL)
            self._push(node, StackState.FAILED)

    def _perform_rollback(self, or_parent: Node) -> bool:
        if not or_parent.url:
            self.log.emit("rollback", node=or_parent.id, url="", ok=False)
            return False
        ok = self.env.navigate(or_parent.url)
        self.log.emit("rollback", node=or_parent.id, url=or_parent.url, ok=ok)
        if ok:
            self.ctx.current_observation = self.env.observe()
        else:
            logger.warning("rollback to %s failed; proceeding", or_parent.url)
        return ok

    def _expand(self, node: Node) -> bool:
        def validate(directive: ExpansionDirective) -> None:
            if directive.node_id != node.id:
                raise DirectiveParseError(
                    f"expansion for {directive.node_id!r}, expected {node.id!r}"
                )
            if directive.node_type == "Atomic":
                try:
                    parse_action(directive.action)  # grammar gate, retriable
                except ActionParseError as exc:
                    raise DirectiveParseError(f"atomic payload: {exc}") from None

        directive = self._controller_call(
            "expansion",
            lambda: self.controller.expand_node(node, self._node_ctx(node)),
            validate=validate,
        )
        if directive is None:
            return False

        if directive.description:
            node.description = directive.description
        node.reasoning = directive.reasoning
        node.url = self.current_url
        if directive.node_type == "Atomic":
            node.set_type(NodeType.ACTION)
            node.action = directive.action
        elif directive.node_type == "AND":
            node.set_type(NodeType.AND)
            node.ordered = directive.ordered
            for spec in directive.children:
                self.tree.add_child(node, spec.description)
        else:
            node.set_type(NodeType.OR)
            for spec in directive.children:
                self.tree.add_child(node, spec.description, score=spec.score)
        self.log.emit(
            "expansion",
            node=node.id,
            type=node.type.value,
            ordered=node.ordered,
            action=node.action,
            children=[
                {"id": c.id, "description": c.description, "score": c.score}
                for c in node.children
            ],
        )
        return True

    # ------------------------------------------------------------------
    # Type-specific ENTERING handlers
    # ------------------------------------------------------------------

    def _process_action_node(self, node: Node) -> None:
        self._push(node, StackState.EXITING)
        success = False
        while node.retry_count < self.config.max_retry_count:
            node.retry_count += 1
            try:
                action = parse_action(node.action)
            except ActionParseError as exc:
                self.log.emit(
                    "action", node=node.id, action=node.action, ok=False, error=str(exc)
                )
                continue
            if not action.is_note and self.env.steps >= self.config.max_steps:
                self._steps_exhausted = True
                return
            ok, observation = self.env.step(action)
            self.log.emit(
                "action", node=node.id, action=action.render(), ok=ok, url=observation.url
            )
            self.ctx.current_observation = observation
            if not action.is_note:
                self.trajectory.append(
                    TrajectoryEntry(self.ctx.observation_summary, action.render(), ok)
                )
            if self.env.done():
                return
            if not ok:
                continue
            self._harvest_notes(node, action)
            self._set_status(node, NodeStatus.SUCCESS)
            success = True
            if not action.is_note:
                self._full_update(observation)
                self.current_url = self.env.get_url()
                node.url = self.current_url
                if self.trajectory:
                    # Refresh the entry with the post-action summary.
                    self.trajectory[-1].observation_summary = self.ctx.observation_summary
            break
        if not success:
            self._set_status(node, NodeStatus.FAIL)

    def _harvest_notes(self, node: Node, action: Action) -> None:
        if action.is_note and action.text:
            self.notes.append(action.text)
            node.notes.append(action.text)
            self.ctx.notes_summary = "\n".join(self.notes)
            self.log.emit("note", node=node.id, text=action.text)

    def _process_and_node(self, node: Node) -> None:
        self._push(node, StackState.EXITING)
        if self.tree.is_successful_and(node):
            self._set_status(node, NodeStatus.SUCCESS)
        elif not self.tree.is_valid_and(node.children):
            self._set_status(node, NodeStatus.FAIL)
        else:
            for child in reversed(node.children):
                if child.status not in CLOSED_STATUSES:
                    self._push(child, StackState.ENTERING)

    def _process_or_node(self, node: Node) -> None:
        self._push(node, StackState.EXITING)
        if self.tree.is_successful_or(node):
            self._set_status(node, NodeStatus.SUCCESS)
        elif not self.tree.is_valid_or(node.children):
            self._set_status(node, NodeStatus.FAIL)
        else:
            child = self.tree.find_next_promising(node.children)
            assert child is not None  # guarded by is_valid_or
            self._push(child, StackState.ENTERING)

    # ------------------------------------------------------------------
    # EXITING
    # ------------------------------------------------------------------

    def _completion_allowed(self, node: Node) -> bool:
        return not self.config.completion_check_root_only or node.is_root

    def _completion_check(self, node: Node) -> CompletionVerdict:
        def validate(verdict: CompletionVerdict) -> None:
            if verdict.node_id != node.id:
                raise DirectiveParseError(
                    f"verdict for {verdict.node_id!r}, expected {node.id!r}"
                )

        verdict = self._controller_call(
            "completion",
            lambda: self.controller.check_for_completion_and(node, self._node_ctx(node)),
            validate=validate,
        )
        if verdict is None:  # conservative: unverifiable means incomplete
            verdict = CompletionVerdict(
                complete=False,
                node_id=node.id,
                reasoning="completion check unavailable; treated as incomplete",
            )
        self.log.emit(
            "completion",
            node=node.id,
            complete=verdict.complete,
            reasoning=verdict.reasoning,
        )
        return verdict

    def _process_node_exiting(self, node: Node) -> None:
        if node.type is NodeType.ACTION:
            if node.status in FAILED_OR_PRUNED:
                self._push(node, StackState.FAILED)
            else:
                self._set_status(node, NodeStatus.SUCCESS)
            return
        if node.type is NodeType.AND:
            if self.tree.is_successful_and(node):
                if (
                    node.revision_count < self.config.max_revision_count
                    and self._completion_allowed(node)
                ):
                    verdict = self._completion_check(node)
                    node.reasoning = verdict.reasoning
                    if verdict.complete:
                        self._set_status(node, NodeStatus.SUCCESS)
                    else:
                        self._set_status(node, NodeStatus.FAIL)
                        self._push(node, StackState.FAILED)
                else:
                    self._set_status(node, NodeStatus.SUCCESS)
            else:
                self._set_status(node, NodeStatus.FAIL)
                self._push(node, StackState.FAILED)
            return
        if node.type is NodeType.OR:
            if self.tree.is_successful_or(node):
                self._set_status(node, NodeStatus.SUCCESS)
            else:
                self._set_status(node, NodeStatus.FAIL)
                self._push(node, StackState.FAILED)
            return
        # Untyped node in EXITING: treat as failed.
        self._set_status(node, NodeStatus.FAIL)
        self._push(node, StackState.FAILED)

    # ------------------------------------------------------------------
    # FAILED
    # ------------------------------------------------------------------

    def _process_node_failed(self, node: Node) -> None:
        if node.type in (NodeType.ACTION, NodeType.UNKNOWN):
            pruned = self.tree.recursively_prune(node.id)
            self._purge(pruned, reason=f"failed {node.type.value.lower()} {node.id}")
            self._backtrack(node)
            return
        if node.type is NodeType.AND:
            self._process_failed_and_node(node)
        else:
            self._process_failed_or_node(node)

    def _revise(self, node: Node) -> tuple[list[Node], list[Node]]:
        """Run a repair directive through the controller and apply it."""
        reason = node.reasoning or self.last_feedback
        op = (
            self.controller.revise_and_node
            if node.type is NodeType.AND
            else self.controller.revise_or_node
        )
        directive = self._controller_call(
            "repair", lambda: op(node, self._node_ctx(node), reason)
        )
        if directive is None:
            directive = RepairDirective(reasoning="repair unavailable")
        return self._apply_repair(node, directive)

    def _apply_repair(
        self, node: Node, directive: RepairDirective
    ) -> tuple[list[Node], list[Node]]:
        pruned_nodes: list[Node] = []
        child_ids = {c.id for c in node.children}
        rejected: list[str] = []
        for prune_id in directive.prunes:
            if prune_id not in child_ids:
                rejected.append(f"prune {prune_id}: not a child")
                continue
            child = self.tree.get(prune_id)
            if child.status in CLOSED_STATUSES:
                rejected.append(f"prune {prune_id}: closed")
                continue
            pruned_nodes.extend(self.tree.recursively_prune(prune_id))
        added: list[Node] = []
        existing = {c.description.strip().lower() for c in node.children}
        for group in directive.additions:
            if group.target_id != node.id:
                rejected.append(f"add to {group.target_id}: not the repaired node")
                continue
            if group.node_type != node.type.value:
                rejected.append(f"add type {group.node_type}: node is {node.type.value}")
                continue
            for spec in group.children:
                key = spec.description.strip().lower()
                if key in existing:
                    rejected.append(f"add {spec.description!r}: duplicate")
                    continue
                score = spec.score if node.type is NodeType.OR else None
                if node.type is NodeType.OR and score is None:
                    score = positional_score(len(node.children))
                child = self.tree.add_child(node, spec.description, score=score)
                added.append(child)
                existing.add(key)
        self.log.emit(
            "repair",
            node=node.id,
            pruned=[n.id for n in pruned_nodes],
            added=[
                {"id": c.id, "description": c.description, "score": c.score}
                for c in added
            ],
            rejected=rejected,
            reasoning=directive.reasoning,
        )
        return pruned_nodes, added

    def _process_failed_and_node(self, node: Node) -> None:
        revised = False
        is_valid = self.tree.is_valid_and(node.children)
        if not is_valid:
            if self.tree.has_at_least_one_success(node) and self._completion_allowed(node):
                verdict = self._completion_check(node)
                node.reasoning = verdict.reasoning
                if verdict.complete:
                    self.tree.recursively_mark_success(node.id)
                    return
            self._set_status(node, NodeStatus.FAIL)
            if (
                len(node.children) < self.config.max_children
                and node.revision_count < self.config.max_revision_count
            ):
                pruned, added = self._revise(node)
                self._purge(pruned, reason=f"repair of {node.id}")
                if pruned or added:
                    revised = True
                    node.revision_count += 1
        if revised or is_valid:
            self._set_status(node, NodeStatus.VISITED)
            self._push(node, StackState.ENTERING)
        else:
            pruned = self.tree.recursively_prune(node.id)
            self._purge(pruned, reason=f"irreparable AND {node.id}")
            self._backtrack(node)

    def _process_failed_or_node(self, node: Node) -> None:
        if self.tree.is_valid_or(node.children):
            self._set_status(node, NodeStatus.VISITED)
            self._push(node, StackState.ENTERING)
            return
        revised = False
        if node.revision_count < self.config.max_revision_count:
            pruned, added = self._revise(node)
            self._purge(pruned, reason=f"repair of {node.id}")
            if added:
                revised = True
                node.revision_count += 1
        if revised:
            self._set_status(node, NodeStatus.VISITED)
            self._push(node, StackState.ENTERING)
        else:
            pruned = self.tree.recursively_prune(node.id)
            self._purge(pruned, reason=f"irreparable OR {node.id}")
            self._backtrack(node)

    # ------------------------------------------------------------------
    # Full update after an observation-changing action
    # ------------------------------------------------------------------

    def _full_update(self, observation) -> None:
        update = self._controller_call(
            "summary", lambda: self.controller.full_update(self.ctx, observation)
        )
        action_text = self.trajectory[-1].action if self.trajectory else ""
        if update is not None:
            visible = set(observation.elements)
            highlights = [i for i in update.observation_highlights if i in visible]
            self.ctx.observation_summary = update.observation_summary
            self.ctx.task_progress_summary = update.task_progress
            self.last_feedback = update.task_feedback
            if update.new_notes:
                self.notes.append(update.new_notes)
                self.ctx.notes_summary = "\n".join(self.notes)
                self.log.emit("note", node="", text=update.new_notes)
            self.log.emit(
                "summary",
                observation_summary=update.observation_summary,
                highlights=highlights,
                task_progress=update.task_progress,
                task_feedback=update.task_feedback,
            )
        self.ctx.action_history.append(action_text)
        self.ctx.interaction_history.append((self.ctx.observation_summary, action_text))
        self._update_memory(observation)
        self._global_tree_update()

    def _update_memory(self, observation) -> None:
        if not self.memory.tables:
            return
        commands = self._controller_call(
            "memory",
            lambda: self.controller.update_memory(
                self.ctx, observation, self.memory.render()
            ),
        )
        if commands:
            _, reports = apply_commands(self.memory, commands)
            self.log.emit(
                "memory",
                commands=commands.splitlines(),
                results=[
                    {"line": r.line, "accepted": r.accepted, "reason": r.reason}
                    for r in reports
                ],
            )
        fixes = validate_tables(self.memory)
        if fixes:
            _, reports = apply_commands(self.memory, fixes)
            self.log.emit(
                "memory",
                commands=fixes.splitlines(),
                results=[
                    {"line": r.line, "accepted": r.accepted, "reason": r.reason}
                    for r in reports
                ],
            )
        self.ctx.candidate_table_excerpt = self._memory_excerpt()

    def _memory_excerpt(self, k: int = 3) -> str:
        lines = []
        for item_type in self.memory.tables:
            for row in top_k(self.memory, item_type, k):
                lines.append(row.render())
        return "\n".join(lines)

    def _global_tree_update(self) -> None:
        directive = self._controller_call(
            "global_update",
            lambda: self.controller.global_tree_update(
                render_tree_text(self.tree), self.ctx
            ),
        )
        if directive is None:
            directive = GlobalUpdateDirective()
        if directive.is_empty:
            return
        applied_prunes: list[str] = []
        dropped: list[str] = []
        for prune_id in directive.prunes:
            if not self.tree.has(prune_id):
                dropped.append(f"prune {prune_id}: unknown id")
                continue
            target = self.tree.get(prune_id)
            if target.status in CLOSED_STATUSES:
                dropped.append(f"prune {prune_id}: closed")
                continue
            pruned = self.tree.recursively_prune(prune_id)
            self._purge(pruned, reason=f"global update prune {prune_id}")
            self._backtrack(target)
            applied_prunes.append(prune_id)
        applied_updates: list[list[str]] = []
        for node_id, description in directive.updates:
            if not self.tree.has(node_id):
                dropped.append(f"update {node_id}: unknown id")
                continue
            target = self.tree.get(node_id)
            if target.status in CLOSED_STATUSES:
                dropped.append(f"update {node_id}: closed")
                continue
            target.description = description
            applied_updates.append([node_id, description])
        for item in dropped:
            logger.warning("global update dropped: %s", item)
        self.log.emit(
            "global_update",
            prunes=applied_prunes,
            updates=applied_updates,
            dropped=dropped,
        )

    # ------------------------------------------------------------------
    # Interventions
    # ------------------------------------------------------------------

    def schedule_pause(self, after_iteration: int = 0) -> None:
        """Arrange for the engine to pause once ``after_iteration`` completes."""
        self._pause_at = after_iteration

    def _service_mailbox(self) -> None:
        if self.mailbox is None:
            return
        while True:
            try:
                directive, reply = self.mailbox.get_nowait()
            except queue.Empty:
                break
            reply.set(self._apply_intervention(directive))
        if self._pause_at is not None and self.iterations >= self._pause_at:
            self._paused = True
            self._pause_at = None
        if self._paused:
            self.state = "paused"
            self._publish_snapshot()
            while self._paused and not self._abort_requested:
                try:
                    directive, reply = self.mailbox.get(timeout=0.05)
                except queue.Empty:
                    continue
                reply.set(self._apply_intervention(directive))
                self._publish_snapshot()
            self.state = "running"

    def _apply_intervention(self, directive: InterventionDirective) -> InterventionResult:
        kind = directive.kind
        if kind == "pause":
            if directive.after_iteration <= self.iterations:
                self._paused = True
            else:
                self._pause_at = directive.after_iteration
            return InterventionResult(True, "pause scheduled")
        if kind == "resume":
            self._paused = False
            self._pause_at = None
            return InterventionResult(True, "resumed")
        if kind == "abort":
            self._abort_requested = True
            self._paused = False
            return InterventionResult(True, "abort requested")
        if kind == "inject_children":
            return self._inject_children(directive)
        if kind == "prune":
            return self._intervention_prune(directive)
        return InterventionResult(False, f"unknown intervention kind {kind!r}")

    def _inject_children(self, directive: InterventionDirective) -> InterventionResult:
        if not self.tree.has(directive.node_id):
            return InterventionResult(False, f"unknown node {directive.node_id!r}")
        node = self.tree.get(directive.node_id)
        if node.status in CLOSED_STATUSES:
            return InterventionResult(
                False, f"node {node.id} is {node.status.value}; closed nodes reject edits"
            )
        if node.type not in (NodeType.AND, NodeType.OR):
            return InterventionResult(
                False, f"node {node.id} is {node.type.value}; only AND/OR accept children"
            )
        if not directive.descriptions:
            return InterventionResult(False, "no subgoal descriptions given")
        added = []
        for description in directive.descriptions:
            score = (
                positional_score(len(node.children)) if node.type is NodeType.OR else None
            )
            added.append(self.tree.add_child(node, description, score=score))
        exiting_bound = any(
            e.node is node and e.state is StackState.EXITING for e in self.stack
        )
        # Re-push only when nothing else in the subtree is pending: otherwise
        # the normal traversal (or the failed-AND detour) reaches the new
        # children without re-executing finished subgoals.
        prefix = node.id + "."
        subtree_busy = any(
            (e.node.id == node.id or e.node.id.startswith(prefix))
            and not (e.node is node and e.state is StackState.EXITING)
            for e in self.stack
        )
        repushed = False
        if exiting_bound and not subtree_busy:
            self._push(node, StackState.ENTERING)
            repushed = True
        self.log.emit(
            "intervention",
            kind="inject_children",
            node=node.id,
            added=[{"id": c.id, "description": c.description, "score": c.score} for c in added],
            repushed=repushed,
        )
        return InterventionResult(
            True, "injected " + ", ".join(c.id for c in added)
        )

    def _intervention_prune(self, directive: InterventionDirective) -> InterventionResult:
        if not self.tree.has(directive.node_id):
            return InterventionResult(False, f"unknown node {directive.node_id!r}")
        node = self.tree.get(directive.node_id)
        if node.status in CLOSED_STATUSES:
            return InterventionResult(
                False, f"node {node.id} is {node.status.value}; closed nodes reject edits"
            )
        pruned = self.tree.recursively_prune(node.id)
        self._purge(pruned, reason=f"intervention prune {node.id}")
        self._backtrack(node)
        self.log.emit(
            "intervention", kind="prune", node=node.id, pruned=[n.id for n in pruned]
        )
        return InterventionResult(True, f"pruned {len(pruned)} nodes")
