"""Trajectory-log replay: re-derives tree and stack evolution and verifies it.

The replayer is an independent state machine over the event records. It checks
sequence-number contiguity, status-transition legality (pruned and deleted are
terminal), stack integrity (every pop matches the simulated top; purges leave
no pruned/deleted entries behind), id/parent/depth consistency of created
nodes, leaf discipline for ACTION nodes, and ordered-AND causality after every
backtrack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .trajectory import read_log

LEGAL_TRANSITIONS = {
    "UNVISITED": {"VISITED", "FAIL", "PRUNED", "DELETED"},
    "VISITED": {"SUCCESS", "FAIL", "PRUNED", "DELETED"},
    "FAIL": {"VISITED", "SUCCESS", "PRUNED", "DELETED"},
    "SUCCESS": {"FAIL"},
    "PRUNED": set(),
    "DELETED": set(),
}
CLOSED = {"SUCCESS", "PRUNED", "DELETED"}


class ReplayViolation(Exception):
    def __init__(self, seq: int, message: str):
        super().__init__(f"seq {seq}: {message}")
        self.seq = seq


@dataclass
class ReplayNode:
    id: str
    parent: Optional[str]
    type: str = "UNKNOWN"
    status: str = "UNVISITED"
    ordered: bool = True
    score: Optional[float] = None
    children: list[str] = field(default_factory=list)


class LogReplayer:
    """Feed records in order; raises ReplayViolation on the first bad one."""

    def __init__(self):
        self.nodes: dict[str, ReplayNode] = {}
        self.stack: list[tuple[str, str]] = []
        self.root_id: Optional[str] = None
        self.started = False
        self.ended = False
        self._expected_seq = 1

    # -- helpers -----------------------------------------------------------

    def _node(self, seq: int, node_id: str) -> ReplayNode:
        node = self.nodes.get(node_id)
        if node is None:
            raise ReplayViolation(seq, f"unknown node {node_id!r}")
        return node

    def _create_child(
        self, seq: int, parent: ReplayNode, child_id: str, score: Optional[float]
    ) -> None:
        if child_id in self.nodes:
            raise ReplayViolation(seq, f"duplicate node id {child_id!r}")
        if not child_id.startswith(parent.id + "."):
            raise ReplayViolation(seq, f"child id {child_id!r} does not extend {parent.id!r}")
        if parent.type == "ACTION":
            raise ReplayViolation(seq, f"ACTION node {parent.id} given a child")
        if parent.type == "OR":
            if score is None or not (0.0 < score <= 1.0):
                raise ReplayViolation(seq, f"OR child {child_id} score {score!r} out of range")
        self.nodes[child_id] = ReplayNode(id=child_id, parent=parent.id, score=score)
        parent.children.append(child_id)

    def _remove_from_stack(self, ids: set[str]) -> None:
        self.stack = [(n, s) for n, s in self.stack if n not in ids]

    def _assert_stack_hygiene(self, seq: int) -> None:
        for node_id, _ in self.stack:
            if self.nodes[node_id].status in ("PRUNED", "DELETED"):
                raise ReplayViolation(
                    seq, f"stack still references {self.nodes[node_id].status} node {node_id}"
                )

    def _assert_ordered_and_causality(self, seq: int, node_id: str) -> None:
        node = self._node(seq, node_id)
        if node.parent is None:
            return
        parent = self._node(seq, node.parent)
        if parent.type != "AND" or not parent.ordered:
            return
        idx = parent.children.index(node_id)
        for sibling_id in parent.children[idx + 1 :]:
            if self.nodes[sibling_id].status not in CLOSED:
                raise ReplayViolation(
                    seq,
                    f"backtrack of {node_id} left later sibling {sibling_id} open "
                    f"({self.nodes[sibling_id].status})",
                )

    # -- record dispatch ----------------------------------------------------

    def feed(self, record: dict) -> None:
        seq = record.get("seq")
        if seq != self._expected_seq:
            raise ReplayViolation(
                seq if isinstance(seq, int) else self._expected_seq,
                f"sequence gap: expected {self._expected_seq}, got {seq}",
            )
        self._expected_seq += 1
        if self.ended:
            raise ReplayViolation(seq, "event after run_end")
        event = record.get("event")
        if not self.started and event != "run_start":
            raise ReplayViolation(seq, f"first event is {event!r}, not run_start")
        handler = getattr(self, f"_on_{event}", None)
        if handler is None:
            raise ReplayViolation(seq, f"unknown event type {event!r}")
        handler(seq, record)

    def finish(self) -> None:
        if not self.started:
            raise ReplayViolation(0, "log is empty")
        if not self.ended:
            raise ReplayViolation(self._expected_seq - 1, "log has no run_end record")

    # -- handlers -----------------------------------------------------------

    def _on_run_start(self, seq: int, record: dict) -> None:
        if self.started:
            raise ReplayViolation(seq, "second run_start")
        self.started = True
        self.root_id = record["root"]
        self.nodes[self.root_id] = ReplayNode(id=self.root_id, parent=None)

    def _on_run_end(self, seq: int, record: dict) -> None:
        self.ended = True

    def _on_push(self, seq: int, record: dict) -> None:
        self._node(seq, record["node"])
        self.stack.append((record["node"], record["state"]))

    def _on_pop(self, seq: int, record: dict) -> None:
        if not self.stack:
            raise ReplayViolation(seq, "pop from empty stack")
        top = self.stack.pop()
        if top != (record["node"], record["state"]):
            raise ReplayViolation(
                seq, f"pop {record['node']}/{record['state']} but stack top is {top}"
            )
        node = self._node(seq, record["node"])
        if node.status != record["status"]:
            raise ReplayViolation(
                seq,
                f"pop records status {record['status']} but replay derives {node.status}",
            )

    def _on_status_change(self, seq: int, record: dict) -> None:
        node = self._node(seq, record["node"])
        if node.status != record["old"]:
            raise ReplayViolation(
                seq, f"{node.id} old status {record['old']} != derived {node.status}"
            )
        if record["new"] not in LEGAL_TRANSITIONS.get(node.status, set()):
            raise ReplayViolation(
                seq, f"illegal transition {node.status} -> {record['new']} on {node.id}"
            )
        node.status = record["new"]

    def _on_expansion(self, seq: int, record: dict) -> None:
        node = self._node(seq, record["node"])
        if node.type != "UNKNOWN":
            raise ReplayViolation(seq, f"{node.id} expanded twice (type {node.type})")
        node.type = record["type"]
        node.ordered = bool(record.get("ordered", True))
        if node.type == "ACTION" and record.get("children"):
            raise ReplayViolation(seq, f"ACTION expansion of {node.id} lists children")
        for child in record.get("children", []):
            self._create_child(seq, node, child["id"], child.get("score"))

    def _on_repair(self, seq: int, record: dict) -> None:
        node = self._node(seq, record["node"])
        for pruned_id in record.get("pruned", []):
            if self._node(seq, pruned_id).status != "PRUNED":
                raise ReplayViolation(seq, f"repair lists {pruned_id} as pruned but it is not")
        for child in record.get("added", []):
            self._create_child(seq, node, child["id"], child.get("score"))

    def _on_intervention(self, seq: int, record: dict) -> None:
        # A re-push after injection arrives as its own push record; the
        # ``repushed`` flag here is informational only.
        node = self._node(seq, record["node"])
        for child in record.get("added", []):
            self._create_child(seq, node, child["id"], child.get("score"))
        for pruned_id in record.get("pruned", []):
            if self._node(seq, pruned_id).status != "PRUNED":
                raise ReplayViolation(seq, f"intervention lists {pruned_id} unpruned")

    def _on_purge(self, seq: int, record: dict) -> None:
        self._remove_from_stack(set(record["removed"]))
        self._assert_stack_hygiene(seq)

    def _on_backtrack(self, seq: int, record: dict) -> None:
        deleted = record.get("deleted", [])
        for deleted_id in deleted:
            if self._node(seq, deleted_id).status != "DELETED":
                raise ReplayViolation(seq, f"backtrack lists {deleted_id} undeleted")
        self._remove_from_stack(set(deleted))
        self._assert_stack_hygiene(seq)
        self._assert_ordered_and_causality(seq, record["node"])

    def _on_action(self, seq: int, record: dict) -> None:
        self._node(seq, record["node"])

    def _on_note(self, seq: int, record: dict) -> None:
        if record.get("node"):
            self._node(seq, record["node"])

    def _on_completion(self, seq: int, record: dict) -> None:
        node = self._node(seq, record["node"])
        if node.type not in ("AND", "UNKNOWN"):
            raise ReplayViolation(seq, f"completion check on {node.type} node {node.id}")

    def _on_rollback(self, seq: int, record: dict) -> None:
        self._node(seq, record["node"])

    def _on_global_update(self, seq: int, record: dict) -> None:
        for pruned_id in record.get("prunes", []):
            if self._node(seq, pruned_id).status != "PRUNED":
                raise ReplayViolation(seq, f"global update lists {pruned_id} unpruned")
        for node_id, _desc in record.get("updates", []):
            self._node(seq, node_id)

    def _on_summary(self, seq: int, record: dict) -> None:
        pass

    def _on_memory(self, seq: int, record: dict) -> None:
        pass

    def _on_constraints(self, seq: int, record: dict) -> None:
        pass

    def _on_degraded(self, seq: int, record: dict) -> None:
        pass

    def _on_controller(self, seq: int, record: dict) -> None:
        pass

    def _on_abort(self, seq: int, record: dict) -> None:
        pass


def verify_records(records: list[dict]) -> None:
    """Raise ReplayViolation on the first inconsistent record."""
    replayer = LogReplayer()
    for record in records:
        replayer.feed(record)
    replayer.finish()


def verify_log_file(path: str) -> tuple[int, str]:
    """Return (exit_code, message): 0 ok, 1 violation, 2 unreadable."""
    try:
        records = read_log(path)
    except (OSError, ValueError) as exc:
        return 2, f"cannot parse log: {exc}"
    try:
        verify_records(records)
    except ReplayViolation as exc:
        return 1, str(exc)
    return 0, f"ok: {len(records)} records verified"
