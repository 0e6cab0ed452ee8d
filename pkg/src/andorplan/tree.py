"""AND/OR plan tree: node taxonomy, lifecycle statuses, and structural mutations.

The tree is the single source of truth for the planner's state. All mutations
(prune, delete, mark-success, stack purge, failure backtracking) live here so
the engine stays a pure traversal loop. Statuses in CLOSED_STATUSES are sticky:
once a node is SUCCESS, PRUNED, or DELETED, prune/delete operations never
overwrite it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional

logger = logging.getLogger(__name__)


class NodeType(str, Enum):
    UNKNOWN = "UNKNOWN"
    AND = "AND"
    OR = "OR"
    ACTION = "ACTION"


class NodeStatus(str, Enum):
    UNVISITED = "UNVISITED"
    VISITED = "VISITED"
    SUCCESS = "SUCCESS"
    FAIL = "FAIL"
    PRUNED = "PRUNED"
    DELETED = "DELETED"


class StackState(str, Enum):
    ENTERING = "ENTERING"
    EXITING = "EXITING"
    FAILED = "FAILED"


# Statuses that make a node permanently inactive for traversal.
CLOSED_STATUSES = frozenset({NodeStatus.SUCCESS, NodeStatus.PRUNED, NodeStatus.DELETED})
# Statuses the exiting handler treats as an execution failure for ACTION nodes.
FAILED_OR_PRUNED = frozenset({NodeStatus.FAIL, NodeStatus.PRUNED})

VALID_NODE_TYPES = frozenset({NodeType.AND, NodeType.OR, NodeType.ACTION})
NON_LEAF_TYPES = frozenset({NodeType.AND, NodeType.OR})


class TreeError(Exception):
    """Structural violation: unknown id, duplicate id, illegal type change."""


@dataclass(eq=False)
class Node:
    """One vertex of the AND/OR tree. Identity equality: a node is itself.

    Ids are hierarchical and dot-separated ("1.2.1"); a child's id extends its
    parent's id with its 1-based creation position. The position counter never
    rewinds, so ids of children added by repair continue the numbering instead
    of reusing pruned ids.
    """

    id: str
    description: str = ""
    type: NodeType = NodeType.UNKNOWN
    status: NodeStatus = NodeStatus.UNVISITED
    children: list["Node"] = field(default_factory=list)
    parent: Optional["Node"] = field(default=None, repr=False)
    execution_count: int = 0
    retry_count: int = 0
    revision_count: int = 0
    depth: int = 0
    ordered: bool = True
    url: str = ""
    action: str = ""
    reasoning: str = ""
    score: Optional[float] = None
    notes: list[str] = field(default_factory=list)
    others: dict = field(default_factory=dict)
    # Next 1-based child position; monotone even across pruned children.
    _child_seq: int = field(default=0, repr=False)

    @property
    def is_root(self) -> bool:
        return self.parent is None

    def set_type(self, node_type: NodeType) -> None:
        """Set the node type once; UNKNOWN -> {AND, OR, ACTION} only."""
        if node_type not in VALID_NODE_TYPES:
            raise TreeError(f"invalid node type {node_type!r}")
        if self.type is not NodeType.UNKNOWN and self.type is not node_type:
            raise TreeError(f"node {self.id} type already set to {self.type.value}")
        self.type = node_type

    def walk(self) -> Iterator["Node"]:
        """Depth-first walk of this node and all descendants, in child order."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class StackEntry:
    node: Node
    state: StackState


StatusListener = Callable[[Node, NodeStatus, NodeStatus], None]


class PlanTree:
    """Owns the node index and every status/structure mutation.

    Single-writer: mutations happen on the engine thread. Snapshots for
    concurrent readers are built between engine steps (see snapshot module).
    """

    def __init__(self, task_description: str, root_id: str = "1"):
        self.root = Node(id=root_id, description=task_description)
        self._nodes: dict[str, Node] = {root_id: self.root}
        self.status_listener: Optional[StatusListener] = None

    def get(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise TreeError(f"unknown node id {node_id!r}") from None

    def has(self, node_id: str) -> bool:
        return node_id in self._nodes

    def nodes(self) -> Iterator[Node]:
        yield from self.root.walk()

    def add_child(
        self,
        parent: Node,
        description: str,
        score: Optional[float] = None,
    ) -> Node:
        """Append a child under ``parent`` with the next hierarchical id."""
        if parent.type is NodeType.ACTION:
            raise TreeError(f"ACTION node {parent.id} cannot take children")
        parent._child_seq += 1
        child_id = f"{parent.id}.{parent._child_seq}"
        if child_id in self._nodes:
            raise TreeError(f"duplicate node id {child_id!r}")
        child = Node(
            id=child_id,
            description=description,
            parent=parent,
            depth=parent.depth + 1,
            score=score,
        )
        parent.children.append(child)
        self._nodes[child_id] = child
        return child

    def set_status(self, node: Node, status: NodeStatus) -> bool:
        """Transition ``node`` to ``status``; PRUNED/DELETED are terminal.

        Returns True when the status actually changed. Attempts to leave a
        PRUNED or DELETED state are ignored (sticky closure).
        """
        old = node.status
        if old is status:
            return False
        if old in (NodeStatus.PRUNED, NodeStatus.DELETED):
            return False
        node.status = status
        if self.status_listener is not None:
            self.status_listener(node, old, status)
        return True

    # ------------------------------------------------------------------
    # Validity and success predicates
    # ------------------------------------------------------------------

    @staticmethod
    def is_valid_and(children: list[Node]) -> bool:
        """An AND node is valid while at least one child is not closed."""
        return any(c.status not in CLOSED_STATUSES for c in children)

    @staticmethod
    def is_successful_and(node: Node) -> bool:
        """All children that are neither DELETED nor PRUNED succeeded.

        Requires at least one such child: an AND whose children were all
        removed has nothing supporting its objective.
        """
        live = [
            c
            for c in node.children
            if c.status not in (NodeStatus.DELETED, NodeStatus.PRUNED)
        ]
        return bool(live) and all(c.status is NodeStatus.SUCCESS for c in live)

    @staticmethod
    def is_valid_or(children: list[Node]) -> bool:
        """An OR node is valid while an alternative remains selectable.

        FAIL children are not selectable (they await repair or pruning) but
        are not closed either.
        """
        return any(
            c.status not in CLOSED_STATUSES and c.status is not NodeStatus.FAIL
            for c in children
        )

    @staticmethod
    def is_successful_or(node: Node) -> bool:
        return any(c.status is NodeStatus.SUCCESS for c in node.children)

    @staticmethod
    def has_at_least_one_success(node: Node) -> bool:
        return any(c.status is NodeStatus.SUCCESS for c in node.children)

    @staticmethod
    def find_next_promising(children: list[Node]) -> Optional[Node]:
        """Highest-scored selectable child; first listed wins ties.

        Returns None when every child is closed or failed (the OR is
        exhausted).
        """
        best: Optional[Node] = None
        best_score = float("-inf")
        for child in children:
            if child.status in CLOSED_STATUSES or child.status is NodeStatus.FAIL:
                continue
            score = child.score if child.score is not None else 0.0
            if score > best_score:
                best = child
                best_score = score
        return best

    @staticmethod
    def get_remaining_excluding_node(node: Node, parent: Node) -> list[Node]:
        """Siblings strictly after ``node`` in ``parent``'s ordered child list."""
        try:
            idx = parent.children.index(node)
        except ValueError:
            raise TreeError(f"{node.id} is not a child of {parent.id}") from None
        return parent.children[idx + 1 :]

    # ------------------------------------------------------------------
    # Recursive status mutations
    # ------------------------------------------------------------------

    def recursively_prune(self, node_id: str) -> list[Node]:
        """Mark a node and all its open descendants PRUNED; return the changed."""
        return self._close_subtree(self.get(node_id), NodeStatus.PRUNED)

    def recursively_delete_children(self, children: list[Node]) -> list[Node]:
        """Mark the given nodes and all their open descendants DELETED."""
        changed: list[Node] = []
        for child in children:
            changed.extend(self._close_subtree(child, NodeStatus.DELETED))
        return changed

    def _close_subtree(self, node: Node, status: NodeStatus) -> list[Node]:
        changed = []
        for n in node.walk():
            if n.status in CLOSED_STATUSES:  # closure is sticky
                continue
            if self.set_status(n, status):
                changed.append(n)
        return changed

    def recursively_mark_success(self, node_id: str) -> None:
        """Mark a node SUCCESS along with the descendants that support it.

        Supporting descendants are the already-successful children chains (the
        chosen OR alternative and completed AND subgoals); other open
        descendants, such as never-explored OR alternatives, are untouched.
        """
        node = self.get(node_id)
        self.set_status(node, NodeStatus.SUCCESS)
        for child in node.children:
            if child.status is NodeStatus.SUCCESS:
                self.recursively_mark_success(child.id)

    # ------------------------------------------------------------------
    # Stack maintenance
    # ------------------------------------------------------------------

    @staticmethod
    def purge_stack(removed: list[Node], stack: list[StackEntry]) -> list[StackEntry]:
        """Drop every stack entry whose node is in ``removed``, keeping order."""
        if not removed:
            return stack
        removed_ids = {n.id for n in removed}
        return [e for e in stack if e.node.id not in removed_ids]

    def backtrack_failure(
        self, node: Node, stack: list[StackEntry]
    ) -> tuple[list[StackEntry], list[Node]]:
        """Propagate a failure/prune of ``node`` to its ordered-AND siblings.

        Under an ordered AND parent, every later sibling that is still open is
        deleted together with its descendants, and the stack is purged of the
        deleted nodes. Any other parent configuration leaves the structure
        unchanged (the parent observes the failure when it pops). Returns the
        updated stack and the nodes deleted.
        """
        parent = node.parent
        if parent is None:
            return stack, []  # no parent to backtrack to
        if parent.type is not NodeType.AND or not parent.ordered:
            return stack, []
        remaining = self.get_remaining_excluding_node(node, parent)
        open_siblings = [r for r in remaining if r.status not in CLOSED_STATUSES]
        if not open_siblings:
            return stack, []
        deleted = self.recursively_delete_children(open_siblings)
        if stack and deleted:
            stack = self.purge_stack(deleted, stack)
        return stack, deleted

    # ------------------------------------------------------------------
    # Integrity checking (used by tests and the replay verifier)
    # ------------------------------------------------------------------

    def check_shape(self) -> list[str]:
        """Full-tree walk validating structural invariants; returns violations."""
        problems = []
        seen: set[str] = set()
        for node in self.nodes():
            if node.id in seen:
                problems.append(f"duplicate id {node.id}")
            seen.add(node.id)
            if node.id not in self._nodes:
                problems.append(f"{node.id} missing from index")
            for child in node.children:
                if child.parent is not node:
                    problems.append(f"{child.id} parent link broken")
                if child.depth != node.depth + 1:
                    problems.append(f"{child.id} depth {child.depth} != {node.depth + 1}")
                if not child.id.startswith(node.id + "."):
                    problems.append(f"{child.id} id does not extend {node.id}")
            if node.type is NodeType.ACTION and node.children:
                problems.append(f"ACTION node {node.id} has children")
            if node.parent is not None and node.parent.type is NodeType.OR:
                if node.score is None or not (0.0 < node.score <= 1.0):
                    problems.append(f"OR child {node.id} score {node.score!r} out of range")
        return problems
