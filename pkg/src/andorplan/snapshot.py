"""Self-describing snapshots of tree, stack, and memory for the UI and tests."""

from __future__ import annotations

from typing import Optional

from .memory import MemoryTableSet
from .tree import Node, PlanTree, StackEntry

SNAPSHOT_FORMAT = "plan-snapshot/1"


def node_record(node: Node) -> dict:
    return {
        "id": node.id,
        "type": node.type.value,
        "status": node.status.value,
        "description": node.description,
        "score": node.score,
        "action": node.action,
        "url": node.url,
        "reasoning": node.reasoning,
        "children": [c.id for c in node.children],
        "depth": node.depth,
        "ordered": node.ordered,
        "execution_count": node.execution_count,
        "retry_count": node.retry_count,
        "revision_count": node.revision_count,
        "notes": list(node.notes),
    }


def tree_snapshot(
    tree: PlanTree,
    stack: Optional[list[StackEntry]] = None,
    memory: Optional[MemoryTableSet] = None,
) -> dict:
    """Serialize the full planner state; stack entries are listed top-first."""
    snap = {
        "format": SNAPSHOT_FORMAT,
        "root_id": tree.root.id,
        "nodes": [node_record(n) for n in tree.nodes()],
        "stack": [
            {"node_id": e.node.id, "state": e.state.value}
            for e in reversed(stack or [])
        ],
    }
    if memory is not None:
        snap["memory"] = {
            "tables": [
                {
                    "item_type": t.item_type,
                    "constraints": list(t.constraints),
                    "schema": list(t.schema),
                    "rows": [
                        {
                            "row_id": r.row_id,
                            "attributes": dict(r.attributes),
                            "constraints_not_met": list(r.constraints_not_met),
                            "status": r.status,
                            "comment": r.comment,
                        }
                        for r in t.rows
                    ],
                }
                for t in memory.tables.values()
            ]
        }
    else:
        snap["memory"] = {"tables": []}
    return snap


def render_tree_text(tree: PlanTree) -> str:
    """Indented one-node-per-line rendering used in controller prompts."""
    lines = []
    for node in tree.nodes():
        indent = "  " * node.depth
        score = f" (score: {node.score})" if node.score is not None else ""
        action = f" `{node.action}`" if node.action else ""
        lines.append(
            f"{indent}[{node.id}] ({node.type.value}/{node.status.value}){score} "
            f"{node.description}{action}"
        )
    return "\n".join(lines)


def render_local_tree_info(node: Node) -> str:
    """Parent/sibling/children context for node-scoped controller calls."""
    lines = []
    parent = node.parent
    if parent is not None:
        lines.append(
            f"parent [{parent.id}] ({parent.type.value}/{parent.status.value}) "
            f"{parent.description}"
        )
        lines.append("siblings:")
        for sib in parent.children:
            marker = "*" if sib is node else "-"
            lines.append(
                f"  {marker} [{sib.id}] ({sib.type.value}/{sib.status.value}) {sib.description}"
            )
    else:
        lines.append("node is the tree root")
    if node.children:
        lines.append("children:")
        lines.extend(
            f"  - [{c.id}] ({c.type.value}/{c.status.value}) {c.description}"
            for c in node.children
        )
    return "\n".join(lines)
