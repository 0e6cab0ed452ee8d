"""Hierarchical AND/OR plan-tree engine for long-horizon web-style tasks."""

from .engine import (
    Engine,
    EngineConfig,
    InterventionDirective,
    InterventionResult,
    RunOutcome,
    RunResult,
)
from .environment import Action, ActionParseError, SimulatedBrowser, SiteFixture, parse_action
from .memory import MemoryTableSet, apply_commands, top_k, validate_tables
from .session import RunSession
from .snapshot import tree_snapshot
from .trajectory import TrajectoryLog
from .tree import (
    CLOSED_STATUSES,
    Node,
    NodeStatus,
    NodeType,
    PlanTree,
    StackEntry,
    StackState,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionParseError",
    "CLOSED_STATUSES",
    "Engine",
    "EngineConfig",
    "InterventionDirective",
    "InterventionResult",
    "MemoryTableSet",
    "Node",
    "NodeStatus",
    "NodeType",
    "PlanTree",
    "RunOutcome",
    "RunResult",
    "RunSession",
    "SimulatedBrowser",
    "SiteFixture",
    "StackEntry",
    "StackState",
    "TrajectoryLog",
    "apply_commands",
    "parse_action",
    "top_k",
    "tree_snapshot",
    "validate_tables",
]
