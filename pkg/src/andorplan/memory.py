"""Structured candidate memory: per-item-type tables mutated by ADD/UPDATE/DELETE.

Each table tracks candidate entities for one declared item type together with
per-constraint satisfaction bookkeeping. The command language is line-based:

    ADD <item>:ID:<NewID>; key:value; ...; status:uncertain; comment:"..."
    UPDATE <item>:<ExistingID> key:value; constraints_not_met: <k1> <k2>; ...
    DELETE <item> [<ExistingID>]

Deletion is sticky: deleted rows stay in the table but leave retrieval and
stop matching as ADD dedup targets.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .controller.directives import ItemConstraints

logger = logging.getLogger(__name__)

STATUS_UNCERTAIN = "uncertain"
STATUS_COMPLETE = "complete"
STATUS_DELETED = "deleted"

ADMISSION_FRACTION = 0.6  # "at least 60%" of declared constraints, rounded up
DELETE_VIOLATION_FRACTION = 0.5  # mostly-complete rows violating > 50% get dropped

_ADD_RE = re.compile(r"^ADD\s+(.+?):ID:([^;\s]+)\s*;?\s*(.*)$")
_UPDATE_RE = re.compile(r"^UPDATE\s+(.+?):(\S+)\s+(.*)$")
_DELETE_RE = re.compile(r"^DELETE\s+(.+?)\s*\[(\S+)\]$")
_ANGLE_KEY_RE = re.compile(r"<([^<>]+)>")
_NUMBER_RE = re.compile(r"-?\d[\d,]*(?:\.\d+)?")

RESERVED_KEYS = ("status", "comment", "constraints_not_met")


class CandidateTableError(Exception):
    """Structural memory failure (duplicate table, malformed construction)."""


@dataclass
class CandidateRow:
    item_type: str
    row_id: str
    attributes: dict[str, str] = field(default_factory=dict)
    constraints_not_met: list[str] = field(default_factory=list)
    status: str = STATUS_UNCERTAIN
    comment: str = ""

    @property
    def deleted(self) -> bool:
        return self.status == STATUS_DELETED

    def render(self) -> str:
        """One-line rendering that round-trips through the UPDATE grammar."""
        parts = [f"{k}:{v}" for k, v in self.attributes.items()]
        if self.constraints_not_met:
            keys = " ".join(f"<{k}>" for k in self.constraints_not_met)
            parts.append(f"constraints_not_met: {keys}")
        parts.append(f"status:{self.status}")
        if self.comment:
            parts.append(f'comment:"{self.comment}"')
        return f"{self.item_type}:{self.row_id} " + "; ".join(parts)


@dataclass
class CandidateTable:
    item_type: str
    constraints: list[str] = field(default_factory=list)
    rows: list[CandidateRow] = field(default_factory=list)
    schema: list[str] = field(default_factory=list)  # append-only attribute keys

    def live_rows(self) -> list[CandidateRow]:
        return [r for r in self.rows if not r.deleted]

    def find(self, row_id: str) -> Optional[CandidateRow]:
        for row in self.rows:
            if row.row_id == row_id:
                return row
        return None

    def _grow_schema(self, keys: list[str]) -> None:
        for key in keys:
            if key not in self.schema:
                self.schema.append(key)


@dataclass
class CommandReport:
    line: str
    accepted: bool
    reason: str


class MemoryTableSet:
    """All candidate tables for a run, keyed by declared item type."""

    def __init__(self, items: list[ItemConstraints]):
        self.tables: dict[str, CandidateTable] = {}
        for item in items:
            key = item.item.strip()
            if key.lower() in {k.lower() for k in self.tables}:
                raise CandidateTableError(f"duplicate item type {key!r}")
            self.tables[key] = CandidateTable(item_type=key, constraints=list(item.constraints))

    def table_for(self, item_type: str) -> Optional[CandidateTable]:
        for key, table in self.tables.items():
            if key.lower() == item_type.strip().lower():
                return table
        return None

    def render(self, max_rows_per_table: Optional[int] = None) -> str:
        lines = []
        for table in self.tables.values():
            lines.append(f"# {table.item_type} (constraints: {'; '.join(table.constraints)})")
            rows = table.live_rows()
            if max_rows_per_table is not None:
                rows = rows[:max_rows_per_table]
            lines.extend(row.render() for row in rows)
        return "\n".join(lines)


# ----------------------------------------------------------------------
# Constraint satisfaction
# ----------------------------------------------------------------------


def constraint_key(constraint: str) -> str:
    """'Price: under $40' -> 'Price'; bare constraints are their own key."""
    return constraint.split(":", 1)[0].strip()


def constraint_requirement(constraint: str) -> str:
    parts = constraint.split(":", 1)
    return parts[1].strip() if len(parts) > 1 else ""


def _parse_number(text: str) -> Optional[float]:
    m = _NUMBER_RE.search(text)
    if not m:
        return None
    try:
        return float(m.group(0).replace(",", ""))
    except ValueError:
        return None


def _numeric_check(requirement: str, value: str) -> Optional[bool]:
    """Compare when both sides parse as numbers; None means not applicable."""
    bound = _parse_number(requirement)
    actual = _parse_number(value)
    if bound is None or actual is None:
        return None
    req = requirement.lower()
    if any(word in req for word in ("under", "below", "less than", "at most", "max")):
        return actual <= bound
    if any(word in req for word in ("over", "above", "at least", "more than", "min")) or "+" in req:
        return actual >= bound
    return None


def constraint_satisfied(row: CandidateRow, constraint: str) -> bool:
    """Key present with a non-empty value, not flagged unmet, and numeric-valid."""
    key = constraint_key(constraint)
    if key.lower() in {k.lower() for k in row.constraints_not_met}:
        return False
    value = None
    for attr_key, attr_value in row.attributes.items():
        if attr_key.lower() == key.lower():
            value = attr_value
            break
    if value is None or not str(value).strip():
        return False
    verdict = _numeric_check(constraint_requirement(constraint), str(value))
    return True if verdict is None else verdict


def satisfied_count(row: CandidateRow, constraints: list[str]) -> int:
    return sum(1 for c in constraints if constraint_satisfied(row, c))


# ----------------------------------------------------------------------
# Command parsing and application
# ----------------------------------------------------------------------


def _parse_fields(text: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ValueError(f"field without ':' separator: {chunk!r}")
        key, value = chunk.split(":", 1)
        key = key.strip()
        value = value.strip().strip('"')
        if not key:
            raise ValueError(f"field with empty key: {chunk!r}")
        fields[key] = value
    return fields


def _split_not_met(value: str) -> list[str]:
    keys = _ANGLE_KEY_RE.findall(value)
    if keys:
        return [k.strip() for k in keys if k.strip()]
    return [k.strip() for k in re.split(r"[,;]", value) if k.strip()]


def _unique_row_id(table: CandidateTable, proposed: str) -> str:
    if table.find(proposed) is None:
        return proposed
    bump = 2
    while table.find(f"{proposed}-{bump}") is not None:
        bump += 1
    return f"{proposed}-{bump}"


def apply_commands(
    table_set: MemoryTableSet, command_text: str
) -> tuple[MemoryTableSet, list[CommandReport]]:
    """Apply ADD/UPDATE/DELETE lines; returns the mutated set and a report."""
    reports: list[CommandReport] = []
    for raw_line in command_text.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        try:
            reports.append(_apply_one(table_set, line))
        except ValueError as exc:
            reports.append(CommandReport(line, False, f"malformed: {exc}"))
    return table_set, reports


def _apply_one(table_set: MemoryTableSet, line: str) -> CommandReport:
    m = _ADD_RE.match(line)
    if m:
        return _apply_add(table_set, line, m.group(1), m.group(2), m.group(3))
    m = _UPDATE_RE.match(line)
    if m:
        return _apply_update(table_set, line, m.group(1), m.group(2), m.group(3))
    m = _DELETE_RE.match(line)
    if m:
        return _apply_delete(table_set, line, m.group(1), m.group(2))
    return CommandReport(line, False, "malformed: not an ADD/UPDATE/DELETE command")


def _clean_attributes(fields: dict[str, str]) -> dict[str, str]:
    """Drop reserved keys plus empty or placeholder values."""
    attrs = {}
    for key, value in fields.items():
        if key.lower() in RESERVED_KEYS:
            continue
        if not value or value.lower() == "unknown":
            continue
        attrs[key] = value
    return attrs


def _apply_add(
    table_set: MemoryTableSet, line: str, item_type: str, row_id: str, rest: str
) -> CommandReport:
    table = table_set.table_for(item_type)
    if table is None:
        return CommandReport(line, False, f"unknown item type {item_type.strip()!r}")
    fields = _parse_fields(rest)
    attrs = _clean_attributes(fields)

    # Dedup: all visible fields matching an existing live row convert to UPDATE.
    for row in table.live_rows():
        if attrs and all(
            row.attributes.get(k, "").lower() == v.lower() for k, v in attrs.items()
        ):
            _merge_fields(table, row, fields)
            return CommandReport(
                line, True, f"duplicate of {row.row_id}; merged as update"
            )

    if table.constraints:
        probe = CandidateRow(item_type=table.item_type, row_id="?", attributes=attrs)
        needed = math.ceil(ADMISSION_FRACTION * len(table.constraints))
        have = satisfied_count(probe, table.constraints)
        if have < needed:
            return CommandReport(
                line,
                False,
                f"only {have}/{len(table.constraints)} constraints satisfied "
                f"(needs {needed})",
            )

    row = CandidateRow(
        item_type=table.item_type,
        row_id=_unique_row_id(table, row_id),
        attributes=attrs,
        status=fields.get("status", STATUS_UNCERTAIN).lower() or STATUS_UNCERTAIN,
        comment=fields.get("comment", ""),
    )
    if row.status not in (STATUS_UNCERTAIN, STATUS_COMPLETE):
        row.status = STATUS_UNCERTAIN
    if "constraints_not_met" in fields:
        row.constraints_not_met = _split_not_met(fields["constraints_not_met"])
    else:
        row.constraints_not_met = _recompute_not_met_for(row, table.constraints)
    if row.status == STATUS_COMPLETE and row.constraints_not_met:
        row.status = STATUS_UNCERTAIN  # complete rows must have nothing unmet
    table.rows.append(row)
    table._grow_schema(list(attrs))
    suffix = "" if row.row_id == row_id else f" (id bumped to {row.row_id})"
    return CommandReport(line, True, f"added {row.row_id}{suffix}")


def _recompute_not_met_for(row: CandidateRow, constraints: list[str]) -> list[str]:
    unmet = []
    for constraint in constraints:
        if not constraint_satisfied(
            CandidateRow(row.item_type, row.row_id, attributes=row.attributes),
            constraint,
        ):
            unmet.append(constraint_key(constraint))
    return unmet


def _merge_fields(table: CandidateTable, row: CandidateRow, fields: dict[str, str]) -> None:
    attrs = _clean_attributes(fields)
    row.attributes.update(attrs)
    table._grow_schema(list(attrs))
    if "constraints_not_met" in fields:
        row.constraints_not_met = _split_not_met(fields["constraints_not_met"])
    if "comment" in fields and fields["comment"]:
        row.comment = fields["comment"]
    status = fields.get("status", "").lower()
    if status in (STATUS_UNCERTAIN, STATUS_COMPLETE):
        row.status = status
    if row.status == STATUS_COMPLETE and row.constraints_not_met:
        row.status = STATUS_UNCERTAIN


def _apply_update(
    table_set: MemoryTableSet, line: str, item_type: str, row_id: str, rest: str
) -> CommandReport:
    table = table_set.table_for(item_type)
    if table is None:
        return CommandReport(line, False, f"unknown item type {item_type.strip()!r}")
    row = table.find(row_id)
    if row is None:
        return CommandReport(line, False, f"unknown row id {row_id!r}")
    if row.deleted:
        return CommandReport(line, False, f"row {row_id} is deleted; updates are refused")
    _merge_fields(table, row, _parse_fields(rest))
    return CommandReport(line, True, f"updated {row_id}")


def _apply_delete(
    table_set: MemoryTableSet, line: str, item_type: str, row_id: str
) -> CommandReport:
    table = table_set.table_for(item_type)
    if table is None:
        return CommandReport(line, False, f"unknown item type {item_type.strip()!r}")
    row = table.find(row_id)
    if row is None:
        return CommandReport(line, False, f"unknown row id {row_id!r}")
    if row.deleted:
        return CommandReport(line, True, f"{row_id} already deleted")
    row.status = STATUS_DELETED
    return CommandReport(line, True, f"deleted {row_id}")


# ----------------------------------------------------------------------
# Validation and retrieval
# ----------------------------------------------------------------------


def validate_tables(table_set: MemoryTableSet) -> str:
    """Emit UPDATE/DELETE lines that bring stale bookkeeping back in line.

    Rows marked complete that violate a constraint are deleted, as are
    mostly-complete rows violating most constraints; mostly-incomplete rows
    only ever get corrective updates. A consistent table emits nothing.
    """
    lines: list[str] = []
    for table in table_set.tables.values():
        n = len(table.constraints)
        for row in table.live_rows():
            recomputed = _recompute_not_met_for(row, table.constraints)
            violated = len(recomputed)
            present = sum(
                1
                for c in table.constraints
                if constraint_key(c).lower() in {k.lower() for k in row.attributes}
            )
            if n and row.status == STATUS_COMPLETE and violated:
                lines.append(f"DELETE {table.item_type} [{row.row_id}]")
                continue
            if (
                n
                and present / n >= DELETE_VIOLATION_FRACTION
                and violated / n > DELETE_VIOLATION_FRACTION
            ):
                lines.append(f"DELETE {table.item_type} [{row.row_id}]")
                continue
            expected_status = STATUS_COMPLETE if n and not violated else (
                STATUS_UNCERTAIN if n else row.status
            )
            stale_list = sorted(k.lower() for k in row.constraints_not_met) != sorted(
                k.lower() for k in recomputed
            )
            stale_status = n and row.status != expected_status
            if stale_list or stale_status:
                # Always restate the list: an empty field clears a stale one.
                keys = " ".join(f"<{k}>" for k in recomputed)
                parts = [f"constraints_not_met: {keys}".rstrip()]
                parts.append(f"status:{expected_status}")
                comment = (
                    "all declared constraints satisfied"
                    if not recomputed
                    else "missing " + ", ".join(recomputed)
                )
                parts.append(f'comment:"{comment}"')
                lines.append(
                    f"UPDATE {table.item_type}:{row.row_id} " + "; ".join(parts)
                )
    return "\n".join(lines)


def top_k(table_set: MemoryTableSet, item_type: str, k: int) -> list[CandidateRow]:
    """Non-deleted rows by satisfied-constraint count, insertion order on ties."""
    if k < 1:
        raise ValueError("k must be >= 1")
    table = table_set.table_for(item_type)
    if table is None:
        return []
    scored = [
        (satisfied_count(row, table.constraints), idx, row)
        for idx, row in enumerate(table.live_rows())
    ]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [row for _, _, row in scored[:k]]
