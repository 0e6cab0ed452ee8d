"""Controller directive wire formats: dataclasses, strict parsers, renderers.

Every controller implementation funnels its raw text through these parsers, so
scripted fixtures and remote model output face the same grammar. Parsers are
strict: every non-blank line must match a production of the format, and a
missing ``<<``/``>>`` or bracket delimiter is a parse error, which lets the
engine retry the call.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional


class DirectiveParseError(Exception):
    """Controller output does not conform to the directive grammar."""


EXPANSION_TYPES = ("AND", "OR", "Atomic")

_FIELD_RE = re.compile(
    r"^(Node ID|Node Description|Node Type|Expansion|Ordered|Reasoning):\s*<<(.*)>>\s*$"
)
_PRUNE_RE = re.compile(r"^PRUNE \[([^\[\]\s]+)\]$")
_ADD_RE = re.compile(r"^ADD \[([^\[\]\s]+)\] (AND|OR|Atomic)\s*:\s*<<(.*)>>$")
_UPDATE_RE = re.compile(r"^UPDATE \[([^\[\]\s]+)\] <<(.*)>>$")
_REASONING_RE = re.compile(r"^Reasoning:?\s*<<(.*)>>$")
_VERDICT_RE = re.compile(r"^(COMPLETE|INCOMPLETE)\s*<<([^<>]+)>>$")
_SCORE_SUFFIX_RE = re.compile(r"\(score:\s*([0-9.]+)\s*\)\s*$")
_ITEM_PREFIX_RE = re.compile(r"^\d+\.\s*")
_RESPONSE_RE = re.compile(r"Task Response:\s*<<(.*)>>", re.DOTALL)

# Score assigned to the k-th listed alternative when the controller omits one.
def positional_score(rank: int) -> float:
    return max(0.05, 1.0 - 0.05 * rank)


def _nonblank_lines(text: str) -> list[str]:
    return [line.strip() for line in text.strip().splitlines() if line.strip()]


@dataclass(frozen=True)
class ChildSpec:
    description: str
    score: Optional[float] = None


@dataclass
class ExpansionDirective:
    """Parsed node-expansion output: type verdict plus children or action.

    ``ordered`` is an optional flag for AND nodes; omitted means ordered.
    """

    node_id: str
    node_type: str  # "AND" | "OR" | "Atomic"
    description: str = ""
    action: str = ""  # Atomic only
    children: list[ChildSpec] = field(default_factory=list)  # AND/OR only
    ordered: bool = True
    reasoning: str = ""


@dataclass
class AddGroup:
    target_id: str
    node_type: str
    children: list[ChildSpec]


@dataclass
class RepairDirective:
    prunes: list[str] = field(default_factory=list)
    additions: list[AddGroup] = field(default_factory=list)
    reasoning: str = ""

    @property
    def is_empty(self) -> bool:
        return not self.prunes and not self.additions


@dataclass
class GlobalUpdateDirective:
    prunes: list[str] = field(default_factory=list)
    updates: list[tuple[str, str]] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.prunes and not self.updates


@dataclass
class CompletionVerdict:
    complete: bool
    node_id: str
    reasoning: str = ""


@dataclass
class SummaryUpdate:
    observation_summary: str = ""
    observation_highlights: list[int] = field(default_factory=list)
    task_progress: str = ""
    task_feedback: str = ""
    new_notes: str = ""
    task_response: str = ""


@dataclass(frozen=True)
class ItemConstraints:
    item: str
    constraints: tuple[str, ...]


# ----------------------------------------------------------------------
# Child list payloads ("1. First; 2. Second (score: 0.9)")
# ----------------------------------------------------------------------


def parse_child_list(payload: str, scored: bool) -> list[ChildSpec]:
    items = [part.strip() for part in payload.split(";") if part.strip()]
    if not items:
        raise DirectiveParseError("empty child list")
    children = []
    for rank, item in enumerate(items):
        item = _ITEM_PREFIX_RE.sub("", item).strip()
        score: Optional[float] = None
        m = _SCORE_SUFFIX_RE.search(item)
        if m:
            try:
                score = float(m.group(1))
            except ValueError:
                raise DirectiveParseError(f"bad score in {item!r}") from None
            if not 0.0 < score <= 1.0:
                raise DirectiveParseError(f"score {score} outside (0, 1]")
            item = item[: m.start()].strip()
        if not item:
            raise DirectiveParseError("blank child description")
        if scored and score is None:
            score = positional_score(rank)
        if not scored and score is not None:
            # Ordered subgoals carry no scores; drop a stray one.
            score = None
        children.append(ChildSpec(description=item, score=score))
    return children


def render_child_list(children: list[ChildSpec]) -> str:
    parts = []
    for i, child in enumerate(children, start=1):
        if child.score is not None:
            parts.append(f"{i}. {child.description} (score: {child.score})")
        else:
            parts.append(f"{i}. {child.description}")
    return "; ".join(parts)


# ----------------------------------------------------------------------
# Expansion
# ----------------------------------------------------------------------


def parse_expansion(text: str) -> ExpansionDirective:
    fields: dict[str, str] = {}
    for line in _nonblank_lines(text):
        m = _FIELD_RE.match(line)
        if not m:
            raise DirectiveParseError(f"unexpected expansion line: {line!r}")
        label, value = m.group(1), m.group(2)
        if label in fields:
            raise DirectiveParseError(f"duplicate field {label!r}")
        fields[label] = value.strip()
    for required in ("Node ID", "Node Type", "Expansion"):
        if required not in fields:
            raise DirectiveParseError(f"expansion missing {required!r}")
    node_type = fields["Node Type"]
    if node_type not in EXPANSION_TYPES:
        raise DirectiveParseError(f"unknown node type {node_type!r}")
    ordered = True
    if "Ordered" in fields:
        flag = fields["Ordered"].lower()
        if flag not in ("true", "false"):
            raise DirectiveParseError(f"Ordered must be true/false, got {flag!r}")
        ordered = flag == "true"
    directive = ExpansionDirective(
        node_id=fields["Node ID"],
        node_type=node_type,
        description=fields.get("Node Description", ""),
        ordered=ordered,
        reasoning=fields.get("Reasoning", ""),
    )
    payload = fields["Expansion"]
    if node_type == "Atomic":
        if not payload:
            raise DirectiveParseError("Atomic expansion has no action")
        directive.action = payload
    else:
        directive.children = parse_child_list(payload, scored=node_type == "OR")
    return directive


def render_expansion(d: ExpansionDirective) -> str:
    payload = d.action if d.node_type == "Atomic" else render_child_list(d.children)
    lines = [
        f"Node ID: <<{d.node_id}>>",
        f"Node Description: <<{d.description}>>",
        f"Node Type: <<{d.node_type}>>",
        f"Expansion: <<{payload}>>",
    ]
    if not d.ordered:
        lines.append("Ordered: <<false>>")
    lines.append(f"Reasoning: <<{d.reasoning}>>")
    return "\n".join(lines)


# ----------------------------------------------------------------------
# Repair
# ----------------------------------------------------------------------


def parse_repair(text: str) -> RepairDirective:
    directive = RepairDirective()
    for line in _nonblank_lines(text):
        m = _PRUNE_RE.match(line)
        if m:
            directive.prunes.append(m.group(1))
            continue
        m = _ADD_RE.match(line)
        if m:
            target, node_type, payload = m.group(1), m.group(2), m.group(3)
            children = parse_child_list(payload, scored=node_type == "OR")
            directive.additions.append(AddGroup(target, node_type, children))
            continue
        m = _REASONING_RE.match(line)
        if m:
            directive.reasoning = m.group(1).strip()
            continue
        raise DirectiveParseError(f"unexpected repair line: {line!r}")
    return directive


def render_repair(d: RepairDirective) -> str:
    lines = [f"PRUNE [{node_id}]" for node_id in d.prunes]
    for add in d.additions:
        lines.append(f"ADD [{add.target_id}] {add.node_type} : <<{render_child_list(add.children)}>>")
    lines.append(f"Reasoning <<{d.reasoning}>>")
    return "\n".join(lines)


# ----------------------------------------------------------------------
# Global tree update
# ----------------------------------------------------------------------


def parse_global_update(text: str) -> GlobalUpdateDirective:
    directive = GlobalUpdateDirective()
    for line in _nonblank_lines(text):
        m = _PRUNE_RE.match(line)
        if m:
            directive.prunes.append(m.group(1))
            continue
        m = _UPDATE_RE.match(line)
        if m:
            description = m.group(2).strip()
            if not description:
                raise DirectiveParseError("UPDATE with empty description")
            directive.updates.append((m.group(1), description))
            continue
        raise DirectiveParseError(f"unexpected global-update line: {line!r}")
    return directive


def render_global_update(d: GlobalUpdateDirective) -> str:
    lines = [f"PRUNE [{node_id}]" for node_id in d.prunes]
    lines.extend(f"UPDATE [{node_id}] <<{desc}>>" for node_id, desc in d.updates)
    return "\n".join(lines)


# ----------------------------------------------------------------------
# Completion verdict
# ----------------------------------------------------------------------


def parse_completion(text: str) -> CompletionVerdict:
    verdict: Optional[CompletionVerdict] = None
    reasoning = ""
    for line in _nonblank_lines(text):
        m = _VERDICT_RE.match(line)
        if m:
            if verdict is not None:
                raise DirectiveParseError("multiple completion verdicts")
            verdict = CompletionVerdict(
                complete=m.group(1) == "COMPLETE", node_id=m.group(2).strip()
            )
            continue
        m = _REASONING_RE.match(line)
        if m:
            reasoning = m.group(1).strip()
            continue
        raise DirectiveParseError(f"unexpected completion line: {line!r}")
    if verdict is None:
        raise DirectiveParseError("missing COMPLETE/INCOMPLETE verdict")
    verdict.reasoning = reasoning
    return verdict


def render_completion(v: CompletionVerdict) -> str:
    word = "COMPLETE" if v.complete else "INCOMPLETE"
    return f"{word} <<{v.node_id}>>\nReasoning: <<{v.reasoning}>>"


# ----------------------------------------------------------------------
# Summary update (observation summarizer + notes)
# ----------------------------------------------------------------------

_SUMMARY_SECTIONS = (
    "OBSERVATION SUMMARY",
    "OBSERVATION HIGHLIGHTS",
    "TASK PROGRESS",
    "TASK FEEDBACK",
    "NEW NOTES",
    "TASK RESPONSE",
)
_REQUIRED_SUMMARY_SECTIONS = _SUMMARY_SECTIONS[:4]
_SECTION_BODY_RE = re.compile(r"^\s*<<(.*)>>\s*$", re.DOTALL)


def parse_summary_update(text: str) -> SummaryUpdate:
    positions = []
    for name in _SUMMARY_SECTIONS:
        m = re.search(rf"^{re.escape(name)}\s*$", text, re.MULTILINE)
        if m:
            positions.append((m.start(), m.end(), name))
    positions.sort()
    if not positions:
        raise DirectiveParseError("no summary sections found")
    found = {name for _, _, name in positions}
    for required in _REQUIRED_SUMMARY_SECTIONS:
        if required not in found:
            raise DirectiveParseError(f"summary missing section {required!r}")
    sections: dict[str, str] = {}
    for i, (_, end, name) in enumerate(positions):
        tail = positions[i + 1][0] if i + 1 < len(positions) else len(text)
        body = text[end:tail].strip()
        m = _SECTION_BODY_RE.match(body)
        if not m:
            raise DirectiveParseError(f"section {name!r} body not wrapped in << >>")
        sections[name] = m.group(1).strip()
    update = SummaryUpdate(
        observation_summary=sections.get("OBSERVATION SUMMARY", ""),
        task_progress=sections.get("TASK PROGRESS", ""),
        task_feedback=sections.get("TASK FEEDBACK", ""),
        new_notes=sections.get("NEW NOTES", ""),
        task_response=sections.get("TASK RESPONSE", ""),
    )
    update.observation_highlights = _parse_highlights(sections.get("OBSERVATION HIGHLIGHTS", "[]"))
    return update


def _parse_highlights(body: str) -> list[int]:
    body = body.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise DirectiveParseError(f"highlights not a bracketed list: {body!r}")
    inner = body[1:-1].strip()
    if not inner:
        return []
    try:
        return [int(tok.strip()) for tok in inner.split(",")]
    except ValueError:
        raise DirectiveParseError(f"non-integer highlight in {body!r}") from None


def render_summary_update(u: SummaryUpdate) -> str:
    highlights = "[" + ", ".join(str(i) for i in u.observation_highlights) + "]"
    blocks = [
        ("OBSERVATION SUMMARY", u.observation_summary),
        ("OBSERVATION HIGHLIGHTS", highlights),
        ("TASK PROGRESS", u.task_progress),
        ("TASK FEEDBACK", u.task_feedback),
        ("NEW NOTES", u.new_notes),
        ("TASK RESPONSE", u.task_response),
    ]
    return "\n\n".join(f"{name}\n<<{body}>>" for name, body in blocks)


# ----------------------------------------------------------------------
# Final task response
# ----------------------------------------------------------------------


def parse_task_response(text: str) -> str:
    m = _RESPONSE_RE.search(text)
    if not m:
        raise DirectiveParseError("missing 'Task Response: <<...>>'")
    return m.group(1).strip()


def render_task_response(response: str) -> str:
    return f"Task Response: <<{response}>>"


# ----------------------------------------------------------------------
# Item constraint extraction (JSON)
# ----------------------------------------------------------------------


def parse_item_constraints(text: str) -> list[ItemConstraints]:
    body = text.strip()
    if body.startswith("```"):
        body = re.sub(r"^```[a-z]*\s*|\s*```$", "", body, flags=re.IGNORECASE)
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise DirectiveParseError(f"constraints are not valid JSON: {exc}") from None
    if not isinstance(data, dict) or "ITEMS" not in data:
        raise DirectiveParseError("constraints JSON missing 'ITEMS'")
    items = []
    seen = set()
    for entry in data["ITEMS"]:
        if not isinstance(entry, dict) or "item" not in entry:
            raise DirectiveParseError(f"bad constraints entry: {entry!r}")
        name = str(entry["item"]).strip()
        if not name or name.lower() in seen:
            continue  # item types must be unique
        seen.add(name.lower())
        constraints = tuple(str(c).strip() for c in entry.get("constraints", []) if str(c).strip())
        items.append(ItemConstraints(item=name, constraints=constraints))
    return items


def render_item_constraints(items: list[ItemConstraints]) -> str:
    payload = {
        "ITEMS": [{"item": i.item, "constraints": list(i.constraints)} for i in items]
    }
    return json.dumps(payload, indent=2)
