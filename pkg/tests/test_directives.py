"""Directive wire formats: parse, render, round-trip, and strictness."""

from __future__ import annotations

import json
import re

import pytest

from andorplan.controller import directives as wire
from andorplan.controller.directives import DirectiveParseError
from conftest import DIRECTIVE_DIR

PARSERS = {
    "expansion": (wire.parse_expansion, wire.render_expansion),
    "repair": (wire.parse_repair, wire.render_repair),
    "global_update": (wire.parse_global_update, wire.render_global_update),
    "completion": (wire.parse_completion, wire.render_completion),
    "summary": (wire.parse_summary_update, wire.render_summary_update),
    "response": (
        wire.parse_task_response,
        lambda r: wire.render_task_response(r),
    ),
}

CORPUS = {
    "expansion_atomic.txt": "expansion",
    "expansion_and.txt": "expansion",
    "expansion_and_unordered.txt": "expansion",
    "expansion_or.txt": "expansion",
    "expansion_or_worked.txt": "expansion",
    "repair_add_and.txt": "repair",
    "repair_prune_add_or.txt": "repair",
    "repair_empty.txt": "repair",
    "global_update.txt": "global_update",
    "completion_complete.txt": "completion",
    "completion_incomplete.txt": "completion",
    "summary_full.txt": "summary",
    "response.txt": "response",
}


def corpus_text(name: str) -> str:
    return (DIRECTIVE_DIR / name).read_text(encoding="utf-8")


def structural_delimiter_spans(text: str) -> list[tuple[int, int]]:
    """Spans of the << >> and [ ] delimiters that carry format structure."""
    spans = []
    for m in re.finditer(r"<<|>>", text):
        spans.append(m.span())
    for m in re.finditer(r"^(PRUNE|ADD|UPDATE|DELETE)\s+\[", text, re.MULTILINE):
        spans.append((m.end() - 1, m.end()))
    for m in re.finditer(r"^(?:PRUNE|UPDATE|DELETE)[^\n\[]*\[[^\]\n]*(\])", text, re.MULTILINE):
        spans.append(m.span(1))
    for m in re.finditer(r"^ADD \[[^\]\n]*(\])", text, re.MULTILINE):
        spans.append(m.span(1))
    return spans


class TestCorpusRoundTrips:
    @pytest.mark.parametrize("name", sorted(CORPUS))
    def test_parse_render_round_trip(self, name):
        parse, render = PARSERS[CORPUS[name]]
        text = corpus_text(name)
        parsed = parse(text)
        rendered = render(parsed)
        assert parse(rendered) == parsed
        # Canonical fixtures re-render to themselves modulo blank lines.
        normalize = lambda t: [line.rstrip() for line in t.strip().splitlines() if line.strip()]
        assert normalize(rendered) == normalize(text)

    @pytest.mark.parametrize("name", sorted(CORPUS))
    def test_single_delimiter_deletion_rejected(self, name):
        parse, _ = PARSERS[CORPUS[name]]
        text = corpus_text(name)
        baseline = parse(text)
        spans = structural_delimiter_spans(text)
        assert spans, f"{name} has no structural delimiters?"
        for start, end in spans:
            mutated = text[:start] + text[end:]
            try:
                got = parse(mutated)
            except DirectiveParseError:
                continue
            assert got != baseline, (
                f"{name}: deleting delimiter at {start} went unnoticed"
            )


class TestExpansionParsing:
    def test_atomic_payload(self):
        d = wire.parse_expansion(corpus_text("expansion_atomic.txt"))
        assert (d.node_type, d.action) == ("Atomic", "click [123]")
        assert d.children == []

    def test_and_children_ordered(self):
        d = wire.parse_expansion(corpus_text("expansion_and.txt"))
        assert d.node_type == "AND" and d.ordered is True
        assert [c.description for c in d.children] == [
            "Open the first candidate recipe",
            "Return to the results page",
            "Record the rating evidence",
        ]
        assert all(c.score is None for c in d.children)

    def test_unordered_flag(self):
        d = wire.parse_expansion(corpus_text("expansion_and_unordered.txt"))
        assert d.ordered is False

    def test_or_scores(self):
        d = wire.parse_expansion(corpus_text("expansion_or_worked.txt"))
        assert [c.score for c in d.children] == [1.0, 0.95]

    def test_or_score_fallback_is_positional(self):
        text = corpus_text("expansion_or.txt").replace(" (score: 0.9)", "").replace(
            " (score: 0.8)", ""
        )
        d = wire.parse_expansion(text)
        assert [c.score for c in d.children] == [1.0, 0.95]

    @pytest.mark.parametrize(
        "mutation",
        [
            lambda t: t.replace("<<Atomic>>", "<<ATOMIC-ish>>"),
            lambda t: t.replace("Expansion: <<click [123]>>", "Expansion: <<>>"),
            lambda t: t + "\nUnexpected trailing line",
            lambda t: t.replace("Node ID", "Node Id"),
        ],
    )
    def test_rejects_bad_expansions(self, mutation):
        with pytest.raises(DirectiveParseError):
            wire.parse_expansion(mutation(corpus_text("expansion_atomic.txt")))

    def test_rejects_out_of_range_scores(self):
        for bad in ("0.0", "1.5"):
            text = corpus_text("expansion_or_worked.txt").replace("1.0", bad)
            with pytest.raises(DirectiveParseError):
                wire.parse_expansion(text)

    def test_score_one_accepted(self):
        # The worked example ranks its best alternative at exactly 1.0.
        d = wire.parse_expansion(corpus_text("expansion_or_worked.txt"))
        assert d.children[0].score == 1.0


class TestRepairParsing:
    def test_prune_then_add(self):
        d = wire.parse_repair(corpus_text("repair_prune_add_or.txt"))
        assert d.prunes == ["1246", "1245"]
        assert len(d.additions) == 1
        add = d.additions[0]
        assert (add.target_id, add.node_type) == ("1244", "OR")
        assert [c.score for c in add.children] == [0.9, 0.8]

    def test_empty_repair_is_legal(self):
        d = wire.parse_repair(corpus_text("repair_empty.txt"))
        assert d.is_empty and d.reasoning.startswith("No viable repair")

    def test_rejects_junk_line(self):
        with pytest.raises(DirectiveParseError):
            wire.parse_repair("PRUNE [1]\nDROP TABLE nodes")


class TestGlobalUpdateParsing:
    def test_prunes_and_updates(self):
        d = wire.parse_global_update(corpus_text("global_update.txt"))
        assert d.prunes == ["1.2", "1.3"]
        assert d.updates[0] == ("0.1.2", "type eggless cake in search bar")

    def test_empty_text_is_empty_directive(self):
        assert wire.parse_global_update("").is_empty
        assert wire.parse_global_update("\n\n").is_empty


class TestCompletionParsing:
    def test_verdicts(self):
        done = wire.parse_completion(corpus_text("completion_complete.txt"))
        assert done.complete and done.node_id == "0.1"
        pending = wire.parse_completion(corpus_text("completion_incomplete.txt"))
        assert not pending.complete and pending.node_id == "0.2"

    def test_missing_verdict_rejected(self):
        with pytest.raises(DirectiveParseError):
            wire.parse_completion("Reasoning: <<no verdict line>>")


class TestSummaryParsing:
    def test_all_fields(self):
        u = wire.parse_summary_update(corpus_text("summary_full.txt"))
        assert u.observation_highlights == [6028, 6033, 6042, 7204]
        assert "verification" not in u.observation_summary
        assert u.new_notes.startswith("Matching listing")

    def test_missing_required_section_rejected(self):
        text = corpus_text("summary_full.txt").replace("TASK PROGRESS", "TASK PROGRESSION")
        with pytest.raises(DirectiveParseError):
            wire.parse_summary_update(text)

    def test_empty_highlights(self):
        text = corpus_text("summary_full.txt").replace("[6028, 6033, 6042, 7204]", "[]")
        assert wire.parse_summary_update(text).observation_highlights == []


class TestConstraintsParsing:
    def test_two_item_example(self):
        payload = {
            "ITEMS": [
                {
                    "item": "laptop bag",
                    "constraints": ["Color: black", "Price: under $40", "Delivery time: within 2 days"],
                },
                {
                    "item": "wireless mouse",
                    "constraints": ["Price: under $25", "Type: wireless", "Delivery time: within 2 days"],
                },
            ]
        }
        items = wire.parse_item_constraints(json.dumps(payload))
        assert [i.item for i in items] == ["laptop bag", "wireless mouse"]
        assert items[0].constraints == (
            "Color: black",
            "Price: under $40",
            "Delivery time: within 2 days",
        )

    def test_empty_items(self):
        assert wire.parse_item_constraints('{"ITEMS": []}') == []

    def test_duplicate_item_types_collapse(self):
        payload = {"ITEMS": [{"item": "desk", "constraints": []}, {"item": "Desk", "constraints": []}]}
        assert len(wire.parse_item_constraints(json.dumps(payload))) == 1

    def test_code_fence_tolerated(self):
        items = wire.parse_item_constraints('```json\n{"ITEMS": []}\n```')
        assert items == []

    def test_round_trip(self):
        items = wire.parse_item_constraints(corpus_json())
        assert wire.parse_item_constraints(wire.render_item_constraints(items)) == items

    def test_bad_json_rejected(self):
        with pytest.raises(DirectiveParseError):
            wire.parse_item_constraints("not json at all")
        with pytest.raises(DirectiveParseError):
            wire.parse_item_constraints('{"WRONG": []}')


def corpus_json() -> str:
    return json.dumps(
        {
            "ITEMS": [
                {"item": "standing desk", "constraints": ["Price: under $350", "cable management tray"]}
            ]
        }
    )


class TestChildLists:
    def test_numbering_stripped(self):
        children = wire.parse_child_list("1. First; 2. Second", scored=False)
        assert [c.description for c in children] == ["First", "Second"]

    def test_blank_rejected(self):
        with pytest.raises(DirectiveParseError):
            wire.parse_child_list("  ;  ", scored=False)

    def test_stray_score_on_and_children_dropped(self):
        children = wire.parse_child_list("1. First (score: 0.9)", scored=False)
        assert children[0].score is None
