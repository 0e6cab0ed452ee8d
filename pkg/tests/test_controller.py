"""Scripted and remote controllers share one parser path."""

from __future__ import annotations

import json

import httpx
import pytest

from andorplan.controller.base import ContextBundle, ControllerTransportError, ScriptMissError
from andorplan.controller.directives import DirectiveParseError
from andorplan.controller.remote import RemoteLLMController, truncate_oldest_first
from andorplan.controller.scripted import (
    ControllerScript,
    ScriptedController,
    ScriptError,
)
from andorplan.environment import Observation
from andorplan.tree import NodeType, PlanTree

from conftest import SCENARIO_DIR


def observation() -> Observation:
    return Observation(url="https://x.example/", page_text="[7] link 'next'", elements={})


def golden_script() -> ControllerScript:
    return ControllerScript.from_file(str(SCENARIO_DIR / "golden.script"))


def root_node():
    tree = PlanTree("find the recipe")
    return tree.root


class TestScriptFiles:
    def test_sections_parsed(self):
        script = golden_script()
        assert set(script.expansions) == {"1", "1.1", "1.2", "1.2.1", "1.3"}
        assert "1" in script.completions
        assert script.response is not None

    def test_duplicate_section_rejected(self):
        text = "[expand 1]\nNode ID: <<1>>\n\n[expand 1]\nNode ID: <<1>>\n"
        with pytest.raises(ScriptError):
            ControllerScript.from_text(text)

    def test_content_before_sections_rejected(self):
        with pytest.raises(ScriptError):
            ControllerScript.from_text("stray text\n[expand 1]\n")

    def test_execution_count_refinement(self):
        text = (
            "[expand 5]\n"
            "Node ID: <<5>>\nNode Description: <<d>>\nNode Type: <<Atomic>>\n"
            "Expansion: <<click [1]>>\nReasoning: <<r>>\n"
            "[expand 5 @2]\n"
            "Node ID: <<5>>\nNode Description: <<d>>\nNode Type: <<Atomic>>\n"
            "Expansion: <<click [2]>>\nReasoning: <<r>>\n"
        )
        controller = ScriptedController(ControllerScript.from_text(text))
        tree = PlanTree("t", root_id="5")
        ctx = ContextBundle()
        tree.root.execution_count = 1
        assert controller.expand_node(tree.root, ctx).action == "click [1]"
        # A fresh node object at execution_count 2 hits the refined entry.
        tree2 = PlanTree("t", root_id="5")
        tree2.root.execution_count = 2
        assert controller.expand_node(tree2.root, ctx).action == "click [2]"


class TestScriptedController:
    def test_deterministic_lookup(self):
        ctx = ContextBundle()
        node = root_node()
        a = ScriptedController(golden_script()).expand_node(node, ctx)
        b = ScriptedController(golden_script()).expand_node(node, ctx)
        assert a == b

    def test_expansion_miss_always_raises(self):
        controller = ScriptedController(ControllerScript(), default_mode="noop")
        with pytest.raises(ScriptMissError):
            controller.expand_node(root_node(), ContextBundle())

    def test_noop_defaults(self):
        controller = ScriptedController(ControllerScript(), default_mode="noop")
        node = root_node()
        node.set_type(NodeType.AND)
        ctx = ContextBundle(task_description="t")
        assert controller.revise_and_node(node, ctx, "why").is_empty
        assert controller.global_tree_update("tree", ctx).is_empty
        verdict = controller.check_for_completion_and(node, ctx)
        assert verdict.complete and verdict.node_id == node.id
        update = controller.full_update(ctx, observation())
        assert update.observation_summary.startswith("Page https://x.example/")
        assert controller.extract_constraints("t") == []
        assert controller.update_memory(ctx, observation(), "") == ""
        assert "No grounded answer" in controller.compose_final_response("t", [], "")

    def test_fail_mode_raises_everywhere(self):
        controller = ScriptedController(ControllerScript(), default_mode="fail")
        node = root_node()
        node.set_type(NodeType.AND)
        ctx = ContextBundle()
        for call in (
            lambda: controller.revise_and_node(node, ctx, "r"),
            lambda: controller.global_tree_update("", ctx),
            lambda: controller.check_for_completion_and(node, ctx),
            lambda: controller.full_update(ctx, observation()),
            lambda: controller.extract_constraints("t"),
            lambda: controller.update_memory(ctx, observation(), ""),
            lambda: controller.compose_final_response("t", [], ""),
        ):
            with pytest.raises(ScriptMissError):
                call()

    def test_repair_call_index_refinement(self):
        text = (
            "[repair 4 #1]\nPRUNE [4.1]\nReasoning <<first>>\n"
            "[repair 4]\nReasoning <<fallback>>\n"
        )
        controller = ScriptedController(ControllerScript.from_text(text))
        tree = PlanTree("t", root_id="4")
        tree.root.set_type(NodeType.AND)
        tree.add_child(tree.root, "c")
        first = controller.revise_and_node(tree.root, ContextBundle(), "r")
        assert first.prunes == ["4.1"]
        second = controller.revise_and_node(tree.root, ContextBundle(), "r")
        assert second.is_empty and second.reasoning == "fallback"

    def test_grounded_response_uses_notes(self):
        controller = ScriptedController(ControllerScript())
        text = controller.compose_final_response("t", ["found the recipe"], "")
        assert "found the recipe" in text


def chat_transport(replies):
    """Fake chat-completions endpoint cycling through canned replies."""
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(json.loads(request.content))
        body = replies[min(len(calls) - 1, len(replies) - 1)]
        if body is None:
            return httpx.Response(500, json={"error": "boom"})
        return httpx.Response(
            200, json={"choices": [{"message": {"content": body}}]}
        )

    return httpx.MockTransport(handler), calls


def remote(replies, **kwargs) -> tuple[RemoteLLMController, list]:
    transport, calls = chat_transport(replies)
    controller = RemoteLLMController(
        base_url="https://llm.example/v1",
        model="m-test",
        client=httpx.Client(transport=transport),
        **kwargs,
    )
    return controller, calls


class TestRemoteController:
    def test_expansion_parses_via_shared_parser(self):
        reply = (
            "Node ID: <<1>>\nNode Description: <<d>>\nNode Type: <<Atomic>>\n"
            "Expansion: <<click [5]>>\nReasoning: <<r>>"
        )
        controller, calls = remote([reply])
        directive = controller.expand_node(root_node(), ContextBundle())
        assert directive.action == "click [5]"
        assert calls[0]["model"] == "m-test"
        assert calls[0]["temperature"] == 0

    def test_malformed_output_is_a_parse_error(self):
        controller, _ = remote(["this is not a directive"])
        with pytest.raises(DirectiveParseError):
            controller.expand_node(root_node(), ContextBundle())

    def test_transport_failure_retries_then_raises(self):
        controller, calls = remote([None, None, None], max_attempts=3)
        with pytest.raises(ControllerTransportError):
            controller.global_tree_update("tree", ContextBundle())
        assert len(calls) == 3

    def test_transport_recovers_on_retry(self):
        controller, calls = remote([None, "PRUNE [1.2]"], max_attempts=2)
        directive = controller.global_tree_update("tree", ContextBundle())
        assert directive.prunes == ["1.2"]
        assert len(calls) == 2

    def test_prompt_carries_context_fields(self):
        reply = "COMPLETE <<1>>\nReasoning: <<ok>>"
        controller, calls = remote([reply])
        node = root_node()
        node.set_type(NodeType.AND)
        ctx = ContextBundle(
            task_description="the task text",
            task_progress_summary="progress so far",
        )
        verdict = controller.check_for_completion_and(node, ctx)
        assert verdict.complete
        prompt = calls[0]["messages"][0]["content"]
        assert "the task text" in prompt and "progress so far" in prompt

    def test_auth_header_from_env(self, monkeypatch):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "PRUNE [1]"}}]}
            )

        monkeypatch.setenv("TEST_TOKEN_VAR", "secret-token")
        controller = RemoteLLMController(
            base_url="https://llm.example/v1",
            model="m",
            api_key_env="TEST_TOKEN_VAR",
            client=httpx.Client(transport=httpx.MockTransport(handler)),
        )
        controller.global_tree_update("t", ContextBundle())
        assert seen["auth"] == "Bearer secret-token"

    def test_trace_records_redact_credentials(self, monkeypatch):
        monkeypatch.setenv("TEST_TOKEN_VAR", "secret-token")
        records = []
        controller = RemoteLLMController(
            base_url="https://llm.example/v1",
            model="m",
            api_key_env="TEST_TOKEN_VAR",
            client=httpx.Client(transport=chat_transport(["PRUNE [1.2]"])[0]),
            trace=lambda **payload: records.append(payload),
        )
        controller.global_tree_update("tree", ContextBundle())
        assert records[0]["op"] == "global_update"
        assert records[0]["auth"] == "<redacted>"
        assert records[0]["response"] == "PRUNE [1.2]"
        assert "secret-token" not in str(records)

    def test_trace_records_transport_faults(self):
        records = []
        transport, _ = chat_transport([None, "PRUNE [1]"])
        controller = RemoteLLMController(
            base_url="https://llm.example/v1",
            model="m",
            client=httpx.Client(transport=transport),
            max_attempts=2,
            trace=lambda **payload: records.append(payload),
        )
        controller.global_tree_update("tree", ContextBundle())
        assert len(records) == 2
        assert records[0]["error"] and not records[0]["response"]
        assert records[1]["response"] == "PRUNE [1]"

    def test_every_template_placeholder_is_supplied(self):
        import re

        from andorplan.controller.remote import load_template

        supplied = {
            "task_description", "item_constraints", "task_progress",
            "notes_summary", "candidate_table", "local_tree_info",
            "action_history", "interaction_history", "observation_summary",
            "observation", "node_id", "node_description", "node_type",
            "children", "reason_for_repair", "tree_text", "notes",
            "current_table",
        }
        for name in (
            "expansion", "repair", "global_update", "completion",
            "summary", "constraints", "memory_commands", "final_response",
        ):
            used = set(re.findall(r"\$([a-z_]+)", load_template(name).template))
            assert used <= supplied, (name, used - supplied)

    def test_truncation_keeps_newest_tail(self):
        text = "old " * 100 + "NEWEST"
        clipped = truncate_oldest_first(text, 40)
        assert clipped.endswith("NEWEST")
        assert len(clipped) <= 40 + len("...[truncated]...\n")
        assert truncate_oldest_first("short", 40) == "short"
