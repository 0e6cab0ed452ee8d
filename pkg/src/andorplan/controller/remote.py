"""Chat-completion-backed controller.

Fills the prompt template assets, posts them to a standard chat-completions
endpoint, and runs the reply through the same directive parsers the scripted
controller uses. Credentials come from an environment variable, never from
flags or config files; request/response pairs are logged with the credential
redacted.
"""

from __future__ import annotations

import logging
import os
from importlib import resources
from string import Template
from typing import TYPE_CHECKING, Callable, Optional

import httpx

from . import directives as wire
from .base import ContextBundle, ControllerTransportError

if TYPE_CHECKING:
    from ..environment import Observation
    from ..tree import Node

logger = logging.getLogger(__name__)

DEFAULT_CHAR_BUDGET = 24_000


def load_template(name: str) -> Template:
    text = resources.files("andorplan.controller").joinpath(f"prompts/{name}.txt").read_text(
        encoding="utf-8"
    )
    return Template(text)


def truncate_oldest_first(text: str, budget: int) -> str:
    """Keep the newest tail of an overlong context string."""
    if len(text) <= budget:
        return text
    return "...[truncated]...\n" + text[-budget:]


class RemoteLLMController:
    """One-call-at-a-time client for a chat-completions endpoint.

    ``trace`` receives one record per completed exchange for the trajectory
    stream; it never sees the credential, which lives only in the environment
    variable named by ``api_key_env``.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "ANDORPLAN_API_KEY",
        timeout: float = 60.0,
        max_attempts: int = 3,
        char_budget: int = DEFAULT_CHAR_BUDGET,
        client: Optional[httpx.Client] = None,
        trace: Optional[Callable[..., object]] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_attempts = max(1, max_attempts)
        self.char_budget = char_budget
        self.trace = trace
        self._op = ""
        self._client = client or httpx.Client(timeout=timeout)
        self._templates = {
            name: load_template(name)
            for name in (
                "expansion",
                "repair",
                "global_update",
                "completion",
                "summary",
                "constraints",
                "memory_commands",
                "final_response",
            )
        }

    # -- transport ---------------------------------------------------------

    def _complete(self, prompt: str) -> str:
        headers = {}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        last_error: Optional[Exception] = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self._client.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                response.raise_for_status()
                content = response.json()["choices"][0]["message"]["content"]
                self._trace(attempt, prompt, content, error="")
                return content
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                logger.warning("chat-completion attempt %d failed: %s", attempt, exc)
                self._trace(attempt, prompt, "", error=str(exc))
        raise ControllerTransportError(f"endpoint unreachable: {last_error}")

    def _trace(self, attempt: int, prompt: str, content: str, error: str) -> None:
        if self.trace is None:
            return
        self.trace(
            op=self._op,
            model=self.model,
            endpoint=self.base_url,
            auth="<redacted>" if os.environ.get(self.api_key_env) else "none",
            attempt=attempt,
            prompt_chars=len(prompt),
            response=content,
            error=error,
        )

    def _fill(self, name: str, **values: str) -> str:
        self._op = name
        budget = self.char_budget
        clipped = {
            key: truncate_oldest_first(str(value), budget) for key, value in values.items()
        }
        return self._templates[name].safe_substitute(**clipped)

    @staticmethod
    def _ctx_fields(ctx: ContextBundle) -> dict[str, str]:
        return {
            "task_description": ctx.task_description,
            "item_constraints": wire.render_item_constraints(ctx.item_constraints),
            "task_progress": ctx.task_progress_summary,
            "notes_summary": ctx.notes_summary,
            "candidate_table": ctx.candidate_table_excerpt,
            "local_tree_info": ctx.local_tree_info,
            "action_history": "\n".join(ctx.action_history),
            "interaction_history": "\n".join(
                f"{summary} -> {action}" for summary, action in ctx.interaction_history
            ),
            "observation_summary": ctx.observation_summary,
            "observation": ctx.current_observation.page_text if ctx.current_observation else "",
        }

    @staticmethod
    def _children_text(node: "Node") -> str:
        return "\n".join(
            f"[{c.id}] ({c.status.value}) {c.description}" for c in node.children
        )

    # -- controller surface --------------------------------------------------

    def expand_node(self, node: "Node", ctx: ContextBundle) -> wire.ExpansionDirective:
        prompt = self._fill(
            "expansion",
            node_id=node.id,
            node_description=node.description,
            **self._ctx_fields(ctx),
        )
        return wire.parse_expansion(self._complete(prompt))

    def _revise(self, node: "Node", ctx: ContextBundle, reason: str) -> wire.RepairDirective:
        prompt = self._fill(
            "repair",
            node_id=node.id,
            node_type=node.type.value,
            node_description=node.description,
            children=self._children_text(node),
            reason_for_repair=reason,
            **self._ctx_fields(ctx),
        )
        return wire.parse_repair(self._complete(prompt))

    def revise_and_node(self, node, ctx, reason):
        return self._revise(node, ctx, reason)

    def revise_or_node(self, node, ctx, reason):
        return self._revise(node, ctx, reason)

    def global_tree_update(self, tree_text: str, ctx: ContextBundle) -> wire.GlobalUpdateDirective:
        prompt = self._fill("global_update", tree_text=tree_text, **self._ctx_fields(ctx))
        return wire.parse_global_update(self._complete(prompt))

    def check_for_completion_and(self, node: "Node", ctx: ContextBundle) -> wire.CompletionVerdict:
        prompt = self._fill(
            "completion",
            node_id=node.id,
            node_description=node.description,
            children=self._children_text(node),
            **self._ctx_fields(ctx),
        )
        return wire.parse_completion(self._complete(prompt))

    def full_update(self, ctx: ContextBundle, observation: "Observation") -> wire.SummaryUpdate:
        fields = self._ctx_fields(ctx)
        fields["observation"] = observation.page_text
        prompt = self._fill("summary", **fields)
        return wire.parse_summary_update(self._complete(prompt))

    def extract_constraints(self, task_description: str) -> list[wire.ItemConstraints]:
        prompt = self._fill("constraints", task_description=task_description)
        return wire.parse_item_constraints(self._complete(prompt))

    def update_memory(
        self, ctx: ContextBundle, observation: "Observation", table_text: str
    ) -> str:
        fields = self._ctx_fields(ctx)
        fields["observation"] = observation.page_text
        fields["current_table"] = table_text
        prompt = self._fill("memory_commands", **fields)
        return self._complete(prompt)

    def compose_final_response(
        self, task_description: str, notes: list[str], tree_text: str
    ) -> str:
        prompt = self._fill(
            "final_response",
            task_description=task_description,
            notes="\n".join(f"- {note}" for note in notes),
            tree_text=tree_text,
        )
        return wire.parse_task_response(self._complete(prompt))
