"""Question understanding and decomposition.

Two planners behind one contract: a deterministic template planner over the
shared catalog, and an LLM-backed planner that builds the tree one operator
per model call, representing unresolved sub-questions as (SUB "...") leaves.
Planning never touches event data; only the question reaches the model.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from importlib import resources
from typing import Optional, Tuple

from . import templates
from .plan_dsl import (SUB, OperatorNode, OperatorTree, PlanError, parse_plan,
                       serialize_plan, validate_plan)


class PlanningFailed(Exception):
    pass


class DepthExceeded(PlanningFailed):
    pass


class TransportError(Exception):
    pass


# --- template planner -----------------------------------------------------------


def template_plan(question: str) -> Optional[OperatorTree]:
    """Instantiates the catalog plan for a matching question; None if the
    question is outside the catalog (the caller may fall back to the LLM)."""
    matched = templates.match_question(question)
    if matched is None:
        return None
    template, slots = matched
    return template.build_plan(slots, " ".join(question.split()))


# --- LLM planner ------------------------------------------------------------------


@dataclass
class LlmClientConfig:
    endpoint: str
    model: str
    api_key_env: str = "EVENTQA_LLM_API_KEY"
    max_retries: int = 3
    temperature: float = 0.0
    icl_path: Optional[str] = None
    timeout: float = 30.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


_SYSTEM_PROMPT = """\
You decompose a personal-data question into an operator tree, one operator
per reply. Operators: RETRIEVE EXTRACT FILTER JOIN GROUP_BY UNNEST MAP APPLY
SUM AVG MAX MIN ARGMAX ARGMIN. Reply with exactly one s-expression for the
pending sub-question. Represent any sub-question you are not answering yet
as a placeholder leaf (SUB "sub-question text"). A simple sub-question that
just needs matching events is answered with (RETRIEVE "sub-question text").
Emit nothing but the s-expression."""


class LlmClient:
    """Minimal chat-completion client: request {model, messages, temperature},
    response {choices: [{message: {content}}]}."""

    def __init__(self, config: LlmClientConfig, transport=None):
        self.config = config
        if transport is None:
            import requests

            def transport(url, payload, headers):
                resp = requests.post(url, json=payload, headers=headers, timeout=config.timeout)
                resp.raise_for_status()
                return resp.json()

        self.transport = transport

    def complete(self, messages) -> str:
        headers = {"Content-Type": "application/json"}
        key_name = self.config.api_key_env
        if key_name and os.environ.get(key_name):
            headers["Authorization"] = f"Bearer {os.environ[key_name]}"
        payload = {"model": self.config.model, "messages": messages,
                   "temperature": self.config.temperature}
        try:
            doc = self.transport(self.config.endpoint, payload, headers)
            return doc["choices"][0]["message"]["content"]
        except TransportError:
            raise
        except Exception as err:
            raise TransportError(str(err)) from err


class MockTranscriptClient:
    """Offline stand-in replaying scripted responses; repeats the last one
    when the script runs out. Records every prompt for assertions."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def complete(self, messages) -> str:
        self.calls.append(messages)
        index = min(len(self.calls) - 1, len(self.responses) - 1)
        return self.responses[index]


@dataclass(frozen=True)
class DecompositionStep:
    question: str
    node: OperatorNode  # children, if any, are SUB placeholders


def _default_icl() -> str:
    return resources.files("eventqa").joinpath("data", "icl_decomposition.txt").read_text(encoding="utf-8")


def _load_icl(config: LlmClientConfig) -> str:
    if config.icl_path:
        with open(config.icl_path, "r", encoding="utf-8") as handle:
            return handle.read()
    return _default_icl()


def _check_emission(node: OperatorNode) -> None:
    if node.op == SUB:
        raise PlanError("emission must be an operator, not a placeholder")
    for child in node.children:
        if child.op != SUB:
            raise PlanError("emission must be a single operator; nest further "
                            "steps as (SUB \"...\") placeholders")


def llm_decompose_step(pending: str, partial_tree: str, client,
                       max_retries: int = 3, icl: str = "") -> DecompositionStep:
    """One model call (plus retries on parse failure) emitting the next
    operator for the pending sub-question."""
    messages = [
        {"role": "system", "content": _SYSTEM_PROMPT},
        {"role": "user", "content": f"Examples of decomposition steps:\n{icl}\n\n"
                                    f"Partial tree so far:\n{partial_tree}\n\n"
                                    f"Pending sub-question: {pending}"},
    ]
    for _ in range(max_retries + 1):
        content = client.complete(messages)
        try:
            node = parse_plan(content.strip(), allow_placeholders=True)
            _check_emission(node)
        except PlanError as err:
            messages.append({"role": "assistant", "content": content})
            messages.append({"role": "user", "content": f"That was invalid ({err}). "
                                                        "Reply with one corrected s-expression."})
            continue
        return DecompositionStep(pending, node)
    raise PlanningFailed(f"no parseable emission for {pending!r} after {max_retries} retries")


def _pending_placeholders(tree: OperatorNode):
    """(path, node) for every SUB leaf, breadth-first."""
    found = []

    def walk(node, path):
        if node.op == SUB:
            found.append((path, node))
        for i, child in enumerate(node.children):
            walk(child, path + (i,))

    walk(tree, ())
    return sorted(found, key=lambda pair: (len(pair[0]), pair[0]))


def _replace_at(tree: OperatorNode, path: Tuple[int, ...], new: OperatorNode) -> OperatorNode:
    if not path:
        return new
    children = list(tree.children)
    children[path[0]] = _replace_at(children[path[0]], path[1:], new)
    return replace(tree, children=tuple(children))


def llm_plan(question: str, client, config: Optional[LlmClientConfig] = None,
             max_depth: int = 8) -> OperatorTree:
    """Breadth-first decomposition loop; every step replaces one placeholder
    until none remain or the depth bound is hit."""
    config = config or LlmClientConfig(endpoint="", model="")
    icl = _load_icl(config)
    tree = OperatorNode(SUB, query=question)
    while True:
        pending = _pending_placeholders(tree)
        if not pending:
            break
        path, node = pending[0]
        if len(path) >= max_depth:
            raise DepthExceeded(f"decomposition exceeded depth {max_depth}")
        step = llm_decompose_step(node.query, serialize_plan(tree), client,
                                  config.max_retries, icl)
        emitted = step.node
        if emitted.sub_question is None:
            emitted = replace(emitted, sub_question=node.query)
        tree = _replace_at(tree, path, emitted)
    errors = [d for d in validate_plan(tree) if d.severity == "error"]
    if errors:
        raise PlanningFailed(f"decomposed plan invalid: {errors[0].message}")
    return tree


# --- dispatch ------------------------------------------------------------------------


def plan_question(question: str, planner: str = "auto", llm_client=None,
                  llm_config: Optional[LlmClientConfig] = None) -> OperatorTree:
    """Tries the configured planners in order; first success wins."""
    order = {"template": ("template",), "llm": ("llm",),
             "auto": ("template", "llm")}.get(planner)
    if order is None:
        raise ValueError(f"unknown planner {planner!r}")
    failures = []
    for name in order:
        if name == "template":
            tree = template_plan(question)
            if tree is not None:
                return tree
            failures.append("template: no catalog match")
        else:
            if llm_client is None:
                failures.append("llm: no client configured")
                continue
            try:
                return llm_plan(question, llm_client, llm_config)
            except PlanningFailed as err:
                failures.append(f"llm: {err}")
    raise PlanningFailed("; ".join(failures))
