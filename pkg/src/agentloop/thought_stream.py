"""Central information processor: thought in, directive out.

A completion is scanned for its last top-level JSON object, which is mapped
onto the directive grammar. Parse failures trigger a bounded repair loop
(original prompt plus a suffix restating the grammar); exhaustion falls back
to a fixed respond directive so a cycle always yields something actionable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .kernel import (
    Chain,
    ChainStep,
    Directive,
    Finish,
    InvokeTool,
    OfferedAction,
    Plan,
    QueryMemory,
    Respond,
)
from .llm import ModelRegistry, render_prompt
from .memory import STORE_KINDS
from .working_memory import Thought, serialize_thought

REPAIR_BUDGET = 2

FALLBACK_TEXT = "I could not determine a next step."

REPAIR_SUFFIX_TEMPLATE = """

Your previous reply could not be used (problem: {reason}).
Reply with exactly one JSON object using one of these actions:
{{"action":"respond","text":"<message>"}}
{{"action":"invoke_tool","tool":"<tool_id>","args":{{}}}}
{{"action":"query_memory","store":"<store_kind>","query":"<query>"}}
{{"action":"plan","subgoals":["<subgoal>", "..."]}}
{{"action":"chain","steps":[{{"tool":"<tool_id>","args":{{}}}}]}}
{{"action":"finish","result":"<result>"}}
"""


@dataclass(frozen=True)
class ParseError:
    reason: str  # no_json | unknown_action | missing_field | malformed_field
    raw: str


@dataclass(frozen=True)
class ParseOutcome:
    directive: Directive | None = None
    error: ParseError | None = None

    def __post_init__(self) -> None:
        if (self.directive is None) == (self.error is None):
            raise ValueError("exactly one of directive/error must be set")

    @property
    def ok(self) -> bool:
        return self.directive is not None


@dataclass(frozen=True)
class StepAttempt:
    """One provider call inside step(), recorded for the session trace."""

    prompt: str
    completion: str
    error_reason: str | None


def _last_json_object(text: str) -> dict | None:
    """Return the last top-level JSON object in ``text``, or None."""
    decoder = json.JSONDecoder()
    found: dict | None = None
    pos = 0
    while True:
        start = text.find("{", pos)
        if start < 0:
            break
        try:
            value, end = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            pos = start + 1
            continue
        if isinstance(value, dict):
            found = value
        pos = end
    return found


def _required_str(obj: dict, key: str) -> str:
    if key not in obj:
        raise KeyError(key)
    value = obj[key]
    if not isinstance(value, str):
        raise TypeError(key)
    return value


def _parse_actions(obj: dict) -> tuple[OfferedAction, ...]:
    raw = obj.get("actions", [])
    if not isinstance(raw, list):
        raise TypeError("actions")
    actions = []
    for entry in raw:
        if not isinstance(entry, dict):
            raise TypeError("actions")
        actions.append(
            OfferedAction(label=_required_str(entry, "label"), action_id=_required_str(entry, "action_id"))
        )
    return tuple(actions)


def _parse_chain_steps(obj: dict) -> tuple[ChainStep, ...]:
    raw = obj["steps"]
    if not isinstance(raw, list) or not raw:
        raise TypeError("steps")
    steps = []
    for entry in raw:
        if not isinstance(entry, dict):
            raise TypeError("steps")
        args = entry.get("args", {})
        if not isinstance(args, dict):
            raise TypeError("args")
        bind = entry.get("bind")
        if bind is not None and not isinstance(bind, str):
            raise TypeError("bind")
        steps.append(ChainStep(tool_id=_required_str(entry, "tool"), args=args, bind=bind))
    return tuple(steps)


def parse_directive(completion: str) -> ParseOutcome:
    """Map a model completion onto the directive grammar.

    Never raises; failures come back as the ParseError arm.
    """
    obj = _last_json_object(completion)
    if obj is None:
        return ParseOutcome(error=ParseError("no_json", completion))
    action = obj.get("action")
    if action is None:
        return ParseOutcome(error=ParseError("missing_field", completion))
    if not isinstance(action, str) or action not in (
        "respond",
        "invoke_tool",
        "query_memory",
        "plan",
        "chain",
        "finish",
    ):
        return ParseOutcome(error=ParseError("unknown_action", completion))
    try:
        if action == "respond":
            return ParseOutcome(
                directive=Respond(text=_required_str(obj, "text"), actions=_parse_actions(obj))
            )
        if action == "invoke_tool":
            if "args" not in obj:
                raise KeyError("args")
            args = obj["args"]
            if not isinstance(args, dict):
                raise TypeError("args")
            return ParseOutcome(directive=InvokeTool(tool_id=_required_str(obj, "tool"), args=args))
        if action == "query_memory":
            store = _required_str(obj, "store")
            if store not in STORE_KINDS:
                return ParseOutcome(error=ParseError("malformed_field", completion))
            return ParseOutcome(directive=QueryMemory(store_kind=store, query=_required_str(obj, "query")))
        if action == "plan":
            subgoals = obj.get("subgoals")
            if subgoals is None:
                raise KeyError("subgoals")
            if (
                not isinstance(subgoals, list)
                or not subgoals
                or not all(isinstance(s, str) for s in subgoals)
            ):
                raise TypeError("subgoals")
            return ParseOutcome(directive=Plan(subgoals=tuple(subgoals)))
        if action == "chain":
            if "steps" not in obj:
                raise KeyError("steps")
            return ParseOutcome(directive=Chain(steps=_parse_chain_steps(obj)))
        return ParseOutcome(directive=Finish(result=_required_str(obj, "result")))
    except KeyError:
        return ParseOutcome(error=ParseError("missing_field", completion))
    except TypeError:
        return ParseOutcome(error=ParseError("malformed_field", completion))


def build_repair_prompt(original_prompt: str, error: ParseError) -> str:
    """Original prompt plus a fixed suffix naming the failure and the grammar."""
    return original_prompt + REPAIR_SUFFIX_TEMPLATE.format(reason=error.reason)


class ThoughtStream:
    """Runs a thought through the model layer and parses the directive."""

    def __init__(self, registry: ModelRegistry):
        self.registry = registry

    def step(
        self,
        thought: Thought,
        task_kind: str,
        attempts: list[StepAttempt] | None = None,
    ) -> Directive:
        """One decision: serialize, schedule, render, complete, parse.

        Performs 1 to 1+REPAIR_BUDGET provider calls; after the repair budget
        is exhausted the fixed fallback respond directive is returned. Each
        attempt is appended to ``attempts`` when given.
        """
        thought_text = serialize_thought(thought)
        model, template = self.registry.schedule(task_kind)
        prompt = render_prompt(template, thought_text)

        current_prompt = prompt
        for _ in range(1 + REPAIR_BUDGET):
            completion = self.registry.complete(model, current_prompt)
            outcome = parse_directive(completion)
            if attempts is not None:
                attempts.append(
                    StepAttempt(
                        prompt=current_prompt,
                        completion=completion,
                        error_reason=None if outcome.ok else outcome.error.reason,
                    )
                )
            if outcome.ok:
                assert outcome.directive is not None
                return outcome.directive
            assert outcome.error is not None
            current_prompt = build_repair_prompt(prompt, outcome.error)
        return Respond(text=FALLBACK_TEXT)
