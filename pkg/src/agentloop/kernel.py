"""Shared domain types: agent configuration, drives, triggers, and directives.

Everything here is an immutable value object. Parsing is lenient (bad field
values survive into the dataclass), validation is strict and returns a report
instead of raising, so callers can show every problem at once.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields

DRIVE_KINDS = ("long_term", "short_term", "reactive")
DRIVE_STATUSES = ("active", "satisfied", "halted")
TRIGGER_MODES = ("exact", "substring")

DEFAULT_STEP_LIMIT = 20
DEFAULT_RETRIEVAL_K = 4

_WS_RUN = re.compile(r"\s+")


class ConfigError(ValueError):
    """Raised when an agent config payload cannot be parsed at all."""


def normalize_text(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace runs to single spaces.

    Idempotent; used for trigger matching and scripted-rule matching.
    """
    return _WS_RUN.sub(" ", text.strip()).lower()


@dataclass(frozen=True)
class Drive:
    """A goal record. Reactive drives carry the trigger pattern/response pair."""

    drive_id: str
    kind: str
    prompt_text: str = ""
    priority: int = 0
    status: str = "active"
    pattern: str = ""
    response: str = ""


@dataclass(frozen=True)
class Trigger:
    trigger_id: str
    pattern: str
    mode: str = "substring"
    response: str = ""
    enabled: bool = True


@dataclass(frozen=True)
class MemoryPolicy:
    """User-authorization gates for persisting user-derived data."""

    store_user_profile: bool = True
    store_conversation: bool = True


@dataclass(frozen=True)
class AgentConfig:
    agent_id: str = ""
    name: str = ""
    profile: str = ""
    drives: tuple[Drive, ...] = ()
    triggers: tuple[Trigger, ...] = ()
    tool_ids: tuple[str, ...] = ()
    memory_policy: MemoryPolicy = MemoryPolicy()
    step_limit: int = DEFAULT_STEP_LIMIT
    retrieval_k: int = DEFAULT_RETRIEVAL_K


@dataclass(frozen=True)
class Violation:
    field: str
    reason: str


def validate_agent_config(config: AgentConfig) -> list[Violation]:
    """Return every invariant violation in ``config``; empty list means valid."""
    report: list[Violation] = []
    if not config.name.strip():
        report.append(Violation("name", "empty"))
    for i, drive in enumerate(config.drives):
        prefix = f"drives[{i}]"
        if drive.kind not in DRIVE_KINDS:
            report.append(Violation(f"{prefix}.kind", f"unknown kind {drive.kind!r}"))
        if drive.status not in DRIVE_STATUSES:
            report.append(Violation(f"{prefix}.status", f"unknown status {drive.status!r}"))
        if drive.kind == "long_term" and drive.status == "satisfied":
            report.append(Violation(f"{prefix}.status", "long_term drives never become satisfied"))
        if drive.kind == "reactive":
            if not drive.pattern.strip():
                report.append(Violation(f"{prefix}.pattern", "empty"))
            if not drive.response.strip():
                report.append(Violation(f"{prefix}.response", "empty"))
    for i, trigger in enumerate(config.triggers):
        prefix = f"triggers[{i}]"
        if not trigger.pattern.strip():
            report.append(Violation(f"{prefix}.pattern", "empty"))
        if trigger.mode not in TRIGGER_MODES:
            report.append(Violation(f"{prefix}.mode", f"unknown mode {trigger.mode!r}"))
    if config.step_limit < 1:
        report.append(Violation("step_limit", "must be >= 1"))
    if config.retrieval_k < 1:
        report.append(Violation("retrieval_k", "must be >= 1"))
    return report


def _reject_unknown(payload: dict, allowed: set[str], where: str) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown fields in {where}: {sorted(unknown)}")


def _parse_drive(payload: dict) -> Drive:
    if not isinstance(payload, dict):
        raise ConfigError("drive entry must be an object")
    _reject_unknown(payload, {f.name for f in fields(Drive)}, "drive")
    return Drive(
        drive_id=str(payload.get("drive_id", "")),
        kind=str(payload.get("kind", "")),
        prompt_text=str(payload.get("prompt_text", "")),
        priority=int(payload.get("priority", 0)),
        status=str(payload.get("status", "active")),
        pattern=str(payload.get("pattern", "")),
        response=str(payload.get("response", "")),
    )


def _parse_trigger(payload: dict) -> Trigger:
    if not isinstance(payload, dict):
        raise ConfigError("trigger entry must be an object")
    _reject_unknown(payload, {f.name for f in fields(Trigger)}, "trigger")
    return Trigger(
        trigger_id=str(payload.get("trigger_id", "")),
        pattern=str(payload.get("pattern", "")),
        mode=str(payload.get("mode", "substring")),
        response=str(payload.get("response", "")),
        enabled=bool(payload.get("enabled", True)),
    )


def config_from_dict(payload: dict) -> AgentConfig:
    """Parse the canonical JSON shape of an agent config. Unknown fields are rejected."""
    if not isinstance(payload, dict):
        raise ConfigError("agent config must be a JSON object")
    _reject_unknown(payload, {f.name for f in fields(AgentConfig)}, "agent config")
    policy_payload = payload.get("memory_policy", {})
    if not isinstance(policy_payload, dict):
        raise ConfigError("memory_policy must be an object")
    _reject_unknown(policy_payload, {"store_user_profile", "store_conversation"}, "memory_policy")
    return AgentConfig(
        agent_id=str(payload.get("agent_id", "")),
        name=str(payload.get("name", "")),
        profile=str(payload.get("profile", "")),
        drives=tuple(_parse_drive(d) for d in payload.get("drives", [])),
        triggers=tuple(_parse_trigger(t) for t in payload.get("triggers", [])),
        tool_ids=tuple(str(t) for t in payload.get("tool_ids", [])),
        memory_policy=MemoryPolicy(
            store_user_profile=bool(policy_payload.get("store_user_profile", True)),
            store_conversation=bool(policy_payload.get("store_conversation", True)),
        ),
        step_limit=int(payload.get("step_limit", DEFAULT_STEP_LIMIT)),
        retrieval_k=int(payload.get("retrieval_k", DEFAULT_RETRIEVAL_K)),
    )


def config_to_dict(config: AgentConfig, include_agent_id: bool = True) -> dict:
    doc: dict = {}
    if include_agent_id:
        doc["agent_id"] = config.agent_id
    doc.update(
        {
            "name": config.name,
            "profile": config.profile,
            "drives": [
                {
                    "drive_id": d.drive_id,
                    "kind": d.kind,
                    "prompt_text": d.prompt_text,
                    "priority": d.priority,
                    "status": d.status,
                    "pattern": d.pattern,
                    "response": d.response,
                }
                for d in config.drives
            ],
            "triggers": [
                {
                    "trigger_id": t.trigger_id,
                    "pattern": t.pattern,
                    "mode": t.mode,
                    "response": t.response,
                    "enabled": t.enabled,
                }
                for t in config.triggers
            ],
            "tool_ids": list(config.tool_ids),
            "memory_policy": {
                "store_user_profile": config.memory_policy.store_user_profile,
                "store_conversation": config.memory_policy.store_conversation,
            },
            "step_limit": config.step_limit,
            "retrieval_k": config.retrieval_k,
        }
    )
    return doc


def config_from_json(text: str) -> AgentConfig:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(payload)


# --- Directives -------------------------------------------------------------
#
# The parsed decision emitted each cycle. Exactly one variant per decision;
# canonical JSON shapes are produced by directive_to_dict and accepted by the
# thought-stream parser.


@dataclass(frozen=True)
class OfferedAction:
    """A button the agent offers alongside a response."""

    label: str
    action_id: str


@dataclass(frozen=True)
class Respond:
    text: str
    actions: tuple[OfferedAction, ...] = ()


@dataclass(frozen=True)
class InvokeTool:
    tool_id: str
    args: dict


@dataclass(frozen=True)
class QueryMemory:
    store_kind: str
    query: str


@dataclass(frozen=True)
class Plan:
    subgoals: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.subgoals:
            raise ValueError("Plan.subgoals must be non-empty")


@dataclass(frozen=True)
class ChainStep:
    tool_id: str
    args: dict
    bind: str | None = None


@dataclass(frozen=True)
class Chain:
    steps: tuple[ChainStep, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("Chain.steps must be non-empty")


@dataclass(frozen=True)
class Finish:
    result: str


Directive = Respond | InvokeTool | QueryMemory | Plan | Chain | Finish

DIRECTIVE_ACTIONS = ("respond", "invoke_tool", "query_memory", "plan", "chain", "finish")


def directive_to_dict(directive: Directive) -> dict:
    """Render a directive in its canonical JSON object shape."""
    if isinstance(directive, Respond):
        doc: dict = {"action": "respond", "text": directive.text}
        if directive.actions:
            doc["actions"] = [
                {"label": a.label, "action_id": a.action_id} for a in directive.actions
            ]
        return doc
    if isinstance(directive, InvokeTool):
        return {"action": "invoke_tool", "tool": directive.tool_id, "args": dict(directive.args)}
    if isinstance(directive, QueryMemory):
        return {"action": "query_memory", "store": directive.store_kind, "query": directive.query}
    if isinstance(directive, Plan):
        return {"action": "plan", "subgoals": list(directive.subgoals)}
    if isinstance(directive, Chain):
        steps = []
        for step in directive.steps:
            entry: dict = {"tool": step.tool_id, "args": dict(step.args)}
            if step.bind is not None:
                entry["bind"] = step.bind
            steps.append(entry)
        return {"action": "chain", "steps": steps}
    if isinstance(directive, Finish):
        return {"action": "finish", "result": directive.result}
    raise TypeError(f"not a directive: {directive!r}")


def directive_to_json(directive: Directive) -> str:
    return json.dumps(directive_to_dict(directive), ensure_ascii=False)


def directive_from_dict(doc: dict) -> Directive:
    """Strict loader for canonical directive objects (storage path)."""
    action = doc.get("action")
    if action == "respond":
        return Respond(
            text=str(doc["text"]),
            actions=tuple(
                OfferedAction(label=str(a["label"]), action_id=str(a["action_id"]))
                for a in doc.get("actions", [])
            ),
        )
    if action == "invoke_tool":
        return InvokeTool(tool_id=str(doc["tool"]), args=dict(doc["args"]))
    if action == "query_memory":
        return QueryMemory(store_kind=str(doc["store"]), query=str(doc["query"]))
    if action == "plan":
        return Plan(subgoals=tuple(str(s) for s in doc["subgoals"]))
    if action == "chain":
        return Chain(
            steps=tuple(
                ChainStep(tool_id=str(s["tool"]), args=dict(s["args"]), bind=s.get("bind"))
                for s in doc["steps"]
            )
        )
    if action == "finish":
        return Finish(result=str(doc["result"]))
    raise ValueError(f"unknown directive action {action!r}")
