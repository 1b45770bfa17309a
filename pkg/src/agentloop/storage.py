"""Plain-file persistence and portable agent bundles.

Everything is JSON or JSON-lines under one directory per agent, so state can
be inspected, diffed, and round-tripped without a database. Bundles are
canonical bytes: field-sorted JSON with the agent id stripped, so
export -> import -> export is byte-identical.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from .kernel import config_from_dict, config_to_dict, directive_from_dict, directive_to_dict
from .memory import MemoryStore
from .orchestrator import (
    AgentState,
    CycleTrace,
    Runtime,
    Session,
    WorkflowStore,
    WorkflowTrace,
    trace_to_dict,
)
from .tools import ToolRegistry, tool_spec_from_dict, tool_spec_to_dict
from .working_memory import format_instant

FORMAT_VERSION = 1


class NotFound(LookupError):
    pass


class CorruptState(ValueError):
    pass


class VersionUnsupported(ValueError):
    pass


class Malformed(ValueError):
    pass


def _agent_dir(data_dir: Path, agent_id: str) -> Path:
    return Path(data_dir) / "agents" / agent_id


def _workflow_to_dict(trace: WorkflowTrace) -> dict:
    return {
        "trace_id": trace.trace_id,
        "goal_text": trace.goal_text,
        "goal_vector": trace.goal_vector,
        "steps": [directive_to_dict(d) for d in trace.steps],
        "outcome": trace.outcome,
        "created_at": format_instant(trace.created_at),
    }


def _workflow_from_dict(doc: dict) -> WorkflowTrace:
    return WorkflowTrace(
        trace_id=str(doc["trace_id"]),
        goal_text=str(doc["goal_text"]),
        goal_vector=[float(v) for v in doc["goal_vector"]],
        steps=tuple(directive_from_dict(d) for d in doc["steps"]),
        outcome=str(doc["outcome"]),
        created_at=datetime.strptime(doc["created_at"], "%Y-%m-%dT%H:%M:%SZ").replace(
            tzinfo=timezone.utc
        ),
    )


def persist_agent(runtime: Runtime, data_dir: Path, agent_id: str) -> None:
    """Write the agent's full state under its data directory."""
    agent = runtime.agent(agent_id)
    root = _agent_dir(data_dir, agent_id)
    root.mkdir(parents=True, exist_ok=True)
    (root / "meta.json").write_text(
        json.dumps({"version": FORMAT_VERSION}), encoding="utf-8"
    )
    (root / "config.json").write_text(
        json.dumps(config_to_dict(agent.config), ensure_ascii=False, indent=2),
        encoding="utf-8",
    )
    (root / "tools.json").write_text(
        json.dumps(
            [tool_spec_to_dict(s) for s in agent.tools.imported_specs()],
            ensure_ascii=False,
            indent=2,
        ),
        encoding="utf-8",
    )
    (root / "workflows.json").write_text(
        json.dumps(
            [_workflow_to_dict(t) for t in agent.workflows.traces()],
            ensure_ascii=False,
            indent=2,
        ),
        encoding="utf-8",
    )
    (root / "web_cache.json").write_text(agent.tools.cache.to_json(), encoding="utf-8")
    agent.memory.data_dir = root / "memory"
    agent.memory.flush()


def load_agent(runtime: Runtime, data_dir: Path, agent_id: str) -> AgentState:
    """Rebuild an agent from disk and register it with the runtime."""
    root = _agent_dir(data_dir, agent_id)
    if not root.exists():
        raise NotFound(agent_id)
    meta_path = root / "meta.json"
    if meta_path.exists():
        version = json.loads(meta_path.read_text(encoding="utf-8")).get("version")
        if version != FORMAT_VERSION:
            raise CorruptState(f"unsupported on-disk version {version!r}")
    try:
        config = config_from_dict(json.loads((root / "config.json").read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptState(f"bad config for {agent_id}: {exc}") from exc

    memory = MemoryStore(
        data_dir=root / "memory",
        store_user_profile=config.memory_policy.store_user_profile,
        store_conversation=config.memory_policy.store_conversation,
    )
    memory.load()
    # Tool specs were mirrored into the tools store when first registered, so
    # reconstruction must not mirror them again.
    tools = ToolRegistry(memory=None, offline=runtime.offline)
    tools_path = root / "tools.json"
    if tools_path.exists():
        for entry in json.loads(tools_path.read_text(encoding="utf-8")):
            tools.register(tool_spec_from_dict(entry))
    tools.memory = memory
    cache_path = root / "web_cache.json"
    if cache_path.exists():
        tools.cache.load_json(cache_path.read_text(encoding="utf-8"))

    workflows = WorkflowStore()
    workflows_path = root / "workflows.json"
    if workflows_path.exists():
        for entry in json.loads(workflows_path.read_text(encoding="utf-8")):
            workflows.add(_workflow_from_dict(entry))

    state = AgentState(config=config, memory=memory, tools=tools, workflows=workflows)
    runtime.agents[agent_id] = state
    return state


def list_agent_ids(data_dir: Path) -> list[str]:
    root = Path(data_dir) / "agents"
    if not root.exists():
        return []
    return sorted(p.name for p in root.iterdir() if p.is_dir())


def load_all_agents(runtime: Runtime, data_dir: Path) -> list[str]:
    ids = list_agent_ids(data_dir)
    for agent_id in ids:
        load_agent(runtime, data_dir, agent_id)
    return ids


# --- bundles -----------------------------------------------------------------


def export_bundle(runtime: Runtime, agent_id: str) -> bytes:
    """Canonical, agent-id-free snapshot of everything behavior-relevant."""
    agent = runtime.agent(agent_id)
    manifest = [
        {"path": f"memory/{path}", "content": content}
        for path, content in sorted(agent.memory.export_files().items())
    ]
    manifest.append(
        {
            "path": "tools.json",
            "content": json.dumps(
                [tool_spec_to_dict(s) for s in agent.tools.imported_specs()],
                ensure_ascii=False,
                sort_keys=True,
            ),
        }
    )
    manifest.sort(key=lambda entry: entry["path"])
    bundle = {
        "version": FORMAT_VERSION,
        "config": config_to_dict(agent.config, include_agent_id=False),
        "memory_manifest": manifest,
        "workflow_traces": [_workflow_to_dict(t) for t in agent.workflows.traces()],
    }
    return json.dumps(bundle, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode(
        "utf-8"
    )


def import_bundle(runtime: Runtime, data: bytes, agent_id: str | None = None) -> str:
    """Recreate an agent from bundle bytes; a fresh id is assigned by default."""
    try:
        bundle = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise Malformed(f"bundle is not valid JSON: {exc}") from exc
    if not isinstance(bundle, dict) or "version" not in bundle:
        raise Malformed("bundle missing version")
    if bundle["version"] != FORMAT_VERSION:
        raise VersionUnsupported(str(bundle["version"]))
    try:
        config = config_from_dict(bundle["config"])
        manifest = {entry["path"]: entry["content"] for entry in bundle["memory_manifest"]}
        workflows = [_workflow_from_dict(d) for d in bundle["workflow_traces"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise Malformed(f"bundle is structurally invalid: {exc}") from exc

    new_id = agent_id or uuid.uuid4().hex
    if new_id in runtime.agents:
        raise ValueError(f"agent {new_id!r} already exists")
    config = replace(config, agent_id=new_id)
    memory = MemoryStore(
        store_user_profile=config.memory_policy.store_user_profile,
        store_conversation=config.memory_policy.store_conversation,
    )
    memory.import_files(
        {
            path[len("memory/") :]: content
            for path, content in manifest.items()
            if path.startswith("memory/")
        }
    )
    tools = ToolRegistry(memory=None, offline=runtime.offline)
    for entry in json.loads(manifest.get("tools.json", "[]")):
        tools.register(tool_spec_from_dict(entry))
    tools.memory = memory
    store = WorkflowStore()
    for trace in workflows:
        store.add(trace)
    runtime.agents[new_id] = AgentState(
        config=config, memory=memory, tools=tools, workflows=store
    )
    return new_id


# --- replay logs ---------------------------------------------------------------


def trace_writer(data_dir: Path):
    """on_trace hook appending each cycle to the session's replay log."""

    def write(session: Session, trace: CycleTrace) -> None:
        root = _agent_dir(data_dir, session.agent_id) / "sessions"
        root.mkdir(parents=True, exist_ok=True)
        with (root / f"{session.session_id}.trace.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(trace_to_dict(trace), ensure_ascii=False) + "\n")

    return write
