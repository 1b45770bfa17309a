"""Command-line entry points.

Subcommands: serve, agent create, chat, tools import, knowledge add, replay.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import storage
from .kernel import ConfigError, config_from_json
from .lui import Utterance
from .orchestrator import ConfigInvalid, Runtime
from .service import models_from_env, runtime_from_env, serve
from .tools import ToolError

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _data_dir(args) -> Path:
    raw = args.data_dir or os.environ.get("AGENTLOOP_DATA_DIR") or "./agentloop-data"
    return Path(raw)


def _open_runtime(args) -> tuple[Runtime, Path]:
    data_dir = _data_dir(args)
    runtime = Runtime()
    storage.load_all_agents(runtime, data_dir)
    return runtime, data_dir


def cmd_serve(args) -> int:
    os.environ.setdefault("AGENTLOOP_DATA_DIR", str(_data_dir(args)))
    runtime, data_dir = runtime_from_env()
    bind = args.bind or os.environ.get("AGENTLOOP_BIND", "127.0.0.1:8080")
    host, _, port = bind.partition(":")
    serve(host or "127.0.0.1", int(port or "8080"), runtime, data_dir)
    return EXIT_OK


def cmd_agent_create(args) -> int:
    runtime, data_dir = _open_runtime(args)
    try:
        config = config_from_json(Path(args.file).read_text(encoding="utf-8"))
        agent_id = runtime.create_agent(config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ConfigInvalid as exc:
        for violation in exc.violations:
            print(f"violation: {violation.field}: {violation.reason}", file=sys.stderr)
        return EXIT_RUNTIME
    storage.persist_agent(runtime, data_dir, agent_id)
    print(agent_id)
    return EXIT_OK


def cmd_tools_import(args) -> int:
    runtime, data_dir = _open_runtime(args)
    try:
        specs = runtime.import_tools(args.agent, Path(args.file).read_text(encoding="utf-8"))
    except (OSError, LookupError, ToolError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    storage.persist_agent(runtime, data_dir, args.agent)
    for spec in specs:
        print(spec.tool_id)
    return EXIT_OK


def cmd_knowledge_add(args) -> int:
    runtime, data_dir = _open_runtime(args)
    try:
        agent = runtime.agent(args.agent)
        text = Path(args.file).read_text(encoding="utf-8")
        count = agent.memory.ingest_document(args.store, Path(args.file).name, text)
    except (OSError, LookupError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    storage.persist_agent(runtime, data_dir, args.agent)
    print(f"ingested {count} chunks into {args.store}")
    return EXIT_OK


def cmd_chat(args) -> int:
    data_dir = _data_dir(args)
    offline = os.environ.get("AGENTLOOP_OFFLINE", "") in ("1", "true", "yes")
    runtime = Runtime(models=models_from_env(), offline=offline)
    storage.load_all_agents(runtime, data_dir)
    try:
        session = runtime.start_session(args.agent, mode=args.mode)
    except LookupError as exc:
        print(f"error: unknown agent {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"session {session.session_id} ({session.mode}); empty line or EOF quits")
    while True:
        try:
            line = input("you> ")
        except EOFError:
            break
        if not line.strip():
            break
        outputs = runtime.submit_event(session.session_id, Utterance(text=line))
        for plan in outputs:
            for element in plan.elements:
                if element.kind == "text_block":
                    print(f"agent> {element.text}")
                elif element.kind == "button":
                    print(f"agent> [button: {element.label} ({element.element_id})]")
        if session.status == "halted":
            print("(session halted)")
            break
    storage.persist_agent(runtime, data_dir, args.agent)
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        lines = Path(args.file).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in lines:
        if not line.strip():
            continue
        try:
            trace = json.loads(line)
        except json.JSONDecodeError as exc:
            print(f"error: bad trace line: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        index = trace.get("cycle_index")
        verdict = trace.get("verdict", {})
        directive = trace.get("directive")
        action = directive.get("action") if directive else "(bypass)"
        print(f"--- cycle {index}: directive={action} verdict={verdict.get('kind')}")
        thought = trace.get("thought_text", "")
        if thought:
            for text_line in thought.splitlines():
                print(f"    {text_line}")
        for effect in trace.get("effects", []):
            print(f"  * {effect}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentloop", description=__doc__)
    parser.add_argument("--data-dir", default=None, help="persistence root directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--bind", default=None, help="host:port (default 127.0.0.1:8080)")
    p_serve.set_defaults(func=cmd_serve)

    p_agent = sub.add_parser("agent", help="agent lifecycle")
    agent_sub = p_agent.add_subparsers(dest="agent_command", required=True)
    p_create = agent_sub.add_parser("create", help="create an agent from a config file")
    p_create.add_argument("-f", "--file", required=True, help="agent config JSON file")
    p_create.set_defaults(func=cmd_agent_create)

    p_chat = sub.add_parser("chat", help="interactive REPL against an agent")
    p_chat.add_argument("agent", help="agent id")
    p_chat.add_argument("--mode", default="goal_directed", choices=("goal_directed", "self_taught"))
    p_chat.set_defaults(func=cmd_chat)

    p_tools = sub.add_parser("tools", help="tool management")
    tools_sub = p_tools.add_subparsers(dest="tools_command", required=True)
    p_import = tools_sub.add_parser("import", help="import tools from an OpenAPI document")
    p_import.add_argument("file", help="OpenAPI YAML/JSON file")
    p_import.add_argument("--agent", required=True, help="agent id")
    p_import.set_defaults(func=cmd_tools_import)

    p_knowledge = sub.add_parser("knowledge", help="long-term memory management")
    knowledge_sub = p_knowledge.add_subparsers(dest="knowledge_command", required=True)
    p_add = knowledge_sub.add_parser("add", help="ingest a document into a memory store")
    p_add.add_argument("file", help="text file to ingest")
    p_add.add_argument("--agent", required=True, help="agent id")
    p_add.add_argument("--store", required=True, help="target store kind")
    p_add.set_defaults(func=cmd_knowledge_add)

    p_replay = sub.add_parser("replay", help="re-render a recorded session trace")
    p_replay.add_argument("file", help="trace JSONL file")
    p_replay.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
