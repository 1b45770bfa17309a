"""HTTP service: agent lifecycle, sessions, events, tools, knowledge,
triggers, feedback, and server-sent trace streaming.

State lives in the runtime; every mutating call persists the touched agent
when a data directory is configured, so a restarted process observes the
same state (restart invariance is covered by the acceptance suite).

Environment:
    AGENTLOOP_DATA_DIR   persistence root (unset = in-memory only)
    AGENTLOOP_BIND       host:port for `agentloop serve` (default 127.0.0.1:8080)
    AGENTLOOP_OFFLINE    "1" disables all live web-search calls
    AGENTLOOP_SCRIPTED_RULES  path to a scripted-rules JSON file for the
                              default model (offline deterministic provider)
    AGENTLOOP_MODEL_URL  endpoint for an HTTP completion model
"""

from __future__ import annotations

import asyncio
import json
import os
from pathlib import Path

from fastapi import FastAPI, Form, Request, Response, UploadFile
from fastapi.responses import JSONResponse, StreamingResponse

from . import storage
from .kernel import ConfigError, Trigger, config_from_dict, config_to_dict
from .llm import ModelDescriptor, ModelRegistry, load_scripted_rules
from .lui import input_event_from_dict, layout_to_dict
from .memory import STORE_KINDS, DuplicateDoc
from .orchestrator import (
    ConfigInvalid,
    Runtime,
    SessionHalted,
    UnknownAgent,
    UnknownSession,
    WrongMode,
    trace_to_dict,
)
from .tools import (
    DuplicateToolId,
    MalformedDocument,
    MissingOperationId,
    UnsupportedParamType,
)

SSE_POLL_INTERVAL_S = 0.05


def build_runtime(
    data_dir: Path | None = None,
    offline: bool = False,
    models: ModelRegistry | None = None,
) -> Runtime:
    """Assemble a runtime, loading any persisted agents from the data dir."""
    runtime = Runtime(
        models=models,
        offline=offline,
        on_trace=storage.trace_writer(data_dir) if data_dir else None,
    )
    if data_dir:
        storage.load_all_agents(runtime, data_dir)
    return runtime


def models_from_env(environ=os.environ) -> ModelRegistry:
    """Default model setup: an HTTP endpoint when configured (and online),
    otherwise the scripted provider with rules from AGENTLOOP_SCRIPTED_RULES."""
    offline = environ.get("AGENTLOOP_OFFLINE", "") in ("1", "true", "yes")
    models = ModelRegistry()
    rules_path = environ.get("AGENTLOOP_SCRIPTED_RULES")
    model_url = environ.get("AGENTLOOP_MODEL_URL")
    if model_url and not offline:
        models.register_model(
            ModelDescriptor(model_id="http", provider_kind="http", endpoint=model_url, default=True)
        )
        return models
    models.register_model(
        ModelDescriptor(model_id="scripted", provider_kind="scripted", default=True)
    )
    rules, default = [], '{"action":"respond","text":"I have nothing scripted for that."}'
    if rules_path:
        rules, file_default = load_scripted_rules(Path(rules_path).read_text(encoding="utf-8"))
        if file_default is not None:
            default = file_default
    models.attach_script("scripted", rules, default)
    return models


def runtime_from_env(environ=os.environ) -> tuple[Runtime, Path | None]:
    data_dir = environ.get("AGENTLOOP_DATA_DIR")
    offline = environ.get("AGENTLOOP_OFFLINE", "") in ("1", "true", "yes")
    path = Path(data_dir) if data_dir else None
    return build_runtime(data_dir=path, offline=offline, models=models_from_env(environ)), path


def create_app(runtime: Runtime, data_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="agentloop")

    def persist(agent_id: str) -> None:
        if data_dir is not None:
            storage.persist_agent(runtime, data_dir, agent_id)

    @app.exception_handler(UnknownAgent)
    @app.exception_handler(UnknownSession)
    async def _not_found(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.post("/agents")
    async def create_agent(request: Request) -> JSONResponse:
        try:
            config = config_from_dict(await request.json())
        except (ConfigError, json.JSONDecodeError) as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        try:
            agent_id = runtime.create_agent(config)
        except ConfigInvalid as exc:
            return JSONResponse(
                status_code=400,
                content={
                    "error": "invalid agent config",
                    "violations": [
                        {"field": v.field, "reason": v.reason} for v in exc.violations
                    ],
                },
            )
        persist(agent_id)
        return JSONResponse(status_code=201, content={"agent_id": agent_id})

    @app.get("/agents/{agent_id}")
    async def get_agent(agent_id: str) -> dict:
        return config_to_dict(runtime.agent(agent_id).config)

    @app.put("/agents/{agent_id}/triggers")
    async def put_triggers(agent_id: str, request: Request) -> dict:
        payload = await request.json()
        triggers = [
            Trigger(
                trigger_id=str(t["trigger_id"]),
                pattern=str(t["pattern"]),
                mode=str(t.get("mode", "substring")),
                response=str(t.get("response", "")),
                enabled=bool(t.get("enabled", True)),
            )
            for t in payload
        ]
        runtime.set_triggers(agent_id, triggers)
        persist(agent_id)
        return {"count": len(triggers)}

    @app.post("/agents/{agent_id}/tools:import")
    async def import_tools(agent_id: str, request: Request) -> JSONResponse:
        runtime.agent(agent_id)
        document = (await request.body()).decode("utf-8")
        try:
            specs = runtime.import_tools(agent_id, document)
        except (MalformedDocument, MissingOperationId, UnsupportedParamType, DuplicateToolId) as exc:
            return JSONResponse(
                status_code=400,
                content={"error": type(exc).__name__, "detail": str(exc)},
            )
        persist(agent_id)
        return JSONResponse(content={"tool_ids": [s.tool_id for s in specs]})

    @app.post("/agents/{agent_id}/knowledge")
    async def add_knowledge(
        agent_id: str,
        file: UploadFile,
        store: str = Form(...),
        doc_id: str = Form(""),
    ) -> JSONResponse:
        agent = runtime.agent(agent_id)
        if store not in STORE_KINDS:
            return JSONResponse(status_code=400, content={"error": f"unknown store {store!r}"})
        text = (await file.read()).decode("utf-8")
        try:
            count = agent.memory.ingest_document(store, doc_id or file.filename or "upload", text)
        except DuplicateDoc as exc:
            return JSONResponse(status_code=409, content={"error": str(exc)})
        persist(agent_id)
        return JSONResponse(content={"chunks": count})

    @app.post("/agents/{agent_id}/sessions")
    async def create_session(agent_id: str, request: Request) -> dict:
        payload = await request.json() if await request.body() else {}
        mode = payload.get("mode", "goal_directed")
        session = runtime.start_session(agent_id, mode)
        return {"session_id": session.session_id, "mode": session.mode}

    @app.post("/sessions/{session_id}/events")
    async def post_event(session_id: str, request: Request) -> JSONResponse:
        session = runtime.session(session_id)
        try:
            event = input_event_from_dict(await request.json())
        except (KeyError, ValueError) as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        try:
            outputs = runtime.submit_event(session_id, event)
        except SessionHalted:
            return JSONResponse(status_code=409, content={"error": "session halted"})
        persist(session.agent_id)
        return JSONResponse(
            content={
                "outputs": [layout_to_dict(p) for p in outputs],
                "status": session.status,
                "step_count": session.step_count,
            }
        )

    @app.post("/sessions/{session_id}/feedback")
    async def post_feedback(session_id: str, request: Request) -> JSONResponse:
        payload = await request.json()
        try:
            session = runtime.apply_feedback(
                session_id,
                source=payload.get("source", "human"),
                verdict=payload.get("verdict", ""),
                note=payload.get("note", ""),
            )
        except (WrongMode, ValueError) as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        persist(session.agent_id)
        return JSONResponse(content={"status": session.status})

    @app.get("/sessions/{session_id}/outputs")
    async def get_outputs(session_id: str) -> list:
        session = runtime.session(session_id)
        return [layout_to_dict(p) for p in session.outputs]

    @app.get("/sessions/{session_id}/state")
    async def get_state(session_id: str) -> dict:
        session = runtime.session(session_id)
        agent = runtime.agent(session.agent_id)
        return {
            "session_id": session.session_id,
            "agent_id": session.agent_id,
            "mode": session.mode,
            "status": session.status,
            "step_count": session.step_count,
            "step_limit": agent.config.step_limit,
            "goal_stack": [
                {"goal_id": g.goal_id, "text": g.text, "parent": g.parent, "status": g.status}
                for g in session.goal_stack.short_term
            ],
        }

    @app.get("/sessions/{session_id}/trace")
    async def stream_trace(session_id: str) -> StreamingResponse:
        session = runtime.session(session_id)

        async def generate():
            sent = 0
            while True:
                while sent < len(session.trace):
                    trace = session.trace[sent]
                    payload = json.dumps(trace_to_dict(trace), ensure_ascii=False)
                    yield f"id: {trace.cycle_index}\nevent: cycle\ndata: {payload}\n\n"
                    sent += 1
                if session.status == "halted":
                    yield "event: end\ndata: {}\n\n"
                    return
                await asyncio.sleep(SSE_POLL_INTERVAL_S)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"status": "ok", "agents": len(runtime.agents)}

    return app


def serve(host: str, port: int, runtime: Runtime, data_dir: Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(runtime, data_dir), host=host, port=port, log_level="warning")
