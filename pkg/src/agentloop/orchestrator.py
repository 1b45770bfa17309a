"""Session engine: the repeating workspace cycle.

Each cycle gathers context into a thought, asks the thought stream for a
directive, lets the monitor judge it, and dispatches the effects. Reactive
bypass short-circuits before any model call; goal-directed and self-taught
behavior differ only in termination and feedback rules, not in the cycle
itself. Successful self-taught episodes are kept as workflow traces and
surface in related memory for similar future goals.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable

from .driver import (
    Bypass,
    Continue,
    GoalStack,
    Halt,
    MonitorVerdict,
    SpawnSubgoals,
    TriggerTable,
    check_post,
    check_pre,
    complete_current_goal,
    compose_instructions,
    install_drives,
    push_subgoals,
)
from .kernel import (
    AgentConfig,
    Chain,
    Directive,
    Finish,
    InvokeTool,
    Plan,
    QueryMemory,
    Respond,
    Violation,
    directive_to_dict,
    validate_agent_config,
)
from .llm import ModelRegistry
from .lui import InputEvent, LayoutPlan, Utterance, normalize_input, plan_layout
from .memory import MemoryStore, cosine, embed_text
from .thought_stream import StepAttempt, ThoughtStream
from .tools import ToolError, ToolRegistry, run_chain
from .working_memory import (
    EventRecord,
    ShortTermStore,
    assemble_thought,
    record_event,
    serialize_thought,
)

MODES = ("goal_directed", "self_taught")

WORKFLOW_MATCH_THRESHOLD = 0.8


class UnknownAgent(LookupError):
    pass


class UnknownSession(LookupError):
    pass


class SessionHalted(RuntimeError):
    pass


class WrongMode(RuntimeError):
    pass


class ConfigInvalid(ValueError):
    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(f"{v.field}: {v.reason}" for v in violations))
        self.violations = violations


@dataclass(frozen=True)
class CycleTrace:
    cycle_index: int
    thought_text: str
    directive: Directive | None
    verdict: MonitorVerdict
    effects: tuple[str, ...]


def verdict_to_dict(verdict: MonitorVerdict) -> dict:
    if isinstance(verdict, Continue):
        return {"kind": "continue"}
    if isinstance(verdict, Bypass):
        return {"kind": "bypass", "response": verdict.response}
    if isinstance(verdict, SpawnSubgoals):
        return {"kind": "spawn_subgoals", "goals": list(verdict.goals)}
    if isinstance(verdict, Halt):
        return {"kind": "halt", "reason": verdict.reason}
    raise TypeError(f"not a verdict: {verdict!r}")


def trace_to_dict(trace: CycleTrace) -> dict:
    return {
        "cycle_index": trace.cycle_index,
        "thought_text": trace.thought_text,
        "directive": None if trace.directive is None else directive_to_dict(trace.directive),
        "verdict": verdict_to_dict(trace.verdict),
        "effects": list(trace.effects),
    }


@dataclass(frozen=True)
class WorkflowTrace:
    trace_id: str
    goal_text: str
    goal_vector: list[float]
    steps: tuple[Directive, ...]
    outcome: str
    created_at: datetime


class WorkflowStore:
    """Successful directive sequences, retrievable by goal similarity."""

    def __init__(self, embed=embed_text):
        self.embed = embed
        self._traces: list[WorkflowTrace] = []

    def add(self, trace: WorkflowTrace) -> None:
        self._traces.append(trace)

    def traces(self) -> list[WorkflowTrace]:
        return list(self._traces)

    def best_match(self, goal_text: str) -> tuple[WorkflowTrace, float] | None:
        query = self.embed(goal_text)
        best: tuple[WorkflowTrace, float] | None = None
        for trace in self._traces:
            score = cosine(query, trace.goal_vector)
            if best is None or score > best[1]:
                best = (trace, score)
        if best is not None and best[1] >= WORKFLOW_MATCH_THRESHOLD:
            return best
        return None


def render_workflow(trace: WorkflowTrace) -> str:
    """Human/model-readable workflow summary injected into related memory."""
    lines = [f"Learned workflow for goal '{trace.goal_text}':"]
    for i, step in enumerate(trace.steps, start=1):
        doc = directive_to_dict(step)
        action = doc.pop("action")
        detail = ", ".join(f"{k}={v!r}" for k, v in doc.items())
        lines.append(f"{i}. {action} {detail}".rstrip())
    return "\n".join(lines)


@dataclass
class AgentState:
    config: AgentConfig
    memory: MemoryStore
    tools: ToolRegistry
    workflows: WorkflowStore = field(default_factory=WorkflowStore)


@dataclass
class Session:
    session_id: str
    agent_id: str
    mode: str
    short_term: ShortTermStore
    goal_stack: GoalStack
    trigger_table: TriggerTable
    step_count: int = 0
    status: str = "idle"  # idle | running | halted
    trace: list[CycleTrace] = field(default_factory=list)
    outputs: list[LayoutPlan] = field(default_factory=list)
    conversation_log: list[dict] = field(default_factory=list)
    episode_directives: list[Directive] = field(default_factory=list)
    episode_goal: str = ""
    _seq: int = 0

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class Runtime:
    """Holds agents and sessions and runs the cycle loop for each session."""

    def __init__(
        self,
        models: ModelRegistry | None = None,
        clock: Callable[[], datetime] = _utcnow,
        offline: bool = False,
        on_trace: Callable[[Session, CycleTrace], None] | None = None,
    ):
        self.models = models if models is not None else ModelRegistry()
        self.clock = clock
        self.offline = offline
        self.on_trace = on_trace
        self.thought_stream = ThoughtStream(self.models)
        self.agents: dict[str, AgentState] = {}
        self.sessions: dict[str, Session] = {}

    # --- agent lifecycle -------------------------------------------------

    def create_agent(self, config: AgentConfig) -> str:
        violations = validate_agent_config(config)
        if violations:
            raise ConfigInvalid(violations)
        agent_id = config.agent_id or uuid.uuid4().hex
        if agent_id in self.agents:
            raise ValueError(f"agent {agent_id!r} already exists")
        config = replace(config, agent_id=agent_id)
        memory = MemoryStore(
            store_user_profile=config.memory_policy.store_user_profile,
            store_conversation=config.memory_policy.store_conversation,
        )
        tools = ToolRegistry(memory=memory, offline=self.offline)
        self.agents[agent_id] = AgentState(config=config, memory=memory, tools=tools)
        return agent_id

    def agent(self, agent_id: str) -> AgentState:
        try:
            return self.agents[agent_id]
        except KeyError:
            raise UnknownAgent(agent_id) from None

    def set_triggers(self, agent_id: str, triggers) -> None:
        agent = self.agent(agent_id)
        agent.config = replace(agent.config, triggers=tuple(triggers))
        for session in self.sessions.values():
            if session.agent_id == agent_id:
                _, session.trigger_table = install_drives(agent.config)

    def import_tools(self, agent_id: str, document: str):
        """Import an OpenAPI document, register every tool, track ids in config."""
        from .tools import import_openapi

        agent = self.agent(agent_id)
        specs = import_openapi(document)
        for spec in specs:
            agent.tools.register(spec)
        agent.config = replace(
            agent.config,
            tool_ids=tuple([*agent.config.tool_ids, *(s.tool_id for s in specs)]),
        )
        return specs

    # --- sessions -------------------------------------------------------

    def start_session(self, agent_id: str, mode: str = "goal_directed") -> Session:
        agent = self.agent(agent_id)
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        goal_stack, trigger_table = install_drives(agent.config)
        session = Session(
            session_id=uuid.uuid4().hex,
            agent_id=agent_id,
            mode=mode,
            short_term=ShortTermStore(),
            goal_stack=goal_stack,
            trigger_table=trigger_table,
        )
        self.sessions[session.session_id] = session
        return session

    def session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def _record(self, session: Session, kind: str, actor: str, payload: str) -> None:
        event = EventRecord(
            seq=session.next_seq(),
            kind=kind,
            actor=actor,
            payload=payload,
            timestamp=self.clock(),
        )
        session.short_term = record_event(session.short_term, event)
        if kind == "conversation":
            session.conversation_log.append({"actor": actor, "payload": payload})

    def _append_trace(self, session: Session, trace: CycleTrace) -> None:
        session.trace.append(trace)
        if self.on_trace is not None:
            self.on_trace(session, trace)

    # --- the cycle -------------------------------------------------------

    def run_cycle(self, session: Session, perception: str | None = None) -> CycleTrace:
        agent = self.agent(session.agent_id)
        index = len(session.trace)
        effects: list[str] = []

        if perception is not None:
            bypass = check_pre(session.trigger_table, perception)
            if bypass is not None:
                session.outputs.append(plan_layout(bypass.response))
                self._record(session, "conversation", "agent", bypass.response)
                effects.append(f"bypass response: {bypass.response}")
                trace = CycleTrace(index, "", None, bypass, tuple(effects))
                self._append_trace(session, trace)
                return trace

        related: list[str] = []
        goal = session.goal_stack.current()
        if goal is not None:
            match = agent.workflows.best_match(goal.text)
            if match is not None:
                related.append(render_workflow(match[0]))
                effects.append(f"workflow recalled (score {match[1]:.3f})")
            hits = agent.memory.search("domain_knowledge", goal.text, agent.config.retrieval_k)
            related.extend(hit.text for hit in hits)

        thought = assemble_thought(
            session.short_term,
            instructions=compose_instructions(session.goal_stack),
            perception=perception,
            user_profile=agent.memory.store_text("user_profile") or None,
            agent_profile=agent.config.profile or None,
            related_memory=related or None,
            now=self.clock(),
        )

        attempts: list[StepAttempt] = []
        directive = self.thought_stream.step(thought, "decide", attempts)
        session.step_count += 1
        for number, attempt in enumerate(attempts, start=1):
            if attempt.error_reason is not None:
                effects.append(f"attempt {number}: parse failure ({attempt.error_reason})")
        if len(attempts) > 1:
            effects.append(f"provider attempts: {len(attempts)}")

        verdict = check_post(directive, session.step_count, agent.config.step_limit)
        effects.extend(self.dispatch(session, directive))

        trace = CycleTrace(index, serialize_thought(thought), directive, verdict, tuple(effects))
        self._append_trace(session, trace)
        session.episode_directives.append(directive)
        return trace

    def dispatch(self, session: Session, directive: Directive) -> list[str]:
        """Apply a directive's effects; failures become observable events."""
        agent = self.agent(session.agent_id)
        effects: list[str] = []
        if isinstance(directive, Respond):
            session.outputs.append(
                plan_layout(
                    directive.text,
                    [{"label": a.label, "action_id": a.action_id} for a in directive.actions],
                )
            )
            self._record(session, "conversation", "agent", directive.text)
            effects.append("responded")
            if session.goal_stack.current() is not None:
                complete_current_goal(session.goal_stack)
                effects.append("goal completed")
        elif isinstance(directive, InvokeTool):
            try:
                result = agent.tools.invoke(directive.tool_id, directive.args)
                payload = (
                    f"invoke_tool {directive.tool_id} -> {result.status}: "
                    f"{_summarize_fields(result.fields)}"
                )
            except ToolError as exc:
                payload = f"invoke_tool {directive.tool_id} -> error: {exc}"
            self._record(session, "agent_action", "agent", payload)
            effects.append(payload)
        elif isinstance(directive, QueryMemory):
            hits = agent.memory.search(
                directive.store_kind, directive.query, agent.config.retrieval_k
            )
            joined = " | ".join(hit.text for hit in hits)
            payload = (
                f"query_memory {directive.store_kind} '{directive.query}' -> "
                f"{len(hits)} hits: {joined}"
            )
            self._record(session, "agent_action", "agent", payload)
            effects.append(payload)
        elif isinstance(directive, Plan):
            current = session.goal_stack.current()
            if current is None:
                payload = "plan rejected: no current goal to decompose"
            else:
                push_subgoals(session.goal_stack, list(directive.subgoals), current.goal_id)
                payload = "plan: " + "; ".join(directive.subgoals)
            self._record(session, "agent_action", "agent", payload)
            effects.append(payload)
        elif isinstance(directive, Chain):
            outcome = run_chain(agent.tools, list(directive.steps))
            if outcome.failed_at is None:
                payload = f"chain completed: {len(outcome.completed)} steps"
            else:
                failing = outcome.completed[-1][1]
                payload = (
                    f"chain failed at step {outcome.failed_at}: "
                    f"{failing.fields.get('error', failing.raw)}"
                )
            self._record(session, "agent_action", "agent", payload)
            effects.append(payload)
        elif isinstance(directive, Finish):
            if directive.result:
                session.outputs.append(plan_layout(directive.result))
                self._record(session, "conversation", "agent", directive.result)
            if session.goal_stack.current() is not None:
                complete_current_goal(session.goal_stack)
            effects.append("finished")
        else:
            raise TypeError(f"not a directive: {directive!r}")
        return effects

    # --- episodes ---------------------------------------------------------

    def submit_event(self, session_id: str, event: InputEvent) -> list[LayoutPlan]:
        """Run one task episode; returns the outputs it emitted, in order."""
        session = self.session(session_id)
        if session.status == "halted":
            raise SessionHalted(session_id)
        perception = normalize_input(event)
        kind = "conversation" if isinstance(event, Utterance) else "user_action"
        self._record(session, kind, "user", perception)
        session.goal_stack.set_task(perception)
        session.episode_goal = perception
        session.step_count = 0
        session.episode_directives = []
        session.status = "running"
        outputs_before = len(session.outputs)

        current_perception: str | None = perception
        while True:
            trace = self.run_cycle(session, current_perception)
            current_perception = None
            if isinstance(trace.verdict, Bypass):
                break
            if isinstance(trace.verdict, Halt):
                self._halt(session)
                break
            if isinstance(trace.directive, Respond) and session.goal_stack.current() is None:
                break
        return session.outputs[outputs_before:]

    def _halt(self, session: Session) -> None:
        session.status = "halted"
        agent = self.agent(session.agent_id)
        if agent.config.memory_policy.store_conversation and session.conversation_log:
            already = len(agent.memory.conversation(session.session_id))
            agent.memory.archive_conversation(
                session.session_id, session.conversation_log[already:]
            )
            agent.memory.finalize_conversation(session.session_id)

    def apply_feedback(self, session_id: str, source: str, verdict: str, note: str = "") -> Session:
        """Record accept/reject feedback on a self-taught episode."""
        session = self.session(session_id)
        if session.mode != "self_taught":
            raise WrongMode("feedback applies to self_taught sessions only")
        if source not in ("human", "tool"):
            raise ValueError(f"unknown feedback source {source!r}")
        if verdict not in ("accept", "reject"):
            raise ValueError(f"unknown feedback verdict {verdict!r}")
        kind = "user_action" if source == "human" else "agent_action"
        actor = "user" if source == "human" else "agent"
        suffix = f": {note}" if note else ""
        self._record(session, kind, actor, f"feedback {verdict}{suffix}")
        if verdict == "accept":
            self.persist_workflow(session)
            self._halt(session)
        else:
            session.status = "running"
        return session

    def persist_workflow(self, session: Session) -> WorkflowTrace:
        """Store the episode's non-respond directive sequence for reuse."""
        agent = self.agent(session.agent_id)
        steps = tuple(d for d in session.episode_directives if not isinstance(d, Respond))
        trace = WorkflowTrace(
            trace_id=uuid.uuid4().hex,
            goal_text=session.episode_goal,
            goal_vector=agent.workflows.embed(session.episode_goal),
            steps=steps,
            outcome="success",
            created_at=self.clock(),
        )
        agent.workflows.add(trace)
        return trace


def _summarize_fields(fields: dict, limit: int = 200) -> str:
    text = "; ".join(f"{k}={v}" for k, v in fields.items())
    return text if len(text) <= limit else text[: limit - 3] + "..."
