from __future__ import annotations

import pytest

from agentloop.driver import Bypass, Halt
from agentloop.kernel import AgentConfig, Drive, Finish, QueryMemory, Respond
from agentloop.lui import Utterance
from agentloop.orchestrator import (
    SessionHalted,
    UnknownAgent,
    WrongMode,
    render_workflow,
)

from conftest import make_scripted_runtime

RESPOND_OK = '{"action":"respond","text":"All done."}'


def plain_agent(runtime, **overrides):
    defaults = dict(name="Helper", profile="A meticulous assistant.")
    defaults.update(overrides)
    return runtime.create_agent(AgentConfig(**defaults))


def first_text(plan) -> str:
    return plan.elements[0].text


class TestSessions:
    def test_fresh_session_is_idle(self):
        runtime = make_scripted_runtime([], default=RESPOND_OK)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id)
        assert session.status == "idle"
        assert session.step_count == 0
        assert session.short_term.events == []

    def test_unknown_agent(self):
        runtime = make_scripted_runtime([], default=RESPOND_OK)
        with pytest.raises(UnknownAgent):
            runtime.start_session("ghost")

    def test_mode_recorded_verbatim(self):
        runtime = make_scripted_runtime([], default=RESPOND_OK)
        agent_id = plain_agent(runtime)
        assert runtime.start_session(agent_id, "self_taught").mode == "self_taught"

    def test_submit_after_halt_rejected(self):
        runtime = make_scripted_runtime([], default='{"action":"finish","result":"bye"}')
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="go"))
        assert session.status == "halted"
        with pytest.raises(SessionHalted):
            runtime.submit_event(session.session_id, Utterance(text="again"))


class TestReactiveBypass:
    def make(self):
        runtime = make_scripted_runtime([], default=RESPOND_OK)
        agent_id = plain_agent(
            runtime,
            drives=(
                Drive(
                    drive_id="r1",
                    kind="reactive",
                    pattern="shut down",
                    response="Shutting down safely.",
                ),
            ),
        )
        return runtime, agent_id

    def test_bypass_zero_provider_and_tool_calls(self):
        runtime, agent_id = self.make()
        session = runtime.start_session(agent_id)
        outputs = runtime.submit_event(session.session_id, Utterance(text="Please SHUT DOWN now"))
        assert [first_text(p) for p in outputs] == ["Shutting down safely."]
        assert runtime.models.call_count == 0
        assert runtime.agent(agent_id).tools.invocation_count == 0
        assert len(session.trace) == 1
        assert session.trace[0].verdict == Bypass(response="Shutting down safely.")
        assert session.trace[0].directive is None

    def test_non_matching_input_goes_through_model(self):
        runtime, agent_id = self.make()
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="hello there"))
        assert runtime.models.call_count == 1


class TestShortRoundQA:
    RULES = [
        (
            "query_memory domain_knowledge",
            '{"action":"respond","text":"Tier A costs $10 per month."}',
        ),
        (
            "current goal:",
            '{"action":"query_memory","store":"domain_knowledge","query":"tier A price"}',
        ),
    ]

    def run_qa(self):
        runtime = make_scripted_runtime(self.RULES)
        agent_id = plain_agent(runtime)
        runtime.agent(agent_id).memory.ingest_document(
            "domain_knowledge", "pricing", "Tier A costs $10 per month."
        )
        session = runtime.start_session(agent_id)
        outputs = runtime.submit_event(session.session_id, Utterance(text="What does tier A cost?"))
        return runtime, session, outputs

    def test_two_cycles_two_calls(self):
        runtime, session, outputs = self.run_qa()
        assert len(session.trace) == 2
        assert runtime.models.call_count == 2
        assert [first_text(p) for p in outputs] == ["Tier A costs $10 per month."]

    def test_query_hits_visible_in_second_thought(self):
        _, session, _ = self.run_qa()
        assert session.trace[0].directive == QueryMemory(
            store_kind="domain_knowledge", query="tier A price"
        )
        assert "Tier A costs $10 per month." in session.trace[1].thought_text
        assert "## History" in session.trace[1].thought_text

    def test_goal_stack_empty_after_answer(self):
        _, session, _ = self.run_qa()
        assert session.goal_stack.current() is None
        assert session.status == "running"

    def test_trace_indices_contiguous(self):
        _, session, _ = self.run_qa()
        assert [t.cycle_index for t in session.trace] == [0, 1]


class TestWorkflowScenario:
    RULES = [
        ("invitations sent.", '{"action":"finish","result":"Offsite organized."}'),
        ("venue booked.", '{"action":"respond","text":"Invitations sent."}'),
        ("current goal: book a venue", '{"action":"respond","text":"Venue booked."}'),
        (
            "current goal: organize the offsite",
            '{"action":"plan","subgoals":["Book a venue","Send invitations"]}',
        ),
    ]

    def run_workflow(self):
        runtime = make_scripted_runtime(self.RULES)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id)
        outputs = runtime.submit_event(session.session_id, Utterance(text="Organize the offsite"))
        return runtime, session, outputs

    def test_four_calls_then_finish(self):
        runtime, session, outputs = self.run_workflow()
        assert runtime.models.call_count == 4
        assert len(session.trace) == 4
        assert session.trace[-1].verdict == Halt(reason="finished")
        assert session.status == "halted"

    def test_subgoals_run_in_plan_order(self):
        _, session, outputs = self.run_workflow()
        assert [first_text(p) for p in outputs] == [
            "Venue booked.",
            "Invitations sent.",
            "Offsite organized.",
        ]

    def test_goal_stack_empty_and_subgoals_satisfied(self):
        _, session, _ = self.run_workflow()
        assert session.goal_stack.current() is None
        assert session.goal_stack.short_term == []
        completed = [e for t in session.trace for e in t.effects if e == "goal completed"]
        assert len(completed) == 2


class TestStepLimit:
    def test_halt_at_exactly_step_limit(self):
        runtime = make_scripted_runtime(
            [], default='{"action":"query_memory","store":"domain_knowledge","query":"loop"}'
        )
        agent_id = plain_agent(runtime, step_limit=20)
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="never finishes"))
        assert runtime.models.call_count == 20
        assert session.step_count == 20
        assert session.trace[-1].verdict == Halt(reason="step_limit")
        assert session.status == "halted"

    @pytest.mark.parametrize("limit", [1, 3, 7])
    def test_halt_respects_configured_limit(self, limit):
        runtime = make_scripted_runtime(
            [], default='{"action":"query_memory","store":"domain_knowledge","query":"x"}'
        )
        agent_id = plain_agent(runtime, step_limit=limit)
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="go"))
        assert runtime.models.call_count == limit
        assert session.trace[-1].verdict == Halt(reason="step_limit")

    @pytest.mark.parametrize(
        "default",
        [
            RESPOND_OK,
            '{"action":"finish","result":"f"}',
            '{"action":"query_memory","store":"tools","query":"q"}',
            "never valid json at all",
        ],
    )
    def test_no_livelock(self, default):
        runtime = make_scripted_runtime([], default=default)
        agent_id = plain_agent(runtime, step_limit=5)
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="anything"))
        assert len(session.trace) <= 5


class TestDispatchEffects:
    def test_unknown_tool_error_becomes_event(self):
        runtime = make_scripted_runtime(
            [
                ("invoke_tool ghost -> error", RESPOND_OK),
                ("current goal:", '{"action":"invoke_tool","tool":"ghost","args":{}}'),
            ]
        )
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="use the ghost tool"))
        assert session.status == "running"
        assert "invoke_tool ghost -> error" in session.trace[1].thought_text

    def test_respond_with_actions_yields_buttons(self):
        completion = (
            '{"action":"respond","text":"Proceed?",'
            '"actions":[{"label":"Yes","action_id":"y"},{"label":"No","action_id":"n"}]}'
        )
        runtime = make_scripted_runtime([], default=completion)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id)
        outputs = runtime.submit_event(session.session_id, Utterance(text="do the thing"))
        kinds = [e.kind for e in outputs[0].elements]
        assert kinds == ["text_block", "button", "button"]
        assert [e.element_id for e in outputs[0].elements[1:]] == ["y", "n"]

    def test_chain_directive_runs_builtins(self):
        completion = (
            '{"action":"chain","steps":['
            '{"tool":"image_create","args":{"prompt":"logo"},"bind":"img"},'
            '{"tool":"image_create","args":{"prompt":"${img.image_ref}"}}]}'
        )
        runtime = make_scripted_runtime(
            [("chain completed", RESPOND_OK), ("current goal: make art", completion)]
        )
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="make art"))
        assert runtime.agent(agent_id).tools.invocation_count == 2
        assert any("chain completed: 2 steps" in e for e in session.trace[0].effects)


class TestSelfTaught:
    RULES = [
        ("learned workflow", '{"action":"respond","text":"Use the standard outline."}'),
        ("query_memory domain", '{"action":"respond","text":"Use the standard outline."}'),
        (
            "current goal:",
            '{"action":"query_memory","store":"domain_knowledge","query":"report outline"}',
        ),
    ]

    def test_feedback_wrong_mode(self):
        runtime = make_scripted_runtime([], default=RESPOND_OK)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id, "goal_directed")
        with pytest.raises(WrongMode):
            runtime.apply_feedback(session.session_id, "human", "accept")

    def test_reject_keeps_running_and_records_event(self):
        runtime = make_scripted_runtime(self.RULES)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id, "self_taught")
        runtime.submit_event(session.session_id, Utterance(text="Plan the quarterly report"))
        runtime.apply_feedback(session.session_id, "human", "reject", note="too vague")
        assert session.status == "running"
        assert any(
            e.payload == "feedback reject: too vague" for e in session.short_term.events
        )
        assert runtime.agent(agent_id).workflows.traces() == []

    def test_accept_stores_workflow_and_halts(self):
        runtime = make_scripted_runtime(self.RULES)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id, "self_taught")
        runtime.submit_event(session.session_id, Utterance(text="Plan the quarterly report"))
        runtime.apply_feedback(session.session_id, "human", "accept")
        assert session.status == "halted"
        traces = runtime.agent(agent_id).workflows.traces()
        assert len(traces) == 1
        assert traces[0].steps == (
            QueryMemory(store_kind="domain_knowledge", query="report outline"),
        )

    def test_identical_goal_retrieval_score_is_one(self):
        runtime = make_scripted_runtime(self.RULES)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id, "self_taught")
        runtime.submit_event(session.session_id, Utterance(text="Plan the quarterly report"))
        runtime.apply_feedback(session.session_id, "human", "accept")
        match = runtime.agent(agent_id).workflows.best_match("Plan the quarterly report")
        assert match is not None
        assert abs(match[1] - 1.0) <= 1e-9

    def test_learned_workflow_shortens_second_run(self):
        runtime = make_scripted_runtime(self.RULES)
        agent_id = plain_agent(runtime)
        first = runtime.start_session(agent_id, "self_taught")
        runtime.submit_event(first.session_id, Utterance(text="Plan the quarterly report"))
        first_calls = runtime.models.call_count
        runtime.apply_feedback(first.session_id, "human", "accept")

        second = runtime.start_session(agent_id, "self_taught")
        outputs = runtime.submit_event(second.session_id, Utterance(text="Plan the quarterly report"))
        second_calls = runtime.models.call_count - first_calls
        assert second_calls < first_calls
        assert "Learned workflow" in second.trace[0].thought_text
        assert [first_text(p) for p in outputs] == ["Use the standard outline."]

    def test_dissimilar_goal_not_recalled(self):
        runtime = make_scripted_runtime(self.RULES)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id, "self_taught")
        runtime.submit_event(session.session_id, Utterance(text="Plan the quarterly report"))
        runtime.apply_feedback(session.session_id, "human", "accept")
        assert runtime.agent(agent_id).workflows.best_match("water the office plants") is None


class TestWorkflowRendering:
    def test_render_names_goal_and_steps(self):
        runtime = make_scripted_runtime(self.RULES if hasattr(self, "RULES") else [], default=RESPOND_OK)
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id, "self_taught")
        session.episode_goal = "tidy inbox"
        session.episode_directives = [
            QueryMemory(store_kind="domain_knowledge", query="filters"),
            Respond(text="done"),
            Finish(result="ok"),
        ]
        trace = runtime.persist_workflow(session)
        rendered = render_workflow(trace)
        assert rendered.startswith("Learned workflow for goal 'tidy inbox':")
        assert "query_memory" in rendered
        assert "respond" not in rendered.split("\n", 1)[1]
        assert trace.steps == (
            QueryMemory(store_kind="domain_knowledge", query="filters"),
            Finish(result="ok"),
        )


class TestConversationArchiving:
    def test_archive_on_halt_respects_policy(self):
        runtime = make_scripted_runtime([], default='{"action":"finish","result":"bye"}')
        agent_id = plain_agent(runtime)
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="wrap it up"))
        memory = runtime.agent(agent_id).memory
        log = memory.conversation(session.session_id)
        assert [m["actor"] for m in log] == ["user", "agent"]
        hits = memory.search("user_structured", "wrap it up bye", k=1)
        assert hits and hits[0].chunk_id.startswith("conversation:")

    def test_no_archive_when_policy_off(self):
        from agentloop.kernel import MemoryPolicy

        runtime = make_scripted_runtime([], default='{"action":"finish","result":"bye"}')
        agent_id = plain_agent(
            runtime, memory_policy=MemoryPolicy(store_user_profile=True, store_conversation=False)
        )
        session = runtime.start_session(agent_id)
        runtime.submit_event(session.session_id, Utterance(text="wrap it up"))
        assert runtime.agent(agent_id).memory.conversation(session.session_id) == []
