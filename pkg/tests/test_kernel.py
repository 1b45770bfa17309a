from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agentloop.kernel import (
    AgentConfig,
    Chain,
    ChainStep,
    ConfigError,
    Drive,
    Finish,
    InvokeTool,
    MemoryPolicy,
    OfferedAction,
    Plan,
    QueryMemory,
    Respond,
    Trigger,
    config_from_dict,
    config_from_json,
    config_to_dict,
    directive_from_dict,
    directive_to_dict,
    directive_to_json,
    normalize_text,
    validate_agent_config,
)


class TestNormalizeText:
    def test_collapses_and_lowercases(self):
        assert normalize_text("  Hello   World ") == "hello world"

    def test_empty_identity(self):
        assert normalize_text("") == ""

    def test_tabs_and_newlines_collapse(self):
        assert normalize_text("Shut Down\tNOW") == "shut down now"

    @given(st.text(max_size=200))
    def test_idempotent(self, text):
        once = normalize_text(text)
        assert normalize_text(once) == once


def teacher_config(**overrides) -> AgentConfig:
    base = dict(
        agent_id="a1",
        name="Teacher",
        profile="An experienced high-school teacher.",
        drives=(
            Drive(
                drive_id="d1",
                kind="long_term",
                prompt_text="As a teacher, your objective is to excel in your teaching duties.",
                priority=5,
            ),
        ),
    )
    base.update(overrides)
    return AgentConfig(**base)


class TestValidateAgentConfig:
    def test_teacher_config_valid(self):
        assert validate_agent_config(teacher_config()) == []

    def test_blank_name_reported(self):
        report = validate_agent_config(teacher_config(name="  "))
        assert any(v.field == "name" and v.reason == "empty" for v in report)

    def test_reactive_drive_needs_response(self):
        config = teacher_config(
            drives=(Drive(drive_id="r1", kind="reactive", pattern="shut down", response=""),)
        )
        report = validate_agent_config(config)
        assert any(v.field == "drives[0].response" for v in report)

    def test_reactive_drive_needs_pattern(self):
        config = teacher_config(
            drives=(Drive(drive_id="r1", kind="reactive", pattern=" ", response="bye"),)
        )
        assert any(v.field == "drives[0].pattern" for v in validate_agent_config(config))

    def test_unknown_drive_kind(self):
        config = teacher_config(drives=(Drive(drive_id="d", kind="whimsical"),))
        assert any(v.field == "drives[0].kind" for v in validate_agent_config(config))

    def test_long_term_never_satisfied(self):
        config = teacher_config(
            drives=(Drive(drive_id="d", kind="long_term", prompt_text="x", status="satisfied"),)
        )
        assert any(v.field == "drives[0].status" for v in validate_agent_config(config))

    def test_bounds(self):
        assert any(
            v.field == "step_limit" for v in validate_agent_config(teacher_config(step_limit=0))
        )
        assert any(
            v.field == "retrieval_k"
            for v in validate_agent_config(teacher_config(retrieval_k=0))
        )

    def test_validation_does_not_mutate(self):
        config = teacher_config(name="")
        before = config_to_dict(config)
        validate_agent_config(config)
        assert config_to_dict(config) == before


class TestConfigRoundTrip:
    def test_round_trip_preserves_validity(self):
        config = teacher_config(
            triggers=(Trigger(trigger_id="t1", pattern="shut down", response="Bye."),),
            memory_policy=MemoryPolicy(store_user_profile=False, store_conversation=True),
        )
        assert validate_agent_config(config) == []
        reparsed = config_from_json(json.dumps(config_to_dict(config)))
        assert reparsed == config
        assert validate_agent_config(reparsed) == []

    def test_unknown_field_rejected(self):
        payload = config_to_dict(teacher_config())
        payload["mood"] = "cheerful"
        with pytest.raises(ConfigError):
            config_from_dict(payload)

    def test_unknown_drive_field_rejected(self):
        payload = config_to_dict(teacher_config())
        payload["drives"][0]["urgency"] = 3
        with pytest.raises(ConfigError):
            config_from_dict(payload)

    def test_defaults_applied(self):
        config = config_from_dict({"name": "Min"})
        assert config.step_limit == 20
        assert config.retrieval_k == 4
        assert config.memory_policy.store_conversation is True

    @given(
        name=st.text(min_size=1, max_size=30).filter(lambda s: s.strip()),
        step_limit=st.integers(min_value=1, max_value=99),
        retrieval_k=st.integers(min_value=1, max_value=20),
    )
    def test_valid_iff_reparse_valid(self, name, step_limit, retrieval_k):
        config = AgentConfig(name=name, step_limit=step_limit, retrieval_k=retrieval_k)
        reparsed = config_from_dict(config_to_dict(config))
        assert validate_agent_config(config) == validate_agent_config(reparsed) == []


_arg_values = st.one_of(
    st.text(max_size=20),
    st.integers(min_value=-10**6, max_value=10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.booleans(),
)
_args = st.dictionaries(st.text(min_size=1, max_size=10), _arg_values, max_size=4)

directives = st.one_of(
    st.builds(Respond, text=st.text(max_size=50)),
    st.builds(
        Respond,
        text=st.text(min_size=1, max_size=20),
        actions=st.tuples(
            st.builds(
                OfferedAction,
                label=st.text(min_size=1, max_size=10),
                action_id=st.text(min_size=1, max_size=10),
            )
        ),
    ),
    st.builds(InvokeTool, tool_id=st.text(min_size=1, max_size=20), args=_args),
    st.builds(
        QueryMemory,
        store_kind=st.sampled_from(
            ["agent_profile", "user_profile", "user_structured", "domain_knowledge", "tools"]
        ),
        query=st.text(max_size=40),
    ),
    st.builds(Plan, subgoals=st.lists(st.text(max_size=20), min_size=1, max_size=4).map(tuple)),
    st.builds(
        Chain,
        steps=st.lists(
            st.builds(
                ChainStep,
                tool_id=st.text(min_size=1, max_size=10),
                args=_args,
                bind=st.one_of(st.none(), st.text(min_size=1, max_size=8)),
            ),
            min_size=1,
            max_size=3,
        ).map(tuple),
    ),
    st.builds(Finish, result=st.text(max_size=50)),
)


class TestDirectives:
    def test_empty_plan_rejected(self):
        with pytest.raises(ValueError):
            Plan(subgoals=())

    def test_empty_chain_rejected(self):
        with pytest.raises(ValueError):
            Chain(steps=())

    @given(directives)
    def test_dict_round_trip(self, directive):
        assert directive_from_dict(directive_to_dict(directive)) == directive

    @given(directives)
    def test_json_round_trip(self, directive):
        assert directive_from_dict(json.loads(directive_to_json(directive))) == directive
