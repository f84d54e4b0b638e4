import datetime as dt
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gabm.rng import SplitMix64
from gabm.scenario import (
    AgentProfile,
    ScenarioSyntaxError,
    ScenarioValidationError,
    TraitVector,
    format_timestamp,
    generate_formative_ages,
    generate_traits,
    parse_scenario,
    parse_timestamp,
    serialize_scenario,
    validate_scenario,
)

from .conftest import connectnet_text


def test_connectnet_agents(connectnet):
    assert connectnet.agent_names == ["Alice", "Bob", "Charlie", "Dana", "Evan"]
    alice = connectnet.agent("Alice")
    assert alice.traits.as_tuple() == (3, 3, 4, 5, 8)
    assert alice.formative_ages == [5, 10, 23, 30, 35]
    assert validate_scenario(connectnet) == []


def test_trait_out_of_range_names_field():
    text = connectnet_text().replace("{extraversion: 3, neuroticism: 3,", "{extraversion: 11, neuroticism: 3,")
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    assert [v.path for v in err.value.violations] == ["agents[0].traits.extraversion"]


def test_syntax_error_has_position():
    with pytest.raises(ScenarioSyntaxError) as err:
        parse_scenario("agents: [\n  {name: Alice\n")
    assert err.value.line is not None


def test_duplicate_name_is_one_violation(connectnet):
    connectnet.agents[1] = replace(connectnet.agents[1], name="Alice")
    violations = validate_scenario(connectnet)
    assert len(violations) == 1
    assert violations[0].path == "agents[1].name"


def test_unsorted_ages_is_one_violation(connectnet):
    connectnet.agents[0] = replace(connectnet.agents[0], formative_ages=[40, 30, 20, 10, 5])
    violations = validate_scenario(connectnet)
    assert [v.path for v in violations] == ["agents[0].formative_ages"]


def test_all_violations_reported(connectnet):
    connectnet.agents[0] = replace(connectnet.agents[0], goal="", traits=TraitVector(0, 3, 4, 5, 11))
    connectnet.rounds = 0
    paths = {v.path for v in validate_scenario(connectnet)}
    assert paths == {"agents[0].goal", "agents[0].traits.extraversion", "agents[0].traits.agreeableness",
                     "run.rounds"}


def test_charlie_ages_accepted(connectnet):
    assert connectnet.agent("Charlie").formative_ages == [10, 12, 13, 14, 21]
    assert not [v for v in validate_scenario(connectnet) if v.path.startswith("agents[2]")]


def test_opinion_metric_subject_equals_target_rejected():
    text = connectnet_text().replace("    subject: \"*\"\n    target: Alice", "    subject: Alice\n    target: Alice")
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    assert "metrics[0].target" in str(err.value)


def test_unknown_key_rejected():
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(connectnet_text().replace("run:\n", "run:\n  roundz: 4\n"))
    assert "run.roundz" in str(err.value)


def test_http_backend_needs_model_and_url():
    text = connectnet_text().replace("kind: scripted\n  exhaustion_mode: echo", "kind: http")
    with pytest.raises(ScenarioValidationError) as err:
        parse_scenario(text)
    paths = {v.path for v in err.value.violations}
    assert paths == {"backend.model_name", "backend.base_url"}


def test_timestamp_format():
    t = dt.datetime(1990, 7, 3)
    assert format_timestamp(t) == "03 Jul 1990 00:00:00"
    assert parse_timestamp("01 Oct 2024 20:00:00") == dt.datetime(2024, 10, 1, 20)
    with pytest.raises(ValueError):
        parse_timestamp("1 Oct 2024 20:00:00")
    with pytest.raises(ValueError):
        parse_timestamp("01 October 2024 20:00:00")


def test_round_trip_fixture(connectnet):
    assert parse_scenario(serialize_scenario(connectnet)) == connectnet


def test_random_traits_follow_seed():
    text = connectnet_text()
    a = parse_scenario(text.replace("traits: {extraversion: 3, neuroticism: 3, openness: 4, conscientiousness: 5, agreeableness: 8}",
                                    "traits: random"))
    b = parse_scenario(text.replace("traits: {extraversion: 3, neuroticism: 3, openness: 4, conscientiousness: 5, agreeableness: 8}",
                                    "traits: random"))
    assert a.agent("Alice").traits == b.agent("Alice").traits
    assert a.agent("Alice").traits == generate_traits(SplitMix64(2024))


def test_generate_traits_deterministic_and_bounded():
    assert generate_traits(SplitMix64(7)) == generate_traits(SplitMix64(7))
    for seed in range(200):
        assert all(1 <= v <= 10 for v in generate_traits(SplitMix64(seed)).as_tuple())


def test_generate_traits_uniform():
    rng = SplitMix64(12345)
    counts = [Counter() for _ in range(5)]
    n = 10_000
    for _ in range(n):
        for c, v in zip(counts, generate_traits(rng).as_tuple()):
            c[v] += 1
    for c in counts:
        assert set(c) == set(range(1, 11))
        assert all(0.05 <= c[v] / n <= 0.15 for v in range(1, 11))


def test_generate_ages():
    ages = generate_formative_ages(SplitMix64(3))
    assert ages == generate_formative_ages(SplitMix64(3))
    assert len(ages) == 5 and ages == sorted(ages) and all(5 <= a <= 40 for a in ages)


def test_current_age_is_last_formative_age(connectnet):
    assert connectnet.agent("Dana").current_age == 38


names = st.text(alphabet=st.characters(whitelist_categories=("L", "N")), min_size=1, max_size=12)
lines = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=60).filter(str.strip)


@st.composite
def profiles(draw):
    ages = sorted(draw(st.lists(st.integers(5, 40), min_size=5, max_size=5)))
    return AgentProfile(
        name=draw(names),
        gender=draw(st.sampled_from(["Female", "Male", "Nonbinary", ""])),
        goal=draw(lines),
        context=draw(lines),
        traits=TraitVector(*draw(st.lists(st.integers(1, 10), min_size=5, max_size=5))),
        formative_ages=ages,
    )


@settings(max_examples=60, deadline=None)
@given(agents=st.lists(profiles(), min_size=1, max_size=4, unique_by=lambda p: p.name),
       statements=st.lists(lines, min_size=1, max_size=4),
       rounds=st.integers(1, 20), seed=st.integers(0, 2**64 - 1))
def test_round_trip_property(agents, statements, rounds, seed):
    base = parse_scenario(connectnet_text())
    config = replace(base, agents=agents, metrics=[], rounds=rounds, seed=seed,
                     shared_context=replace(base.shared_context, statements=statements))
    config.clock = replace(config.clock, birth_year=None)
    assert validate_scenario(config) == []
    assert parse_scenario(serialize_scenario(config)) == config
