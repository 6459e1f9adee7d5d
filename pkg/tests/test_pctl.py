"""
Test parsing and checking of PCTL queries.

Random chains are checked against the dense reference computations in the
helpers module; the robot study is checked against its closed form values.
"""
from __future__ import annotations

import numpy as np
import pytest

from decsynth.controller import ControllerAssignment
from decsynth.exceptions import (
    MissingParameterError, ModelSyntaxError, UnknownLabelError,
    UnknownOperatorError, UnknownRewardStructureError,
)
from decsynth.pctl import (
    Atom, Bound, Cumulative, Not, PctlQuery, QueryKind, Reach, TrueFormula,
    Until, parse_query, pmc, pmc_all, satisfies,
)
from decsynth.pdtmc import (
    ExplicitPDTMC, RewardStructure, StateTuple, TransitionEntry, instantiate,
)

from .conftest import Study
from .helpers import (
    bounded_until_reference, cumulative_reference, mask, next_reference,
    random_dtmc, reach_reward_reference, robot_values, until_reference,
)

SAFE_ARRIVAL = parse_query('P=? [ !"collision" U "done" ]')
JOURNEY_TIME = parse_query('R{"time"}=? [ F "done" ]')


def _robot_chain(robot: Study, x1: float, x2: float) -> ExplicitPDTMC:
    assignment = ControllerAssignment.from_scalars(robot.model.families, [x1, x2])
    return instantiate(robot.model, assignment)


@pytest.mark.parametrize("text,expected", [
    ('P=? [ F "done" ]', PctlQuery(QueryKind.PROBABILITY, Until(TrueFormula(), Atom('done')))),
    (
        'P>=0.75 [ !"collision" U "done" ]',
        PctlQuery(QueryKind.PROBABILITY, Until(Not(Atom('collision')), Atom('done')), Bound('>=', 0.75)),
    ),
    (
        'P<0.1 [ "a" U<=5 "b" ]',
        PctlQuery(QueryKind.PROBABILITY, Until(Atom('a'), Atom('b'), 5), Bound('<', 0.1)),
    ),
    (
        'R{"risk"}<=100 [ C<=2000 ]',
        PctlQuery(QueryKind.REWARD, Cumulative(2000), Bound('<=', 100.0), 'risk'),
    ),
    ('R=? [ F "done" ]', PctlQuery(QueryKind.REWARD, Reach(Atom('done')))),
], ids=["eventually", "until", "bounded-until", "cumulative", "unnamed-reward"])
def test_parse_query(text: str, expected: PctlQuery) -> None:
    """Test that queries parse to the expected structure."""
    assert parse_query(text) == expected


@pytest.mark.parametrize("text", [
    'P>=0.75 [ !"collision" U "done" ]',
    'P=? [ X ("a" & !"b") | false ]',
    'P>0.5 [ "a" => P>=0.9 [ F<=3 "b" ] U "c" ]',
    'R{"time"}=? [ F "done" ]',
    'R{"risk"}<=100.0 [ C<=2000 ]',
], ids=["until", "next", "nested", "reach-reward", "cumulative"])
def test_query_str_round_trip(text: str) -> None:
    """Test that a printed query parses back to the same query."""
    query = parse_query(text)
    assert parse_query(str(query)) == query


@pytest.mark.parametrize("text,error,match", [
    ('P=? [ G "a" ]', UnknownOperatorError, "'G'"),
    ('P=? [ "a" W "b" ]', UnknownOperatorError, "'W'"),
    ('P>=1.5 [ F "a" ]', ModelSyntaxError, "outside \\[0, 1\\]"),
    ('R<=-1 [ C<=3 ]', ModelSyntaxError, "Cannot parse"),
    ('P=? [ F<3 "a" ]', ModelSyntaxError, "must use '<='"),
    ('P=? [ F<=0 "a" ]', ModelSyntaxError, "at least 1"),
    ('P=? [ P=? [ F "a" ] U "b" ]', ModelSyntaxError, "comparison bound"),
    ('P=? [ F "a"', ModelSyntaxError, "Cannot parse"),
], ids=["globally", "weak-until", "threshold", "negative-reward", "strict-steps",
        "zero-steps", "nested-quantitative", "unclosed"])
def test_parse_query_errors(text: str, error: type, match: str) -> None:
    """Test that queries outside the supported fragment are rejected."""
    with pytest.raises(error, match=match):
        parse_query(text)


def test_random_models_against_reference() -> None:
    """Test every operator on random chains against the dense reference computations."""
    rng = np.random.default_rng(2024)
    a_or_b = parse_query('P=? [ X "a" ]')
    bounded = parse_query('P=? [ "a" U<=4 "b" ]')
    unbounded = parse_query('P=? [ "a" U "b" ]')
    cumulative = parse_query('R{"r"}=? [ C<=6 ]')
    reach = parse_query('R{"r"}=? [ F "b" ]')

    for _ in range(200):
        model = random_dtmc(rng, int(rng.integers(1, 13)))
        a, b = mask(model, 'a'), mask(model, 'b')

        np.testing.assert_allclose(pmc_all(a_or_b, model), next_reference(model, a), atol=1e-9)
        np.testing.assert_allclose(
            pmc_all(bounded, model), bounded_until_reference(model, a, b, 4), atol=1e-9)
        np.testing.assert_allclose(pmc_all(unbounded, model), until_reference(model, a, b), atol=1e-8)
        np.testing.assert_allclose(
            pmc_all(cumulative, model), cumulative_reference(model, 'r', 6), atol=1e-9)
        np.testing.assert_allclose(
            pmc_all(reach, model), reach_reward_reference(model, 'r', b), rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("x1,x2", [
    (0.0, 0.0),
    (0.0, 1.0),
    (1.0, 1.0),
    (0.3, 0.7),
    (0.9, 0.05),
], ids=["never-wait", "wait-on-collision-course", "always-wait", "mixed", "mostly-wait-off-course"])
def test_robot_closed_form(robot: Study, x1: float, x2: float) -> None:
    """Test the robot's safe arrival probability and journey time against their closed form."""
    chain = _robot_chain(robot, x1, x2)
    probability, time = robot_values(x1, x2)

    assert pmc(SAFE_ARRIVAL, chain) == pytest.approx(probability, abs=1e-9)
    assert pmc(JOURNEY_TIME, chain) == pytest.approx(time, abs=1e-8)


def test_robot_known_values(robot: Study) -> None:
    """Test a few robot values worked out by hand."""
    assert pmc(SAFE_ARRIVAL, _robot_chain(robot, 0, 0)) == pytest.approx(0.94)
    assert pmc(JOURNEY_TIME, _robot_chain(robot, 0, 0)) == pytest.approx(10.1042)
    assert pmc(SAFE_ARRIVAL, _robot_chain(robot, 0, 1)) == pytest.approx(1.0)
    assert pmc(JOURNEY_TIME, _robot_chain(robot, 0, 1)) == pytest.approx(10.269149, abs=1e-6)
    assert pmc(JOURNEY_TIME, _robot_chain(robot, 1, 1)) == pytest.approx(14.95)


def test_next_true(robot: Study) -> None:
    """Test that some successor always exists."""
    assert pmc(parse_query('P=? [ X true ]'), _robot_chain(robot, 0.5, 0.5)) == pytest.approx(1.0)


def test_satisfies(robot: Study) -> None:
    """Test bounded queries against the closed form, at and around the threshold."""
    chain = _robot_chain(robot, 0, 0)

    assert satisfies(parse_query('P>=0.75 [ !"collision" U "done" ]'), chain)
    assert not satisfies(parse_query('P>=0.95 [ !"collision" U "done" ]'), chain)
    assert satisfies(parse_query('R{"time"}<=11 [ F "done" ]'), chain)

    with pytest.raises(ValueError, match="no bound"):
        satisfies(SAFE_ARRIVAL, chain)


def test_init_label(robot: Study) -> None:
    """Test that the initial state is labelled init unless the model says otherwise."""
    chain = _robot_chain(robot, 0, 0)
    values = pmc_all(parse_query('P=? [ X "init" ]'), chain)
    assert values[chain.initial] == 0.0

    model = ExplicitPDTMC(
        [StateTuple((s,), 1, 1, ()) for s in range(2)], 0,
        [[TransitionEntry(1)], [TransitionEntry(0)]],
        labels={'init': [1]},
    )
    assert pmc(parse_query('P=? [ X "init" ]'), model) == 1.0


def test_unreachable_target_reward() -> None:
    """Test that the expected reward is infinite when the target may be missed."""
    model = ExplicitPDTMC(
        [StateTuple((s,), 1, 1, ()) for s in range(3)], 0,
        [[TransitionEntry(1, 0.5), TransitionEntry(2, 0.5)], [TransitionEntry(1)], [TransitionEntry(2)]],
        labels={'goal': [1]},
        rewards=[RewardStructure('cost', {0: 1.0})],
    )

    values = pmc_all(parse_query('R=? [ F "goal" ]'), model)

    assert values[0] == np.inf
    assert values[1] == 0.0
    assert values[2] == np.inf


def test_unnamed_reward_uses_first_structure() -> None:
    """Test that R without a name reads the first reward structure."""
    model = ExplicitPDTMC(
        [StateTuple((0,), 1, 1, ())], 0, [[TransitionEntry(0)]],
        rewards=[RewardStructure('first', {0: 2.0}), RewardStructure('second', {0: 5.0})],
    )

    assert pmc(parse_query('R=? [ C<=3 ]'), model) == 6.0
    assert pmc(parse_query('R{"second"}=? [ C<=3 ]'), model) == 15.0


@pytest.mark.parametrize("text,error", [
    ('P=? [ F "nowhere" ]', UnknownLabelError),
    ('R{"fuel"}=? [ C<=3 ]', UnknownRewardStructureError),
], ids=["label", "reward"])
def test_unknown_names(robot: Study, text: str, error: type) -> None:
    """Test that queries naming something the model lacks are rejected."""
    with pytest.raises(error):
        pmc(parse_query(text), _robot_chain(robot, 0, 0))


def test_parametric_model_is_refused(robot: Study) -> None:
    """Test that a model must be instantiated before it is checked."""
    with pytest.raises(MissingParameterError, match="x1_c0"):
        pmc(SAFE_ARRIVAL, robot.model)
