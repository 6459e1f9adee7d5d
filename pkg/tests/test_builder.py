"""Test building explicit state spaces from model sources."""
from __future__ import annotations

import logging

import numpy as np
import pytest

from decsynth.builder import BuildOptions, build, check_turn_structure
from decsynth.exceptions import (
    CompositionDeadlockError, ModelSyntaxError, ParameterProductError,
    StateExplosionError, UnboundIdentifierError, VariableRangeError,
)
from decsynth.language import parse
from decsynth.pdtmc import StateTuple, TransitionEntry, validate

from .conftest import Study
from .helpers import random_turn_model

SYNCHRONISED = """
dtmc

module A
    a : [0..1] init 0;
    [go] a=0 -> 0.3:(a'=1) + 0.7:(a'=0);
    [stop] a=1 -> (a'=1);
endmodule

module B
    b : [0..1] init 0;
    [go] b=0 -> 0.6:(b'=1) + 0.4:(b'=0);
    [go] b=1 -> (b'=1);
endmodule
"""

CHOICE = """
dtmc

module M
    x : [0..2] init 0;
    [] x=0 -> (x'=1);
    [] x=0 -> (x'=2);
    [] x>0 -> (x'=x);
endmodule
"""

WEIGHTED = """
dtmc

const double p = 0.25;
const int N = 1;

module M
    x : [0..N] init 0;
    [] x=0 -> p:(x'=1) + 1-p:(x'=0);
    [] x=1 -> (x'=1);
endmodule
"""

# the managed system moves at t=2, which the turn discipline forbids
BROKEN_TURNS = """
dtmc

// @role: managed
module System
    z : [0..1] init 0;
    [sense] true -> (z'=1-z);
endmodule

// @role: environment
module Environment
    k : [1..2] init 1;
    [sense] t=2 -> 0.5:(k'=1) + 0.5:(k'=2);
endmodule

// @role: turn
module Turn
    t : [1..3] init 1;
    [sense] t=2 -> (t'=3);
    [other] t!=2 -> (t'=(t=1 ? 2 : 1));
endmodule
"""


def _row(model, source: int) -> dict:
    return {model.states[e.target].z: e.constant for e in model.transitions[source]}


def test_build_robot(robot: Study) -> None:
    """Test that the robot model builds into a turn-structured parametric chain."""
    model = robot.model

    assert not validate(model)
    assert check_turn_structure(model).ok
    assert model.is_parametric
    assert model.parameters == {'x1_c0', 'x1_c1', 'x2_c0', 'x2_c1'}

    assert model.layout.z_names == ('z',)
    assert model.layout.k_name == 'k'
    assert model.layout.classes == 2
    assert model.layout.t_name == 't'
    assert model.layout.c_names == ('wait',)

    x1, x2 = model.families
    assert (x1.name, x2.name) == ('x1', 'x2')
    assert x1.members == ('x1_c0', 'x1_c1')
    assert x1.targets == ((0,), (1,))
    # each family is only used when the controller sees one class
    assert (x1.observed, x2.observed) == (1, 2)

    assert model.states[model.initial] == StateTuple((0,), 1, 1, (0,))
    assert model.labels['done']
    assert model.labels['collision']
    assert model.reward('time').transition_rewards


def test_build_is_deterministic() -> None:
    """Test that building the same model twice numbers the states the same way."""
    source = random_turn_model(np.random.default_rng(3))

    first = build(parse(source))
    second = build(parse(source))

    assert first.states == second.states
    assert first.transitions == second.transitions


def test_synchronisation() -> None:
    """Test that commands sharing an action move together with multiplied probabilities."""
    model = build(parse(SYNCHRONISED))

    assert not validate(model)
    assert _row(model, model.initial) == pytest.approx({
        (1, 1): 0.18,
        (1, 0): 0.12,
        (0, 1): 0.42,
        (0, 0): 0.28,
    })
    # B may only join in with its idle command once b=1
    index = model.index_of(StateTuple((0, 1), 1, 1, ()))
    assert _row(model, index) == pytest.approx({(1, 1): 0.3, (0, 1): 0.7})


def test_uniform_choice(caplog) -> None:
    """Test that several enabled moves are chosen uniformly, with a warning."""
    with caplog.at_level(logging.WARNING):
        model = build(parse(CHOICE))

    assert _row(model, model.initial) == pytest.approx({(1,): 0.5, (2,): 0.5})
    assert "chosen uniformly" in caplog.text


def test_empty_model() -> None:
    """Test that a model without modules is a single absorbing state."""
    model = build(parse("dtmc\n"))

    assert len(model) == 1
    assert model.transitions[0] == (TransitionEntry(0, 1.0),)


def test_constant_override() -> None:
    """Test that constants given to the builder replace the values in the source."""
    default = build(parse(WEIGHTED))
    assert _row(default, default.initial) == pytest.approx({(1,): 0.25, (0,): 0.75})

    model = build(parse(WEIGHTED), BuildOptions(constants={'p': 0.5}))
    assert _row(model, model.initial) == pytest.approx({(1,): 0.5, (0,): 0.5})


def test_value_for_parameter_constant() -> None:
    """Test that a constant without a value stops being symbolic once it is given one."""
    source = WEIGHTED.replace("const double p = 0.25;", "const double p;")

    model = build(parse(source), BuildOptions(constants={'p': 0.5}))

    assert not model.is_parametric
    assert _row(model, model.initial) == pytest.approx({(1,): 0.5, (0,): 0.5})


@pytest.mark.parametrize("constants,error,match", [
    ({'q': 1}, UnboundIdentifierError, "'q' is not a declared constant"),
    ({'N': 1.5}, ValueError, "'N' must be an integer"),
], ids=["undeclared", "fractional-int"])
def test_bad_constant_override(constants: dict, error: type, match: str) -> None:
    """Test that unusable constant overrides are rejected."""
    with pytest.raises(error, match=match):
        build(parse(WEIGHTED), BuildOptions(constants=constants))


@pytest.mark.parametrize("source,error,match", [
    (
        "dtmc\nmodule M\n    x : [0..1] init 0;\n    [] true -> (x'=x+1);\nendmodule\n",
        VariableRangeError, "outside \\[0..1\\]",
    ),
    (
        "dtmc\nmodule M\n    x : [0..1] init 0;\n    [] x=0 -> (x'=1);\nendmodule\n",
        CompositionDeadlockError, "x=1",
    ),
    (
        "dtmc\n// @controller-params: p\nmodule M\n    x : bool init false;\n"
        "    [] true -> p:(x'=true) + p:(x'=false);\nendmodule\n",
        ModelSyntaxError, "outside a controller module",
    ),
    (
        "dtmc\n// @controller-params: p\n// @role: controller\nmodule M\n    x : bool init false;\n"
        "    [] p>0 -> (x'=true);\nendmodule\n",
        ModelSyntaxError, "may only be used alone",
    ),
    (
        "dtmc\n// @controller-params: p, q\n"
        "// @role: controller\nmodule C1\n    x : bool init false;\n"
        "    [d] true -> p:(x'=true) + p:(x'=false);\nendmodule\n"
        "// @role: controller\nmodule C2\n    y : bool init false;\n"
        "    [d] true -> q:(y'=true) + q:(y'=false);\nendmodule\n",
        ParameterProductError, "'p' and 'q'",
    ),
    (
        "dtmc\n// @role: environment\nmodule E\n    k : [0..2] init 1;\nendmodule\n",
        VariableRangeError, "1..K",
    ),
], ids=["range", "deadlock", "parameter-outside-controller", "parameter-in-guard",
        "parameter-product", "class-range"])
def test_build_errors(source: str, error: type, match: str) -> None:
    """Test that models which cannot be built are rejected with a precise error."""
    with pytest.raises(error, match=match):
        build(parse(source))


def test_state_limit() -> None:
    """Test that exploration stops once the state limit is passed."""
    source = (
        "dtmc\nmodule M\n    x : [0..10] init 0;\n"
        "    [] x<10 -> (x'=x+1);\n    [] x=10 -> (x'=x);\nendmodule\n")

    assert len(build(parse(source))) == 11
    with pytest.raises(StateExplosionError, match="limit of 3 states"):
        build(parse(source), BuildOptions(state_limit=3))


def test_random_models_are_turn_structured() -> None:
    """Test that random turn-structured models build into valid chains that keep the turn discipline."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        model = build(parse(random_turn_model(rng)))
        assert not validate(model)
        assert check_turn_structure(model).ok
        for family in model.families:
            assert family.members == (f"{family.name}_c0", f"{family.name}_c1")


def test_turn_structure_violations() -> None:
    """Test that moves outside a module's turn are reported edge by edge."""
    report = check_turn_structure(build(parse(BROKEN_TURNS)))

    assert not report.ok
    assert {v.kind for v in report} == {'turn-frame'}
    assert any("system state changed at t=2" in v.detail for v in report)


def test_turn_structure_needs_roles() -> None:
    """Test that a model without environment and turn variables fails the check."""
    report = check_turn_structure(build(parse(CHOICE)))

    assert len(report) == 1
    assert "no environment and turn variables" in report.violations[0].detail
