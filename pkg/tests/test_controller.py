"""Test controller parameter families and assignments."""
from __future__ import annotations

import pytest

from decsynth.controller import (
    ControllerAssignment, ControllerKind, make_family, member_name,
    render_configuration, render_verdicts,
)
from decsynth.exceptions import MissingParameterError, SimplexViolationError

WAIT = make_family('x1', [(1,), (0,)], observed=1)
SPEED = make_family('s', [(0, 2), (0, 1), (1, 0), (0, 1)])


def test_make_family() -> None:
    """Test that members are named after their targets, in target order."""
    assert WAIT.members == ('x1_c0', 'x1_c1')
    assert WAIT.targets == ((0,), (1,))
    assert SPEED.members == ('s_c0_1', 's_c0_2', 's_c1_0')
    assert SPEED.member_for((1, 0)) == 's_c1_0'

    with pytest.raises(KeyError, match="no member for configuration"):
        WAIT.member_for((2,))


def test_names() -> None:
    assert member_name('x2_v10', (1,)) == 'x2_v10_c1'
    assert render_configuration([True, 3]) == '1_3'
    assert render_verdicts((True, False, True)) == '101'
    assert render_verdicts(()) == ''


def test_assignment() -> None:
    """Test reading an assignment back."""
    assignment = ControllerAssignment({'x1_c0': 0.25, 'x1_c1': 0.75}, [WAIT])

    assert assignment['x1_c1'] == 0.75
    assert 'x1_c0' in assignment
    assert len(assignment) == 2
    assert assignment.family_vector(WAIT) == (0.25, 0.75)
    assert assignment.kind is ControllerKind.PERFECT
    assert not assignment.is_deterministic()
    assert repr(assignment) == "ControllerAssignment(perfect: x1_c0=0.25, x1_c1=0.75)"


def test_assignment_is_read_only() -> None:
    assignment = ControllerAssignment({'x1_c0': 1, 'x1_c1': 0}, [WAIT])

    with pytest.raises(TypeError):
        assignment.values['x1_c0'] = 0.5  # type: ignore[index]
    assert assignment.is_deterministic()


@pytest.mark.parametrize("values,error,match", [
    ({'x1_c0': 0.5, 'x1_c1': 0.6}, SimplexViolationError, "'x1' sums to"),
    ({'x1_c0': 1.0}, MissingParameterError, "x1_c1"),
    ({'x1_c0': 1.5, 'x1_c1': -0.5}, ValueError, "must be a probability"),
    ({'x1_c0': float('nan'), 'x1_c1': 0.5}, ValueError, "must be a probability"),
], ids=["sum", "partial", "range", "nan"])
def test_assignment_errors(values: dict, error: type, match: str) -> None:
    with pytest.raises(error, match=match):
        ControllerAssignment(values, [WAIT])


def test_unassigned_family() -> None:
    """Test that a family may be left out entirely, but then cannot be read."""
    assignment = ControllerAssignment({'x1_c0': 1, 'x1_c1': 0}, [WAIT, SPEED])

    with pytest.raises(MissingParameterError, match="s_c0_1, s_c0_2, s_c1_0"):
        assignment.family_vector(SPEED)


def test_equality_and_key() -> None:
    """Test that the kind and values decide equality, and the key is stable."""
    a = ControllerAssignment({'x1_c0': 0.5, 'x1_c1': 0.5})
    b = ControllerAssignment({'x1_c1': 0.5, 'x1_c0': 0.5})
    dnn = ControllerAssignment({'x1_c0': 0.5, 'x1_c1': 0.5}, kind=ControllerKind.DNN)

    assert a == b
    assert a.key() == b.key()
    assert len(a.key()) == 64
    assert hash(a) == hash(b)
    assert a != dnn
    assert a.key() != ControllerAssignment({'x1_c0': 0.4, 'x1_c1': 0.6}).key()


def test_from_vectors() -> None:
    assignment = ControllerAssignment.from_vectors([WAIT, SPEED], [[1, 0], [0.2, 0.3, 0.5]])

    assert assignment.family_vector(SPEED) == (0.2, 0.3, 0.5)
    with pytest.raises(ValueError, match="Expected 2 families, got 1 vectors"):
        ControllerAssignment.from_vectors([WAIT, SPEED], [[1, 0]])
    with pytest.raises(ValueError, match="'s' has 3 members, got 2 values"):
        ControllerAssignment.from_vectors([WAIT, SPEED], [[1, 0], [0.5, 0.5]])


def test_from_scalars() -> None:
    """Test that a scalar goes to the last member and its complement to the first."""
    assignment = ControllerAssignment.from_scalars([WAIT], [0.3], ControllerKind.DNN)

    assert assignment.family_vector(WAIT) == pytest.approx((0.7, 0.3))
    assert assignment.kind is ControllerKind.DNN
    with pytest.raises(ValueError, match="'s' is not binary"):
        ControllerAssignment.from_scalars([SPEED], [0.5])
