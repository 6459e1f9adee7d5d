"""
Test the robot simulator.

Validation runs use hand-made spawn banks with fixed journey times, which
makes a leg of a simulated journey follow the robot model exactly.
"""
from __future__ import annotations

import csv
import math

import numpy as np
import pytest

from decsynth.augment import AugmentationSpec, augment
from decsynth.controller import ControllerAssignment, ControllerKind
from decsynth.exceptions import SamplingStallError, SimulationTimeoutError
from decsynth.simulator import (
    COLLISION, NO_COLLISION, EncounterBuckets, EncounterState, Encounters,
    SimConfig, SurrogatePerception, TimeConstants, estimate_time_constants,
    generate_dataset, label_oracle, model_gap, robot_constants,
    sample_encounters, simulate_batch, simulate_encounter, validate_controller,
)
from decsynth.simulator.journeys import wait_probabilities
from decsynth.uncertainty import perfect_tensor

from .conftest import Study, robot_tensor
from .helpers import P_COLLIDER, P_OCC, robot_values

TRAVEL = 9.95
DELAY = 2.57
ON_PATH = EncounterState(0.0, 5.0, 0.0, 0.0, 0.0)
FAR_AWAY = EncounterState(10.0, 0.0, 0.0, 0.0, 0.0)


def _buckets() -> EncounterBuckets:
    """Banks of one spawn each, timed like the robot model's constants."""
    return EncounterBuckets(
        Encounters.from_states([FAR_AWAY]), np.array([TRAVEL]),
        Encounters.from_states([ON_PATH]), np.array([TRAVEL + DELAY]),
    )


def _validate(assignment: ControllerAssignment, tensor=None, **kwargs):
    surrogate = SurrogatePerception(tensor if tensor is not None else perfect_tensor(2))
    settings = dict(
        p_collider=P_COLLIDER, p_occ=P_OCC, wait_time=5.0,
        n_journeys=40, n_waypoints=100, travel_time=TRAVEL,
    )
    settings.update(kwargs)
    return validate_controller(SimConfig(), assignment, surrogate, _buckets(), **settings)


def test_config_check() -> None:
    """Test that every setting must be positive."""
    assert SimConfig().check() == SimConfig()

    with pytest.raises(ValueError, match="SimConfig.dt must be positive"):
        SimConfig(dt=0).check()
    with pytest.raises(ValueError, match="SimConfig.radius"):
        simulate_batch(SimConfig(radius=-1.0))


def test_free_travel() -> None:
    """Test that a journey without a collider runs straight at full speed."""
    outcome = simulate_encounter(SimConfig(), None)

    assert not outcome.collision
    assert outcome.journey_time == pytest.approx(TRAVEL, abs=0.02)


def test_collider_on_path() -> None:
    """Test that a collider sitting on the path is hit and slows the robot down."""
    cfg = SimConfig()
    outcome = simulate_encounter(cfg, ON_PATH)

    assert outcome.collision
    # two metres of overlap at a tenth of the speed
    assert outcome.journey_time == pytest.approx(TRAVEL - 2 + 20, abs=0.05)
    assert label_oracle(cfg, ON_PATH) == COLLISION
    assert label_oracle(cfg, FAR_AWAY) == NO_COLLISION


def test_timeout() -> None:
    with pytest.raises(SimulationTimeoutError, match="within 5"):
        simulate_encounter(SimConfig(max_time=5.0), None)

    outcomes = simulate_batch(SimConfig(max_time=5.0), size=3)
    assert outcomes.timed_out.all()
    assert outcomes.journey_time.tolist() == [5.0, 5.0, 5.0]


def test_batch_is_lock_step() -> None:
    """Test that journeys simulated together match journeys simulated alone."""
    cfg = SimConfig()
    encounters = Encounters.from_states([ON_PATH, FAR_AWAY])

    outcomes = simulate_batch(cfg, encounters)

    assert outcomes.collision.tolist() == [True, False]
    for i in range(2):
        alone = simulate_encounter(cfg, encounters.state(i))
        assert alone.journey_time == pytest.approx(outcomes.journey_time[i], abs=1e-9)


def test_encounters() -> None:
    """Test selecting, joining and normalising encounters."""
    cfg = SimConfig()
    encounters = sample_encounters(cfg, np.random.default_rng(4), 50)

    assert encounters.size == 50
    normalised = encounters.normalised(cfg)
    assert normalised.shape == (50, 5)
    assert np.all(np.abs(normalised) <= 1)
    assert np.all(normalised[:, [1, 2]] >= 0)
    assert encounters.state(7).normalised(cfg) == pytest.approx(tuple(normalised[7]))

    joined = Encounters.concatenate([encounters.take([3, 1]), encounters.take([0])])
    assert joined.size == 3
    assert joined.state(1) == encounters.state(1)
    assert joined.state(2) == encounters.state(0)
    assert Encounters.concatenate([]).size == 0


def test_surrogate_frequencies() -> None:
    """Test that the surrogate perceives with the tensor's probabilities."""
    tensor = robot_tensor()
    surrogate = SurrogatePerception(tensor, seed=8)
    draws = 40_000

    preds, verdicts = surrogate.perceive_many(np.full(draws, NO_COLLISION))

    expected = tensor.probability_array()[0]
    for pred in (1, 2):
        for index in range(len(tensor.verdicts)):
            frequency = np.mean((preds == pred) & (verdicts == index))
            assert frequency == pytest.approx(expected[pred - 1, index], abs=0.01)


def test_surrogate_is_seeded() -> None:
    classes = np.array([1, 2, 2, 1, 2] * 20)
    first = SurrogatePerception(robot_tensor(), seed=3).perceive_many(classes)
    second = SurrogatePerception(robot_tensor(), seed=3).perceive_many(classes)

    np.testing.assert_array_equal(first[0], second[0])
    np.testing.assert_array_equal(first[1], second[1])


def test_perfect_surrogate() -> None:
    """Test that a perfect tensor always reports the true class, verified."""
    surrogate = SurrogatePerception(perfect_tensor(2, n=1), seed=0)

    assert surrogate.perceive(COLLISION) == (COLLISION, (True,))
    samples = surrogate.samples(np.array([1, 2, 2]))
    assert [(s.true, s.pred, s.verdicts) for s in samples] == [
        (1, 1, (True,)), (2, 2, (True,)), (2, 2, (True,))]


def test_generate_dataset(tmp_path) -> None:
    """Test that a dataset is balanced, labelled by the oracle and written as CSV."""
    cfg = SimConfig()
    dataset = generate_dataset(
        cfg, 3, surrogate=SurrogatePerception(robot_tensor(), seed=1), rng=np.random.default_rng(1))

    assert sorted(dataset.labels.tolist()) == [1, 1, 1, 2, 2, 2]
    assert dataset.encounters.size == 6
    assert len(dataset.samples) == 6
    assert [s.true for s in dataset.samples] == dataset.labels.tolist()
    for i in range(2):
        assert label_oracle(cfg, dataset.encounters.state(i)) == dataset.labels[i]

    path = tmp_path / 'encounters.csv'
    dataset.write_encounters(path, cfg)
    with open(path, newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['x_diff', 'y_diff', 'speed', 'heading', 'turn_rate', 'label']
    assert len(rows) == 7
    assert [int(row[5]) for row in rows[1:]] == dataset.labels.tolist()


def test_generate_dataset_errors() -> None:
    with pytest.raises(ValueError, match="at least 1"):
        generate_dataset(SimConfig(), 0)

    with pytest.raises(SamplingStallError, match="after 4 attempts") as error:
        generate_dataset(SimConfig(), 5, max_attempts=4)
    assert error.value.label == NO_COLLISION


def test_robot_constants() -> None:
    constants = TimeConstants(9.9, 2.5, 0.1, 100)
    assert robot_constants(constants) == {'travel_time': 9.9, 'collision_time': 2.5, 'p_occ': 0.1}


@pytest.mark.slow
def test_estimate_time_constants() -> None:
    """Test the measured constants of the default scenario."""
    constants = estimate_time_constants(SimConfig(), samples=200)

    assert constants.travel_time == pytest.approx(TRAVEL, abs=0.02)
    assert constants.collision_time > 0
    assert 0 < constants.p_occ < 0.5
    assert constants.samples == 200


def test_wait_probabilities(robot: Study) -> None:
    """Test the wait table of perfect and classifier-perception controllers."""
    perfect = ControllerAssignment.from_scalars(robot.model.families, [0.2, 0.7])
    np.testing.assert_allclose(wait_probabilities(perfect, robot_tensor()), [[0.2, 0.2], [0.7, 0.7]])

    augmented = augment(robot.model, AugmentationSpec(robot_tensor()))
    dnn = ControllerAssignment.from_scalars(augmented.families, [0.0, 0.1, 0.6, 1.0], ControllerKind.DNN)
    # families run by predicted class then verdict, and verdict index 0 is the verified one
    np.testing.assert_allclose(wait_probabilities(dnn, robot_tensor()), [[0.1, 0.0], [1.0, 0.6]])

    with pytest.raises(ValueError, match="no decision for predicted class 2"):
        only_x1 = ControllerAssignment.from_scalars(robot.model.families[:1], [0.5])
        wait_probabilities(only_x1, perfect_tensor(2))


def test_never_wait_without_colliders(robot: Study) -> None:
    """Test that every leg takes the travel time when no collider ever shows up."""
    never = ControllerAssignment.from_scalars(robot.model.families, [0.0, 0.0])

    result = _validate(never, p_collider=0.0, n_journeys=5, n_waypoints=10)

    assert result.mean_time == pytest.approx(10 * TRAVEL)
    assert result.mean_time_stderr == pytest.approx(0.0, abs=1e-9)
    assert result.collision_rate == 0.0
    assert result.waypoint_collision_free == 1.0
    assert result.waypoint_time == pytest.approx(TRAVEL)


def test_always_wait_never_collides(robot: Study) -> None:
    always = ControllerAssignment.from_scalars(robot.model.families, [1.0, 1.0])

    result = _validate(always, n_journeys=10, n_waypoints=20)

    assert result.collision_rate == 0.0
    assert result.journey_collision.sum() == 0
    assert result.waypoint_time > TRAVEL


@pytest.mark.parametrize("x1,x2", [
    (0.0, 0.0),
    (0.0, 1.0),
    (0.4, 0.6),
], ids=["never-wait", "wait-on-collision-course", "mixed"])
def test_perfect_controller_matches_model(robot: Study, x1: float, x2: float) -> None:
    """Test that simulated waypoints agree with the robot model within a few standard errors."""
    assignment = ControllerAssignment.from_scalars(robot.model.families, [x1, x2])
    result = _validate(assignment)
    probability, time = robot_values(x1, x2)

    gap = model_gap(result, robot.model, assignment)

    assert gap.model_collision_free == pytest.approx(probability)
    assert gap.model_time == pytest.approx(time)
    assert abs(gap.collision_free_gap) <= 5 * result.waypoint_collision_free_stderr + 1e-12
    assert abs(gap.time_gap) <= 5 * result.waypoint_time_stderr + 1e-12


def test_dnn_controller_matches_model(robot: Study) -> None:
    """Test a classifier-perception controller against the augmented model."""
    tensor = robot_tensor()
    augmented = augment(robot.model, AugmentationSpec(tensor))
    assignment = ControllerAssignment.from_scalars(
        augmented.families, [0.0, 0.0, 0.5, 1.0], ControllerKind.DNN)

    result = _validate(assignment, tensor)
    gap = model_gap(result, augmented, assignment)

    assert abs(gap.collision_free_gap) <= 5 * result.waypoint_collision_free_stderr
    assert abs(gap.time_gap) <= 5 * result.waypoint_time_stderr


@pytest.mark.slow
def test_model_gap_shrinks_with_longer_journeys(robot: Study) -> None:
    """Test that the median gap over three seeds shrinks as journeys get longer."""
    assignment = ControllerAssignment.from_scalars(robot.model.families, [0.4, 0.6])
    surrogate = SurrogatePerception(perfect_tensor(2))

    medians = []
    for n_waypoints in (100, 1000, 10000):
        gaps = []
        for seed in (1, 2, 3):
            result = validate_controller(
                SimConfig(seed=seed), assignment, surrogate, _buckets(),
                p_collider=P_COLLIDER, p_occ=P_OCC, n_journeys=1000,
                n_waypoints=n_waypoints, travel_time=TRAVEL,
            )
            gap = model_gap(result, robot.model, assignment)
            assert abs(gap.collision_free_gap) <= 5 * result.waypoint_collision_free_stderr
            assert abs(gap.time_gap) <= 5 * result.waypoint_time_stderr
            gaps.append((abs(gap.collision_free_gap), abs(gap.time_gap)))
        medians.append(np.median(gaps, axis=0))

    # two decades more legs cut the noise tenfold
    assert medians[2][0] < medians[0][0]
    assert medians[2][1] < medians[0][1]


def test_validation_ignores_worker_count(robot: Study) -> None:
    """Test that the seeded chunks give the same journeys however many processes run them."""
    assignment = ControllerAssignment.from_scalars(robot.model.families, [0.3, 0.6])

    serial = _validate(assignment, n_journeys=600, n_waypoints=5)
    parallel = _validate(assignment, n_journeys=600, n_waypoints=5, jobs=2)

    np.testing.assert_array_equal(serial.journey_time, parallel.journey_time)
    np.testing.assert_array_equal(serial.journey_collision, parallel.journey_collision)
    assert serial.to_json() == parallel.to_json()


def test_validation_result_json(robot: Study) -> None:
    assignment = ControllerAssignment.from_scalars(robot.model.families, [0.0, 1.0])
    result = _validate(assignment, n_journeys=3, n_waypoints=4)

    document = result.to_json()
    assert document['n_journeys'] == 3
    assert 'journey_time' not in document
    raw = result.to_json(include_raw=True)
    assert len(raw['journey_time']) == 3
    assert raw['journey_collision'] == [False, False, False]
    assert all(math.isfinite(t) for t in raw['journey_time'])


def test_validation_errors(robot: Study) -> None:
    assignment = ControllerAssignment.from_scalars(robot.model.families, [0.0, 0.0])

    with pytest.raises(ValueError, match="at least 1"):
        _validate(assignment, n_journeys=0)
    with pytest.raises(ValueError, match="at least 1"):
        _validate(assignment, n_waypoints=0)
