"""
Fixed-step kinematics of the robot and a collider.

The robot starts at the origin heading along +y and travels towards the
goal at constant speed, steering with a gain on its heading error. It slows
down while its heading is off by more than the heading tolerance, and while
it overlaps the collider. The collider moves at constant speed and turn
rate. Many encounters are integrated in lock-step.
"""
from __future__ import annotations

import logging
import math
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from ..exceptions import SimulationTimeoutError

logger = logging.getLogger(__name__)

# Class labels of the collision-prediction task
NO_COLLISION = 1
COLLISION = 2


class SimConfig(NamedTuple):
    """
    The settings of the simulated scenario.

    :param alpha: Steering gain
    :param goal: The goal position
    :param epsilon: Half width of the goal box
    :param x_lim: Colliders spawn with x in [-x_lim, x_lim]
    :param y_lim: Colliders spawn with y in [0, y_lim]
    :param s_lim: The highest collider speed
    :param turn_lim: The highest collider turn rate, rad/s
    :param dt: The integration step, s
    :param speed: The robot's cruising speed
    :param slow_speed: The robot's speed while correcting course or overlapping
    :param heading_tolerance: Heading error above which the robot slows down, rad
    :param radius: The radius of both bodies
    :param max_time: Journeys longer than this time out, s
    :param seed: The random seed
    """
    alpha: float = 0.5
    goal: Tuple[float, float] = (0.0, 10.0)
    epsilon: float = 0.05
    x_lim: float = 10.0
    y_lim: float = 10.0
    s_lim: float = 2.0
    turn_lim: float = math.pi / 4
    dt: float = 0.01
    speed: float = 1.0
    slow_speed: float = 0.1
    heading_tolerance: float = math.pi / 36
    radius: float = 0.5
    max_time: float = 100.0
    seed: int = 0

    def check(self) -> SimConfig:
        """
        Check every limit, step and speed is positive.

        :raises ValueError: Naming the first offending setting
        """
        for name in (
            'alpha', 'epsilon', 'x_lim', 'y_lim', 's_lim', 'turn_lim', 'dt',
            'speed', 'slow_speed', 'heading_tolerance', 'radius', 'max_time',
        ):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"SimConfig.{name} must be positive, got {value!r}")
        return self


class EncounterState(NamedTuple):
    """
    A collider relative to the robot at the start of a leg.

    :param x_diff: Horizontal offset of the collider
    :param y_diff: Vertical offset of the collider
    :param speed: Collider speed
    :param heading: Collider heading, rad in [-pi, pi]
    :param turn_rate: Collider angular velocity, rad/s
    """
    x_diff: float
    y_diff: float
    speed: float
    heading: float
    turn_rate: float

    def normalised(self, cfg: SimConfig) -> Tuple[float, float, float, float, float]:
        """Scale to [-1, 1] for x_diff, heading and turn rate, [0, 1] for y_diff and speed."""
        return (
            self.x_diff / cfg.x_lim,
            self.y_diff / cfg.y_lim,
            self.speed / cfg.s_lim,
            self.heading / math.pi,
            self.turn_rate / cfg.turn_lim,
        )


class Encounters(NamedTuple):
    """Many encounter states, one array per field."""
    x_diff: np.ndarray
    y_diff: np.ndarray
    speed: np.ndarray
    heading: np.ndarray
    turn_rate: np.ndarray

    @property
    def size(self) -> int:
        return int(self.x_diff.shape[0])

    def state(self, index: int) -> EncounterState:
        return EncounterState(*(float(field[index]) for field in self))

    def take(self, indices: np.ndarray | Sequence[int]) -> Encounters:
        """Select encounters by index."""
        return Encounters(*(field[np.asarray(indices, dtype=np.int64)] for field in self))

    def normalised(self, cfg: SimConfig) -> np.ndarray:
        """An (N, 5) array of the normalised states."""
        return np.column_stack([
            self.x_diff / cfg.x_lim,
            self.y_diff / cfg.y_lim,
            self.speed / cfg.s_lim,
            self.heading / math.pi,
            self.turn_rate / cfg.turn_lim,
        ])

    @classmethod
    def from_states(cls, states: Sequence[EncounterState]) -> Encounters:
        if not states:
            return cls(*(np.zeros(0) for _ in EncounterState._fields))
        return cls(*(np.asarray(column, dtype=float) for column in zip(*states)))

    @classmethod
    def concatenate(cls, parts: Sequence[Encounters]) -> Encounters:
        if not parts:
            return cls.from_states([])
        return cls(*(np.concatenate(columns) for columns in zip(*parts)))


class Outcomes(NamedTuple):
    """
    What happened in a batch of journeys.

    :param collision: Whether the bodies overlapped at any step
    :param journey_time: The time taken to reach the goal
    :param timed_out: Whether the journey hit the time limit
    """
    collision: np.ndarray
    journey_time: np.ndarray
    timed_out: np.ndarray


class JourneyOutcome(NamedTuple):
    collision: bool
    journey_time: float


def sample_encounters(cfg: SimConfig, rng: np.random.Generator, size: int) -> Encounters:
    """
    Draw collider spawns uniformly within the configured limits.

    :param cfg: The scenario
    :param rng: The random stream to draw from
    :param size: The number of spawns
    """
    return Encounters(
        x_diff=rng.uniform(-cfg.x_lim, cfg.x_lim, size),
        y_diff=rng.uniform(0.0, cfg.y_lim, size),
        speed=rng.uniform(0.0, cfg.s_lim, size),
        heading=rng.uniform(-math.pi, math.pi, size),
        turn_rate=rng.uniform(-cfg.turn_lim, cfg.turn_lim, size),
    )


def simulate_batch(cfg: SimConfig, encounters: Encounters | None = None, size: int = 1) -> Outcomes:
    """
    Integrate journeys in lock-step until every robot reaches the goal or times out.

    :param cfg: The scenario
    :param encounters: The collider of each journey, or None for journeys
        without a collider
    :param size: The number of journeys when there is no collider
    :return: The outcome of each journey; timed out journeys report max_time
    """
    cfg.check()
    n = encounters.size if encounters is not None else size
    robot = np.zeros((n, 2))
    heading = np.full(n, math.pi / 2)
    goal = np.asarray(cfg.goal, dtype=float)

    if encounters is not None:
        collider = np.column_stack([encounters.x_diff, encounters.y_diff]).astype(float)
        collider_heading = encounters.heading.astype(float).copy()
        collider_speed = encounters.speed.astype(float)
        collider_turn = encounters.turn_rate.astype(float)

    contact = 2 * cfg.radius
    collision = np.zeros(n, dtype=bool)
    done = np.zeros(n, dtype=bool)
    steps = np.zeros(n, dtype=np.int64)
    max_steps = int(math.ceil(cfg.max_time / cfg.dt))

    for _ in range(max_steps):
        active = ~done
        if not active.any():
            break
        if encounters is not None:
            overlap = np.hypot(*(collider - robot).T) < contact
            collision |= overlap & active
        else:
            overlap = np.zeros(n, dtype=bool)

        to_goal = goal - robot
        direction = np.column_stack([np.cos(heading), np.sin(heading)])
        cross = direction[:, 0] * to_goal[:, 1] - direction[:, 1] * to_goal[:, 0]
        dot = direction[:, 0] * to_goal[:, 0] + direction[:, 1] * to_goal[:, 1]
        error = np.arctan2(cross, dot)

        speed = np.where((np.abs(error) > cfg.heading_tolerance) | overlap, cfg.slow_speed, cfg.speed)
        speed = np.where(active, speed, 0.0)
        robot += direction * (speed * cfg.dt)[:, None]
        heading += np.where(active, cfg.alpha * error * cfg.dt, 0.0)

        if encounters is not None:
            collider_heading += collider_turn * cfg.dt
            collider[:, 0] += collider_speed * np.cos(collider_heading) * cfg.dt
            collider[:, 1] += collider_speed * np.sin(collider_heading) * cfg.dt

        steps += active
        reached = np.all(np.abs(robot - goal) <= cfg.epsilon, axis=1)
        done |= reached & active

    timed_out = ~done
    journey_time = np.where(timed_out, cfg.max_time, steps * cfg.dt)
    if timed_out.any():
        logger.debug(f"{int(timed_out.sum())} of {n} journeys timed out")
    return Outcomes(collision, journey_time, timed_out)


def simulate_encounter(cfg: SimConfig, collider: EncounterState | None) -> JourneyOutcome:
    """
    Simulate one journey with the robot committed to going.

    :param cfg: The scenario
    :param collider: The collider, or None if there is none
    :raises SimulationTimeoutError: If the goal is not reached within max_time
    :return: Whether the bodies collided and the time taken
    """
    encounters = None if collider is None else Encounters.from_states([collider])
    outcomes = simulate_batch(cfg, encounters)
    if outcomes.timed_out[0]:
        raise SimulationTimeoutError(cfg.max_time)
    return JourneyOutcome(bool(outcomes.collision[0]), float(outcomes.journey_time[0]))


def label_oracle(cfg: SimConfig, collider: EncounterState) -> int:
    """
    The true class of a spawn: COLLISION if going would collide, NO_COLLISION otherwise.

    :raises SimulationTimeoutError: If the goal is not reached within max_time
    """
    return COLLISION if simulate_encounter(cfg, collider).collision else NO_COLLISION


def labels_of(outcomes: Outcomes) -> np.ndarray:
    """The class of each simulated spawn."""
    return np.where(outcomes.collision, COLLISION, NO_COLLISION)


def free_travel_time(cfg: SimConfig) -> float:
    """The time of a journey without a collider."""
    return simulate_encounter(cfg, None).journey_time
