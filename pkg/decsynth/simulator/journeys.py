"""
Multi-waypoint journeys driven by a synthesised controller.

At every waypoint a collider is present with probability p_collider. A
present collider is drawn from the collision bucket with probability p_occ
and from the collision-free bucket otherwise, the surrogate perceives it, and
the controller decides whether to wait or go. Waiting costs the wait time
and the waypoint starts over with a new collider. Going costs the recorded
journey time of the drawn spawn.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Iterator, List, NamedTuple, Tuple

import numpy as np

from ..controller import ControllerAssignment
from ..exceptions import SimulationTimeoutError
from ..logging import log_to_debug, timed
from ..pctl import parse_query, pmc
from ..pdtmc import ExplicitPDTMC, instantiate
from ..uncertainty import ConfusionTensor
from .kinematics import (
    COLLISION, NO_COLLISION, Encounters, SimConfig, free_travel_time,
    labels_of, sample_encounters, simulate_batch,
)
from .perception import SurrogatePerception, generate_dataset

logger = logging.getLogger(__name__)

# Journeys simulated by one worker task, each chunk with its own random stream
CHUNK = 256
# Retries at one waypoint before the journey is abandoned
MAX_RETRIES = 100_000
# Wait target of the robot controller: wait=true
WAIT = (1,)

COLLISION_FREE_QUERY = parse_query('P=? [ !"collision" U "done" ]')
TIME_QUERY = parse_query('R{"time"}=? [ F "done" ]')


class EncounterBuckets(NamedTuple):
    """
    Banks of pre-simulated spawns, one per class.

    :param collision_free: Spawns that do not collide when the robot goes
    :param collision_free_time: The journey time of each collision-free spawn
    :param collision: Spawns that collide when the robot goes
    :param collision_time: The journey time of each colliding spawn
    """
    collision_free: Encounters
    collision_free_time: np.ndarray
    collision: Encounters
    collision_time: np.ndarray

    @classmethod
    def build(
        cls, cfg: SimConfig, per_class: int, rng: np.random.Generator | None = None,
    ) -> EncounterBuckets:
        """
        Fill both buckets by rejection sampling.

        :raises SamplingStallError: If a bucket cannot be filled
        """
        dataset = generate_dataset(cfg, per_class, rng=rng)
        free = np.flatnonzero(dataset.labels == NO_COLLISION)
        hit = np.flatnonzero(dataset.labels == COLLISION)
        return cls(
            dataset.encounters.take(free), dataset.journey_time[free],
            dataset.encounters.take(hit), dataset.journey_time[hit],
        )

    def times(self, label: int) -> np.ndarray:
        return self.collision_time if label == COLLISION else self.collision_free_time


class TimeConstants(NamedTuple):
    """
    Quantities measured from the simulator that the robot model takes as constants.

    :param travel_time: Mean journey time without a collision
    :param collision_time: Mean extra time of a journey with a collision
    :param p_occ: Fraction of uniform spawns that collide
    :param samples: The number of spawns behind each estimate
    """
    travel_time: float
    collision_time: float
    p_occ: float
    samples: int


@log_to_debug
def estimate_time_constants(
    cfg: SimConfig, samples: int = 10_000, rng: np.random.Generator | None = None,
) -> TimeConstants:
    """
    Measure the travel time, collision delay and collision probability.

    The times are averaged over ``samples`` spawns of each class, and p_occ is
    the collision fraction of ``samples`` uniform spawns.

    :param cfg: The scenario
    :param samples: The number of spawns per estimate
    :param rng: The random stream, seeded from cfg.seed if None
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    uniform = simulate_batch(cfg, sample_encounters(cfg, rng, samples))
    finished = ~uniform.timed_out
    p_occ = float((labels_of(uniform)[finished] == COLLISION).mean())
    buckets = EncounterBuckets.build(cfg, samples, rng)
    travel = float(buckets.collision_free_time.mean())
    delay = float(buckets.collision_time.mean()) - travel
    logger.info(f"Travel time {travel:.3f}, collision delay {delay:.3f}, p_occ {p_occ:.4f}")
    return TimeConstants(travel, delay, p_occ, samples)


def robot_constants(constants: TimeConstants) -> Dict[str, float]:
    """The measured constants as overrides of the robot model's constants."""
    return {
        'travel_time': constants.travel_time,
        'collision_time': constants.collision_time,
        'p_occ': constants.p_occ,
    }


def wait_probabilities(assignment: ControllerAssignment, tensor: ConfusionTensor) -> np.ndarray:
    """
    Tabulate how likely the controller is to wait for each observation.

    Perfect-perception families apply to every verdict vector.

    :param assignment: The controller, over binary wait/go families
    :param tensor: The tensor the surrogate perceives with
    :raises ValueError: If some (predicted class, verdicts) has no decision
    :return: Array of shape (K, 2^n) indexed by [predicted class - 1, verdict index]
    """
    table = np.full((tensor.classes, len(tensor.verdicts)), np.nan)
    for family in assignment.families:
        if family.observed is None or family.members[0] not in assignment:
            continue
        wait = assignment[family.member_for(WAIT)]
        if family.verdicts is None:
            columns = range(table.shape[1])
        else:
            columns = [tensor.verdicts.index(family.verdicts)]
        for column in columns:
            if np.isnan(table[family.observed - 1, column]):
                table[family.observed - 1, column] = wait
    if np.isnan(table).any():
        k, i = np.argwhere(np.isnan(table))[0]
        raise ValueError(
            f"The controller makes no decision for predicted class {k + 1} "
            f"with verdicts {tensor.verdicts[i]}")
    return table


class _Chunk(NamedTuple):
    journey_time: np.ndarray
    journey_collision: np.ndarray
    leg_time_sum: float
    leg_time_sq_sum: float
    leg_collisions: int


class _Plan(NamedTuple):
    cfg: SimConfig
    buckets: EncounterBuckets
    counts: np.ndarray
    table: np.ndarray
    p_collider: float
    p_occ: float
    wait_time: float
    travel_time: float
    n_waypoints: int


def _run_chunk(plan: _Plan, journeys: int, seed: np.random.SeedSequence) -> _Chunk:
    rng = np.random.default_rng(seed)
    surrogate = SurrogatePerception(ConfusionTensor(plan.counts), rng)
    total = np.zeros(journeys)
    collided = np.zeros(journeys, dtype=bool)
    leg_sum = leg_sq = 0.0
    leg_collisions = 0
    for _ in range(plan.n_waypoints):
        leg = np.zeros(journeys)
        hit = np.zeros(journeys, dtype=bool)
        pending = np.ones(journeys, dtype=bool)
        retries = 0
        while pending.any():
            retries += 1
            if retries > MAX_RETRIES:
                raise SimulationTimeoutError(float(leg.max()))
            idx = np.flatnonzero(pending)
            present = rng.random(len(idx)) < plan.p_collider
            absent = idx[~present]
            leg[absent] += plan.travel_time
            pending[absent] = False

            seen = idx[present]
            if not len(seen):
                continue
            classes = np.where(rng.random(len(seen)) < plan.p_occ, COLLISION, NO_COLLISION)
            preds, verdicts = surrogate.perceive_many(classes)
            waits = rng.random(len(seen)) < plan.table[preds - 1, verdicts]
            leg[seen[waits]] += plan.wait_time

            going = ~waits
            for label in (NO_COLLISION, COLLISION):
                chosen = seen[going & (classes == label)]
                if not len(chosen):
                    continue
                times = plan.buckets.times(label)
                leg[chosen] += times[rng.integers(len(times), size=len(chosen))]
                if label == COLLISION:
                    hit[chosen] = True
            pending[seen[going]] = False
        total += leg
        collided |= hit
        leg_sum += float(leg.sum())
        leg_sq += float((leg ** 2).sum())
        leg_collisions += int(hit.sum())
    return _Chunk(total, collided, leg_sum, leg_sq, leg_collisions)


def _run_chunk_args(args: Tuple[_Plan, int, np.random.SeedSequence]) -> _Chunk:
    return _run_chunk(*args)


class ValidationResult(NamedTuple):
    """
    Simulated performance of a controller.

    Journey figures cover whole journeys; waypoint figures cover single legs,
    which is what one run of the robot model describes.
    """
    n_journeys: int
    n_waypoints: int
    mean_time: float
    mean_time_stderr: float
    collision_rate: float
    collision_rate_stderr: float
    waypoint_collision_free: float
    waypoint_collision_free_stderr: float
    waypoint_time: float
    waypoint_time_stderr: float
    journey_time: np.ndarray
    journey_collision: np.ndarray

    def to_json(self, include_raw: bool = False) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            name: getattr(self, name) for name in self._fields
            if name not in ('journey_time', 'journey_collision')
        }
        if include_raw:
            document['journey_time'] = self.journey_time.tolist()
            document['journey_collision'] = self.journey_collision.astype(bool).tolist()
        return document


def _chunks(n_journeys: int, seed: int) -> Iterator[Tuple[int, np.random.SeedSequence]]:
    sizes = [min(CHUNK, n_journeys - start) for start in range(0, n_journeys, CHUNK)]
    return zip(sizes, np.random.SeedSequence(seed).spawn(len(sizes)))


def _stderr(sq_sum: float, total: float, count: int) -> float:
    if count < 2:
        return 0.0
    mean = total / count
    variance = max(sq_sum / count - mean ** 2, 0.0) * count / (count - 1)
    return math.sqrt(variance / count)


@log_to_debug
def validate_controller(
    cfg: SimConfig,
    assignment: ControllerAssignment,
    surrogate: SurrogatePerception,
    buckets: EncounterBuckets,
    p_collider: float,
    p_occ: float,
    wait_time: float = 5.0,
    n_journeys: int = 1000,
    n_waypoints: int = 100,
    travel_time: float | None = None,
    jobs: int = 1,
) -> ValidationResult:
    """
    Simulate journeys under a controller.

    Journeys are split in chunks, each with a random stream spawned from
    cfg.seed, so results do not depend on the number of worker processes.

    :param cfg: The scenario
    :param assignment: The controller
    :param surrogate: The perception; only its tensor is used
    :param buckets: The spawn banks
    :param p_collider: Probability that a collider is present at a waypoint
    :param p_occ: Probability that a present collider is on collision course
    :param wait_time: The cost of waiting
    :param n_journeys: The number of journeys
    :param n_waypoints: The number of waypoints per journey
    :param travel_time: The time of a leg without a collider, simulated if None
    :param jobs: The number of worker processes
    :raises ValueError: If the controller misses a decision or a count is below 1
    :raises SimulationTimeoutError: If a waypoint is retried without end
    :return: Journey and waypoint estimates
    """
    if n_journeys < 1 or n_waypoints < 1:
        raise ValueError("n_journeys and n_waypoints must be at least 1")
    table = wait_probabilities(assignment, surrogate.tensor)
    plan = _Plan(
        cfg, buckets, np.asarray(surrogate.tensor.counts), table, p_collider, p_occ, wait_time,
        free_travel_time(cfg) if travel_time is None else travel_time, n_waypoints)
    work = [(plan, size, seed) for size, seed in _chunks(n_journeys, cfg.seed)]

    with timed(logger, "Controller validation"):
        if jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                chunks: List[_Chunk] = list(pool.map(_run_chunk_args, work))
        else:
            chunks = [_run_chunk(*args) for args in work]

    journey_time = np.concatenate([c.journey_time for c in chunks])
    journey_collision = np.concatenate([c.journey_collision for c in chunks])
    legs = n_journeys * n_waypoints
    leg_sum = sum(c.leg_time_sum for c in chunks)
    leg_sq = sum(c.leg_time_sq_sum for c in chunks)
    collision_free = 1 - sum(c.leg_collisions for c in chunks) / legs
    collision_rate = float(journey_collision.mean())

    result = ValidationResult(
        n_journeys=n_journeys,
        n_waypoints=n_waypoints,
        mean_time=float(journey_time.mean()),
        mean_time_stderr=(
            float(journey_time.std(ddof=1) / math.sqrt(n_journeys)) if n_journeys > 1 else 0.0),
        collision_rate=collision_rate,
        collision_rate_stderr=math.sqrt(collision_rate * (1 - collision_rate) / n_journeys),
        waypoint_collision_free=collision_free,
        waypoint_collision_free_stderr=math.sqrt(collision_free * (1 - collision_free) / legs),
        waypoint_time=leg_sum / legs,
        waypoint_time_stderr=_stderr(leg_sq, leg_sum, legs),
        journey_time=journey_time,
        journey_collision=journey_collision,
    )
    logger.info(
        f"{n_journeys} journeys of {n_waypoints} waypoints: mean time {result.mean_time:.2f}, "
        f"collision rate {result.collision_rate:.4f}")
    return result


class ModelGap(NamedTuple):
    """Model predictions against simulated estimates, per waypoint."""
    model_collision_free: float
    sim_collision_free: float
    model_time: float
    sim_time: float

    @property
    def collision_free_gap(self) -> float:
        return self.sim_collision_free - self.model_collision_free

    @property
    def time_gap(self) -> float:
        return self.sim_time - self.model_time


def model_gap(
    result: ValidationResult, model: ExplicitPDTMC, assignment: ControllerAssignment,
) -> ModelGap:
    """
    Compare a validation run with the robot model under the same controller.

    :param result: The simulated estimates
    :param model: The robot model, perfect or DNN perception, matching the assignment
    :param assignment: The controller that was simulated
    """
    chain = instantiate(model, assignment)
    return ModelGap(
        pmc(COLLISION_FREE_QUERY, chain),
        result.waypoint_collision_free,
        pmc(TIME_QUERY, chain),
        result.waypoint_time,
    )
