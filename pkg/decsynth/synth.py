"""
Synthesis of controllers that meet constraints and are Pareto-optimal for objectives.

Two searches are offered over the parameter families of a model: an
exhaustive search over a discretised grid, and an NSGA-II style genetic
algorithm with constrained domination. Both evaluate candidates by
instantiating the model and model checking every query.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import (
    Dict, Iterable, Iterator, List, Mapping, NamedTuple, Sequence, Tuple,
)

import numpy as np

from .controller import ControllerAssignment, ControllerKind, ParameterFamily
from .exceptions import BudgetExceededError, InfeasibleAllError, ModelSyntaxError
from .logging import TRACE, log_to_debug, timed
from .pareto import CandidateResult, Objective, ParetoFront, Sense, non_dominated
from .pctl import Bound, PctlQuery, QueryKind, parse_query, pmc
from .pdtmc import ExplicitPDTMC, dumps, loads
from .solver import ParametricMatrix

logger = logging.getLogger(__name__)

# The most candidates a grid search may evaluate unless told otherwise
CANDIDATE_LIMIT = 10**8
_BATCH = 4096


class Requirements(NamedTuple):
    """
    What a synthesised controller must satisfy and optimise.

    :param constraints: Queries with a bound, all of which must hold
    :param objectives: Quantitative queries with their direction
    """
    constraints: Tuple[PctlQuery, ...]
    objectives: Tuple[Tuple[Sense, PctlQuery], ...]

    def check(self) -> Requirements:
        """
        Check the requirements are usable.

        :raises ValueError: If there is no objective, a constraint has no
            bound, or an objective has one
        """
        if not self.objectives:
            raise ValueError("Requirements need at least one objective")
        for query in self.constraints:
            if query.bound is None:
                raise ValueError(f"Constraint {query} has no bound")
        for _, query in self.objectives:
            if query.bound is not None:
                raise ValueError(f"Objective {query} must be quantitative (=?)")
        return self

    @property
    def objective_specs(self) -> Tuple[Objective, ...]:
        return tuple(
            Objective(str(query), sense, query.kind is QueryKind.PROBABILITY)
            for sense, query in self.objectives)

    @property
    def senses(self) -> Tuple[Sense, ...]:
        return tuple(sense for sense, _ in self.objectives)

    def to_text(self) -> str:
        lines = [f"constraint: {query}" for query in self.constraints]
        lines.extend(f"{sense.word}: {query}" for sense, query in self.objectives)
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text: str) -> Requirements:
        """
        Read requirements, one per line.

        Lines start with ``constraint:``, ``minimise:`` or ``maximise:``.
        Blank lines and lines starting with ``#`` or ``//`` are ignored.

        :raises ModelSyntaxError: If a line or query cannot be read, with its line number
        """
        constraints = []
        objectives = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith(('#', '//')):
                continue
            prefix, sep, rest = line.partition(':')
            if not sep:
                raise ModelSyntaxError(
                    "Expected 'constraint:', 'minimise:' or 'maximise:'", line_no, 1)
            try:
                query = parse_query(rest)
            except ModelSyntaxError as e:
                raise ModelSyntaxError(e.message, line_no, len(prefix) + 1 + e.column) from e
            prefix = prefix.strip().lower()
            if prefix == 'constraint':
                if query.bound is None:
                    raise ModelSyntaxError("A constraint needs a bound", line_no, 1)
                constraints.append(query)
                continue
            try:
                sense = Sense.parse(prefix)
            except ValueError:
                raise ModelSyntaxError(f"Unknown requirement kind {prefix!r}", line_no, 1) from None
            if query.bound is not None:
                raise ModelSyntaxError("An objective must be quantitative (=?)", line_no, 1)
            objectives.append((sense, query))
        return cls(tuple(constraints), tuple(objectives)).check()

    @classmethod
    def load(cls, path: Path | str) -> Requirements:
        return cls.from_text(Path(path).read_text())


def _violation(bound: Bound, value: float) -> float:
    if bound.holds(value):
        return 0.0
    if bound.op in ('>=', '>'):
        return max(bound.threshold - value, 0.0)
    return max(value - bound.threshold, 0.0)


def controller_kind(families: Sequence[ParameterFamily]) -> ControllerKind:
    """DNN perception if any family observes verdicts, otherwise perfect perception."""
    if any(f.verdicts is not None for f in families):
        return ControllerKind.DNN
    return ControllerKind.PERFECT


class Evaluator:
    """
    Evaluates controller assignments of one model against requirements.

    Results are cached by assignment. With ``jobs`` above one, uncached
    assignments are evaluated by a pool of worker processes; results always
    come back in submission order.

    :param model: The parametric model
    :param requirements: The constraints and objectives
    :param jobs: The number of worker processes
    """

    def __init__(self, model: ExplicitPDTMC, requirements: Requirements, jobs: int = 1):
        self.model = model
        self.requirements = requirements.check()
        self.families = tuple(model.families)
        self.kind = controller_kind(self.families)
        self.jobs = max(1, jobs)
        self._matrix = ParametricMatrix(model)
        self._cache: Dict[str, CandidateResult] = {}
        self._pool: ProcessPoolExecutor | None = None
        self.evaluations = 0

    def __enter__(self) -> Evaluator:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def values(self, values: Mapping[str, float]) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        """
        Model check every query for one valuation of the parameters.

        :return: The objective values and the constraint values
        """
        chain = self._matrix.chain(values)
        objectives = tuple(pmc(query, chain) for _, query in self.requirements.objectives)
        constraints = tuple(pmc(query, chain) for query in self.requirements.constraints)
        return objectives, constraints

    def _result(
        self, assignment: ControllerAssignment,
        objectives: Tuple[float, ...], constraints: Tuple[float, ...],
    ) -> CandidateResult:
        violation = 0.0
        feasible = True
        for query, value in zip(self.requirements.constraints, constraints):
            assert query.bound is not None
            if not query.bound.holds(value):
                feasible = False
                violation += _violation(query.bound, value)
        result = CandidateResult(assignment, objectives, feasible, constraints, violation)
        logger.log(TRACE, f"{assignment}: objectives {objectives}, feasible {feasible}")
        return result

    def evaluate(self, assignment: ControllerAssignment) -> CandidateResult:
        return self.evaluate_many([assignment])[0]

    def evaluate_many(self, assignments: Sequence[ControllerAssignment]) -> List[CandidateResult]:
        """
        Evaluate assignments, in order.

        :raises MissingParameterError: If an assignment leaves a parameter without value
        """
        self.evaluations += len(assignments)
        todo: Dict[str, ControllerAssignment] = {}
        for assignment in assignments:
            key = assignment.key()
            if key not in self._cache:
                todo.setdefault(key, assignment)
        if todo:
            pending = list(todo.items())
            if self.jobs > 1 and len(pending) > 1:
                outcomes = list(self._executor().map(
                    _evaluate_in_worker, [dict(a.values) for _, a in pending],
                    chunksize=max(1, len(pending) // (4 * self.jobs))))
            else:
                outcomes = [self.values(a.values) for _, a in pending]
            for (key, assignment), (objectives, constraints) in zip(pending, outcomes):
                self._cache[key] = self._result(assignment, objectives, constraints)
        return [self._cache[a.key()] for a in assignments]

    def _executor(self) -> ProcessPoolExecutor:
        if self._pool is None:
            self._pool = ProcessPoolExecutor(
                max_workers=self.jobs,
                initializer=_init_worker,
                initargs=(dumps(self.model), self.requirements.to_text()),
            )
        return self._pool


_WORKER: Evaluator | None = None


def _init_worker(model_text: str, requirements_text: str) -> None:
    global _WORKER
    _WORKER = Evaluator(loads(model_text), Requirements.from_text(requirements_text))


def _evaluate_in_worker(values: Dict[str, float]) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    assert _WORKER is not None
    return _WORKER.values(values)


def evaluate_candidates(
    model: ExplicitPDTMC,
    requirements: Requirements,
    assignments: Sequence[ControllerAssignment],
    jobs: int = 1,
) -> List[CandidateResult]:
    """
    Evaluate assignments of a model, in submission order.

    :param jobs: The number of worker processes
    """
    with Evaluator(model, requirements, jobs) as evaluator:
        return evaluator.evaluate_many(assignments)


# Grid search

def _units(step: float) -> int:
    if not 0 < step <= 1:
        raise ValueError(f"Grid step must be in (0, 1], got {step!r}")
    units = round(1 / step)
    if abs(units * step - 1) > 1e-9:
        raise ValueError(f"Grid step {step!r} does not divide 1")
    return units


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Every way of writing total as an ordered sum of parts non-negative integers."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def family_options(size: int, step: float, deterministic: bool) -> List[Tuple[float, ...]]:
    """
    The grid points of one family.

    :param size: The number of members
    :param step: The grid spacing
    :param deterministic: Only put all probability on one member
    :return: One distribution per grid point
    """
    if deterministic:
        return [tuple(1.0 if i == j else 0.0 for i in range(size)) for j in range(size)]
    units = _units(step)
    return [tuple(c / units for c in composition) for composition in _compositions(units, size)]


# One distribution per family
Vectors = Tuple[Tuple[float, ...], ...]


def _batches(iterable: Iterable[Vectors], size: int) -> Iterator[List[Vectors]]:
    iterator = iter(iterable)
    while True:
        batch = list(itertools.islice(iterator, size))
        if not batch:
            return
        yield batch


def _front(
    evaluated: int, feasible: List[CandidateResult], requirements: Requirements,
    metadata: Dict[str, object], kept: Iterable[CandidateResult] = (),
) -> ParetoFront:
    if not feasible:
        raise InfeasibleAllError(evaluated)
    front = ParetoFront(feasible, requirements.objective_specs, metadata, kept)
    logger.info(f"Evaluated {evaluated} candidates, front has {len(front)} members")
    return front


@log_to_debug
def grid_search(
    model: ExplicitPDTMC,
    requirements: Requirements,
    step: float = 0.1,
    deterministic: bool = False,
    candidate_limit: int = CANDIDATE_LIMIT,
    jobs: int = 1,
    keep_evaluated: bool = False,
) -> ParetoFront:
    """
    Evaluate every grid point of the parameter families.

    Each family ranges over the distributions whose values are multiples
    of ``step``, or over its members when deterministic. Every combination
    across families is evaluated.

    :param model: The parametric model
    :param requirements: The constraints and objectives
    :param step: The grid spacing; 1/step must be an integer
    :param deterministic: Search deterministic controllers only
    :param candidate_limit: The most candidates to evaluate
    :param jobs: The number of worker processes
    :param keep_evaluated: Keep every evaluated candidate on the front
    :raises ValueError: If the step does not divide 1
    :raises BudgetExceededError: If the grid has more than candidate_limit points
    :raises InfeasibleAllError: If no candidate satisfies the constraints
    :return: The front of the feasible candidates
    """
    families = model.families
    options = [family_options(len(f.members), step, deterministic) for f in families]
    total = math.prod(len(o) for o in options)
    if total > candidate_limit:
        raise BudgetExceededError(total, candidate_limit)
    logger.info(f"Grid search over {len(families)} families: {total} candidates")

    front: List[CandidateResult] = []
    kept: List[CandidateResult] = []
    kind = controller_kind(families)
    senses = requirements.senses
    with timed(logger, "Grid search"), Evaluator(model, requirements, jobs) as evaluator:
        for batch in _batches(itertools.product(*options), _BATCH):
            assignments = [
                ControllerAssignment.from_vectors(families, vectors, kind) for vectors in batch]
            results = evaluator.evaluate_many(assignments)
            if keep_evaluated:
                kept.extend(results)
            front = non_dominated(front + [r for r in results if r.feasible], senses)
    metadata = {
        'method': 'grid',
        'kind': kind.value,
        'step': step,
        'deterministic': deterministic,
        'evaluated': total,
    }
    return _front(total, front, requirements, metadata, kept)


# Evolutionary search

class GaSettings(NamedTuple):
    """
    Settings of the genetic algorithm.

    :param population: The population size, even and at least 4
    :param max_evaluations: The number of candidates to evaluate
    :param seed: The random seed
    :param deterministic: Search deterministic controllers only
    :param crossover_rate: Probability that a pair of parents is recombined
    :param crossover_eta: Distribution index of simulated binary crossover
    :param mutation_eta: Distribution index of polynomial mutation
    :param mutation_rate: Per-gene mutation probability, 1/genes if None
    """
    population: int = 100
    max_evaluations: int = 10_000
    seed: int = 0
    deterministic: bool = False
    crossover_rate: float = 0.9
    crossover_eta: float = 15.0
    mutation_eta: float = 20.0
    mutation_rate: float | None = None

    def check(self) -> GaSettings:
        """
        :raises ValueError: If the population is odd or below 4, or the budget is below it
        """
        if self.population < 4 or self.population % 2:
            raise ValueError(f"Population must be even and at least 4, got {self.population}")
        if self.max_evaluations < self.population:
            raise ValueError(
                f"max_evaluations ({self.max_evaluations}) must be at least "
                f"the population ({self.population})")
        return self


Genome = Tuple[np.ndarray, ...]


def project_to_simplex(vector: np.ndarray) -> np.ndarray:
    """
    The closest point of the probability simplex to a vector.

    :param vector: Any real vector
    :return: A non-negative vector summing to one
    """
    n = len(vector)
    ordered = np.sort(vector)[::-1]
    cumulative = np.cumsum(ordered) - 1
    rho = np.nonzero(ordered * np.arange(1, n + 1) > cumulative)[0][-1]
    theta = cumulative[rho] / (rho + 1)
    projected = np.maximum(vector - theta, 0.0)
    return projected / projected.sum()


def _sbx(
    a: np.ndarray, b: np.ndarray, eta: float, rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    u = rng.random(len(a))
    beta = np.where(
        u <= 0.5,
        (2 * u) ** (1 / (eta + 1)),
        (1 / (2 * (1 - u))) ** (1 / (eta + 1)),
    )
    # each variable is recombined with probability one half
    beta = np.where(rng.random(len(a)) < 0.5, beta, 1.0)
    first = 0.5 * ((1 + beta) * a + (1 - beta) * b)
    second = 0.5 * ((1 - beta) * a + (1 + beta) * b)
    return first, second


def _polynomial_mutation(x: np.ndarray, eta: float, rate: float, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(len(x))
    delta = np.where(
        u < 0.5,
        (2 * u) ** (1 / (eta + 1)) - 1,
        1 - (2 * (1 - u)) ** (1 / (eta + 1)),
    )
    mask = rng.random(len(x)) < rate
    return np.clip(x + np.where(mask, delta, 0.0), 0.0, 1.0)


def _constrained_domination(results: Sequence[CandidateResult], senses: Sequence[Sense]) -> np.ndarray:
    """Matrix whose [i, j] entry is True if result i dominates result j under constraints."""
    signs = np.asarray([int(s) for s in senses], dtype=float)
    points = np.array([r.objectives for r in results], dtype=float) * signs
    feasible = np.array([r.feasible for r in results])
    violation = np.array([r.violation for r in results])
    with np.errstate(invalid='ignore'):
        no_worse = np.all(points[:, None, :] <= points[None, :, :], axis=2)
        better = np.any(points[:, None, :] < points[None, :, :], axis=2)
    pareto = no_worse & better
    both_feasible = feasible[:, None] & feasible[None, :]
    both_infeasible = ~feasible[:, None] & ~feasible[None, :]
    return (
        (both_feasible & pareto)
        | (feasible[:, None] & ~feasible[None, :])
        | (both_infeasible & (violation[:, None] < violation[None, :]))
    )


def _ranks(dominance: np.ndarray) -> np.ndarray:
    n = dominance.shape[0]
    ranks = np.full(n, -1)
    dominated_by = dominance.sum(axis=0)
    current = np.flatnonzero(dominated_by == 0)
    rank = 0
    while len(current):
        ranks[current] = rank
        dominated_by = dominated_by - dominance[current].sum(axis=0)
        dominated_by[ranks >= 0] = -1
        current = np.flatnonzero(dominated_by == 0)
        rank += 1
    return ranks


def _crowding(results: Sequence[CandidateResult], members: np.ndarray) -> np.ndarray:
    distance = np.zeros(len(members))
    if len(members) <= 2:
        return np.full(len(members), np.inf)
    points = np.array([results[i].objectives for i in members], dtype=float)
    for j in range(points.shape[1]):
        order = np.argsort(points[:, j], kind='stable')
        column = points[order, j]
        distance[order[0]] = distance[order[-1]] = np.inf
        spread = column[-1] - column[0]
        if not np.isfinite(spread) or spread == 0:
            continue
        gaps = (column[2:] - column[:-2]) / spread
        distance[order[1:-1]] += np.nan_to_num(gaps, nan=0.0, posinf=0.0)
    return distance


def _survivors(
    results: Sequence[CandidateResult], senses: Sequence[Sense], size: int,
) -> Tuple[List[int], np.ndarray, np.ndarray]:
    """Pick the next population: best ranks first, ties broken by crowding distance."""
    ranks = _ranks(_constrained_domination(results, senses))
    crowding = np.zeros(len(results))
    chosen: List[int] = []
    for rank in range(int(ranks.max()) + 1):
        members = np.flatnonzero(ranks == rank)
        crowding[members] = _crowding(results, members)
        if len(chosen) + len(members) <= size:
            chosen.extend(int(i) for i in members)
        else:
            order = members[np.argsort(-crowding[members], kind='stable')]
            chosen.extend(int(i) for i in order[:size - len(chosen)])
        if len(chosen) == size:
            break
    return chosen, ranks, crowding


class _Genetics:
    """Genome handling for one model's families."""

    def __init__(
        self, families: Sequence[ParameterFamily], settings: GaSettings, rng: np.random.Generator,
    ):
        self.families = families
        self.settings = settings
        self.rng = rng
        self.kind = controller_kind(families)
        genes = len(families) if settings.deterministic else sum(len(f.members) for f in families)
        self.mutation_rate = (
            settings.mutation_rate if settings.mutation_rate is not None else 1 / max(1, genes))

    def random(self) -> Genome:
        if self.settings.deterministic:
            return (np.array([self.rng.integers(len(f.members)) for f in self.families]),)
        return tuple(self.rng.dirichlet(np.ones(len(f.members))) for f in self.families)

    def assignment(self, genome: Genome) -> ControllerAssignment:
        if self.settings.deterministic:
            vectors = [
                tuple(1.0 if i == int(choice) else 0.0 for i in range(len(f.members)))
                for f, choice in zip(self.families, genome[0])]
        else:
            vectors = [tuple(float(x) for x in gene) for gene in genome]
        return ControllerAssignment.from_vectors(self.families, vectors, self.kind)

    def crossover(self, a: Genome, b: Genome) -> Tuple[Genome, Genome]:
        if self.rng.random() >= self.settings.crossover_rate:
            return a, b
        if self.settings.deterministic:
            swap = self.rng.random(len(a[0])) < 0.5
            return (np.where(swap, b[0], a[0]),), (np.where(swap, a[0], b[0]),)
        first, second = [], []
        for x, y in zip(a, b):
            c1, c2 = _sbx(x, y, self.settings.crossover_eta, self.rng)
            first.append(project_to_simplex(c1))
            second.append(project_to_simplex(c2))
        return tuple(first), tuple(second)

    def mutate(self, genome: Genome) -> Genome:
        if self.settings.deterministic:
            choices = genome[0].copy()
            for i, family in enumerate(self.families):
                if len(family.members) > 1 and self.rng.random() < self.mutation_rate:
                    other = self.rng.integers(len(family.members) - 1)
                    choices[i] = other if other < choices[i] else other + 1
            return (choices,)
        return tuple(
            project_to_simplex(_polynomial_mutation(
                gene, self.settings.mutation_eta, self.mutation_rate, self.rng))
            for gene in genome)


def _tournament(ranks: np.ndarray, crowding: np.ndarray, rng: np.random.Generator) -> int:
    i, j = rng.integers(len(ranks), size=2)
    if ranks[i] != ranks[j]:
        return int(i if ranks[i] < ranks[j] else j)
    return int(i if crowding[i] >= crowding[j] else j)


@log_to_debug
def evolutionary_search(
    model: ExplicitPDTMC,
    requirements: Requirements,
    settings: GaSettings = GaSettings(),
    jobs: int = 1,
    keep_evaluated: bool = False,
) -> ParetoFront:
    """
    Search for Pareto-optimal controllers with a genetic algorithm.

    Feasible candidates dominate infeasible ones, and infeasible candidates
    are ranked by how far they are from meeting the constraints. The front
    returned holds the non-dominated feasible candidates among everything
    evaluated. The same seed always gives the same front.

    :param model: The parametric model
    :param requirements: The constraints and objectives
    :param settings: Population, budget, seed and operator settings
    :param jobs: The number of worker processes
    :param keep_evaluated: Keep every evaluated candidate on the front
    :raises ValueError: If the settings are unusable
    :raises InfeasibleAllError: If no evaluated candidate satisfies the constraints
    :return: The front
    """
    settings.check()
    rng = np.random.default_rng(settings.seed)
    genetics = _Genetics(model.families, settings, rng)
    senses = requirements.senses

    archive: Dict[str, CandidateResult] = {}
    evaluated = 0
    with timed(logger, "Evolutionary search"), Evaluator(model, requirements, jobs) as evaluator:
        genomes = [genetics.random() for _ in range(settings.population)]
        results = evaluator.evaluate_many([genetics.assignment(g) for g in genomes])
        evaluated += len(results)
        archive.update((r.assignment.key(), r) for r in results)
        chosen, ranks, crowding = _survivors(results, senses, settings.population)
        generation = 0
        while evaluated < settings.max_evaluations:
            generation += 1
            count = min(settings.population, settings.max_evaluations - evaluated)
            offspring: List[Genome] = []
            while len(offspring) < count:
                a = genomes[_tournament(ranks, crowding, rng)]
                b = genomes[_tournament(ranks, crowding, rng)]
                for child in genetics.crossover(a, b):
                    offspring.append(genetics.mutate(child))
            offspring = offspring[:count]
            children = evaluator.evaluate_many([genetics.assignment(g) for g in offspring])
            evaluated += len(children)
            archive.update((r.assignment.key(), r) for r in children)

            pool_genomes = genomes + offspring
            pool_results = results + children
            chosen, all_ranks, all_crowding = _survivors(pool_results, senses, settings.population)
            genomes = [pool_genomes[i] for i in chosen]
            results = [pool_results[i] for i in chosen]
            ranks = all_ranks[chosen]
            crowding = all_crowding[chosen]
            logger.log(TRACE, f"Generation {generation}: {evaluated} evaluations")

    feasible = [r for r in archive.values() if r.feasible]
    metadata = {
        'method': 'ga',
        'kind': genetics.kind.value,
        'population': settings.population,
        'max_evaluations': settings.max_evaluations,
        'seed': settings.seed,
        'deterministic': settings.deterministic,
        'crossover_eta': settings.crossover_eta,
        'mutation_eta': settings.mutation_eta,
        'evaluated': evaluated,
    }
    kept = list(archive.values()) if keep_evaluated else []
    return _front(evaluated, non_dominated(feasible, senses), requirements, metadata, kept)


def reference_front(
    perfect: ExplicitPDTMC,
    requirements: Requirements,
    step: float = 0.1,
    deterministic: bool = False,
    candidate_limit: int = CANDIDATE_LIMIT,
    jobs: int = 1,
) -> ParetoFront:
    """The front of the perfect-perception model, found by grid search."""
    return grid_search(perfect, requirements, step, deterministic, candidate_limit, jobs)
