"""
Pareto fronts of synthesised controllers and their quality indicators.

Fronts keep their objective values in the direction each objective was
stated in. The indicators convert to an all-minimise orientation: a
maximised probability p becomes 1 - p and a maximised reward r becomes -r.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from enum import IntEnum
from pathlib import Path
from typing import (
    Any, Dict, Iterable, Iterator, List, Mapping, NamedTuple, Sequence, Tuple,
)

import numpy as np
from scipy.spatial.distance import cdist

from .controller import ControllerAssignment, ControllerKind
from .exceptions import EmptyFrontError, NonMinimizedOrientationError
from .utils import format_real

logger = logging.getLogger(__name__)

# Samples of the Monte Carlo hypervolume estimate for more than two objectives
HV_SAMPLES = 10**6
_HV_CHUNK = 100_000


class Sense(IntEnum):
    """The direction of an objective, as the sign that makes it minimised."""
    MINIMISE = 1
    MAXIMISE = -1

    @classmethod
    def parse(cls, word: str) -> Sense:
        """Read ``minimise`` or ``maximise``, either spelling."""
        word = word.strip().lower().replace('z', 's')
        if word in ('minimise', 'min'):
            return cls.MINIMISE
        if word in ('maximise', 'max'):
            return cls.MAXIMISE
        raise ValueError(f"Unknown objective direction {word!r}")

    @property
    def word(self) -> str:
        return 'minimise' if self is Sense.MINIMISE else 'maximise'


class Objective(NamedTuple):
    """
    Describes one objective of a front.

    :param name: The objective's query text
    :param sense: Whether it is minimised or maximised
    :param probability: True for a probability, False for a reward
    """
    name: str
    sense: Sense = Sense.MINIMISE
    probability: bool = False

    def minimised(self, values: np.ndarray) -> np.ndarray:
        """Convert values of this objective to the minimise orientation."""
        if self.sense is Sense.MINIMISE:
            return values
        return 1.0 - values if self.probability else -values


class CandidateResult(NamedTuple):
    """
    A controller assignment with its evaluation.

    :param assignment: The assignment evaluated
    :param objectives: The value of each objective
    :param feasible: True if every constraint holds
    :param constraint_values: The value of each constraint's query
    :param violation: How far the constraints are from holding, 0 if feasible
    """
    assignment: ControllerAssignment
    objectives: Tuple[float, ...]
    feasible: bool = True
    constraint_values: Tuple[float, ...] = ()
    violation: float = 0.0


def _oriented(objectives: Sequence[float], senses: Sequence[Sense]) -> np.ndarray:
    return np.asarray(objectives, dtype=float) * np.asarray([int(s) for s in senses], dtype=float)


def dominates(a: Sequence[float], b: Sequence[float], senses: Sequence[Sense]) -> bool:
    """
    Return True if objective vector a strictly dominates b.

    a dominates b when it is no worse in every objective and better in one.
    """
    x = _oriented(a, senses)
    y = _oriented(b, senses)
    return bool(np.all(x <= y) and np.any(x < y))


def non_dominated(results: Iterable[CandidateResult], senses: Sequence[Sense]) -> List[CandidateResult]:
    """
    Keep the results no other result dominates.

    Results with equal objectives are all kept, once per distinct assignment.
    """
    unique: Dict[str, CandidateResult] = {}
    for result in results:
        unique.setdefault(result.assignment.key(), result)
    candidates = list(unique.values())
    if not candidates:
        return []
    points = np.array([_oriented(r.objectives, senses) for r in candidates])
    keep = []
    for i, point in enumerate(points):
        no_worse = np.all(points <= point, axis=1)
        better = np.any(points < point, axis=1)
        if not np.any(no_worse & better):
            keep.append(candidates[i])
    return keep


def _sort_key(result: CandidateResult) -> Tuple[Tuple[float, ...], Tuple[Tuple[str, float], ...]]:
    return tuple(result.objectives), tuple(sorted(result.assignment.values.items()))


class ParetoFront:
    """
    Mutually non-dominated controllers, sorted by objective values.

    :param members: The front's results; dominated ones are removed
    :param objectives: What each objective is
    :param metadata: How the front was found, e.g. method and seed
    :param evaluated: Every result evaluated while searching, if kept
    """
    __slots__ = ('_members', '_objectives', '_metadata', '_evaluated')

    def __init__(
        self,
        members: Iterable[CandidateResult],
        objectives: Sequence[Objective],
        metadata: Mapping[str, Any] | None = None,
        evaluated: Iterable[CandidateResult] = (),
    ):
        self._objectives = tuple(objectives)
        senses = [o.sense for o in self._objectives]
        results = list(members)
        for result in results:
            if len(result.objectives) != len(self._objectives):
                raise ValueError(
                    f"Result has {len(result.objectives)} objectives, front has {len(self._objectives)}")
        self._members = tuple(sorted(non_dominated(results, senses), key=_sort_key))
        self._metadata = dict(metadata or {})
        self._evaluated = tuple(evaluated)

    @property
    def members(self) -> Tuple[CandidateResult, ...]:
        return self._members

    @property
    def objectives(self) -> Tuple[Objective, ...]:
        return self._objectives

    @property
    def senses(self) -> Tuple[Sense, ...]:
        return tuple(o.sense for o in self._objectives)

    @property
    def metadata(self) -> Dict[str, Any]:
        return dict(self._metadata)

    @property
    def evaluated(self) -> Tuple[CandidateResult, ...]:
        return self._evaluated

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self) -> Iterator[CandidateResult]:
        return iter(self._members)

    def __repr__(self) -> str:
        return f"ParetoFront({len(self._members)} members, {len(self._objectives)} objectives)"

    def points(self) -> np.ndarray:
        """The objective values, one row per member, as stated."""
        return np.array([m.objectives for m in self._members], dtype=float).reshape(
            len(self._members), len(self._objectives))

    def minimised_points(self) -> np.ndarray:
        """The objective values converted so that every objective is minimised."""
        points = self.points()
        for j, objective in enumerate(self._objectives):
            points[:, j] = objective.minimised(points[:, j])
        return points

    def to_csv(self) -> str:
        """
        Render the front as CSV.

        A comment line describes the objectives, then each row holds the
        objective values followed by ``name=value`` cells for the assignment.
        """
        out = io.StringIO()
        kind = self._members[0].assignment.kind if self._members else ControllerKind.DNN
        header = {
            'objectives': [[o.name, o.sense.word, o.probability] for o in self._objectives],
            'kind': kind.value,
        }
        out.write(f"# {json.dumps(header)}\n")
        writer = csv.writer(out, lineterminator='\n')
        for member in self._members:
            values = sorted(member.assignment.values.items())
            writer.writerow(
                [format_real(v) for v in member.objectives]
                + [f"{name}={format_real(value)}" for name, value in values])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> ParetoFront:
        """
        Read a front written by :meth:`to_csv`.

        :raises ValueError: If the description line is missing or a row is malformed
        """
        lines = text.splitlines()
        if not lines or not lines[0].startswith('#'):
            raise ValueError("Front file must start with a '#' description line")
        header = json.loads(lines[0][1:])
        objectives = [
            Objective(name, Sense.parse(sense), bool(prob))
            for name, sense, prob in header['objectives']]
        kind = ControllerKind(header.get('kind', ControllerKind.DNN.value))
        members = []
        for line_no, row in enumerate(csv.reader(lines[1:]), start=2):
            if not row:
                continue
            if len(row) < len(objectives):
                raise ValueError(f"Line {line_no} has fewer than {len(objectives)} objective values")
            values = {}
            for cell in row[len(objectives):]:
                name, sep, value = cell.partition('=')
                if not sep:
                    raise ValueError(f"Line {line_no}: expected name=value, got {cell!r}")
                values[name] = float(value)
            members.append(CandidateResult(
                ControllerAssignment(values, kind=kind),
                tuple(float(v) for v in row[:len(objectives)]),
            ))
        return cls(members, objectives)

    def save_csv(self, path: Path | str) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load_csv(cls, path: Path | str) -> ParetoFront:
        return cls.from_csv(Path(path).read_text())

    def to_json(self, include_evaluated: bool = False) -> Dict[str, Any]:
        def result(r: CandidateResult) -> Dict[str, Any]:
            return {
                'objectives': list(r.objectives),
                'feasible': r.feasible,
                'constraints': list(r.constraint_values),
                'violation': r.violation,
                'assignment': dict(sorted(r.assignment.values.items())),
            }
        document: Dict[str, Any] = {
            'objectives': [
                {'name': o.name, 'sense': o.sense.word, 'probability': o.probability}
                for o in self._objectives],
            'metadata': self._metadata,
            'front': [result(m) for m in self._members],
        }
        if include_evaluated:
            document['evaluated'] = [result(r) for r in self._evaluated]
        return document

    @classmethod
    def from_json(cls, document: Mapping[str, Any]) -> ParetoFront:
        """
        Read a front written by :meth:`to_json`, or a run artifact holding one.

        :raises KeyError: If the objectives or the front are missing
        """
        objectives = [
            Objective(o['name'], Sense.parse(o['sense']), bool(o['probability']))
            for o in document['objectives']]
        metadata = document.get('metadata', {})
        kind = ControllerKind(metadata.get('kind', ControllerKind.DNN.value))

        def result(entry: Mapping[str, Any]) -> CandidateResult:
            return CandidateResult(
                ControllerAssignment(entry['assignment'], kind=kind),
                tuple(float(v) for v in entry['objectives']),
                bool(entry.get('feasible', True)),
                tuple(float(v) for v in entry.get('constraints', ())),
                float(entry.get('violation', 0.0)),
            )
        return cls(
            [result(e) for e in document['front']], objectives, metadata,
            [result(e) for e in document.get('evaluated', ())])

    @classmethod
    def load(cls, path: Path | str) -> ParetoFront:
        """Read a front from a ``.csv`` front file or a JSON document."""
        text = Path(path).read_text()
        if str(path).endswith('.csv'):
            return cls.from_csv(text)
        return cls.from_json(json.loads(text))


def _check_comparable(front: ParetoFront, reference: ParetoFront) -> None:
    if len(front) == 0 or len(reference) == 0:
        raise EmptyFrontError()
    if len(front.objectives) != len(reference.objectives):
        raise ValueError(
            f"Front has {len(front.objectives)} objectives, reference has {len(reference.objectives)}")
    mismatched = [
        a.name for a, b in zip(front.objectives, reference.objectives)
        if (a.sense, a.probability) != (b.sense, b.probability)]
    if mismatched:
        raise NonMinimizedOrientationError(
            f"objectives {', '.join(mismatched)} are oriented differently in the reference")


def igd(front: ParetoFront, reference: ParetoFront) -> float:
    """
    Inverted generational distance of a front from a reference front.

    The mean, over the reference points, of the Euclidean distance to the
    nearest front point.

    :raises EmptyFrontError: If either front is empty
    """
    _check_comparable(front, reference)
    distances = cdist(reference.minimised_points(), front.minimised_points())
    return float(distances.min(axis=1).mean())


def nadir(reference: ParetoFront, scale: float) -> np.ndarray:
    """
    The hypervolume reference point: the worst reference value of each objective, scaled.

    A worst value w becomes ``w + (scale - 1) * |w|``, which is ``w * scale``
    for the usual non-negative objectives. Maximised rewards are negated
    when minimised, and the absolute value keeps their nadir beyond the
    front as well.
    """
    worst = reference.minimised_points().max(axis=0)
    return worst + (scale - 1) * np.abs(worst)


def _hv_sweep(points: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((points[:, 1], points[:, 0]))
    volume = 0.0
    best_y = ref[1]
    xs = points[order, 0]
    ys = points[order, 1]
    # walk left to right, adding the slab each improving point opens
    kept_x: List[float] = []
    kept_y: List[float] = []
    for x, y in zip(xs, ys):
        if y < best_y:
            kept_x.append(x)
            kept_y.append(y)
            best_y = y
    kept_x.append(ref[0])
    for i in range(len(kept_y)):
        volume += (kept_x[i + 1] - kept_x[i]) * (ref[1] - kept_y[i])
    return float(volume)


def _hv_monte_carlo(points: np.ndarray, ref: np.ndarray, samples: int, seed: int) -> float:
    lower = points.min(axis=0)
    box = float(np.prod(ref - lower))
    if box <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = samples
    while remaining:
        size = min(remaining, _HV_CHUNK)
        draws = rng.uniform(lower, ref, size=(size, len(ref)))
        dominated = np.zeros(size, dtype=bool)
        for point in points:
            dominated |= np.all(draws >= point, axis=1)
        hits += int(dominated.sum())
        remaining -= size
    return box * hits / samples


def hypervolume(points: np.ndarray, ref: np.ndarray, samples: int = HV_SAMPLES, seed: int = 0) -> float:
    """
    The volume dominated by minimised points and bounded by a reference point.

    Points are clipped to the reference box. Up to two objectives the
    volume is exact; beyond that it is a seeded Monte Carlo estimate.
    """
    points = np.minimum(np.asarray(points, dtype=float), ref)
    if len(points) == 0:
        return 0.0
    if points.shape[1] == 1:
        return float(ref[0] - points[:, 0].min())
    if points.shape[1] == 2:
        return _hv_sweep(points, ref)
    return _hv_monte_carlo(points, ref, samples, seed)


def hv(
    front: ParetoFront,
    reference: ParetoFront,
    scale: float,
    samples: int = HV_SAMPLES,
    seed: int = 0,
) -> float:
    """
    Hypervolume of a front, with the nadir taken from a reference front.

    :param front: The front to score
    :param reference: The front whose worst values, scaled, give the nadir
    :param scale: The nadir scaling factor
    :raises EmptyFrontError: If either front is empty
    :raises NonMinimizedOrientationError: If the fronts disagree on orientation
    """
    _check_comparable(front, reference)
    ref = nadir(reference, scale)
    return hypervolume(front.minimised_points(), ref, samples, seed)
