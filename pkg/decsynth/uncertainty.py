"""
Quantify the uncertainty of a classifier from verification-labelled test data.

Each test sample records the true class, the predicted class and the
verdicts of n online verifiers. Samples are split by their verdict vector v
and counted into one K×K confusion matrix per v. The probability that a
class-k input is predicted as k' with verdicts v is the count in cell
(k, k') of matrix v divided by the number of class-k samples.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import (
    Any, Dict, Iterable, Iterator, List, Mapping, NamedTuple, Sequence, Tuple,
)

import numpy as np

from .controller import render_verdicts
from .exceptions import ArityMismatchError, EmptyClassError
from .logging import log_to_debug

logger = logging.getLogger(__name__)

Verdicts = Tuple[bool, ...]


class VerifiedSample(NamedTuple):
    """
    One classified and verified test input.

    :param true: The true class, 1-based
    :param pred: The predicted class, 1-based
    :param verdicts: The verdict of each verifier
    """
    true: int
    pred: int
    verdicts: Verdicts = ()


def verdict_vectors(n: int) -> List[Verdicts]:
    """
    List every verdict vector of length n.

    The all-true vector comes first and the all-false vector last.
    """
    return [tuple(v) for v in itertools.product((True, False), repeat=n)]


class ConfusionTensor:
    """
    One confusion matrix per verdict vector, with the derived probabilities.

    :param counts: Integer array of shape (2^n, K, K); entry [i, k-1, k'-1]
        counts class-k samples predicted as k' with the i-th verdict vector
        of :func:`verdict_vectors`
    :raises ValueError: If the array has the wrong shape or negative counts
    :raises EmptyClassError: If a class has no samples
    """
    __slots__ = ('_counts', '_classes', '_n', '_verdicts', '_index')

    def __init__(self, counts: np.ndarray | Sequence[Any]):
        array = np.asarray(counts, dtype=np.int64)
        if array.ndim != 3 or array.shape[1] != array.shape[2] or array.shape[1] < 1:
            raise ValueError(f"Counts must have shape (2^n, K, K), got {array.shape}")
        n = int(array.shape[0]).bit_length() - 1
        if 2**n != array.shape[0]:
            raise ValueError(f"Counts hold {array.shape[0]} matrices, which is not a power of two")
        if (array < 0).any():
            raise ValueError("Counts must not be negative")
        array.setflags(write=False)
        self._counts = array
        self._classes = int(array.shape[1])
        self._n = n
        self._verdicts = verdict_vectors(n)
        self._index = {v: i for i, v in enumerate(self._verdicts)}
        for k, total in enumerate(self.per_class_totals, start=1):
            if total == 0:
                raise EmptyClassError(k)

    @property
    def classes(self) -> int:
        """The number of classes K."""
        return self._classes

    @property
    def n(self) -> int:
        """The number of verifiers."""
        return self._n

    @property
    def counts(self) -> np.ndarray:
        """The read-only count array."""
        return self._counts

    @property
    def verdicts(self) -> List[Verdicts]:
        return list(self._verdicts)

    @property
    def per_class_totals(self) -> Tuple[int, ...]:
        """The number of samples of each class, over every verdict vector."""
        return tuple(int(x) for x in self._counts.sum(axis=(0, 2)))

    def matrix(self, verdicts: Verdicts) -> np.ndarray:
        """The confusion matrix of one verdict vector."""
        return self._counts[self._verdict_index(verdicts)]

    def count(self, k: int, pred: int, verdicts: Verdicts) -> int:
        return int(self._counts[self._verdict_index(verdicts), k - 1, pred - 1])

    def probability(self, k: int, pred: int, verdicts: Verdicts) -> Fraction:
        """
        The exact probability that a class-k input is predicted as pred with the given verdicts.

        :raises ValueError: If a class is out of range
        :raises ArityMismatchError: If the verdict vector has the wrong length
        """
        for value in (k, pred):
            if not 1 <= value <= self._classes:
                raise ValueError(f"Class {value} is outside 1..{self._classes}")
        return Fraction(self.count(k, pred, verdicts), self.per_class_totals[k - 1])

    def probability_array(self) -> np.ndarray:
        """
        The probabilities as floats.

        :return: Array of shape (K, K, 2^n) indexed by [k-1, k'-1, verdict index]
        """
        totals = np.asarray(self.per_class_totals, dtype=float)
        return np.transpose(self._counts, (1, 2, 0)) / totals[:, None, None]

    def perceptions(self, k: int) -> List[Tuple[int, Verdicts, Fraction]]:
        """
        What a class-k input may be perceived as.

        :return: Every (predicted class, verdicts, probability) with non-zero
            probability, predicted class first then verdict order
        """
        result = []
        total = self.per_class_totals[k - 1]
        for pred in range(1, self._classes + 1):
            for i, verdicts in enumerate(self._verdicts):
                count = int(self._counts[i, k - 1, pred - 1])
                if count:
                    result.append((pred, verdicts, Fraction(count, total)))
        return result

    def _verdict_index(self, verdicts: Verdicts) -> int:
        verdicts = tuple(bool(v) for v in verdicts)
        if len(verdicts) != self._n:
            raise ArityMismatchError(self._n, len(verdicts))
        return self._index[verdicts]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionTensor):
            return NotImplemented
        return self._counts.shape == other._counts.shape and bool((self._counts == other._counts).all())

    def __hash__(self) -> int:
        return hash((self._counts.shape, self._counts.tobytes()))

    def __repr__(self) -> str:
        return f"ConfusionTensor(K={self._classes}, n={self._n}, samples={int(self._counts.sum())})"

    def to_json(self) -> Dict[str, Any]:
        """
        Render the tensor as a JSON document.

        Probabilities are written as exact ``numerator/denominator`` strings
        and as floats.
        """
        matrices = {}
        probabilities = []
        for i, verdicts in enumerate(self._verdicts):
            matrices[render_verdicts(verdicts) or '-'] = self._counts[i].tolist()
        for k in range(1, self._classes + 1):
            for pred, verdicts, p in self.perceptions(k):
                probabilities.append({
                    'true': k,
                    'pred': pred,
                    'verdicts': render_verdicts(verdicts),
                    'exact': f"{p.numerator}/{p.denominator}",
                    'value': float(p),
                })
        return {
            'classes': self._classes,
            'verifiers': self._n,
            'per_class_totals': list(self.per_class_totals),
            'counts': matrices,
            'probabilities': probabilities,
        }

    @classmethod
    def from_json(cls, document: Mapping[str, Any]) -> ConfusionTensor:
        """
        Read a tensor written by :meth:`to_json`.

        Only the counts are read; the probabilities are derived again.

        :raises KeyError: If a matrix is missing
        """
        n = int(document['verifiers'])
        matrices = document['counts']
        counts = [matrices[render_verdicts(v) or '-'] for v in verdict_vectors(n)]
        tensor = cls(counts)
        if tensor.classes != int(document['classes']):
            raise ArityMismatchError(int(document['classes']), tensor.classes, what="classes")
        return tensor

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + '\n')

    @classmethod
    def load(cls, path: Path | str) -> ConfusionTensor:
        return cls.from_json(json.loads(Path(path).read_text()))


def perfect_tensor(classes: int, n: int = 0, per_class: int = 1) -> ConfusionTensor:
    """
    A tensor for a classifier that is always right and always verified.

    :param classes: The number of classes K
    :param n: The number of verifiers
    :param per_class: The number of samples counted for each class
    """
    counts = np.zeros((2**n, classes, classes), dtype=np.int64)
    counts[0] = np.eye(classes, dtype=np.int64) * per_class
    return ConfusionTensor(counts)


@log_to_debug
def ingest(rows: Iterable[VerifiedSample | Sequence[Any]], classes: int, n: int) -> ConfusionTensor:
    """
    Count verified samples into a confusion tensor.

    :param rows: The samples; plain (true, pred, verdicts) tuples are accepted
    :param classes: The number of classes K
    :param n: The number of verifiers
    :raises ArityMismatchError: If a sample has the wrong number of verdicts
    :raises ValueError: If a class label is outside 1..K
    :raises EmptyClassError: If a class has no samples
    :return: The tensor
    """
    index = {v: i for i, v in enumerate(verdict_vectors(n))}
    counts = np.zeros((2**n, classes, classes), dtype=np.int64)
    n_rows = 0
    for row in rows:
        sample = row if isinstance(row, VerifiedSample) else VerifiedSample(*row)
        verdicts = tuple(bool(v) for v in sample.verdicts)
        if len(verdicts) != n:
            raise ArityMismatchError(n, len(verdicts))
        for label in (sample.true, sample.pred):
            if not 1 <= label <= classes:
                raise ValueError(f"Class label {label} is outside 1..{classes}")
        counts[index[verdicts], sample.true - 1, sample.pred - 1] += 1
        n_rows += 1
    logger.info(f"Ingested {n_rows} samples into {2**n} confusion matrices")
    return ConfusionTensor(counts)


def marginalize(tensor: ConfusionTensor) -> ConfusionTensor:
    """Drop the verdicts, summing the confusion matrices."""
    if tensor.n == 0:
        return tensor
    return ConfusionTensor(tensor.counts.sum(axis=0, keepdims=True))


class AccuracyReport(NamedTuple):
    """
    Accuracy of the classifier overall and within each verdict bucket.

    Accuracies of empty buckets are None.

    :param overall: The fraction of correct predictions
    :param per_verdicts: Accuracy within each verdict vector
    :param per_class: Accuracy of each true class
    :param per_class_verdicts: Accuracy of each true class within each verdict vector
    :param bucket_sizes: The number of samples with each verdict vector
    """
    overall: float
    per_verdicts: Dict[Verdicts, float | None]
    per_class: Dict[int, float]
    per_class_verdicts: Dict[Tuple[int, Verdicts], float | None]
    bucket_sizes: Dict[Verdicts, int]

    def rows(self) -> Iterator[Tuple[str, str, str]]:
        """Yield (verdicts, samples, accuracy) table rows, with an overall row last."""
        for verdicts, accuracy in self.per_verdicts.items():
            rendered = '-' if accuracy is None else f"{accuracy:.4f}"
            yield render_verdicts(verdicts) or '-', str(self.bucket_sizes[verdicts]), rendered
        yield 'all', str(sum(self.bucket_sizes.values())), f"{self.overall:.4f}"


def _ratio(numerator: int, denominator: int) -> float | None:
    return numerator / denominator if denominator else None


def accuracy_report(tensor: ConfusionTensor) -> AccuracyReport:
    """
    Summarise how often the classifier is right within each verdict bucket.

    :param tensor: The tensor to summarise
    :return: The report
    """
    counts = tensor.counts
    per_verdicts = {}
    sizes = {}
    per_class_verdicts = {}
    for i, verdicts in enumerate(tensor.verdicts):
        matrix = counts[i]
        sizes[verdicts] = int(matrix.sum())
        per_verdicts[verdicts] = _ratio(int(np.trace(matrix)), sizes[verdicts])
        for k in range(1, tensor.classes + 1):
            per_class_verdicts[(k, verdicts)] = _ratio(
                int(matrix[k - 1, k - 1]), int(matrix[k - 1].sum()))
    total = counts.sum(axis=0)
    per_class = {
        k: int(total[k - 1, k - 1]) / tensor.per_class_totals[k - 1]
        for k in range(1, tensor.classes + 1)
    }
    overall = int(np.trace(total)) / int(total.sum())
    return AccuracyReport(overall, per_verdicts, per_class, per_class_verdicts, sizes)


def read_samples(path: Path | str) -> Tuple[List[VerifiedSample], int]:
    """
    Read samples from a CSV file with header ``true,pred,v1,...,vn``.

    :raises ValueError: If the header or a row is malformed, naming the line
    :raises ArityMismatchError: If a row has the wrong number of columns
    :return: The samples and n
    """
    with open(path, newline='') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty")
        if [h.strip() for h in header[:2]] != ['true', 'pred']:
            raise ValueError(f"{path} must start with a 'true,pred' header")
        n = len(header) - 2
        samples = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 2:
                raise ArityMismatchError(n + 2, len(row), what=f"columns on line {line_no}")
            try:
                verdicts = tuple(_verdict(cell) for cell in row[2:])
                samples.append(VerifiedSample(int(row[0]), int(row[1]), verdicts))
            except ValueError as e:
                raise ValueError(f"{path} line {line_no}: {e}") from e
    return samples, n


def _verdict(cell: str) -> bool:
    cell = cell.strip()
    if cell not in ('0', '1'):
        raise ValueError(f"verdict {cell!r} is not 0 or 1")
    return cell == '1'


def write_samples(path: Path | str, samples: Iterable[VerifiedSample], n: int) -> None:
    """Write samples in the format read by :func:`read_samples`."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['true', 'pred', *(f"v{i}" for i in range(1, n + 1))])
        for sample in samples:
            writer.writerow([sample.true, sample.pred, *(int(v) for v in sample.verdicts)])
