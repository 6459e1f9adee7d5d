"""Test counting verified test samples into confusion tensors."""
from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from decsynth.exceptions import ArityMismatchError, EmptyClassError
from decsynth.uncertainty import (
    ConfusionTensor, VerifiedSample, accuracy_report, ingest, marginalize,
    perfect_tensor, read_samples, verdict_vectors, write_samples,
)

from .conftest import robot_tensor
from .helpers import random_tensor

SAMPLES = [
    VerifiedSample(1, 1, (True, True)),
    VerifiedSample(1, 1, (True, True)),
    VerifiedSample(1, 2, (False, True)),
    VerifiedSample(2, 2, (True, True)),
    VerifiedSample(2, 1, (False, False)),
    (2, 2, (True, False)),
]


def test_verdict_vectors() -> None:
    """Test that verdict vectors run from all-true to all-false."""
    assert verdict_vectors(0) == [()]
    assert verdict_vectors(2) == [(True, True), (True, False), (False, True), (False, False)]


def test_ingest() -> None:
    """Test that samples are counted into the matrix of their verdict vector."""
    tensor = ingest(SAMPLES, classes=2, n=2)

    assert tensor.classes == 2
    assert tensor.n == 2
    assert tensor.counts.shape == (4, 2, 2)
    assert tensor.per_class_totals == (3, 3)
    assert tensor.matrix((True, True)).tolist() == [[2, 0], [0, 1]]
    assert tensor.count(1, 2, (False, True)) == 1
    assert tensor.count(2, 1, (False, False)) == 1
    assert tensor.count(2, 2, (True, False)) == 1


def test_exact_probabilities() -> None:
    """Test that probabilities are exact fractions of the class totals."""
    tensor = ingest(SAMPLES, classes=2, n=2)

    assert tensor.probability(1, 1, (True, True)) == Fraction(2, 3)
    assert tensor.probability(2, 1, (False, False)) == Fraction(1, 3)
    assert tensor.probability(1, 2, (True, True)) == 0

    for k in (1, 2):
        assert sum(p for _, _, p in tensor.perceptions(k)) == 1


def test_probability_array() -> None:
    """Test that the float probabilities agree with the exact ones."""
    tensor = robot_tensor()
    array = tensor.probability_array()

    assert array.shape == (2, 2, 2)
    np.testing.assert_allclose(array.sum(axis=(1, 2)), 1.0)
    assert array[0, 0, 0] == pytest.approx(float(tensor.probability(1, 1, (True,))))


def test_perceptions_order() -> None:
    """Test that perceptions list predicted classes first, then verdicts, skipping zeros."""
    tensor = robot_tensor()

    assert tensor.perceptions(1) == [
        (1, (True,), Fraction(76, 100)),
        (1, (False,), Fraction(12, 100)),
        (2, (True,), Fraction(4, 100)),
        (2, (False,), Fraction(8, 100)),
    ]


@pytest.mark.parametrize("rows,classes,n,error,match", [
    ([(1, 1, (True,))], 2, 2, ArityMismatchError, "Expected 2 verdicts, found 1"),
    ([(1, 3, ())], 2, 0, ValueError, "Class label 3 is outside 1..2"),
    ([(1, 1, ())], 2, 0, EmptyClassError, "Class 2 has no samples"),
], ids=["verdict-count", "label-range", "empty-class"])
def test_ingest_errors(rows: list, classes: int, n: int, error: type, match: str) -> None:
    """Test that malformed datasets are rejected."""
    with pytest.raises(error, match=match):
        ingest(rows, classes, n)


@pytest.mark.parametrize("counts,match", [
    (np.zeros((2, 2, 3)), "shape"),
    (np.ones((3, 2, 2)), "power of two"),
    (-np.ones((1, 2, 2)), "negative"),
], ids=["not-square", "not-power-of-two", "negative"])
def test_tensor_shape_errors(counts: np.ndarray, match: str) -> None:
    """Test that count arrays of the wrong form are rejected."""
    with pytest.raises(ValueError, match=match):
        ConfusionTensor(counts)


def test_counts_are_read_only() -> None:
    """Test that the counts cannot be changed behind the tensor's back."""
    tensor = robot_tensor()
    with pytest.raises(ValueError):
        tensor.counts[0, 0, 0] = 5


def test_probability_errors() -> None:
    """Test that classes and verdict vectors are checked when asking for a probability."""
    tensor = robot_tensor()

    with pytest.raises(ValueError, match="outside 1..2"):
        tensor.probability(3, 1, (True,))
    with pytest.raises(ArityMismatchError):
        tensor.probability(1, 1, (True, False))


def test_marginalize() -> None:
    """Test that dropping the verdicts sums the matrices and keeps the class totals."""
    tensor = ingest(SAMPLES, classes=2, n=2)

    plain = marginalize(tensor)

    assert plain.n == 0
    assert plain.matrix(()).tolist() == [[2, 1], [1, 2]]
    assert plain.per_class_totals == tensor.per_class_totals
    assert marginalize(plain) is plain


def test_perfect_tensor() -> None:
    """Test the tensor of a classifier that is always right and verified."""
    tensor = perfect_tensor(3, n=1)

    assert tensor.perceptions(2) == [(2, (True,), Fraction(1))]
    assert accuracy_report(tensor).overall == 1.0


def test_accuracy_report() -> None:
    """Test the accuracy of the classifier within each verdict bucket."""
    report = accuracy_report(robot_tensor())

    assert report.overall == pytest.approx((152 + 24) / 200)
    assert report.per_verdicts[(True,)] == pytest.approx(0.95)
    assert report.per_verdicts[(False,)] == pytest.approx(0.6)
    assert report.per_class == {1: pytest.approx(0.88), 2: pytest.approx(0.88)}
    assert report.per_class_verdicts[(1, (False,))] == pytest.approx(0.6)
    assert report.bucket_sizes == {(True,): 160, (False,): 40}
    assert list(report.rows()) == [
        ('1', '160', '0.9500'),
        ('0', '40', '0.6000'),
        ('all', '200', '0.8800'),
    ]


def test_accuracy_report_empty_bucket() -> None:
    """Test that empty verdict buckets have no accuracy."""
    report = accuracy_report(perfect_tensor(2, n=1))

    assert report.per_verdicts[(False,)] is None
    assert list(report.rows())[1] == ('0', '0', '-')


def test_json_round_trip(tmp_path) -> None:
    """Test that a saved tensor loads back equal, with exact probabilities in the file."""
    tensor = ingest(SAMPLES, classes=2, n=2)
    path = tmp_path / 'tensor.json'

    tensor.save(path)

    document = json.loads(path.read_text())
    assert document['verifiers'] == 2
    assert document['counts']['11'] == [[2, 0], [0, 1]]
    entry = {'true': 1, 'pred': 1, 'verdicts': '11', 'exact': '2/3', 'value': 2 / 3}
    assert entry in document['probabilities']
    assert ConfusionTensor.load(path) == tensor
    assert hash(ConfusionTensor.load(path)) == hash(tensor)


def test_json_class_mismatch() -> None:
    """Test that a document whose class count disagrees with its matrices is rejected."""
    document = robot_tensor().to_json()
    document['classes'] = 3

    with pytest.raises(ArityMismatchError, match="classes"):
        ConfusionTensor.from_json(document)


def test_samples_file(tmp_path) -> None:
    """Test writing and reading samples as CSV."""
    path = tmp_path / 'samples.csv'
    samples = [s if isinstance(s, VerifiedSample) else VerifiedSample(*s) for s in SAMPLES]

    write_samples(path, samples, n=2)

    assert path.read_text().splitlines()[0] == 'true,pred,v1,v2'
    assert read_samples(path) == (samples, 2)


@pytest.mark.parametrize("text,error,match", [
    ("", ValueError, "empty"),
    ("class,pred\n1,1\n", ValueError, "'true,pred' header"),
    ("true,pred,v1\n1,1\n", ArityMismatchError, "columns on line 2"),
    ("true,pred,v1\n1,1,1\n2,2,yes\n", ValueError, "line 3"),
], ids=["empty", "header", "columns", "verdict"])
def test_samples_file_errors(tmp_path, text: str, error: type, match: str) -> None:
    """Test that malformed sample files name the problem and its line."""
    path = tmp_path / 'samples.csv'
    path.write_text(text)

    with pytest.raises(error, match=match):
        read_samples(path)


@pytest.mark.slow
def test_large_dataset() -> None:
    """Test that a hundred thousand samples give exact distributions for every class."""
    rng = np.random.default_rng(8)
    classes, n = 3, 2
    verdicts = verdict_vectors(n)
    rows = [
        (int(t), int(p), verdicts[int(v)])
        for t, p, v in zip(
            rng.integers(1, classes + 1, 10**5),
            rng.integers(1, classes + 1, 10**5),
            rng.integers(0, len(verdicts), 10**5),
        )
    ]

    tensor = ingest(rows, classes, n)

    assert int(tensor.counts.sum()) == 10**5
    for k in range(1, classes + 1):
        assert sum(p for _, _, p in tensor.perceptions(k)) == 1


def test_random_tensors_are_distributions() -> None:
    """Test that the probabilities of every class sum to exactly one."""
    rng = np.random.default_rng(4)
    for _ in range(20):
        tensor = random_tensor(rng, classes=int(rng.integers(2, 5)), n=int(rng.integers(0, 3)))
        for k in range(1, tensor.classes + 1):
            assert sum(p for _, _, p in tensor.perceptions(k)) == 1
