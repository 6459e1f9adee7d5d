from __future__ import annotations

from typing import NamedTuple

import numpy as np
import pytest

from decsynth.builder import build
from decsynth.language import parse
from decsynth.models import load_requirements, load_source
from decsynth.pdtmc import ExplicitPDTMC
from decsynth.synth import Requirements
from decsynth.uncertainty import ConfusionTensor


def pytest_addoption(parser):
    parser.addoption(
        "--slow",
        action="store_true",
        help="Run the long-running acceptance tests.",
    )


def pytest_runtest_setup(item):
    if 'slow' in item.keywords and not item.config.getoption("--slow"):
        pytest.skip("long-running test, run with --slow")


class Study(NamedTuple):
    """A shipped study, built with perfect perception."""

    model: ExplicitPDTMC
    requirements: Requirements


@pytest.fixture(scope='session')
def robot() -> Study:
    return Study(
        build(parse(load_source('robot'))),
        Requirements.from_text(load_requirements('robot')),
    )


@pytest.fixture(scope='session')
def safescad() -> Study:
    return Study(
        build(parse(load_source('safescad'))),
        Requirements.from_text(load_requirements('safescad')),
    )


def robot_tensor(verified_accuracy: float = 0.95, unverified_accuracy: float = 0.6) -> ConfusionTensor:
    """
    A two-class tensor with one verifier, counted over 100 samples per class.

    Verified predictions (v=1) are right with the first accuracy, unverified
    ones with the second; 80 samples of each class are verified.
    """
    counts = np.zeros((2, 2, 2), dtype=np.int64)
    for i, (size, accuracy) in enumerate(((80, verified_accuracy), (20, unverified_accuracy))):
        right = round(size * accuracy)
        for k in range(2):
            counts[i, k, k] = right
            counts[i, k, 1 - k] = size - right
    return ConfusionTensor(counts)


@pytest.fixture
def tensor() -> ConfusionTensor:
    return robot_tensor()
