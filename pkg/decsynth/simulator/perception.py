"""
A stand-in for the classifier and its online verifiers, and dataset generation.

The surrogate draws a prediction and verdicts for a true class with exactly
the probabilities of a confusion tensor, which is how the classifier is
described to the synthesis pipeline.
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import List, NamedTuple, Tuple

import numpy as np

from ..exceptions import SamplingStallError
from ..logging import log_to_debug
from ..uncertainty import ConfusionTensor, VerifiedSample, Verdicts
from .kinematics import (
    COLLISION, NO_COLLISION, Encounters, SimConfig, labels_of, sample_encounters,
    simulate_batch,
)

logger = logging.getLogger(__name__)

# Spawns tried before a class that is still short is reported as stalled
MAX_ATTEMPTS = 10**6
_BATCH = 1024


class SurrogatePerception:
    """
    Emits a predicted class and verdicts for each true class.

    :param tensor: The confusion tensor to reproduce
    :param seed: A seed or random generator
    """

    def __init__(self, tensor: ConfusionTensor, seed: int | np.random.Generator | None = None):
        self.tensor = tensor
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        probabilities = tensor.probability_array()
        self._outcomes = probabilities.shape[2]
        # row k-1 is the distribution over (pred, verdict index), pred-major
        self._table = probabilities.reshape(tensor.classes, -1)

    def perceive_many(self, classes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Perceive many inputs.

        :param classes: The true class of each input
        :return: The predicted classes and the index of each verdict vector
            in ``tensor.verdicts``
        """
        classes = np.asarray(classes, dtype=np.int64)
        preds = np.empty(classes.shape, dtype=np.int64)
        verdict_index = np.empty(classes.shape, dtype=np.int64)
        for k in range(1, self.tensor.classes + 1):
            mask = classes == k
            count = int(mask.sum())
            if not count:
                continue
            draws = self.rng.choice(self._table.shape[1], size=count, p=self._table[k - 1])
            preds[mask] = draws // self._outcomes + 1
            verdict_index[mask] = draws % self._outcomes
        return preds, verdict_index

    def perceive(self, k: int) -> Tuple[int, Verdicts]:
        """Perceive one input of true class k."""
        preds, index = self.perceive_many(np.array([k]))
        return int(preds[0]), self.tensor.verdicts[int(index[0])]

    def samples(self, classes: np.ndarray) -> List[VerifiedSample]:
        """Perceive inputs and record them as verified samples."""
        verdicts = self.tensor.verdicts
        preds, index = self.perceive_many(classes)
        return [
            VerifiedSample(int(k), int(p), verdicts[int(i)])
            for k, p, i in zip(classes, preds, index)
        ]


class Dataset(NamedTuple):
    """
    Class-balanced spawns with their labels.

    :param encounters: The spawns
    :param labels: The true class of each spawn
    :param journey_time: The simulated time of each spawn's journey
    :param samples: The surrogate's verified samples, if a surrogate was used
    """
    encounters: Encounters
    labels: np.ndarray
    journey_time: np.ndarray
    samples: List[VerifiedSample] | None = None

    def write_encounters(self, path: Path | str, cfg: SimConfig) -> None:
        """Write the normalised spawns and labels as CSV."""
        rows = self.encounters.normalised(cfg)
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['x_diff', 'y_diff', 'speed', 'heading', 'turn_rate', 'label'])
            for row, label in zip(rows, self.labels):
                writer.writerow([*(repr(float(x)) for x in row), int(label)])


@log_to_debug
def generate_dataset(
    cfg: SimConfig,
    n_per_class: int,
    surrogate: SurrogatePerception | None = None,
    rng: np.random.Generator | None = None,
    max_attempts: int = MAX_ATTEMPTS,
) -> Dataset:
    """
    Sample spawns until both classes have n_per_class members.

    Spawns are drawn uniformly and labelled by simulating the journey with the
    robot committed to going. Spawns of a class that is already full are
    rejected, as are journeys that time out.

    :param cfg: The scenario
    :param n_per_class: The spawns wanted per class
    :param surrogate: If given, perceive every spawn to produce verified samples
    :param rng: The random stream, seeded from cfg.seed if None
    :param max_attempts: The most spawns to try
    :raises ValueError: If n_per_class is below 1
    :raises SamplingStallError: If a class is still short after max_attempts spawns
    :return: The dataset, ordered as the spawns were accepted
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be at least 1, got {n_per_class}")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    wanted = {NO_COLLISION: n_per_class, COLLISION: n_per_class}
    parts: List[Encounters] = []
    labels: List[np.ndarray] = []
    times: List[np.ndarray] = []
    attempts = 0
    timeouts = 0
    while any(wanted.values()):
        if attempts >= max_attempts:
            short = next(label for label, left in wanted.items() if left)
            raise SamplingStallError(short, attempts)
        size = min(_BATCH, max_attempts - attempts)
        batch = sample_encounters(cfg, rng, size)
        outcomes = simulate_batch(cfg, batch)
        attempts += size
        timeouts += int(outcomes.timed_out.sum())
        batch_labels = labels_of(outcomes)
        keep = np.zeros(size, dtype=bool)
        for label in wanted:
            candidates = np.flatnonzero((batch_labels == label) & ~outcomes.timed_out)[:wanted[label]]
            keep[candidates] = True
            wanted[label] -= len(candidates)
        chosen = np.flatnonzero(keep)
        parts.append(batch.take(chosen))
        labels.append(batch_labels[chosen])
        times.append(outcomes.journey_time[chosen])

    if timeouts:
        logger.warning(f"{timeouts} sampled journeys timed out and were discarded")
    all_labels = np.concatenate(labels)
    samples = surrogate.samples(all_labels) if surrogate is not None else None
    logger.info(f"Generated {len(all_labels)} spawns from {attempts} attempts")
    return Dataset(Encounters.concatenate(parts), all_labels, np.concatenate(times), samples)
