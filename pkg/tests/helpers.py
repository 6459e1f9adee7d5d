"""
Random models and slow, obviously-correct reference computations for tests.

The references work on dense matrices with plain graph searches, so they
share no code with the sparse checker they are compared against.
"""
from __future__ import annotations

from collections import deque
from functools import lru_cache
from typing import Dict, Iterable, List, Set, Tuple

import numpy as np

from decsynth.pdtmc import (
    ExplicitPDTMC, RewardStructure, StateTuple, TransitionEntry,
)
from decsynth.uncertainty import ConfusionTensor

LABELS = ('a', 'b')


def random_dtmc(rng: np.random.Generator, n_states: int) -> ExplicitPDTMC:
    """
    A random chain with labels ``a`` and ``b`` and a reward structure ``r``.

    Every state has one to three successors; some states are absorbing.
    """
    rows = []
    transition_rewards = {}
    for source in range(n_states):
        if rng.random() < 0.15:
            rows.append([TransitionEntry(source, 1.0)])
            continue
        count = int(rng.integers(1, min(3, n_states) + 1))
        targets = rng.choice(n_states, size=count, replace=False)
        weights = rng.dirichlet(np.ones(count))
        rows.append([TransitionEntry(int(t), float(w)) for t, w in zip(targets, weights)])
        for t in targets:
            if rng.random() < 0.3:
                transition_rewards[(source, int(t))] = float(rng.integers(0, 4))
    labels = {
        name: [s for s in range(n_states) if rng.random() < 0.4]
        for name in LABELS
    }
    state_rewards = {s: float(rng.random()) for s in range(n_states) if rng.random() < 0.5}
    return ExplicitPDTMC(
        states=[StateTuple((s,), 1, 1, ()) for s in range(n_states)],
        initial=0,
        transitions=rows,
        labels=labels,
        rewards=[RewardStructure('r', state_rewards, transition_rewards)],
    )


def dense(model: ExplicitPDTMC) -> np.ndarray:
    matrix = np.zeros((len(model), len(model)))
    for source, row in enumerate(model.transitions):
        for entry in row:
            matrix[source, entry.target] += entry.constant
    return matrix


def mask(model: ExplicitPDTMC, label: str | None) -> np.ndarray:
    """States where a label holds; None means every state."""
    result = np.zeros(len(model), dtype=bool)
    if label is None:
        result[:] = True
    else:
        result[list(model.labels[label])] = True
    return result


def _can_reach(matrix: np.ndarray, targets: Iterable[int], through: np.ndarray) -> Set[int]:
    """States with a path into targets whose other states all lie in through."""
    found = set(targets)
    queue = deque(found)
    while queue:
        state = queue.popleft()
        for source in np.flatnonzero(matrix[:, state] > 0):
            source = int(source)
            if source not in found and through[source]:
                found.add(source)
                queue.append(source)
    return found


def next_reference(model: ExplicitPDTMC, phi: np.ndarray) -> np.ndarray:
    return dense(model) @ phi.astype(float)


def bounded_until_reference(
    model: ExplicitPDTMC, phi1: np.ndarray, phi2: np.ndarray, steps: int,
) -> np.ndarray:
    """Sum over paths of at most ``steps`` transitions, by recursion on the path length."""
    matrix = dense(model)

    @lru_cache(maxsize=None)
    def value(state: int, left: int) -> float:
        if phi2[state]:
            return 1.0
        if left == 0 or not phi1[state]:
            return 0.0
        return sum(
            matrix[state, target] * value(target, left - 1)
            for target in np.flatnonzero(matrix[state] > 0))

    return np.array([value(s, steps) for s in range(len(model))])


def until_reference(model: ExplicitPDTMC, phi1: np.ndarray, phi2: np.ndarray) -> np.ndarray:
    """Solve the linear system over the states that reach phi2 with positive probability."""
    matrix = dense(model)
    positive = _can_reach(matrix, np.flatnonzero(phi2), phi1 & ~phi2)
    values = phi2.astype(float)
    maybe = sorted(s for s in positive if not phi2[s])
    if maybe:
        sub = matrix[np.ix_(maybe, maybe)]
        b = matrix[np.ix_(maybe, np.flatnonzero(phi2))].sum(axis=1)
        values[maybe] = np.linalg.solve(np.eye(len(maybe)) - sub, b)
    return values


def _per_step(model: ExplicitPDTMC, name: str) -> np.ndarray:
    structure = model.reward(name)
    per_step = np.zeros(len(model))
    for state, value in structure.state_rewards.items():
        per_step[state] += value
    matrix = dense(model)
    for (source, target), value in structure.transition_rewards.items():
        per_step[source] += matrix[source, target] * value
    return per_step


def cumulative_reference(model: ExplicitPDTMC, name: str, steps: int) -> np.ndarray:
    """Expected reward of the first ``steps`` transitions, as a sum of matrix powers."""
    matrix = dense(model)
    per_step = _per_step(model, name)
    total = np.zeros(len(model))
    power = np.eye(len(model))
    for _ in range(steps):
        total += power @ per_step
        power = power @ matrix
    return total


def reach_reward_reference(model: ExplicitPDTMC, name: str, target: np.ndarray) -> np.ndarray:
    """Expected reward until target, infinite where the target is missed with positive probability."""
    matrix = dense(model)
    everywhere = np.ones(len(model), dtype=bool)
    reaching = _can_reach(matrix, np.flatnonzero(target), everywhere & ~target)
    missing = [s for s in range(len(model)) if s not in reaching]
    risky = _can_reach(matrix, missing, ~target) if missing else set()
    values = np.full(len(model), np.inf)
    values[target] = 0.0
    certain = sorted(s for s in range(len(model)) if s not in risky and not target[s])
    if certain:
        sub = matrix[np.ix_(certain, certain)]
        values[certain] = np.linalg.solve(np.eye(len(certain)) - sub, _per_step(model, name)[certain])
    return values


def random_tensor(
    rng: np.random.Generator, classes: int, n: int, per_class: int = 50,
) -> ConfusionTensor:
    """A tensor with per_class random samples of every class."""
    counts = np.zeros((2**n, classes, classes), dtype=np.int64)
    for k in range(classes):
        cells = rng.multinomial(per_class, rng.dirichlet(np.ones(2**n * classes)))
        counts[:, k, :] = cells.reshape(2**n, classes)
    return ConfusionTensor(counts)


def random_turn_model(rng: np.random.Generator) -> str:
    """
    The source of a random turn-structured model with perfect perception.

    The managed system walks over z in [0..Z], the environment holds one of
    K classes and a boolean controller decides at every turn, with one
    family per class.
    """
    top = int(rng.integers(1, 4))
    classes = int(rng.integers(2, 4))
    step = float(np.round(rng.uniform(0.1, 0.9), 2))
    lines: List[str] = ['dtmc', '']
    families = [f"x{k}" for k in range(1, classes + 1)]
    lines.append(f"// @controller-params: {', '.join(families)}")
    lines += [
        '',
        '// @role: managed',
        'module System',
        f'    z : [0..{top}] init 0;',
        f'    [move] t=1 & z<{top} & go -> {step}:(z\'=z+1) + {1 - step:.2f}:(z\'=z);',
        f'    [move] t=1 & z<{top} & !go -> (z\'=z);',
        f'    [move] t=1 & z={top} -> (z\'=0);',
        'endmodule',
        '',
        '// @role: environment',
        'module Environment',
        f'    k : [1..{classes}] init 1;',
    ]
    # whole percentages, none of them zero
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, 100), size=classes - 1, replace=False))
    percents = np.diff([0, *cuts, 100])
    branches = ' + '.join(f"{p / 100:.2f}:(k'={k})" for k, p in enumerate(percents, start=1))
    lines += [
        f'    [sense] t=2 -> {branches};',
        'endmodule',
        '',
        '// @role: controller',
        'module Controller',
        '    go : bool init true;',
    ]
    for k, family in enumerate(families, start=1):
        lines.append(f"    [decide] t=3 & k={k} -> {family}:(go'=true) + {family}:(go'=false);")
    lines += [
        'endmodule',
        '',
        '// @role: turn',
        'module Turn',
        '    t : [1..3] init 1;',
        "    [move] t=1 -> (t'=2);",
        "    [sense] t=2 -> (t'=3);",
        "    [decide] t=3 -> (t'=1);",
        'endmodule',
        '',
        f'label "top" = z={top};',
        '',
        'rewards "steps"',
        '    [move] true : 1;',
        'endrewards',
        '',
    ]
    return '\n'.join(lines)


def family_vectors(rng: np.random.Generator, sizes: Iterable[int]) -> List[tuple]:
    return [tuple(float(x) for x in rng.dirichlet(np.ones(size))) for size in sizes]


def by_name(values: Dict[str, float]) -> Dict[str, float]:
    return dict(sorted(values.items()))


P_COLLIDER = 0.5
P_OCC = 0.12


def robot_values(x1: float, x2: float) -> Tuple[float, float]:
    """
    The safe arrival probability and expected journey time of the robot in closed form.

    x1 and x2 are the probabilities of waiting when the collider is off and on
    collision course.
    """
    safe = (1 - P_COLLIDER) + P_COLLIDER * (1 - P_OCC) * (1 - x1)
    crash = P_COLLIDER * P_OCC * (1 - x2)
    retry = P_COLLIDER * ((1 - P_OCC) * x1 + P_OCC * x2)
    probability = safe / (safe + crash)
    time = 9.95 + 5 * retry / (1 - retry) + 2.57 * crash / (1 - retry)
    return probability, time
