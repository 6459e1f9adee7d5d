"""
Sparse matrix form of instantiated models, graph precomputation and linear solvers.

Systems of up to DIRECT_SOLVER_LIMIT unknowns are solved by sparse LU
factorisation with partial pivoting, larger ones by Gauss-Seidel sweeps.
"""
from __future__ import annotations

import logging
from types import MappingProxyType
from typing import Dict, Mapping, NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve_triangular, splu

from .exceptions import MissingParameterError, SolverFailureError
from .logging import TRACE
from .pdtmc import ExplicitPDTMC

logger = logging.getLogger(__name__)

# Largest system solved by LU factorisation
DIRECT_SOLVER_LIMIT = 20_000
# Residual at which Gauss-Seidel stops
ITERATIVE_TOLERANCE = 1e-12
# Most Gauss-Seidel sweeps before giving up
MAX_SWEEPS = 10**6
# Largest acceptable residual of a direct solve, relative to the solution size
DIRECT_TOLERANCE = 1e-9


class RewardVectors(NamedTuple):
    """
    A reward structure in array form.

    :param state: Reward of each state
    :param transition: Reward of each edge, as a sparse matrix
    """
    state: np.ndarray
    transition: sparse.csr_matrix


class SparseChain(NamedTuple):
    """
    An instantiated model as sparse arrays, ready for model checking.

    :param matrix: The transition probability matrix
    :param initial: The initial state
    :param labels: Label name to boolean mask over states
    :param rewards: Reward structure name to its arrays, in model order
    """
    matrix: sparse.csr_matrix
    initial: int
    labels: Mapping[str, np.ndarray]
    rewards: Mapping[str, RewardVectors]

    @property
    def n_states(self) -> int:
        return int(self.matrix.shape[0])


def _labels_and_rewards(model: ExplicitPDTMC) -> tuple[Dict[str, np.ndarray], Dict[str, RewardVectors]]:
    n = len(model)
    labels = {}
    for name, ids in model.labels.items():
        mask = np.zeros(n, dtype=bool)
        mask[list(ids)] = True
        labels[name] = mask
    rewards = {}
    for structure in model.rewards:
        state = np.zeros(n)
        for s, value in structure.state_rewards.items():
            state[s] = value
        if structure.transition_rewards:
            keys = list(structure.transition_rewards)
            rows = [s for s, _ in keys]
            cols = [d for _, d in keys]
            data = [structure.transition_rewards[key] for key in keys]
            transition = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
        else:
            transition = sparse.csr_matrix((n, n))
        rewards[structure.name] = RewardVectors(state, transition)
    return labels, rewards


class ParametricMatrix:
    """
    A parametric model compiled to arrays, for fast repeated instantiation.

    Labels and rewards are converted once and shared by every chain produced.

    :param model: The model to compile
    """
    __slots__ = ('_rows', '_cols', '_constants', '_param_index', '_param_names',
                 '_n', '_initial', '_labels', '_rewards')

    def __init__(self, model: ExplicitPDTMC):
        rows, cols, constants, param_index = [], [], [], []
        names = sorted({e.parameter for row in model.transitions for e in row if e.parameter})
        lookup = {name: idx for idx, name in enumerate(names)}
        for source, row in enumerate(model.transitions):
            for entry in row:
                rows.append(source)
                cols.append(entry.target)
                constants.append(entry.constant)
                param_index.append(-1 if entry.parameter is None else lookup[entry.parameter])
        self._rows = np.asarray(rows, dtype=np.int64)
        self._cols = np.asarray(cols, dtype=np.int64)
        self._constants = np.asarray(constants, dtype=float)
        self._param_index = np.asarray(param_index, dtype=np.int64)
        self._param_names = tuple(names)
        self._n = len(model)
        self._initial = model.initial
        labels, rewards = _labels_and_rewards(model)
        self._labels = MappingProxyType(labels)
        self._rewards = MappingProxyType(rewards)

    @property
    def parameters(self) -> tuple[str, ...]:
        return self._param_names

    def matrix(self, values: Mapping[str, float]) -> sparse.csr_matrix:
        """
        Build the probability matrix for one valuation of the parameters.

        :param values: A value for every parameter
        :raises MissingParameterError: If a parameter has no value
        """
        missing = [name for name in self._param_names if name not in values]
        if missing:
            raise MissingParameterError(missing)
        param_values = np.array([float(values[name]) for name in self._param_names] + [1.0])
        # index -1 selects the trailing 1.0
        weights = self._constants * param_values[self._param_index]
        matrix = sparse.csr_matrix(
            (weights, (self._rows, self._cols)), shape=(self._n, self._n))
        matrix.eliminate_zeros()
        return matrix

    def chain(self, values: Mapping[str, float]) -> SparseChain:
        """Instantiate the compiled model as a chain."""
        return SparseChain(self.matrix(values), self._initial, self._labels, self._rewards)


def chain_from_model(model: ExplicitPDTMC) -> SparseChain:
    """
    Convert an instantiated model to sparse arrays.

    :param model: A model without parameters
    :raises MissingParameterError: If the model still has parameters
    """
    if model.is_parametric:
        names = sorted({e.parameter for row in model.transitions for e in row if e.parameter})
        raise MissingParameterError(names)
    return ParametricMatrix(model).chain({})


def backward_reachable(matrix: sparse.spmatrix, targets: np.ndarray, through: np.ndarray) -> np.ndarray:
    """
    Find the states that can reach a target set.

    Paths may only pass through states in ``through`` before reaching a target.

    :param matrix: The transition matrix; non-zero entries are edges
    :param targets: Boolean mask of target states
    :param through: Boolean mask of states paths may pass through
    :return: Boolean mask of the targets plus every state that can reach one
    """
    n = matrix.shape[0]
    coo = sparse.coo_matrix(matrix)
    edge = (coo.data != 0) & through[coo.row]
    target_ids = np.flatnonzero(targets)
    # reverse every usable edge and add a virtual root pointing at the targets
    rows = np.concatenate([coo.col[edge], np.full(len(target_ids), n)])
    cols = np.concatenate([coo.row[edge], target_ids])
    graph = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
    order = csgraph.breadth_first_order(graph, n, directed=True, return_predecessors=False)
    mask = np.zeros(n + 1, dtype=bool)
    mask[order] = True
    return mask[:n]


def prob0(matrix: sparse.spmatrix, phi1: np.ndarray, phi2: np.ndarray) -> np.ndarray:
    """States from which ``phi1 U phi2`` holds with probability 0."""
    return ~backward_reachable(matrix, phi2, phi1 & ~phi2)


def prob1(matrix: sparse.spmatrix, phi1: np.ndarray, phi2: np.ndarray, no: np.ndarray) -> np.ndarray:
    """
    States from which ``phi1 U phi2`` holds with probability 1.

    :param no: The result of prob0 for the same formula
    """
    return ~backward_reachable(matrix, no, phi1 & ~phi2)


def solve_linear(a: sparse.spmatrix, b: np.ndarray) -> np.ndarray:
    """
    Solve ``a x = b``.

    :param a: A square sparse matrix
    :param b: The right hand side
    :raises SolverFailureError: If the system is singular or does not converge
    :return: The solution
    """
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)
    a = sparse.csr_matrix(a)
    if n <= DIRECT_SOLVER_LIMIT:
        return _solve_direct(a, b)
    return _solve_gauss_seidel(a, b)


def _solve_direct(a: sparse.csr_matrix, b: np.ndarray) -> np.ndarray:
    try:
        x = splu(a.tocsc()).solve(b)
    except RuntimeError as e:
        # splu raises RuntimeError for exactly singular matrices
        logger.debug(f"LU factorisation failed: {e}")
        raise SolverFailureError(float('inf')) from e
    residual = float(np.max(np.abs(a @ x - b))) if len(b) else 0.0
    scale = max(1.0, float(np.max(np.abs(x))) if np.all(np.isfinite(x)) else 1.0)
    if not np.isfinite(residual) or residual > DIRECT_TOLERANCE * scale:
        raise SolverFailureError(residual)
    logger.log(TRACE, f"LU solve of {a.shape[0]} unknowns, residual {residual:.3e}")
    return x


def _solve_gauss_seidel(a: sparse.csr_matrix, b: np.ndarray) -> np.ndarray:
    lower = sparse.csr_matrix(sparse.tril(a))
    upper = sparse.csr_matrix(sparse.triu(a, k=1))
    x = np.zeros_like(b, dtype=float)
    tolerance = ITERATIVE_TOLERANCE * max(1.0, float(np.max(np.abs(b))))
    residual = float('inf')
    for sweep in range(1, MAX_SWEEPS + 1):
        x = spsolve_triangular(lower, b - upper @ x, lower=True)
        residual = float(np.max(np.abs(a @ x - b)))
        if not np.isfinite(residual):
            break
        if residual <= tolerance:
            logger.debug(f"Gauss-Seidel converged after {sweep} sweeps, residual {residual:.3e}")
            return x
    raise SolverFailureError(residual)
