"""
Parsing and quantitative model checking of PCTL queries.

Supported queries::

    P <bound> [ X phi ]            P <bound> [ phi U phi ]
    P <bound> [ phi U<=k phi ]     P <bound> [ F phi ]      P <bound> [ F<=k phi ]
    R{"name"} <bound> [ C<=k ]     R{"name"} <bound> [ F phi ]

where ``<bound>`` is ``=?`` or a comparison ``>=``, ``>``, ``<=``, ``<`` with a
threshold, and state formulas combine ``true``, ``false``, quoted labels,
``!``, ``&``, ``|``, ``=>`` and nested ``P`` operators with a comparison bound.
The label ``"init"`` holds in the initial state unless the model defines it.
"""
from __future__ import annotations

import logging
import operator
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Union

import numpy as np
from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedInput, VisitError
from scipy import sparse

from .exceptions import (
    ModelSyntaxError, UnknownLabelError, UnknownOperatorError,
    UnknownRewardStructureError,
)
from .logging import TRACE, log_to_debug
from .pdtmc import ExplicitPDTMC
from .solver import (
    RewardVectors, SparseChain, chain_from_model, prob0, prob1, solve_linear,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrueFormula:
    def __str__(self) -> str:
        return 'true'


@dataclass(frozen=True)
class FalseFormula:
    def __str__(self) -> str:
        return 'false'


@dataclass(frozen=True)
class Atom:
    label: str

    def __str__(self) -> str:
        return f'"{self.label}"'


@dataclass(frozen=True)
class Not:
    operand: StateFormula

    def __str__(self) -> str:
        return f'!{_wrap(self.operand)}'


@dataclass(frozen=True)
class And:
    left: StateFormula
    right: StateFormula

    def __str__(self) -> str:
        return f'{_wrap(self.left)} & {_wrap(self.right)}'


@dataclass(frozen=True)
class Or:
    left: StateFormula
    right: StateFormula

    def __str__(self) -> str:
        return f'{_wrap(self.left)} | {_wrap(self.right)}'


@dataclass(frozen=True)
class Implies:
    left: StateFormula
    right: StateFormula

    def __str__(self) -> str:
        return f'{_wrap(self.left)} => {_wrap(self.right)}'


@dataclass(frozen=True)
class Bound:
    """
    A comparison against a threshold.

    :param op: One of ``>=``, ``>``, ``<=``, ``<``
    :param threshold: The value compared against
    """
    op: str
    threshold: float

    def __str__(self) -> str:
        return f'{self.op}{self.threshold!r}'

    def holds(self, value: float) -> bool:
        """Compare a value with the threshold, exactly."""
        return bool(_COMPARISONS[self.op](value, self.threshold))


@dataclass(frozen=True)
class Next:
    operand: StateFormula

    def __str__(self) -> str:
        return f'X {_wrap(self.operand)}'


@dataclass(frozen=True)
class Until:
    """``left U right``, bounded to ``steps`` steps if given."""
    left: StateFormula
    right: StateFormula
    steps: int | None = None

    def __str__(self) -> str:
        op = 'U' if self.steps is None else f'U<={self.steps}'
        return f'{_wrap(self.left)} {op} {_wrap(self.right)}'


@dataclass(frozen=True)
class Cumulative:
    steps: int

    def __str__(self) -> str:
        return f'C<={self.steps}'


@dataclass(frozen=True)
class Reach:
    target: StateFormula

    def __str__(self) -> str:
        return f'F {_wrap(self.target)}'


@dataclass(frozen=True)
class ProbabilityFormula:
    """A nested ``P`` operator used as a state formula."""
    bound: Bound
    path: PathFormula

    def __str__(self) -> str:
        return f'P{self.bound} [ {self.path} ]'


StateFormula = Union[TrueFormula, FalseFormula, Atom, Not, And, Or, Implies, ProbabilityFormula]
PathFormula = Union[Next, Until]
RewardFormula = Union[Cumulative, Reach]


class QueryKind(Enum):
    PROBABILITY = 'P'
    REWARD = 'R'


@dataclass(frozen=True)
class PctlQuery:
    """
    A parsed query.

    :param kind: Probability or reward query
    :param path: The path formula, or reward formula for reward queries
    :param bound: The comparison, or None for ``=?``
    :param reward_name: The reward structure of a reward query, None for the first
    """
    kind: QueryKind
    path: Union[PathFormula, RewardFormula]
    bound: Bound | None = None
    reward_name: str | None = None

    @property
    def quantitative(self) -> bool:
        return self.bound is None

    def __str__(self) -> str:
        bound = '=?' if self.bound is None else str(self.bound)
        name = '' if self.reward_name is None else f'{{"{self.reward_name}"}}'
        return f'{self.kind.value}{name}{bound} [ {self.path} ]'


def _wrap(formula: object) -> str:
    if isinstance(formula, (TrueFormula, FalseFormula, Atom, ProbabilityFormula)):
        return str(formula)
    return f'({formula})'


_COMPARISONS: Dict[str, Callable[[float, float], bool]] = {
    '>=': operator.ge,
    '>': operator.gt,
    '<=': operator.le,
    '<': operator.lt,
}

_GRAMMAR = r"""
?start: query

query: "P" bound "[" path "]"                  -> probability
     | "R" reward_name? bound "[" reward_path "]" -> reward

reward_name: "{" ESCAPED_STRING "}"

bound: CMP NUMBER                             -> comparison
     | "=?"                                   -> quantitative

path: "X" state                               -> next
    | state "U" state                         -> until
    | state "U" CMP INT state                 -> bounded_until
    | "F" state                               -> eventually
    | "F" CMP INT state                       -> bounded_eventually

reward_path: "C" CMP INT                      -> cumulative
           | "F" state                        -> reach

?state: disjunction
      | disjunction "=>" state                -> implies

?disjunction: conjunction
            | disjunction "|" conjunction     -> or_

?conjunction: negation
            | conjunction "&" negation        -> and_

?negation: "!" negation                       -> not_
         | primary

?primary: "true"                              -> true
        | "false"                             -> false
        | ESCAPED_STRING                      -> label
        | "(" state ")"
        | "P" bound "[" path "]"              -> nested

CMP: ">=" | "<=" | ">" | "<"

%import common.ESCAPED_STRING
%import common.NUMBER
%import common.INT
%import common.WS
%ignore WS
"""


def _unquote(token: Token) -> str:
    return str(token)[1:-1].replace('\\"', '"')


def _steps(cmp: Token, value: Token) -> int:
    if str(cmp) != '<=':
        raise ModelSyntaxError(
            f"Step bounds must use '<=', got {str(cmp)!r}", cmp.line or 0, cmp.column or 0)
    steps = int(value)
    if steps < 1:
        raise ModelSyntaxError(
            f"Step bound must be at least 1, got {steps}", value.line or 0, value.column or 0)
    return steps


class _QueryTransformer(Transformer):
    def probability(self, items: list) -> PctlQuery:
        bound, path = items
        if bound is not None and not 0 <= bound.threshold <= 1:
            raise ModelSyntaxError(f"Probability threshold {bound.threshold!r} is outside [0, 1]")
        return PctlQuery(QueryKind.PROBABILITY, path, bound)

    def reward(self, items: list) -> PctlQuery:
        if len(items) == 3:
            name, bound, path = items
        else:
            name = None
            bound, path = items
        if bound is not None and bound.threshold < 0:
            raise ModelSyntaxError(f"Reward threshold {bound.threshold!r} is negative")
        return PctlQuery(QueryKind.REWARD, path, bound, name)

    def reward_name(self, items: list) -> str:
        return _unquote(items[0])

    def comparison(self, items: list) -> Bound:
        cmp, value = items
        return Bound(str(cmp), float(value))

    def quantitative(self, items: list) -> None:
        return None

    def next(self, items: list) -> Next:
        return Next(items[0])

    def until(self, items: list) -> Until:
        return Until(items[0], items[1])

    def bounded_until(self, items: list) -> Until:
        left, cmp, value, right = items
        return Until(left, right, _steps(cmp, value))

    def eventually(self, items: list) -> Until:
        return Until(TrueFormula(), items[0])

    def bounded_eventually(self, items: list) -> Until:
        cmp, value, target = items
        return Until(TrueFormula(), target, _steps(cmp, value))

    def cumulative(self, items: list) -> Cumulative:
        cmp, value = items
        return Cumulative(_steps(cmp, value))

    def reach(self, items: list) -> Reach:
        return Reach(items[0])

    def implies(self, items: list) -> Implies:
        return Implies(items[0], items[1])

    def or_(self, items: list) -> Or:
        return Or(items[0], items[1])

    def and_(self, items: list) -> And:
        return And(items[0], items[1])

    def not_(self, items: list) -> Not:
        return Not(items[0])

    def true(self, items: list) -> TrueFormula:
        return TrueFormula()

    def false(self, items: list) -> FalseFormula:
        return FalseFormula()

    def label(self, items: list) -> Atom:
        return Atom(_unquote(items[0]))

    @v_args(meta=True)
    def nested(self, meta: object, items: list) -> ProbabilityFormula:
        bound, path = items
        if bound is None:
            raise ModelSyntaxError(
                "Nested P operators need a comparison bound, not '=?'",
                getattr(meta, 'line', 0), getattr(meta, 'column', 0))
        return ProbabilityFormula(bound, path)


_parser = Lark(_GRAMMAR, parser='lalr', propagate_positions=True)


def _offending_word(text: str, pos: int) -> str:
    start = pos
    while start > 0 and text[start - 1].isalnum():
        start -= 1
    end = pos
    while end < len(text) and (text[end].isalnum() or text[end] == '_'):
        end += 1
    return text[start:end]


@log_to_debug
def parse_query(text: str) -> PctlQuery:
    """
    Parse a PCTL query.

    :param text: The query, e.g. ``P>=0.75 [ !"collision" U "done" ]``
    :raises UnknownOperatorError: If the query uses an operator outside the fragment
    :raises ModelSyntaxError: If the query cannot be parsed
    :return: The parsed query
    """
    try:
        tree = _parser.parse(text)
    except UnexpectedInput as e:
        pos = getattr(e, 'pos_in_stream', -1)
        word = ''
        if isinstance(e, UnexpectedCharacters) and 0 <= pos < len(text):
            word = _offending_word(text, pos)
        line, column = getattr(e, 'line', 0) or 0, getattr(e, 'column', 0) or 0
        if word and word[0].isupper():
            raise UnknownOperatorError(word, line, column) from None
        raise ModelSyntaxError(f"Cannot parse query {text!r}", line, column) from None
    try:
        return _QueryTransformer().transform(tree)
    except VisitError as e:
        raise e.orig_exc from None


class _Checker:
    """Evaluates formulas over one chain."""

    def __init__(self, chain: SparseChain):
        self.chain = chain
        self.matrix = chain.matrix
        self.n = chain.n_states

    def states(self, formula: StateFormula) -> np.ndarray:
        if isinstance(formula, TrueFormula):
            return np.ones(self.n, dtype=bool)
        if isinstance(formula, FalseFormula):
            return np.zeros(self.n, dtype=bool)
        if isinstance(formula, Atom):
            if formula.label in self.chain.labels:
                return self.chain.labels[formula.label]
            if formula.label == 'init':
                mask = np.zeros(self.n, dtype=bool)
                mask[self.chain.initial] = True
                return mask
            raise UnknownLabelError(formula.label)
        if isinstance(formula, Not):
            return ~self.states(formula.operand)
        if isinstance(formula, And):
            return self.states(formula.left) & self.states(formula.right)
        if isinstance(formula, Or):
            return self.states(formula.left) | self.states(formula.right)
        if isinstance(formula, Implies):
            return ~self.states(formula.left) | self.states(formula.right)
        if isinstance(formula, ProbabilityFormula):
            values = self.probabilities(formula.path)
            return np.array([formula.bound.holds(float(v)) for v in values], dtype=bool)
        raise TypeError(f"Not a state formula: {formula!r}")

    def probabilities(self, path: PathFormula) -> np.ndarray:
        if isinstance(path, Next):
            values = self.matrix @ self.states(path.operand).astype(float)
        elif isinstance(path, Until) and path.steps is not None:
            values = self.bounded_until(path)
        elif isinstance(path, Until):
            values = self.until(path)
        else:
            raise TypeError(f"Not a path formula: {path!r}")
        return np.clip(values, 0.0, 1.0)

    def bounded_until(self, path: Until) -> np.ndarray:
        phi1, phi2 = self.states(path.left), self.states(path.right)
        active = phi1 & ~phi2
        values = phi2.astype(float)
        for _ in range(path.steps or 0):
            values = np.where(phi2, 1.0, np.where(active, self.matrix @ values, 0.0))
        return values

    def until(self, path: Until) -> np.ndarray:
        phi1, phi2 = self.states(path.left), self.states(path.right)
        no = prob0(self.matrix, phi1, phi2)
        yes = prob1(self.matrix, phi1, phi2, no)
        maybe = ~(no | yes)
        logger.log(TRACE, f"Until: {int(yes.sum())} yes, {int(no.sum())} no, {int(maybe.sum())} maybe")
        values = yes.astype(float)
        if maybe.any():
            idx = np.flatnonzero(maybe)
            sub = self.matrix[idx][:, idx]
            b = np.asarray(self.matrix[idx][:, np.flatnonzero(yes)].sum(axis=1)).ravel()
            values[idx] = solve_linear(sparse.identity(len(idx), format='csr') - sub, b)
        return values

    def rewards(self, query: PctlQuery) -> np.ndarray:
        vectors = self.reward_vectors(query.reward_name)
        per_step = vectors.state + np.asarray(
            self.matrix.multiply(vectors.transition).sum(axis=1)).ravel()
        path = query.path
        if isinstance(path, Cumulative):
            values = np.zeros(self.n)
            for _ in range(path.steps):
                values = per_step + self.matrix @ values
            return values
        if isinstance(path, Reach):
            target = self.states(path.target)
            everywhere = np.ones(self.n, dtype=bool)
            no = prob0(self.matrix, everywhere, target)
            certain = prob1(self.matrix, everywhere, target, no)
            values = np.full(self.n, np.inf)
            values[target] = 0.0
            maybe = certain & ~target
            if maybe.any():
                idx = np.flatnonzero(maybe)
                sub = self.matrix[idx][:, idx]
                values[idx] = solve_linear(
                    sparse.identity(len(idx), format='csr') - sub, per_step[idx])
            return values
        raise TypeError(f"Not a reward formula: {path!r}")

    def reward_vectors(self, name: str | None) -> RewardVectors:
        if name is None:
            if not self.chain.rewards:
                raise UnknownRewardStructureError('')
            return next(iter(self.chain.rewards.values()))
        try:
            return self.chain.rewards[name]
        except KeyError:
            raise UnknownRewardStructureError(name) from None

    def query(self, query: PctlQuery) -> np.ndarray:
        if query.kind is QueryKind.REWARD:
            return self.rewards(query)
        return self.probabilities(query.path)  # type: ignore[arg-type]


def _as_chain(model: ExplicitPDTMC | SparseChain) -> SparseChain:
    if isinstance(model, SparseChain):
        return model
    return chain_from_model(model)


def pmc_all(query: PctlQuery, model: ExplicitPDTMC | SparseChain) -> np.ndarray:
    """
    Evaluate a query in every state.

    :param query: The query; its bound is ignored
    :param model: An instantiated model
    :raises MissingParameterError: If the model still has parameters
    :raises UnknownLabelError: If a label is not defined
    :raises UnknownRewardStructureError: If the reward structure is not defined
    :raises SolverFailureError: If a linear system cannot be solved
    :return: The value of the query in each state
    """
    return _Checker(_as_chain(model)).query(query)


def pmc(query: PctlQuery, model: ExplicitPDTMC | SparseChain) -> float:
    """
    Evaluate a query in the initial state.

    Expected reachability rewards are infinite when the target is reached
    with probability below one.

    :param query: The query; its bound is ignored
    :param model: An instantiated model
    :return: The value of the query in the initial state
    """
    chain = _as_chain(model)
    return float(pmc_all(query, chain)[chain.initial])


def satisfies(query: PctlQuery, model: ExplicitPDTMC | SparseChain) -> bool:
    """
    Check a bounded query in the initial state.

    The comparison is exact, with no tolerance.

    :param query: A query with a comparison bound
    :param model: An instantiated model
    :raises ValueError: If the query has no bound
    """
    if query.bound is None:
        raise ValueError(f"Query {query} has no bound to check")
    return query.bound.holds(pmc(query, model))
