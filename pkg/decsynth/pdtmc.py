"""
Explicit-state parametric discrete-time Markov chains.

States are numbered densely from 0. Each state carries its projection onto
the (z, k, t, c) tuple of a turn-structured model, extended by (k̂, v) once
the model has been augmented with classifier perception. Transition weights
are a constant, optionally multiplied by one controller parameter.
"""
from __future__ import annotations

import json
import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import (
    Any, Dict, FrozenSet, Iterable, Iterator, List, Mapping, NamedTuple,
    Sequence, Tuple,
)

from .controller import ControllerAssignment, ParameterFamily
from .exceptions import (
    MissingParameterError, ModelSyntaxError, ParametricMergeError,
    SimplexViolationError, StateExplosionError, UnknownRewardStructureError,
)
from .utils import PROBABILITY_TOLERANCE, format_real, probability_bounds_check

logger = logging.getLogger(__name__)

# The largest state space built or augmented unless told otherwise
STATE_LIMIT = 10**7


class StateTuple(NamedTuple):
    """
    The projection of a state onto the roles of a turn-structured model.

    :param z: Values of the managed system variables
    :param k: The true environment class, 1-based
    :param t: The turn flag, 1 to 3
    :param c: Values of the controller variables
    :param khat: The predicted class, augmented states only
    :param v: The verification verdicts, augmented states only
    """
    z: Tuple[int, ...]
    k: int
    t: int
    c: Tuple[int, ...]
    khat: int | None = None
    v: Tuple[bool, ...] | None = None

    @property
    def augmented(self) -> bool:
        """True if the state carries a perception (k̂, v)."""
        return self.khat is not None


class StateLayout(NamedTuple):
    """
    How the variables of a built model map onto the state tuple.

    :param z_names: The variables making up z
    :param k_name: The environment class variable, if any
    :param classes: The number of environment classes K
    :param t_name: The turn variable, if any
    :param c_names: The controller variables making up c
    """
    z_names: Tuple[str, ...] = ()
    k_name: str | None = None
    classes: int = 1
    t_name: str | None = None
    c_names: Tuple[str, ...] = ()

    @property
    def turn_structured(self) -> bool:
        """True if the model has both an environment and a turn variable."""
        return self.k_name is not None and self.t_name is not None


class TransitionEntry(NamedTuple):
    """
    One outgoing edge: the weight is ``constant`` times ``parameter`` if one is named.

    :param target: The target state index
    :param constant: The constant factor of the weight
    :param parameter: The controller parameter scaling the weight, if any
    """
    target: int
    constant: float = 1.0
    parameter: str | None = None


@dataclass(frozen=True)
class RewardStructure:
    """
    Non-negative rewards on states and on transitions.

    :param name: The reward structure name
    :param state_rewards: State index to reward
    :param transition_rewards: (source, target) to reward
    :raises ValueError: If a reward is negative or not finite
    """
    name: str
    state_rewards: Mapping[int, float] = field(default_factory=dict)
    transition_rewards: Mapping[Tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for where, rewards in (('state', self.state_rewards), ('transition', self.transition_rewards)):
            for key, value in rewards.items():
                if not math.isfinite(value) or value < 0:
                    raise ValueError(
                        f"Reward structure {self.name!r} has invalid {where} reward {value!r} at {key}")
        object.__setattr__(self, 'state_rewards', MappingProxyType(dict(self.state_rewards)))
        object.__setattr__(self, 'transition_rewards', MappingProxyType(dict(self.transition_rewards)))


class Violation(NamedTuple):
    """
    One problem found by a diagnostic check.

    :param kind: The kind of problem, e.g. ``row-sum`` or ``turn-frame``
    :param state: The state at which it was found
    :param detail: A human readable description
    :param deviation: For row-sum problems, how far the row is from 1
    :param other: For edge problems, the target state
    """
    kind: str
    state: int
    detail: str
    deviation: float = 0.0
    other: int | None = None

    def __str__(self) -> str:
        return f"{self.kind} at state {self.state}: {self.detail}"


class ValidationReport:
    """The violations found by a diagnostic check; empty means valid."""
    __slots__ = ('_violations',)

    def __init__(self, violations: Iterable[Violation] = ()):
        self._violations = tuple(violations)

    @property
    def violations(self) -> Tuple[Violation, ...]:
        return self._violations

    @property
    def ok(self) -> bool:
        return not self._violations

    def __len__(self) -> int:
        return len(self._violations)

    def __iter__(self) -> Iterator[Violation]:
        return iter(self._violations)

    def __bool__(self) -> bool:
        return bool(self._violations)

    def of_kind(self, kind: str) -> Tuple[Violation, ...]:
        """Return the violations of one kind."""
        return tuple(v for v in self._violations if v.kind == kind)

    def __repr__(self) -> str:
        return f"ValidationReport({len(self._violations)} violations)"


def _merge_row(source: int, entries: Iterable[TransitionEntry]) -> Tuple[TransitionEntry, ...]:
    merged: Dict[int, TransitionEntry] = {}
    for entry in entries:
        previous = merged.get(entry.target)
        if previous is None:
            merged[entry.target] = TransitionEntry(
                int(entry.target), float(entry.constant), entry.parameter)
        elif previous.parameter != entry.parameter:
            raise ParametricMergeError(source, entry.target)
        else:
            merged[entry.target] = previous._replace(constant=previous.constant + entry.constant)
    return tuple(merged[target] for target in sorted(merged))


class ExplicitPDTMC:
    """
    An explicit-state parametric DTMC, immutable once constructed.

    Duplicate (source, target) entries are merged by summing constants.

    :param states: The state tuple of every state, indexed by state id
    :param initial: The initial state id
    :param transitions: The outgoing entries of every state
    :param labels: Atomic proposition to the states it holds in
    :param rewards: The reward structures
    :param families: The controller parameter families
    :param layout: How model variables map onto the state tuple
    :raises ParametricMergeError: If one edge has different symbolic weights
    :raises ValueError: If the row count or initial state is inconsistent
    """
    __slots__ = (
        '_states', '_initial', '_transitions', '_labels', '_rewards',
        '_families', '_layout', '_index',
    )

    def __init__(
        self,
        states: Sequence[StateTuple],
        initial: int,
        transitions: Sequence[Iterable[TransitionEntry]],
        labels: Mapping[str, Iterable[int]] | None = None,
        rewards: Iterable[RewardStructure] = (),
        families: Iterable[ParameterFamily] = (),
        layout: StateLayout | None = None,
    ):
        self._states = tuple(states)
        if len(transitions) != len(self._states):
            raise ValueError(
                f"Got {len(transitions)} transition rows for {len(self._states)} states")
        if not 0 <= initial < len(self._states):
            raise ValueError(f"Initial state {initial} is not a state of the model")
        self._initial = int(initial)
        self._transitions = tuple(
            _merge_row(source, row) for source, row in enumerate(transitions))
        self._labels = MappingProxyType({
            name: frozenset(int(s) for s in ids) for name, ids in (labels or {}).items()})
        self._rewards = tuple(rewards)
        self._families = tuple(families)
        self._layout = layout if layout is not None else StateLayout()
        self._index = {state: idx for idx, state in enumerate(self._states)}

    @property
    def states(self) -> Tuple[StateTuple, ...]:
        return self._states

    @property
    def initial(self) -> int:
        return self._initial

    @property
    def transitions(self) -> Tuple[Tuple[TransitionEntry, ...], ...]:
        return self._transitions

    @property
    def labels(self) -> Mapping[str, FrozenSet[int]]:
        return self._labels

    @property
    def rewards(self) -> Tuple[RewardStructure, ...]:
        return self._rewards

    @property
    def families(self) -> Tuple[ParameterFamily, ...]:
        return self._families

    @property
    def layout(self) -> StateLayout:
        return self._layout

    @property
    def parameters(self) -> FrozenSet[str]:
        """Every parameter named by a family or a transition."""
        names = {member for family in self._families for member in family.members}
        names.update(
            entry.parameter for row in self._transitions for entry in row
            if entry.parameter is not None)
        return frozenset(names)

    @property
    def is_parametric(self) -> bool:
        return any(entry.parameter is not None for row in self._transitions for entry in row)

    @property
    def n_transitions(self) -> int:
        return sum(len(row) for row in self._transitions)

    def __len__(self) -> int:
        return len(self._states)

    def __repr__(self) -> str:
        return (
            f"ExplicitPDTMC({len(self._states)} states, {self.n_transitions} transitions, "
            f"{len(self.parameters)} parameters)")

    def index_of(self, state: StateTuple) -> int:
        """
        Find the id of a state by its tuple.

        :raises KeyError: If no state has that tuple
        """
        return self._index[state]

    def reward(self, name: str) -> RewardStructure:
        """
        Get a reward structure by name.

        :raises UnknownRewardStructureError: If the model has no such structure
        """
        for structure in self._rewards:
            if structure.name == name:
                return structure
        raise UnknownRewardStructureError(name)

    def family(self, name: str) -> ParameterFamily:
        """
        Get a parameter family by name.

        :raises KeyError: If the model has no such family
        """
        for family in self._families:
            if family.name == name:
                return family
        raise KeyError(f"Model has no parameter family {name!r}")

    def family_of(self) -> Dict[str, ParameterFamily]:
        """Map every member parameter to its family."""
        return {member: family for family in self._families for member in family.members}

    def replace(self, **changes: Any) -> ExplicitPDTMC:
        """Return a copy of the model with some fields replaced."""
        fields = {
            'states': self._states,
            'initial': self._initial,
            'transitions': self._transitions,
            'labels': self._labels,
            'rewards': self._rewards,
            'families': self._families,
            'layout': self._layout,
        }
        fields.update(changes)
        return ExplicitPDTMC(**fields)


def validate(model: ExplicitPDTMC) -> ValidationReport:
    """
    Check that a model is a (parametric) Markov chain.

    Constant rows must sum to 1. Rows with parameters must draw every
    parameter from one family, and sum to 1 at every vertex of the family's
    simplex. Negative weights and dangling targets are reported too.

    :param model: The model to check
    :return: Every problem found; the report is empty for a valid model
    """
    violations: List[Violation] = []
    n_states = len(model)
    family_of = model.family_of()

    for source, row in enumerate(model.transitions):
        constant_total = 0.0
        coefficients: Dict[str, float] = defaultdict(float)
        families = set()
        row_ok = True
        for entry in row:
            if not 0 <= entry.target < n_states:
                violations.append(Violation(
                    'dangling-target', source, f"edge to missing state {entry.target}",
                    other=entry.target))
                row_ok = False
            if not math.isfinite(entry.constant) or entry.constant < 0:
                violations.append(Violation(
                    'negative-weight', source, f"weight {entry.constant!r} to state {entry.target}",
                    other=entry.target))
                row_ok = False
            if entry.parameter is None:
                constant_total += entry.constant
                continue
            family = family_of.get(entry.parameter)
            if family is None:
                violations.append(Violation(
                    'unknown-parameter', source, f"parameter {entry.parameter!r} has no family",
                    other=entry.target))
                row_ok = False
                continue
            families.add(family.name)
            coefficients[entry.parameter] += entry.constant

        if not row_ok:
            continue
        if not families:
            deviation = abs(constant_total - 1)
            if deviation > PROBABILITY_TOLERANCE:
                violations.append(Violation(
                    'row-sum', source, f"outgoing weights sum to {constant_total!r}",
                    deviation=deviation))
            continue
        if len(families) > 1:
            violations.append(Violation(
                'family-structure', source,
                f"row mixes parameter families {', '.join(sorted(families))}"))
            continue
        # the row sums to 1 for every point of the simplex iff it does at every vertex
        family = model.family(families.pop())
        worst = max(abs(coefficients[member] + constant_total - 1) for member in family.members)
        if worst > PROBABILITY_TOLERANCE:
            violations.append(Violation(
                'family-structure', source,
                f"row is not stochastic for every value of family {family.name!r}",
                deviation=worst))

    if violations:
        logger.debug(f"Validation found {len(violations)} violations")
    return ValidationReport(violations)


def _assignment_values(assignment: ControllerAssignment | Mapping[str, float]) -> Mapping[str, float]:
    if isinstance(assignment, ControllerAssignment):
        return assignment.values
    return assignment


def instantiate(
    model: ExplicitPDTMC,
    assignment: ControllerAssignment | Mapping[str, float],
) -> ExplicitPDTMC:
    """
    Replace every parameter by its value.

    States, labels and rewards are unchanged. Values for parameters the model
    does not use are ignored.

    :param model: The parametric model
    :param assignment: A value for every parameter of the model
    :raises MissingParameterError: If a parameter of the model has no value
    :raises SimplexViolationError: If a family's values do not sum to 1
    :raises ValueError: If a value is outside [0, 1]
    :return: A model with constant weights only
    """
    values = _assignment_values(assignment)
    used = {entry.parameter for row in model.transitions for entry in row if entry.parameter}
    missing = sorted(used - set(values))
    if missing:
        raise MissingParameterError(missing)

    for name in used:
        probability_bounds_check(values[name], f"Parameter {name!r} must be a probability")
    for family in model.families:
        if not any(member in used for member in family.members):
            continue
        total = sum(values.get(member, 0.0) for member in family.members)
        if abs(total - 1) > PROBABILITY_TOLERANCE:
            raise SimplexViolationError(family.name, total)

    rows = [
        tuple(
            TransitionEntry(
                entry.target,
                entry.constant if entry.parameter is None
                else entry.constant * float(values[entry.parameter]),
            )
            for entry in row
        )
        for row in model.transitions
    ]
    return model.replace(transitions=rows, families=())


def reachable(model: ExplicitPDTMC) -> FrozenSet[int]:
    """
    Find the states reachable from the initial state.

    An edge counts if its constant is non-zero or it names a parameter.

    :param model: The model to explore
    :return: The reachable state ids
    """
    seen = {model.initial}
    queue = deque([model.initial])
    while queue:
        source = queue.popleft()
        for entry in model.transitions[source]:
            if entry.constant == 0 and entry.parameter is None:
                continue
            if entry.target not in seen:
                seen.add(entry.target)
                queue.append(entry.target)
    return frozenset(seen)


def prune(model: ExplicitPDTMC) -> ExplicitPDTMC:
    """
    Drop unreachable states, keeping the relative order of the rest.

    :param model: The model to prune
    :return: The model restricted to its reachable states
    """
    keep = sorted(reachable(model))
    if len(keep) == len(model):
        return model
    logger.info(f"Dropping {len(model) - len(keep)} unreachable states")
    renumber = {old: new for new, old in enumerate(keep)}
    rows = [
        tuple(e._replace(target=renumber[e.target]) for e in model.transitions[old]
              if e.target in renumber)
        for old in keep
    ]
    labels = {
        name: [renumber[s] for s in ids if s in renumber] for name, ids in model.labels.items()}
    rewards = [
        RewardStructure(
            r.name,
            {renumber[s]: v for s, v in r.state_rewards.items() if s in renumber},
            {(renumber[s], renumber[d]): v for (s, d), v in r.transition_rewards.items()
             if s in renumber and d in renumber},
        )
        for r in model.rewards
    ]
    return model.replace(
        states=[model.states[old] for old in keep],
        initial=renumber[model.initial],
        transitions=rows,
        labels=labels,
        rewards=rewards,
    )


def check_state_limit(count: int, limit: int) -> None:
    """
    Fail once a state space grows past its limit.

    :raises StateExplosionError: If count exceeds limit
    """
    if count > limit:
        raise StateExplosionError(limit)


# Explicit text format

def _ints(values: Iterable[int]) -> str:
    rendered = ':'.join(str(int(v)) for v in values)
    return rendered or '-'


def _names(values: Iterable[str]) -> str:
    rendered = ':'.join(values)
    return rendered or '-'


def _bits(values: Iterable[bool]) -> str:
    rendered = ''.join('1' if v else '0' for v in values)
    return rendered or '-'


def _parse_ints(text: str) -> Tuple[int, ...]:
    return () if text == '-' else tuple(int(v) for v in text.split(':'))


def _parse_names(text: str) -> Tuple[str, ...]:
    return () if text == '-' else tuple(text.split(':'))


def _parse_bits(text: str) -> Tuple[bool, ...]:
    if text == '-':
        return ()
    if set(text) - {'0', '1'}:
        raise ValueError(f"invalid verdict bits {text!r}")
    return tuple(ch == '1' for ch in text)


def dumps(model: ExplicitPDTMC, manifest: Mapping[str, Any] | None = None) -> str:
    """
    Render a model in the explicit text format.

    Numbers are written so that reading them back gives identical floats.

    :param model: The model to render
    :param manifest: Run information written as a leading comment line
    :return: The model text
    """
    lines = []
    if manifest is not None:
        lines.append(f"# manifest {json.dumps(manifest, sort_keys=True)}")
    layout = model.layout
    lines.append(f"pdtmc {len(model)} {model.n_transitions} {len(model.parameters)}")
    lines.append(
        f"layout z={_names(layout.z_names)} k={layout.k_name or '-'} K={layout.classes} "
        f"t={layout.t_name or '-'} c={_names(layout.c_names)}")
    for family in model.families:
        observed = '-' if family.observed is None else str(family.observed)
        if family.verdicts is None:
            verdicts = '-'
        else:
            # an empty verdict vector is written as '*', keeping '-' for none
            verdicts = _bits(family.verdicts) if family.verdicts else '*'
        decision = _names('~' if d is None else d for d in family.decision)
        contexts = ';'.join(f"{_ints(z)}/{_ints(c)}" for z, c in family.contexts) or '-'
        lines.append(
            f"family {family.name} observed={observed} v={verdicts} "
            f"decision={decision} contexts={contexts}")
        for member, target in zip(family.members, family.targets):
            lines.append(f"param {member} {family.name} {_ints(target)}")
    for idx, state in enumerate(model.states):
        line = f"state {idx} z={_ints(state.z)} k={state.k} t={state.t} c={_ints(state.c)}"
        if state.khat is not None:
            line += f" khat={state.khat} v={_bits(state.v or ())}"
        lines.append(line)
    lines.append(f"init {model.initial}")
    for source, row in enumerate(model.transitions):
        for entry in row:
            weight = format_real(entry.constant)
            if entry.parameter is not None:
                weight += f"*{entry.parameter}"
            lines.append(f"trans {source} {entry.target} {weight}")
    for name in sorted(model.labels):
        ids = ' '.join(str(s) for s in sorted(model.labels[name]))
        lines.append(f"label {name} {ids}".rstrip())
    for structure in model.rewards:
        lines.append(f"reward {structure.name}")
        for s in sorted(structure.state_rewards):
            lines.append(f"reward {structure.name} state {s} {format_real(structure.state_rewards[s])}")
        for (s, d) in sorted(structure.transition_rewards):
            value = format_real(structure.transition_rewards[(s, d)])
            lines.append(f"reward {structure.name} trans {s} {d} {value}")
    return '\n'.join(lines) + '\n'


def read_manifest(text: str) -> Dict[str, Any] | None:
    """
    Extract the manifest comment from an artifact, if it has one.

    :param text: The artifact text
    :return: The manifest, or None
    """
    for line in text.splitlines():
        if line.startswith('# manifest '):
            return json.loads(line[len('# manifest '):])
        if line and not line.startswith('#'):
            break
    return None


class _Reader:
    """Parse the explicit text format, one line at a time."""

    def __init__(self) -> None:
        self.header: Tuple[int, int, int] | None = None
        self.layout = StateLayout()
        self.families: Dict[str, Dict[str, Any]] = {}
        self.states: Dict[int, StateTuple] = {}
        self.initial: int | None = None
        self.rows: Dict[int, List[TransitionEntry]] = defaultdict(list)
        self.labels: Dict[str, List[int]] = {}
        self.state_rewards: Dict[str, Dict[int, float]] = {}
        self.trans_rewards: Dict[str, Dict[Tuple[int, int], float]] = {}

    @staticmethod
    def fields(parts: Sequence[str]) -> Dict[str, str]:
        result = {}
        for part in parts:
            key, sep, value = part.partition('=')
            if not sep:
                raise ValueError(f"expected key=value, got {part!r}")
            result[key] = value
        return result

    def line(self, parts: List[str]) -> None:
        keyword, args = parts[0], parts[1:]
        if keyword == 'pdtmc':
            n_states, n_trans, n_params = (int(a) for a in args)
            self.header = (n_states, n_trans, n_params)
        elif keyword == 'layout':
            f = self.fields(args)
            self.layout = StateLayout(
                z_names=_parse_names(f['z']),
                k_name=None if f['k'] == '-' else f['k'],
                classes=int(f['K']),
                t_name=None if f['t'] == '-' else f['t'],
                c_names=_parse_names(f['c']),
            )
        elif keyword == 'family':
            name, f = args[0], self.fields(args[1:])
            contexts = () if f['contexts'] == '-' else tuple(
                (_parse_ints(z), _parse_ints(c))
                for z, c in (ctx.split('/') for ctx in f['contexts'].split(';')))
            verdicts: Tuple[bool, ...] | None
            if f['v'] == '-':
                verdicts = None
            elif f['v'] == '*':
                verdicts = ()
            else:
                verdicts = _parse_bits(f['v'])
            self.families[name] = {
                'observed': None if f['observed'] == '-' else int(f['observed']),
                'verdicts': verdicts,
                'decision': tuple(None if d == '~' else d for d in _parse_names(f['decision'])),
                'contexts': contexts,
                'members': [],
                'targets': [],
            }
        elif keyword == 'param':
            member, family, target = args
            self.families[family]['members'].append(member)
            self.families[family]['targets'].append(_parse_ints(target))
        elif keyword == 'state':
            idx, f = int(args[0]), self.fields(args[1:])
            khat = int(f['khat']) if 'khat' in f else None
            verdicts = _parse_bits(f['v']) if 'v' in f else None
            self.states[idx] = StateTuple(
                _parse_ints(f['z']), int(f['k']), int(f['t']), _parse_ints(f['c']), khat, verdicts)
        elif keyword == 'init':
            self.initial = int(args[0])
        elif keyword == 'trans':
            source, target, weight = args
            constant, _, parameter = weight.partition('*')
            self.rows[int(source)].append(
                TransitionEntry(int(target), float(constant), parameter or None))
        elif keyword == 'label':
            self.labels[args[0]] = [int(a) for a in args[1:]]
        elif keyword == 'reward':
            name = args[0]
            self.state_rewards.setdefault(name, {})
            self.trans_rewards.setdefault(name, {})
            if len(args) == 1:
                return
            if args[1] == 'state':
                self.state_rewards[name][int(args[2])] = float(args[3])
            elif args[1] == 'trans':
                self.trans_rewards[name][(int(args[2]), int(args[3]))] = float(args[4])
            else:
                raise ValueError(f"unknown reward kind {args[1]!r}")
        else:
            raise ValueError(f"unknown keyword {keyword!r}")

    def model(self) -> ExplicitPDTMC:
        if self.header is None:
            raise ValueError("missing pdtmc header")
        if self.initial is None:
            raise ValueError("missing init line")
        n_states = self.header[0]
        if sorted(self.states) != list(range(n_states)):
            raise ValueError(f"expected states 0..{n_states - 1}")
        families = [
            ParameterFamily(
                name=name,
                members=tuple(f['members']),
                targets=tuple(f['targets']),
                observed=f['observed'],
                verdicts=f['verdicts'],
                contexts=f['contexts'],
                decision=f['decision'],
            )
            for name, f in self.families.items()
        ]
        rewards = [
            RewardStructure(name, self.state_rewards[name], self.trans_rewards[name])
            for name in self.state_rewards
        ]
        return ExplicitPDTMC(
            states=[self.states[i] for i in range(n_states)],
            initial=self.initial,
            transitions=[self.rows.get(i, []) for i in range(n_states)],
            labels=self.labels,
            rewards=rewards,
            families=families,
            layout=self.layout,
        )


def loads(text: str) -> ExplicitPDTMC:
    """
    Read a model from the explicit text format.

    :param text: The model text
    :raises ModelSyntaxError: If a line cannot be read, with its line number
    :return: The model
    """
    reader = _Reader()
    line_no = 0
    try:
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            reader.line(line.split())
        line_no = 0
        return reader.model()
    except ModelSyntaxError:
        raise
    except (ValueError, KeyError, IndexError) as e:
        raise ModelSyntaxError(f"Invalid explicit model: {e}", line_no, 1 if line_no else 0) from e


def save(model: ExplicitPDTMC, path: Path | str, manifest: Mapping[str, Any] | None = None) -> None:
    """Write a model to a file in the explicit text format."""
    Path(path).write_text(dumps(model, manifest))


def load(path: Path | str) -> ExplicitPDTMC:
    """Read a model from a file in the explicit text format."""
    return loads(Path(path).read_text())
