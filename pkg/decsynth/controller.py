"""
Controller parameter families and their assignments.

A controller decides the next configuration ``c'`` from what it observes.
Each observation context owns one parameter family: one member parameter per
possible target configuration, whose values must form a probability
distribution. Families may be shared by several contexts, tying the
decision made in all of them.
"""
from __future__ import annotations

import hashlib
import logging
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Sequence, Tuple

from .exceptions import MissingParameterError, SimplexViolationError
from .utils import PROBABILITY_TOLERANCE, probability_bounds_check

logger = logging.getLogger(__name__)

Configuration = Tuple[int, ...]
Context = Tuple[Tuple[int, ...], Tuple[int, ...]]


class ControllerKind(Enum):
    """Whether a controller observes the true class or the classifier's output."""
    PERFECT = 'perfect'
    DNN = 'dnn'


class ParameterFamily(NamedTuple):
    """
    A group of controller parameters whose values sum to one.

    :param name: The family name, as written in the model source
    :param members: The member parameter names, one per target configuration
    :param targets: The target configuration of each member
    :param observed: The observed class: the true class for perfect
        perception, the predicted class for DNN perception, None if unknown
    :param verdicts: The verification verdicts observed, DNN perception only
    :param contexts: The (z, c) pairs at which the family is used
    :param decision: For DNN families, the perfect-perception family used for
        each true class at the same contexts, used when folding
    """
    name: str
    members: Tuple[str, ...]
    targets: Tuple[Configuration, ...]
    observed: int | None = None
    verdicts: Tuple[bool, ...] | None = None
    contexts: Tuple[Context, ...] = ()
    decision: Tuple[str | None, ...] = ()

    def member_for(self, target: Configuration) -> str:
        """
        Find the member parameter that moves to a target configuration.

        :param target: The target configuration
        :raises KeyError: If the family has no member for the target
        :return: The member parameter name
        """
        try:
            return self.members[self.targets.index(target)]
        except ValueError:
            raise KeyError(f"Family {self.name!r} has no member for configuration {target}")


def render_configuration(values: Iterable[int]) -> str:
    """Render a configuration for use in a parameter name."""
    return '_'.join(str(int(v)) for v in values)


def render_verdicts(verdicts: Iterable[bool]) -> str:
    """Render a verdict vector as a string of 1s and 0s."""
    return ''.join('1' if v else '0' for v in verdicts)


def member_name(family: str, target: Configuration, tag: str = 'c') -> str:
    """
    Name the member of a family that moves to a target configuration.

    :param family: The family name
    :param target: The target configuration
    :param tag: Written before the target
    :return: The member parameter name, ``<family>_<tag><target>``
    """
    return f"{family}_{tag}{render_configuration(target)}"


def make_family(
    name: str,
    targets: Iterable[Configuration],
    observed: int | None = None,
    verdicts: Tuple[bool, ...] | None = None,
    contexts: Iterable[Context] = (),
    decision: Tuple[str | None, ...] = (),
    tag: str = 'c',
) -> ParameterFamily:
    """
    Create a family with one member per target, ordered by target.

    :param name: The family name
    :param targets: The reachable target configurations
    :param tag: Written between the family name and each target in member names
    :return: The new family
    """
    ordered = tuple(sorted(set(targets)))
    return ParameterFamily(
        name=name,
        members=tuple(member_name(name, target, tag) for target in ordered),
        targets=ordered,
        observed=observed,
        verdicts=verdicts,
        contexts=tuple(sorted(set(contexts))),
        decision=decision,
    )


class ControllerAssignment:
    """
    A valuation of controller parameters.

    The values of each family must lie in [0, 1] and sum to one. A family is
    either fully assigned or not assigned at all.

    :param values: Parameter name to value
    :param families: The families the values belong to
    :param kind: Whether the parameters belong to a perfect or DNN perception model
    :raises ValueError: If a value is outside [0, 1]
    :raises MissingParameterError: If a family is only partly assigned
    :raises SimplexViolationError: If a family's values do not sum to one
    """
    __slots__ = ('_values', '_families', '_kind')

    def __init__(
        self,
        values: Mapping[str, float],
        families: Iterable[ParameterFamily] = (),
        kind: ControllerKind = ControllerKind.PERFECT,
    ):
        checked = {
            name: probability_bounds_check(
                value, f"Parameter {name!r} must be a probability, got {value!r}")
            for name, value in values.items()
        }
        self._values = MappingProxyType(checked)
        self._families = tuple(families)
        self._kind = kind

        for family in self._families:
            present = [member in checked for member in family.members]
            if not any(present):
                continue
            if not all(present):
                raise MissingParameterError(
                    m for m, p in zip(family.members, present) if not p)
            total = sum(checked[member] for member in family.members)
            if abs(total - 1) > PROBABILITY_TOLERANCE:
                raise SimplexViolationError(family.name, total)

    @property
    def values(self) -> Mapping[str, float]:
        """The parameter values, read only."""
        return self._values

    @property
    def families(self) -> Tuple[ParameterFamily, ...]:
        """The families this assignment was checked against."""
        return self._families

    @property
    def kind(self) -> ControllerKind:
        """Whether this is a perfect or DNN perception controller."""
        return self._kind

    def __getitem__(self, name: str) -> float:
        return self._values[name]

    def __contains__(self, name: object) -> bool:
        return name in self._values

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ControllerAssignment):
            return NotImplemented
        return self._kind == other._kind and dict(self._values) == dict(other._values)

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        inner = ', '.join(f"{k}={v!r}" for k, v in sorted(self._values.items()))
        return f"ControllerAssignment({self._kind.value}: {inner})"

    def is_deterministic(self) -> bool:
        """Return True if every value is exactly 0 or 1."""
        return all(value in (0.0, 1.0) for value in self._values.values())

    def family_vector(self, family: ParameterFamily) -> Tuple[float, ...]:
        """
        Get the values of one family, in member order.

        :param family: The family to read
        :raises MissingParameterError: If the family is not assigned
        """
        missing = [m for m in family.members if m not in self._values]
        if missing:
            raise MissingParameterError(missing)
        return tuple(self._values[m] for m in family.members)

    def key(self) -> str:
        """
        A stable hash of the assignment, used to cache evaluations.

        :return: The hex SHA-256 of the sorted name=value pairs
        """
        text = ';'.join(f"{name}={value!r}" for name, value in sorted(self._values.items()))
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def from_vectors(
        cls,
        families: Sequence[ParameterFamily],
        vectors: Sequence[Sequence[float]],
        kind: ControllerKind = ControllerKind.PERFECT,
    ) -> ControllerAssignment:
        """
        Build an assignment from one distribution per family.

        :param families: The families, in the order of the vectors
        :param vectors: One value per family member
        :raises ValueError: If the number of vectors or values does not match
        """
        if len(families) != len(vectors):
            raise ValueError(f"Expected {len(families)} families, got {len(vectors)} vectors")
        values = {}
        for family, vector in zip(families, vectors):
            if len(vector) != len(family.members):
                raise ValueError(
                    f"Family {family.name!r} has {len(family.members)} members, "
                    f"got {len(vector)} values")
            values.update(zip(family.members, (float(x) for x in vector)))
        return cls(values, families, kind)

    @classmethod
    def from_scalars(
        cls,
        families: Sequence[ParameterFamily],
        scalars: Sequence[float],
        kind: ControllerKind = ControllerKind.PERFECT,
    ) -> ControllerAssignment:
        """
        Build an assignment for two-member families from one number each.

        The scalar is the probability of the family's last member, its
        complement goes to the first.

        :param families: Families with exactly two members
        :param scalars: One probability per family
        :raises ValueError: If a family does not have two members
        """
        vectors = []
        for family, scalar in zip(families, scalars):
            if len(family.members) != 2:
                raise ValueError(f"Family {family.name!r} is not binary")
            vectors.append((1.0 - float(scalar), float(scalar)))
        return cls.from_vectors(families, vectors, kind)
