"""Exceptions used by the decsynth package."""
from __future__ import annotations

from typing import Any, Iterable


class DecsynthError(Exception):
    """Base class for every error the toolkit raises about its inputs."""
    pass


def _location(line: int, column: int) -> str:
    if line <= 0:
        return ""
    return f" at line {line}, column {column}"


class ModelSyntaxError(DecsynthError, ValueError):
    """
    Raised when model or query text cannot be parsed.

    :param message: A description of the problem
    :param line: The 1-based line of the problem, 0 if unknown
    :param column: The 1-based column of the problem, 0 if unknown
    """

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(message, line, column)
        self.message = message
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"{self.message}{_location(self.line, self.column)}"


class UnknownOperatorError(ModelSyntaxError):
    """Raised when a query uses an operator outside the supported PCTL fragment."""

    def __init__(self, operator: str, line: int = 0, column: int = 0):
        super().__init__(f"Unsupported operator {operator!r}", line, column)
        self.args = (operator, line, column)
        self.operator = operator


class DuplicateIdentifierError(DecsynthError, ValueError):
    """
    Raised when a name is declared twice in a model.

    :param name: The repeated identifier
    """

    def __init__(self, name: str, line: int = 0, column: int = 0):
        super().__init__(name, line, column)
        self.name = name
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"Identifier {self.name!r} declared more than once{_location(self.line, self.column)}"


class UnboundIdentifierError(DecsynthError, KeyError):
    """
    Raised when a name is used but never declared, or a constant has no value.

    :param name: The unresolved identifier
    """

    def __init__(self, name: str, line: int = 0, column: int = 0, reason: str = "is not declared"):
        super().__init__(name, line, column, reason)
        self.name = name
        self.line = line
        self.column = column
        self.reason = reason

    def __str__(self) -> str:
        return f"Identifier {self.name!r} {self.reason}{_location(self.line, self.column)}"


class VariableRangeError(DecsynthError, ValueError):
    """
    Raised when a variable's bounds are unusable or a value leaves them.

    :param name: The variable concerned
    :param detail: What went wrong
    """

    def __init__(self, name: str, detail: str, line: int = 0, column: int = 0):
        super().__init__(name, detail, line, column)
        self.name = name
        self.detail = detail
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"Variable {self.name!r}: {self.detail}{_location(self.line, self.column)}"


class ParameterProductError(DecsynthError, ValueError):
    """Raised when synchronisation would multiply two controller parameters together."""

    def __init__(self, first: str, second: str, action: str | None):
        super().__init__(first, second, action)
        self.first = first
        self.second = second
        self.action = action

    def __str__(self) -> str:
        return (
            f"Action {self.action!r} multiplies parameters {self.first!r} and {self.second!r};"
            " only constant x parameter entries are supported"
        )


class ParametricMergeError(DecsynthError, ValueError):
    """Raised when two different symbolic weights would land on the same edge."""

    def __init__(self, source: Any, target: Any):
        super().__init__(source, target)
        self.source = source
        self.target = target

    def __str__(self) -> str:
        return f"Cannot merge different parametric weights on edge {self.source} -> {self.target}"


class RewardConflictError(DecsynthError, ValueError):
    """Raised when one merged edge is given two different transition rewards."""

    def __init__(self, reward: str, source: Any, target: Any):
        super().__init__(reward, source, target)
        self.reward = reward
        self.source = source
        self.target = target

    def __str__(self) -> str:
        return (
            f"Reward structure {self.reward!r} assigns conflicting transition rewards"
            f" to edge {self.source} -> {self.target}"
        )


class CompositionDeadlockError(DecsynthError, RuntimeError):
    """
    Raised when a reachable state has no enabled command.

    :param state: A description of the deadlocked state
    """

    def __init__(self, state: str):
        super().__init__(state)
        self.state = state

    def __str__(self) -> str:
        return f"No command is enabled in reachable state {self.state}"


class RowSumError(DecsynthError, ValueError):
    """
    Raised when a built model is not a valid (parametric) Markov chain.

    :param violations: The problems found by validation
    """

    def __init__(self, violations: Iterable[Any]):
        items = tuple(violations)
        super().__init__(items)
        self.violations = items

    def __str__(self) -> str:
        shown = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        suffix = f" (and {more} more)" if more > 0 else ""
        return f"Model is not stochastic: {shown}{suffix}"


class StateExplosionError(DecsynthError, RuntimeError):
    """Raised when exploration exceeds the configured state limit."""

    def __init__(self, limit: int):
        super().__init__(limit)
        self.limit = limit

    def __str__(self) -> str:
        return f"State space exceeds the limit of {self.limit} states"


class MissingParameterError(DecsynthError, KeyError):
    """
    Raised when an assignment lacks a value for a model parameter.

    :param names: The parameters without a value
    """

    def __init__(self, names: Iterable[str]):
        items = tuple(names)
        super().__init__(items)
        self.names = items

    def __str__(self) -> str:
        return f"No value for parameter(s) {', '.join(self.names)}"


class SimplexViolationError(DecsynthError, ValueError):
    """Raised when the values of a parameter family do not form a distribution."""

    def __init__(self, family: str, total: float):
        super().__init__(family, total)
        self.family = family
        self.total = total

    def __str__(self) -> str:
        return f"Parameter family {self.family!r} sums to {self.total!r}, expected 1"


class UnknownLabelError(DecsynthError, KeyError):
    """Raised when a query refers to a label the model does not define."""

    def __init__(self, label: str):
        super().__init__(label)
        self.label = label

    def __str__(self) -> str:
        return f"Label {self.label!r} is not defined by the model"


class UnknownRewardStructureError(DecsynthError, KeyError):
    """Raised when a query refers to a reward structure the model does not define."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"Reward structure {self.name!r} is not defined by the model"


class SolverFailureError(DecsynthError, ArithmeticError):
    """Raised when a linear system cannot be solved to tolerance."""

    def __init__(self, residual: float):
        super().__init__(residual)
        self.residual = residual

    def __str__(self) -> str:
        return f"Linear solver failed, residual {self.residual!r}"


class EmptyClassError(DecsynthError, ValueError):
    """Raised when a class has no samples, leaving its probabilities undefined."""

    def __init__(self, label: int):
        super().__init__(label)
        self.label = label

    def __str__(self) -> str:
        return f"Class {self.label} has no samples in the dataset"


class ArityMismatchError(DecsynthError, ValueError):
    """Raised when a count of classes or verdicts does not match what was declared."""

    def __init__(self, expected: int, found: int, what: str = "verdicts"):
        super().__init__(expected, found, what)
        self.expected = expected
        self.found = found
        self.what = what

    def __str__(self) -> str:
        return f"Expected {self.expected} {self.what}, found {self.found}"


class MissingRolesError(DecsynthError, ValueError):
    """Raised when a model lacks the module roles augmentation depends on."""

    def __init__(self, roles: Iterable[str]):
        items = tuple(roles)
        super().__init__(items)
        self.roles = items

    def __str__(self) -> str:
        return f"Model has no module with role(s) {', '.join(self.roles)}"


class UnsupportedModelError(DecsynthError, ValueError):
    """Raised when a model's shape is outside what augmentation supports."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def __str__(self) -> str:
        return f"Model cannot be augmented: {self.detail}"


class InfeasibleAllError(DecsynthError, RuntimeError):
    """Raised when no evaluated candidate satisfies the constraints."""

    def __init__(self, n_candidates: int):
        super().__init__(n_candidates)
        self.n_candidates = n_candidates

    def __str__(self) -> str:
        return f"None of the {self.n_candidates} evaluated candidates satisfies the constraints"


class BudgetExceededError(DecsynthError, RuntimeError):
    """Raised when a search would evaluate more candidates than allowed."""

    def __init__(self, n_candidates: int, cap: int):
        super().__init__(n_candidates, cap)
        self.n_candidates = n_candidates
        self.cap = cap

    def __str__(self) -> str:
        return f"Search needs {self.n_candidates} candidates, above the cap of {self.cap}"


class EmptyFrontError(DecsynthError, ValueError):
    """Raised when a front quality indicator is given an empty front."""

    def __str__(self) -> str:
        return "Front quality indicators need non-empty fronts"


class NonMinimizedOrientationError(DecsynthError, ValueError):
    """Raised when fronts cannot be put in a common non-negative minimisation orientation."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def __str__(self) -> str:
        return f"Objectives are not in minimisation orientation: {self.detail}"


class SimulationTimeoutError(DecsynthError, RuntimeError):
    """Raised when a simulated journey does not reach the goal in time."""

    def __init__(self, sim_time: float):
        super().__init__(sim_time)
        self.sim_time = sim_time

    def __str__(self) -> str:
        return f"Journey did not reach the goal within {self.sim_time} s"


class SamplingStallError(DecsynthError, RuntimeError):
    """Raised when rejection sampling cannot fill a class."""

    def __init__(self, label: int, attempts: int):
        super().__init__(label, attempts)
        self.label = label
        self.attempts = attempts

    def __str__(self) -> str:
        return f"Class {self.label} was not filled after {self.attempts} attempts"


class InputDriftError(DecsynthError, RuntimeError):
    """Raised when an artifact would be overwritten with results from different inputs."""

    def __init__(self, path: str):
        super().__init__(path)
        self.path = path

    def __str__(self) -> str:
        return (
            f"{self.path} was produced from different inputs; "
            "use --force to overwrite it"
        )


class InputFileError(DecsynthError, ValueError):
    """
    Raised when an input file cannot be used, naming the file.

    :param path: The file that was being read
    :param error: The error raised while reading or using it
    """

    def __init__(self, path: str, error: Exception):
        super().__init__(path, error)
        self.path = path
        self.error = error

    def __str__(self) -> str:
        # plain KeyErrors render their message quoted
        if type(self.error) is KeyError and self.error.args:
            return f"{self.path}: {self.error.args[0]}"
        return f"{self.path}: {self.error}"


class ConfigKeyError(DecsynthError, KeyError):
    """
    Raised when a configuration file names an unknown profile field.

    :param key: The key that was not recognised
    """

    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"Key {self.key!r} not recognised in configuration"
