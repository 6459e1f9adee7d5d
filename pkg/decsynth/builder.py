"""
Build the explicit state space of a parsed model.

Modules are composed in parallel: commands with the same action label move
together in every module whose alphabet contains the label, multiplying
their branch probabilities, while unlabelled commands move alone. When
several moves are enabled in a state they are chosen uniformly.

Controller commands name a parameter family as the probability of each
branch. The builder resolves every such branch to the family member for
the branch's target configuration.
"""
from __future__ import annotations

import itertools
import logging
import math
import operator
from collections import defaultdict, deque
from types import MappingProxyType
from typing import (
    Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple,
    Sequence, Set, Tuple,
)

from .controller import ParameterFamily, make_family, member_name
from .exceptions import (
    CompositionDeadlockError, ModelSyntaxError, ParameterProductError,
    RewardConflictError, RowSumError, UnboundIdentifierError,
    VariableRangeError,
)
from .language import (
    BinaryOp, Conditional, Expression, FunctionCall, Identifier, Literal,
    ModelAst, ModuleAst, Role, UnaryOp,
)
from .logging import TRACE, log_to_debug, timed
from .pdtmc import (
    STATE_LIMIT, ExplicitPDTMC, RewardStructure, StateLayout, StateTuple,
    TransitionEntry, ValidationReport, Violation, check_state_limit, validate,
)

logger = logging.getLogger(__name__)

Valuation = Tuple[int, ...]
Value = Any
Evaluator = Callable[[Valuation], Value]


class BuildOptions(NamedTuple):
    """
    Settings for building a model.

    :param constants: Values for declared constants, overriding the source
    :param parameters: Extra names to keep symbolic as parameter families
    :param state_limit: The most states the model may have
    """
    constants: Mapping[str, Value] = MappingProxyType({})
    parameters: FrozenSet[str] = frozenset()
    state_limit: int = STATE_LIMIT


_BINARY: Dict[str, Callable[[Value, Value], Value]] = {
    '+': operator.add,
    '-': operator.sub,
    '*': operator.mul,
    '/': operator.truediv,
    '=': operator.eq,
    '!=': operator.ne,
    '<': operator.lt,
    '<=': operator.le,
    '>': operator.gt,
    '>=': operator.ge,
}

_FUNCTIONS: Dict[str, Callable[..., Value]] = {
    'min': min,
    'max': max,
    'floor': lambda x: int(math.floor(x)),
    'ceil': lambda x: int(math.ceil(x)),
    'mod': lambda x, y: x % y,
    'pow': lambda x, y: x ** y,
}


class _Constant:
    """A compiled expression whose value is known before exploration."""
    __slots__ = ('value',)

    def __init__(self, value: Value):
        self.value = value

    def __call__(self, valuation: Valuation) -> Value:
        return self.value


class _Compiler:
    """Compile expressions to functions of the state valuation."""

    def __init__(
        self,
        variables: Mapping[str, int],
        constants: Mapping[str, Value],
        formulas: Mapping[str, Expression],
        parameters: FrozenSet[str],
    ):
        self.variables = variables
        self.constants = constants
        self.formulas = formulas
        self.parameters = parameters

    def parameter_of(self, expression: Expression) -> str | None:
        """Return the family named by a bare identifier, if it is one."""
        if isinstance(expression, Identifier) and expression.name in self.parameters:
            return expression.name
        return None

    def compile(self, expression: Expression) -> Evaluator:
        if isinstance(expression, Literal):
            return _Constant(expression.value)
        if isinstance(expression, Identifier):
            return self._identifier(expression)
        if isinstance(expression, UnaryOp):
            operand = self.compile(expression.operand)
            func: Callable[[Value], Value] = operator.not_ if expression.op == '!' else operator.neg
            return self._fold(lambda v: func(operand(v)), operand)
        if isinstance(expression, BinaryOp):
            return self._binary(expression)
        if isinstance(expression, Conditional):
            cond = self.compile(expression.condition)
            if_true = self.compile(expression.if_true)
            if_false = self.compile(expression.if_false)
            return self._fold(
                lambda v: if_true(v) if cond(v) else if_false(v), cond, if_true, if_false)
        if isinstance(expression, FunctionCall):
            args = [self.compile(a) for a in expression.args]
            function = _FUNCTIONS[expression.name]
            return self._fold(lambda v: function(*(a(v) for a in args)), *args)
        raise TypeError(f"Not an expression: {expression!r}")

    def _identifier(self, node: Identifier) -> Evaluator:
        name = node.name
        if name in self.variables:
            index = self.variables[name]
            return lambda v: v[index]
        if name in self.formulas:
            return self.compile(self.formulas[name])
        if name in self.parameters:
            raise ModelSyntaxError(
                f"Parameter {name!r} may only be used alone as a branch probability",
                node.pos.line, node.pos.column)
        if name in self.constants:
            return _Constant(self.constants[name])
        raise UnboundIdentifierError(name, node.pos.line, node.pos.column)

    def _binary(self, node: BinaryOp) -> Evaluator:
        left = self.compile(node.left)
        right = self.compile(node.right)
        if node.op == '&':
            return self._fold(lambda v: bool(left(v)) and bool(right(v)), left, right)
        if node.op == '|':
            return self._fold(lambda v: bool(left(v)) or bool(right(v)), left, right)
        if node.op == '=>':
            return self._fold(lambda v: (not left(v)) or bool(right(v)), left, right)
        func = _BINARY[node.op]
        return self._fold(lambda v: func(left(v), right(v)), left, right)

    @staticmethod
    def _fold(function: Evaluator, *parts: Evaluator) -> Evaluator:
        if all(isinstance(p, _Constant) for p in parts):
            return _Constant(function(()))
        return function


class _Variable(NamedTuple):
    name: str
    low: int
    high: int
    is_bool: bool
    module: str


class _Branch(NamedTuple):
    constant: float
    parameter: str | None
    assignments: Tuple[Tuple[int, Evaluator], ...]


class _CompiledCommand(NamedTuple):
    module: str
    action: str | None
    guard: Evaluator
    branches: Tuple[Tuple[Evaluator | None, str | None, Tuple[Tuple[int, Evaluator], ...]], ...]


class _Move(NamedTuple):
    action: str | None
    branches: List[_Branch]


def _resolve_constants(
    ast: ModelAst, opts: BuildOptions, parameters: FrozenSet[str],
) -> Dict[str, Value]:
    declared = {c.name for c in ast.constants}
    for name in opts.constants:
        if name not in declared:
            raise UnboundIdentifierError(name, reason="is not a declared constant")
    values: Dict[str, Value] = {}
    compiler = _Compiler({}, values, {f.name: f.expression for f in ast.formulas}, parameters)
    for constant in ast.constants:
        if constant.name in parameters:
            continue
        if constant.name in opts.constants:
            raw = opts.constants[constant.name]
        elif constant.value is not None:
            raw = compiler.compile(constant.value)(())
        else:
            raise UnboundIdentifierError(
                constant.name, constant.pos.line, constant.pos.column, reason="has no value")
        values[constant.name] = _coerce(constant.name, constant.type, raw)
    return values


def _coerce(name: str, type_: str, raw: Value) -> Value:
    if type_ == 'bool':
        if isinstance(raw, str):
            if raw.lower() not in ('true', 'false'):
                raise ValueError(f"Constant {name!r} must be true or false, got {raw!r}")
            return raw.lower() == 'true'
        return bool(raw)
    value = float(raw)
    if type_ == 'int':
        if not value.is_integer():
            raise ValueError(f"Constant {name!r} must be an integer, got {raw!r}")
        return int(value)
    return value


def _layout(ast: ModelAst, variables: Sequence[_Variable]) -> Tuple[StateLayout, Dict[str, List[int]]]:
    by_module: Dict[str, List[int]] = defaultdict(list)
    for idx, variable in enumerate(variables):
        by_module[variable.module].append(idx)

    environment = ast.modules_with_role(Role.ENVIRONMENT)
    turn = ast.modules_with_role(Role.TURN)
    k_name = t_name = None
    classes = 1
    if environment and by_module[environment[0].name]:
        k = variables[by_module[environment[0].name][0]]
        if k.is_bool or k.low != 1:
            raise VariableRangeError(k.name, "the environment class must range over 1..K")
        k_name, classes = k.name, k.high
    if turn and by_module[turn[0].name]:
        t = variables[by_module[turn[0].name][0]]
        if t.is_bool or (t.low, t.high) != (1, 3):
            raise VariableRangeError(t.name, "the turn variable must range over 1..3")
        t_name = t.name
    c_names = tuple(
        variables[i].name for m in ast.modules_with_role(Role.CONTROLLER) for i in by_module[m.name])
    taken = {k_name, t_name, *c_names}
    z_names = tuple(v.name for v in variables if v.name not in taken)
    return StateLayout(z_names, k_name, classes, t_name, c_names), by_module


def _describe(variables: Sequence[_Variable], valuation: Valuation) -> str:
    return '(' + ', '.join(
        f"{v.name}={'true' if v.is_bool and x else 'false' if v.is_bool else x}"
        for v, x in zip(variables, valuation)) + ')'


class _Explorer:
    """Breadth-first exploration of the composed model."""

    def __init__(self, ast: ModelAst, opts: BuildOptions):
        self.ast = ast
        self.opts = opts
        # a constant without a value stays symbolic unless it is given one
        self.parameters = (frozenset(ast.parameters) - set(opts.constants)) | opts.parameters
        for name in opts.parameters:
            if name not in {c.name for c in ast.constants} and name not in ast.controller_params:
                raise UnboundIdentifierError(name, reason="is not a declared constant or parameter")
        self.constants = _resolve_constants(ast, opts, self.parameters)
        formulas = {f.name: f.expression for f in ast.formulas}

        constant_compiler = _Compiler({}, self.constants, formulas, self.parameters)
        self.variables: List[_Variable] = []
        initial: List[int] = []
        for module in ast.modules:
            for decl in module.variables:
                if decl.is_bool:
                    low, high = 0, 1
                else:
                    assert decl.low is not None and decl.high is not None
                    low = self._bound(constant_compiler, decl.low, decl.name)
                    high = self._bound(constant_compiler, decl.high, decl.name)
                    if low > high:
                        raise VariableRangeError(
                            decl.name, f"empty range [{low}..{high}]", decl.pos.line, decl.pos.column)
                self.variables.append(_Variable(decl.name, low, high, decl.is_bool, module.name))
                if decl.initial is None:
                    initial.append(low)
                else:
                    value = constant_compiler.compile(decl.initial)(())
                    initial.append(self._check_value(len(self.variables) - 1, value))
        self.initial = tuple(initial)
        self.index = {v.name: i for i, v in enumerate(self.variables)}
        self.compiler = _Compiler(self.index, self.constants, formulas, self.parameters)
        self.layout, _ = _layout(ast, self.variables)
        self.z_index = tuple(self.index[n] for n in self.layout.z_names)
        self.k_index = None if self.layout.k_name is None else self.index[self.layout.k_name]
        self.t_index = None if self.layout.t_name is None else self.index[self.layout.t_name]
        self.c_index = tuple(self.index[n] for n in self.layout.c_names)

        self.unlabelled: List[_CompiledCommand] = []
        # action -> module -> commands
        self.labelled: Dict[str, Dict[str, List[_CompiledCommand]]] = defaultdict(
            lambda: defaultdict(list))
        self.alphabets: Dict[str, FrozenSet[str]] = {}
        for module in ast.modules:
            self.alphabets[module.name] = module.alphabet
            for command in self._compile_module(module):
                if command.action is None:
                    self.unlabelled.append(command)
                else:
                    self.labelled[command.action][command.module].append(command)
        self.actions = sorted(self.labelled)
        self.participants = {
            action: [m.name for m in ast.modules if action in self.alphabets[m.name]]
            for action in self.actions
        }
        self.has_commands = any(module.commands for module in ast.modules)
        self.dropped = 0
        self.mixed_states = 0

    @staticmethod
    def _bound(compiler: _Compiler, expression: Expression, name: str) -> int:
        value = compiler.compile(expression)(())
        if isinstance(value, bool) or not float(value).is_integer() or not math.isfinite(value):
            raise VariableRangeError(name, f"bound {value!r} is not a finite integer")
        return int(value)

    def _check_value(self, index: int, value: Value) -> int:
        variable = self.variables[index]
        if variable.is_bool:
            return 1 if value else 0
        if isinstance(value, float):
            if not value.is_integer():
                raise VariableRangeError(variable.name, f"assigned non-integer value {value!r}")
            value = int(value)
        if not variable.low <= value <= variable.high:
            raise VariableRangeError(
                variable.name, f"value {value} is outside [{variable.low}..{variable.high}]")
        return int(value)

    def _compile_module(self, module: ModuleAst) -> Iterable[_CompiledCommand]:
        for command in module.commands:
            branches = []
            for update in command.updates:
                probability: Evaluator | None = None
                family = None
                if update.probability is not None:
                    family = self.compiler.parameter_of(update.probability)
                    if family is None:
                        probability = self.compiler.compile(update.probability)
                    elif module.role is not Role.CONTROLLER:
                        pos = update.probability.pos
                        raise ModelSyntaxError(
                            f"Parameter {family!r} is used outside a controller module",
                            pos.line, pos.column)
                assignments = tuple(
                    (self.index[a.variable], self.compiler.compile(a.expression))
                    for a in update.assignments)
                branches.append((probability, family, assignments))
            yield _CompiledCommand(
                module.name, command.action, self.compiler.compile(command.guard), tuple(branches))

    def _branches(self, command: _CompiledCommand, valuation: Valuation) -> List[_Branch]:
        result = []
        for probability, family, assignments in command.branches:
            constant = 1.0 if probability is None else float(probability(valuation))
            result.append(_Branch(constant, family, assignments))
        return result

    def moves(self, valuation: Valuation) -> List[_Move]:
        moves = []
        for command in self.unlabelled:
            if command.guard(valuation):
                moves.append(_Move(None, self._branches(command, valuation)))
        for action in self.actions:
            enabled = []
            for module in self.participants[action]:
                commands = [c for c in self.labelled[action][module] if c.guard(valuation)]
                if not commands:
                    break
                enabled.append(commands)
            else:
                for combination in itertools.product(*enabled):
                    moves.append(_Move(action, self._synchronise(action, combination, valuation)))
        return moves

    def _synchronise(
        self, action: str, commands: Sequence[_CompiledCommand], valuation: Valuation,
    ) -> List[_Branch]:
        branches = [_Branch(1.0, None, ())]
        for command in commands:
            combined = []
            for left in branches:
                for right in self._branches(command, valuation):
                    if left.parameter is not None and right.parameter is not None:
                        raise ParameterProductError(left.parameter, right.parameter, action)
                    combined.append(_Branch(
                        left.constant * right.constant,
                        left.parameter or right.parameter,
                        left.assignments + right.assignments,
                    ))
            branches = combined
        return branches

    def successor(self, valuation: Valuation, branch: _Branch) -> Valuation:
        updated = list(valuation)
        for index, evaluator in branch.assignments:
            updated[index] = self._check_value(index, evaluator(valuation))
        return tuple(updated)

    def project(self, valuation: Valuation) -> StateTuple:
        return StateTuple(
            z=tuple(valuation[i] for i in self.z_index),
            k=1 if self.k_index is None else valuation[self.k_index],
            t=1 if self.t_index is None else valuation[self.t_index],
            c=tuple(valuation[i] for i in self.c_index),
        )

    def describe(self, valuation: Valuation) -> str:
        return _describe(self.variables, valuation)


class _FamilyUse:
    """What the builder learns about a family while exploring."""

    def __init__(self) -> None:
        self.targets: Set[Tuple[int, ...]] = set()
        self.contexts: Set[Tuple[Tuple[int, ...], Tuple[int, ...]]] = set()
        self.classes: Set[int] = set()


@log_to_debug
def build(ast: ModelAst, opts: BuildOptions = BuildOptions()) -> ExplicitPDTMC:
    """
    Build the reachable state space of a model.

    States are numbered in breadth-first order from the initial state, so the
    same inputs always give the same numbering.

    :param ast: The parsed model
    :param opts: Constant overrides, extra parameters and the state limit
    :raises UnboundIdentifierError: If a constant has no value or an override is undeclared
    :raises VariableRangeError: If a variable leaves its range
    :raises ParameterProductError: If synchronisation multiplies two parameters
    :raises CompositionDeadlockError: If a reachable state has no enabled command
    :raises RewardConflictError: If an edge gets two different transition rewards
    :raises StateExplosionError: If the state limit is exceeded
    :raises RowSumError: If the built model is not stochastic
    :return: The explicit model
    """
    with timed(logger, "Building the state space"):
        explorer = _Explorer(ast, opts)
        model = _explore(explorer, ast, opts)
    report = validate(model)
    if report:
        raise RowSumError(report.violations)
    logger.info(
        f"Built model with {len(model)} states, {model.n_transitions} transitions "
        f"and {len(model.families)} parameter families")
    return model


def _explore(explorer: _Explorer, ast: ModelAst, opts: BuildOptions) -> ExplicitPDTMC:
    numbering: Dict[Valuation, int] = {explorer.initial: 0}
    valuations: List[Valuation] = [explorer.initial]
    rows: List[List[TransitionEntry]] = []
    # reward name -> edge -> reward
    edge_rewards: Dict[str, Dict[Tuple[int, int], float]] = {b.name: {} for b in ast.rewards}
    families: Dict[str, _FamilyUse] = defaultdict(_FamilyUse)

    state_items = [
        (block.name, [(explorer.compiler.compile(i.guard), explorer.compiler.compile(i.value))
                      for i in block.items if not i.transition])
        for block in ast.rewards
    ]
    transition_items = [
        (block.name, [(i.action, explorer.compiler.compile(i.guard), explorer.compiler.compile(i.value))
                      for i in block.items if i.transition])
        for block in ast.rewards
    ]

    queue = deque([explorer.initial])
    while queue:
        valuation = queue.popleft()
        source = numbering[valuation]
        moves = explorer.moves(valuation)
        if not moves:
            if explorer.has_commands:
                raise CompositionDeadlockError(explorer.describe(valuation))
            # a model without any command is a single absorbing state
            moves = [_Move(None, [_Branch(1.0, None, ())])]
        if len(moves) > 1:
            explorer.mixed_states += 1
            logger.log(TRACE, f"{len(moves)} moves enabled in {explorer.describe(valuation)}")
        scale = 1.0 / len(moves)
        state = explorer.project(valuation)
        entries: List[TransitionEntry] = []
        # reward name -> target -> reward from one move, to detect conflicts
        move_rewards: Dict[str, Dict[int, float]] = {name: {} for name in edge_rewards}

        for move in moves:
            rewards_of_move = {
                name: sum(float(value(valuation)) for action, guard, value in items
                          if action == move.action and guard(valuation))
                for name, items in transition_items
            }
            for branch in move.branches:
                if branch.constant == 0:
                    explorer.dropped += 1
                    continue
                successor = explorer.successor(valuation, branch)
                if successor not in numbering:
                    numbering[successor] = len(valuations)
                    valuations.append(successor)
                    check_state_limit(len(valuations), opts.state_limit)
                    queue.append(successor)
                target = numbering[successor]
                parameter = None
                if branch.parameter is not None:
                    target_c = tuple(successor[i] for i in explorer.c_index)
                    parameter = member_name(branch.parameter, target_c)
                    use = families[branch.parameter]
                    use.targets.add(target_c)
                    use.contexts.add((state.z, state.c))
                    use.classes.add(state.k)
                entries.append(TransitionEntry(target, branch.constant * scale, parameter))
                for name, reward in rewards_of_move.items():
                    if not reward:
                        continue
                    previous = move_rewards[name].get(target)
                    if previous is not None and previous != reward:
                        raise RewardConflictError(
                            name, explorer.describe(valuation), explorer.describe(successor))
                    move_rewards[name][target] = reward
        for name, targets in move_rewards.items():
            for target, reward in targets.items():
                edge_rewards[name][(source, target)] = reward
        rows.append(entries)

    if explorer.dropped:
        logger.debug(f"Dropped {explorer.dropped} zero-probability branches")
    if explorer.mixed_states:
        logger.warning(
            f"{explorer.mixed_states} states enable more than one move; "
            "they are chosen uniformly at random")

    states = [explorer.project(v) for v in valuations]
    labels = {
        label.name: [idx for idx, v in enumerate(valuations) if compiled(v)]
        for label, compiled in ((lab, explorer.compiler.compile(lab.expression)) for lab in ast.labels)
    }
    rewards = []
    for name, items in state_items:
        state_rewards = {}
        for idx, v in enumerate(valuations):
            total = sum(float(value(v)) for guard, value in items if guard(v))
            if total:
                state_rewards[idx] = total
        rewards.append(RewardStructure(name, state_rewards, edge_rewards[name]))

    return ExplicitPDTMC(
        states=states,
        initial=0,
        transitions=rows,
        labels=labels,
        rewards=rewards,
        families=_families(families),
        layout=explorer.layout,
    )


def _families(uses: Mapping[str, _FamilyUse]) -> List[ParameterFamily]:
    families = []
    for name in sorted(uses):
        use = uses[name]
        observed = next(iter(use.classes)) if len(use.classes) == 1 else None
        families.append(make_family(name, use.targets, observed=observed, contexts=use.contexts))
    return families


def _frame_violations(source: int, s: StateTuple, target: int, d: StateTuple) -> Iterable[str]:
    augmented = s.augmented
    if s.t == 1:
        if d.k != s.k:
            yield "environment class changed at t=1"
        if d.c != s.c:
            yield "configuration changed at t=1"
        if d.t not in (1, 2):
            yield f"turn moved from 1 to {d.t}"
        if augmented and (d.khat, d.v) != (s.khat, s.v):
            yield "perception changed at t=1"
    elif s.t == 2:
        if d.z != s.z:
            yield "system state changed at t=2"
        if d.c != s.c:
            yield "configuration changed at t=2"
        if d.t != 3:
            yield f"turn moved from 2 to {d.t}"
    elif s.t == 3:
        if d.z != s.z:
            yield "system state changed at t=3"
        if d.k != s.k:
            yield "environment class changed at t=3"
        if d.t != 1:
            yield f"turn moved from 3 to {d.t}"
        if augmented and (d.khat, d.v) != (s.khat, s.v):
            yield "perception changed at t=3"
    else:
        yield f"turn value {s.t} is not 1, 2 or 3"


def check_turn_structure(model: ExplicitPDTMC) -> ValidationReport:
    """
    Check that every transition respects the turn discipline.

    At t=1 only the managed system may move, at t=2 only the environment
    (and, in augmented models, the perception of it), at t=3 only the
    controller. Edges with constant weight 0 are ignored.

    :param model: The model to check
    :return: One violation per offending edge; empty if the model conforms
    """
    violations = []
    if not model.layout.turn_structured:
        return ValidationReport([Violation(
            'turn-frame', model.initial, "model has no environment and turn variables")])
    for source, row in enumerate(model.transitions):
        s = model.states[source]
        for entry in row:
            if entry.constant == 0 and entry.parameter is None:
                continue
            d = model.states[entry.target]
            for problem in _frame_violations(source, s, entry.target, d):
                violations.append(Violation(
                    'turn-frame', source, f"{problem} on edge {source} -> {entry.target}",
                    other=entry.target))
    return ValidationReport(violations)
