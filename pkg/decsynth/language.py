"""
Parser for the guarded-command modelling language.

The language is a subset of the PRISM language for DTMCs: constants,
formulas, labels, modules of bounded integer and boolean variables with
guarded probabilistic commands, and reward blocks. Modules are given a role
by a comment on the line before them::

    // @role: environment
    module Collider
        ...
    endmodule

Recognised roles are managed, environment, controller, turn and plain (the
default). Controller parameter families are declared with
``// @controller-params: x1, x2`` or as constants without a value.

The grammar is documented in docs/modelling-language.md.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Set, Tuple, Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError

from .exceptions import (
    DuplicateIdentifierError, ModelSyntaxError, UnboundIdentifierError,
    VariableRangeError,
)
from .logging import log_to_debug

logger = logging.getLogger(__name__)

# Functions available in expressions, with their arity
FUNCTIONS = {
    'min': None,
    'max': None,
    'floor': 1,
    'ceil': 1,
    'mod': 2,
    'pow': 2,
}


@dataclass(frozen=True)
class Position:
    """A 1-based source position."""
    line: int = 0
    column: int = 0


_NOWHERE = Position()


def _pos() -> Position:
    return field(default=_NOWHERE, compare=False, repr=False)  # type: ignore[return-value]


@dataclass(frozen=True)
class Literal:
    value: Union[int, float, bool]
    pos: Position = _pos()


@dataclass(frozen=True)
class Identifier:
    name: str
    pos: Position = _pos()


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: Expression
    pos: Position = _pos()


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: Expression
    right: Expression
    pos: Position = _pos()


@dataclass(frozen=True)
class Conditional:
    condition: Expression
    if_true: Expression
    if_false: Expression
    pos: Position = _pos()


@dataclass(frozen=True)
class FunctionCall:
    name: str
    args: Tuple[Expression, ...]
    pos: Position = _pos()


Expression = Union[Literal, Identifier, UnaryOp, BinaryOp, Conditional, FunctionCall]


class Role(Enum):
    """The part a module plays in a turn-structured model."""
    MANAGED = 'managed'
    ENVIRONMENT = 'environment'
    CONTROLLER = 'controller'
    TURN = 'turn'
    PLAIN = 'plain'


@dataclass(frozen=True)
class ConstantDecl:
    name: str
    type: str
    value: Expression | None
    pos: Position = _pos()


@dataclass(frozen=True)
class FormulaDecl:
    name: str
    expression: Expression
    pos: Position = _pos()


@dataclass(frozen=True)
class LabelDecl:
    name: str
    expression: Expression
    pos: Position = _pos()


@dataclass(frozen=True)
class VariableDecl:
    """A module variable; boolean variables have no bounds."""
    name: str
    low: Expression | None
    high: Expression | None
    initial: Expression | None
    pos: Position = _pos()

    @property
    def is_bool(self) -> bool:
        return self.low is None


@dataclass(frozen=True)
class Assignment:
    variable: str
    expression: Expression
    pos: Position = _pos()


@dataclass(frozen=True)
class Update:
    """One branch of a command; a missing probability means 1."""
    probability: Expression | None
    assignments: Tuple[Assignment, ...]
    pos: Position = _pos()


@dataclass(frozen=True)
class Command:
    action: str | None
    guard: Expression
    updates: Tuple[Update, ...]
    pos: Position = _pos()


@dataclass(frozen=True)
class ModuleAst:
    name: str
    variables: Tuple[VariableDecl, ...]
    commands: Tuple[Command, ...]
    role: Role = Role.PLAIN
    pos: Position = _pos()

    @property
    def alphabet(self) -> frozenset:
        return frozenset(c.action for c in self.commands if c.action is not None)


@dataclass(frozen=True)
class RewardItem:
    """A state reward, or a transition reward when ``transition`` is set."""
    guard: Expression
    value: Expression
    transition: bool = False
    action: str | None = None
    pos: Position = _pos()


@dataclass(frozen=True)
class RewardBlock:
    name: str
    items: Tuple[RewardItem, ...]
    pos: Position = _pos()


@dataclass(frozen=True)
class ModelAst:
    constants: Tuple[ConstantDecl, ...] = ()
    formulas: Tuple[FormulaDecl, ...] = ()
    labels: Tuple[LabelDecl, ...] = ()
    modules: Tuple[ModuleAst, ...] = ()
    rewards: Tuple[RewardBlock, ...] = ()
    controller_params: Tuple[str, ...] = ()
    pos: Position = _pos()

    def module(self, name: str) -> ModuleAst:
        for module in self.modules:
            if module.name == name:
                return module
        raise KeyError(f"No module named {name!r}")

    def modules_with_role(self, role: Role) -> Tuple[ModuleAst, ...]:
        return tuple(m for m in self.modules if m.role is role)

    @property
    def parameters(self) -> Tuple[str, ...]:
        """Declared parameter families: annotated names and constants without a value."""
        names = list(self.controller_params)
        names.extend(c.name for c in self.constants if c.value is None and c.name not in names)
        return tuple(names)


_GRAMMAR = r"""
start: model_type? _declaration*

model_type: "dtmc"

_declaration: constant | formula | label | module | rewards

constant: "const" [const_type] NAME ["=" expr] ";"
!const_type: "int" | "double" | "bool"

formula: "formula" NAME "=" expr ";"

label: "label" ESCAPED_STRING "=" expr ";"

module: "module" NAME variable* command* "endmodule"

variable: NAME ":" "[" expr ".." expr "]" ["init" expr] ";"     -> int_variable
        | NAME ":" "bool" ["init" expr] ";"                     -> bool_variable

command: "[" [NAME] "]" expr "->" _updates ";"
_updates: update ("+" update)*
update: expr ":" _assignments                                  -> weighted_update
      | _assignments                                           -> certain_update
_assignments: assignment ("&" assignment)*
assignment: "(" NAME "'" "=" expr ")"

rewards: "rewards" ESCAPED_STRING reward_item* "endrewards"
reward_item: expr ":" expr ";"                                 -> state_reward
           | "[" [NAME] "]" expr ":" expr ";"                    -> transition_reward

?expr: ternary
?ternary: implication
        | implication "?" expr ":" ternary                     -> conditional
?implication: disjunction
            | disjunction IMPLIES implication                   -> implies
?disjunction: conjunction
            | disjunction "|" conjunction                      -> or_
?conjunction: negation
            | conjunction "&" negation                         -> and_
?negation: "!" negation                                        -> not_
         | relation
?relation: sum
         | sum REL_OP sum                                      -> relation
?sum: product
    | sum ADD_OP product                                       -> binary
?product: unary
        | product MUL_OP unary                                 -> binary
?unary: "-" unary                                              -> negate
      | atom
?atom: DECIMAL                                                 -> real
     | INTEGER                                                 -> integer
     | "true"                                                  -> true
     | "false"                                                 -> false
     | NAME "(" expr ("," expr)* ")"                           -> call
     | NAME                                                    -> identifier
     | "(" expr ")"

IMPLIES.2: "=>"
REL_OP: "!=" | "<=" | ">=" | "=" | "<" | ">"
ADD_OP: "+" | "-"
MUL_OP: "*" | "/"

DECIMAL: /\d+\.\d+([eE][-+]?\d+)?/ | /\d+[eE][-+]?\d+/
INTEGER: /\d+/
NAME: /[A-Za-z_][A-Za-z0-9_]*/
COMMENT: /\/\/[^\n]*/

%import common.ESCAPED_STRING
%import common.WS
%ignore WS
%ignore COMMENT
"""

_parser = Lark(_GRAMMAR, parser='lalr', propagate_positions=True, maybe_placeholders=True)

_ROLE_RE = re.compile(r'//\s*@role\s*:\s*([A-Za-z]+)')
_PARAMS_RE = re.compile(r'//\s*@controller-params\s*:\s*([A-Za-z0-9_,\s]*)')
_MODULE_RE = re.compile(r'^\s*module\s+([A-Za-z_][A-Za-z0-9_]*)')


def _at(meta: object) -> Position:
    return Position(getattr(meta, 'line', 0) or 0, getattr(meta, 'column', 0) or 0)


def _token_at(token: Token) -> Position:
    return Position(token.line or 0, token.column or 0)


def _unquote(token: Token) -> str:
    return str(token)[1:-1]


@v_args(meta=True)
class _AstBuilder(Transformer):
    """Turn the parse tree into AST nodes."""

    def __init__(self, roles: Dict[str, Role], controller_params: Tuple[str, ...]):
        super().__init__()
        self.roles = roles
        self.controller_params = controller_params

    def start(self, meta: object, items: list) -> ModelAst:
        parts: Dict[type, list] = {
            ConstantDecl: [], FormulaDecl: [], LabelDecl: [], ModuleAst: [], RewardBlock: []}
        for item in items:
            if item is None or isinstance(item, str):
                continue
            parts[type(item)].append(item)
        return ModelAst(
            constants=tuple(parts[ConstantDecl]),
            formulas=tuple(parts[FormulaDecl]),
            labels=tuple(parts[LabelDecl]),
            modules=tuple(parts[ModuleAst]),
            rewards=tuple(parts[RewardBlock]),
            controller_params=self.controller_params,
            pos=Position(1, 1),
        )

    def model_type(self, meta: object, items: list) -> str:
        return 'dtmc'

    def const_type(self, meta: object, items: list) -> str:
        return str(items[0])

    def constant(self, meta: object, items: list) -> ConstantDecl:
        type_, name, value = items
        return ConstantDecl(str(name), type_ or 'int', value, _at(meta))

    def formula(self, meta: object, items: list) -> FormulaDecl:
        name, expression = items
        return FormulaDecl(str(name), expression, _at(meta))

    def label(self, meta: object, items: list) -> LabelDecl:
        name, expression = items
        return LabelDecl(_unquote(name), expression, _at(meta))

    def module(self, meta: object, items: list) -> ModuleAst:
        name = str(items[0])
        variables = tuple(i for i in items[1:] if isinstance(i, VariableDecl))
        commands = tuple(i for i in items[1:] if isinstance(i, Command))
        return ModuleAst(name, variables, commands, self.roles.get(name, Role.PLAIN), _at(meta))

    def int_variable(self, meta: object, items: list) -> VariableDecl:
        name, low, high, initial = items
        return VariableDecl(str(name), low, high, initial, _at(meta))

    def bool_variable(self, meta: object, items: list) -> VariableDecl:
        name, initial = items
        return VariableDecl(str(name), None, None, initial, _at(meta))

    def command(self, meta: object, items: list) -> Command:
        action, guard, *updates = items
        return Command(None if action is None else str(action), guard, tuple(updates), _at(meta))

    def weighted_update(self, meta: object, items: list) -> Update:
        probability, *assignments = items
        return Update(probability, tuple(assignments), _at(meta))

    def certain_update(self, meta: object, items: list) -> Update:
        return Update(None, tuple(items), _at(meta))

    def assignment(self, meta: object, items: list) -> Assignment:
        name, expression = items
        return Assignment(str(name), expression, _at(meta))

    def rewards(self, meta: object, items: list) -> RewardBlock:
        name, *entries = items
        return RewardBlock(_unquote(name), tuple(entries), _at(meta))

    def state_reward(self, meta: object, items: list) -> RewardItem:
        guard, value = items
        return RewardItem(guard, value, False, None, _at(meta))

    def transition_reward(self, meta: object, items: list) -> RewardItem:
        action, guard, value = items
        return RewardItem(guard, value, True, None if action is None else str(action), _at(meta))

    def conditional(self, meta: object, items: list) -> Conditional:
        return Conditional(items[0], items[1], items[2], _at(meta))

    def implies(self, meta: object, items: list) -> BinaryOp:
        return BinaryOp('=>', items[0], items[2], _at(meta))

    def or_(self, meta: object, items: list) -> BinaryOp:
        return BinaryOp('|', items[0], items[1], _at(meta))

    def and_(self, meta: object, items: list) -> BinaryOp:
        return BinaryOp('&', items[0], items[1], _at(meta))

    def not_(self, meta: object, items: list) -> UnaryOp:
        return UnaryOp('!', items[0], _at(meta))

    def relation(self, meta: object, items: list) -> BinaryOp:
        left, op, right = items
        return BinaryOp(str(op), left, right, _at(meta))

    def binary(self, meta: object, items: list) -> BinaryOp:
        left, op, right = items
        return BinaryOp(str(op), left, right, _at(meta))

    def negate(self, meta: object, items: list) -> Expression:
        operand = items[0]
        if isinstance(operand, Literal) and not isinstance(operand.value, bool):
            return Literal(-operand.value, _at(meta))
        return UnaryOp('-', operand, _at(meta))

    def real(self, meta: object, items: list) -> Literal:
        return Literal(float(items[0]), _token_at(items[0]))

    def integer(self, meta: object, items: list) -> Literal:
        return Literal(int(items[0]), _token_at(items[0]))

    def true(self, meta: object, items: list) -> Literal:
        return Literal(True, _at(meta))

    def false(self, meta: object, items: list) -> Literal:
        return Literal(False, _at(meta))

    def call(self, meta: object, items: list) -> FunctionCall:
        name, *args = items
        return FunctionCall(str(name), tuple(args), _token_at(name))

    def identifier(self, meta: object, items: list) -> Identifier:
        return Identifier(str(items[0]), _token_at(items[0]))


def _scan_annotations(source: str) -> Tuple[Dict[str, Role], Tuple[str, ...]]:
    """Find role and controller parameter annotations in comments."""
    roles: Dict[str, Role] = {}
    params: List[str] = []
    pending: Tuple[Role, int] | None = None
    for line_no, line in enumerate(source.splitlines(), start=1):
        match = _ROLE_RE.search(line)
        if match:
            word = match.group(1).lower()
            try:
                pending = (Role(word), line_no)
            except ValueError:
                raise ModelSyntaxError(
                    f"Unknown module role {match.group(1)!r}", line_no, match.start(1) + 1) from None
        match = _PARAMS_RE.search(line)
        if match:
            params.extend(p.strip() for p in match.group(1).split(',') if p.strip())
        match = _MODULE_RE.match(line)
        if match and pending is not None:
            roles[match.group(1)] = pending[0]
            pending = None
    return roles, tuple(dict.fromkeys(params))


def walk(expression: Expression) -> Iterator[Expression]:
    """Yield an expression and every sub-expression, parents first."""
    yield expression
    if isinstance(expression, UnaryOp):
        yield from walk(expression.operand)
    elif isinstance(expression, BinaryOp):
        yield from walk(expression.left)
        yield from walk(expression.right)
    elif isinstance(expression, Conditional):
        yield from walk(expression.condition)
        yield from walk(expression.if_true)
        yield from walk(expression.if_false)
    elif isinstance(expression, FunctionCall):
        for arg in expression.args:
            yield from walk(arg)


def identifiers(expression: Expression) -> Iterator[Identifier]:
    """Yield every identifier used in an expression."""
    for node in walk(expression):
        if isinstance(node, Identifier):
            yield node


def _expressions(ast: ModelAst) -> Iterator[Tuple[Expression, str | None]]:
    """Yield every expression with the module it belongs to, if any."""
    for constant in ast.constants:
        if constant.value is not None:
            yield constant.value, None
    for formula in ast.formulas:
        yield formula.expression, None
    for label in ast.labels:
        yield label.expression, None
    for module in ast.modules:
        for variable in module.variables:
            for part in (variable.low, variable.high, variable.initial):
                if part is not None:
                    yield part, module.name
        for command in module.commands:
            yield command.guard, module.name
            for update in command.updates:
                if update.probability is not None:
                    yield update.probability, module.name
                for assignment in update.assignments:
                    yield assignment.expression, module.name
    for block in ast.rewards:
        for item in block.items:
            yield item.guard, None
            yield item.value, None


def _check_names(ast: ModelAst) -> None:
    seen: Set[str] = set()

    def declare(name: str, pos: Position) -> None:
        if name in seen or name in FUNCTIONS:
            raise DuplicateIdentifierError(name, pos.line, pos.column)
        seen.add(name)

    for constant in ast.constants:
        declare(constant.name, constant.pos)
    for formula in ast.formulas:
        declare(formula.name, formula.pos)
    for module in ast.modules:
        declare(module.name, module.pos)
        for variable in module.variables:
            declare(variable.name, variable.pos)
    for name in ast.controller_params:
        if name not in {c.name for c in ast.constants}:
            declare(name, ast.pos)

    labels: Set[str] = set()
    for label in ast.labels:
        if label.name in labels:
            raise DuplicateIdentifierError(label.name, label.pos.line, label.pos.column)
        labels.add(label.name)
    reward_names: Set[str] = set()
    for block in ast.rewards:
        if block.name in reward_names:
            raise DuplicateIdentifierError(block.name, block.pos.line, block.pos.column)
        reward_names.add(block.name)

    for expression, _ in _expressions(ast):
        for node in walk(expression):
            if isinstance(node, Identifier) and node.name not in seen:
                raise UnboundIdentifierError(node.name, node.pos.line, node.pos.column)
            if isinstance(node, FunctionCall):
                if node.name not in FUNCTIONS:
                    raise UnboundIdentifierError(
                        node.name, node.pos.line, node.pos.column, reason="is not a known function")
                arity = FUNCTIONS[node.name]
                if arity is not None and len(node.args) != arity:
                    raise ModelSyntaxError(
                        f"Function {node.name!r} called with {len(node.args)} arguments",
                        node.pos.line, node.pos.column)
                if arity is None and len(node.args) < 2:
                    raise ModelSyntaxError(
                        f"Function {node.name!r} needs at least 2 arguments",
                        node.pos.line, node.pos.column)


def _check_formula_cycles(ast: ModelAst) -> None:
    formulas = {f.name: f for f in ast.formulas}
    state: Dict[str, int] = {}

    def visit(name: str) -> None:
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            pos = formulas[name].pos
            raise ModelSyntaxError(
                f"Formula {name!r} is defined in terms of itself", pos.line, pos.column)
        state[name] = 1
        for ident in identifiers(formulas[name].expression):
            if ident.name in formulas:
                visit(ident.name)
        state[name] = 2

    for name in formulas:
        visit(name)


def _integral(value: object) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, float):
        return math.isfinite(value) and value.is_integer()
    return isinstance(value, int)


def _check_modules(ast: ModelAst) -> None:
    for module in ast.modules:
        own = {v.name for v in module.variables}
        for variable in module.variables:
            if variable.is_bool:
                continue
            for bound in (variable.low, variable.high):
                if isinstance(bound, Literal) and not _integral(bound.value):
                    raise VariableRangeError(
                        variable.name, "bounds must be finite integers",
                        variable.pos.line, variable.pos.column)
            if (isinstance(variable.low, Literal) and isinstance(variable.high, Literal)
                    and variable.low.value > variable.high.value):
                raise VariableRangeError(
                    variable.name, f"empty range [{variable.low.value}..{variable.high.value}]",
                    variable.pos.line, variable.pos.column)
        for command in module.commands:
            for update in command.updates:
                assigned: Set[str] = set()
                for assignment in update.assignments:
                    if assignment.variable not in own:
                        raise UnboundIdentifierError(
                            assignment.variable, assignment.pos.line, assignment.pos.column,
                            reason=f"is not a variable of module {module.name!r}")
                    if assignment.variable in assigned:
                        raise DuplicateIdentifierError(
                            assignment.variable, assignment.pos.line, assignment.pos.column)
                    assigned.add(assignment.variable)


def check(ast: ModelAst) -> ModelAst:
    """
    Check an AST for naming and structural errors.

    :raises DuplicateIdentifierError: If a name is declared twice
    :raises UnboundIdentifierError: If a name is used but not declared
    :raises VariableRangeError: If literal variable bounds are unusable
    :raises ModelSyntaxError: If formulas are cyclic or a function is misused
    :return: The same AST
    """
    _check_names(ast)
    _check_formula_cycles(ast)
    _check_modules(ast)
    return ast


@log_to_debug
def parse(source: str) -> ModelAst:
    """
    Parse a model source.

    :param source: The model text
    :raises ModelSyntaxError: If the source cannot be parsed, with line and column
    :raises DuplicateIdentifierError: If a name is declared twice
    :raises UnboundIdentifierError: If a name is used but not declared
    :raises VariableRangeError: If variable bounds are unusable
    :return: The model AST
    """
    roles, params = _scan_annotations(source)
    try:
        tree = _parser.parse(source)
    except UnexpectedInput as e:
        line, column = getattr(e, 'line', 0) or 0, getattr(e, 'column', 0) or 0
        context = e.get_context(source).strip() if line > 0 else ''
        detail = f": {context.splitlines()[0]}" if context else ''
        raise ModelSyntaxError(f"Unexpected input{detail}", line, column) from None
    try:
        ast = _AstBuilder(roles, params).transform(tree)
    except VisitError as e:
        raise e.orig_exc from None
    unknown = set(roles) - {m.name for m in ast.modules}
    if unknown:
        logger.warning(f"Role annotations for unknown modules: {', '.join(sorted(unknown))}")
    return check(ast)


# Pretty printing

def format_expression(expression: Expression) -> str:
    """Render an expression with every compound sub-expression parenthesised."""
    if isinstance(expression, Literal):
        if isinstance(expression.value, bool):
            return 'true' if expression.value else 'false'
        if isinstance(expression.value, float):
            text = repr(expression.value)
            if 'e' in text or 'E' in text:
                mantissa, _, exponent = text.lower().partition('e')
                if '.' not in mantissa:
                    mantissa += '.0'
                text = f"{mantissa}e{exponent}"
            elif '.' not in text:
                text += '.0'
            return text if expression.value >= 0 else f'({text})'
        return str(expression.value) if expression.value >= 0 else f'({expression.value})'
    if isinstance(expression, Identifier):
        return expression.name
    if isinstance(expression, UnaryOp):
        return f'({expression.op}{format_expression(expression.operand)})'
    if isinstance(expression, BinaryOp):
        left, right = format_expression(expression.left), format_expression(expression.right)
        return f'({left} {expression.op} {right})'
    if isinstance(expression, Conditional):
        return (
            f'({format_expression(expression.condition)} ? {format_expression(expression.if_true)}'
            f' : {format_expression(expression.if_false)})')
    if isinstance(expression, FunctionCall):
        return f"{expression.name}({', '.join(format_expression(a) for a in expression.args)})"
    raise TypeError(f"Not an expression: {expression!r}")


def _format_update(update: Update) -> str:
    assignments = ' & '.join(
        f"({a.variable}'={format_expression(a.expression)})" for a in update.assignments)
    if update.probability is None:
        return assignments
    return f"{format_expression(update.probability)} : {assignments}"


def _format_module(module: ModuleAst) -> Iterable[str]:
    if module.role is not Role.PLAIN:
        yield f"// @role: {module.role.value}"
    yield f"module {module.name}"
    for variable in module.variables:
        initial = '' if variable.initial is None else f" init {format_expression(variable.initial)}"
        if variable.is_bool:
            yield f"    {variable.name} : bool{initial};"
        else:
            assert variable.low is not None and variable.high is not None
            yield (
                f"    {variable.name} : [{format_expression(variable.low)}.."
                f"{format_expression(variable.high)}]{initial};")
    for command in module.commands:
        updates = ' + '.join(_format_update(u) for u in command.updates)
        yield f"    [{command.action or ''}] {format_expression(command.guard)} -> {updates};"
    yield "endmodule"


def format_model(ast: ModelAst) -> str:
    """
    Render an AST as model source that parses back to the same AST.

    :param ast: The model
    :return: The source text
    """
    lines = ["dtmc", ""]
    if ast.controller_params:
        lines.append(f"// @controller-params: {', '.join(ast.controller_params)}")
    for constant in ast.constants:
        value = '' if constant.value is None else f" = {format_expression(constant.value)}"
        lines.append(f"const {constant.type} {constant.name}{value};")
    for formula in ast.formulas:
        lines.append(f"formula {formula.name} = {format_expression(formula.expression)};")
    lines.append("")
    for module in ast.modules:
        lines.extend(_format_module(module))
        lines.append("")
    for label in ast.labels:
        lines.append(f'label "{label.name}" = {format_expression(label.expression)};')
    for block in ast.rewards:
        lines.append("")
        lines.append(f'rewards "{block.name}"')
        for item in block.items:
            prefix = f"[{item.action or ''}] " if item.transition else ''
            lines.append(
                f"    {prefix}{format_expression(item.guard)} : {format_expression(item.value)};")
        lines.append("endrewards")
    return '\n'.join(lines) + '\n'
