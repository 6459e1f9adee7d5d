"""
Turn a perfect-perception model into its classifier-perception counterpart.

In the perfect-perception model the controller reads the true environment
class k. In the augmented model every state also carries what the
classifier reported, a predicted class k̂ with verifier verdicts v, and the
controller can only read those. Each environment move (t=2) is followed by
a fresh perception drawn from the confusion tensor, and each controller
decision (t=3) uses a parameter family keyed on (k̂, v) instead of k.
"""
from __future__ import annotations

import logging
import math
from collections import defaultdict, deque
from typing import (
    Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set,
    Tuple,
)

from .builder import check_turn_structure
from .controller import (
    Configuration, Context, ControllerAssignment, ControllerKind,
    ParameterFamily, make_family, member_name, render_configuration,
    render_verdicts,
)
from .exceptions import (
    ArityMismatchError, MissingRolesError, UnsupportedModelError,
)
from .language import (
    Assignment, BinaryOp, Command, Conditional, Expression, FunctionCall,
    Identifier, Literal, ModelAst, ModuleAst, Role, UnaryOp, Update,
    VariableDecl,
)
from .logging import log_to_debug, timed
from .pctl import PctlQuery, pmc
from .pdtmc import (
    STATE_LIMIT, ExplicitPDTMC, RewardStructure, StateTuple, TransitionEntry,
    ValidationReport, Violation, check_state_limit, instantiate,
)
from .uncertainty import ConfusionTensor, Verdicts

logger = logging.getLogger(__name__)

# Largest acceptable difference between a query on both models
EQUIVALENCE_TOLERANCE = 1e-6

# The perfect-perception family each true class uses at a context, None where there is none
DecisionPoint = Tuple[Optional[str], ...]


class AugmentationSpec(NamedTuple):
    """
    How to augment a model.

    :param tensor: The confusion tensor of the classifier and its verifiers
    :param controller_param_prefix: Prefix of every augmented family name
    :param deterministic: Whether the controller will be synthesised as deterministic
    :param state_limit: The most states the augmented model may have
    """
    tensor: ConfusionTensor
    controller_param_prefix: str = 'x'
    deterministic: bool = False
    state_limit: int = STATE_LIMIT


class _Group(NamedTuple):
    decision: DecisionPoint
    khat: int
    verdicts: Verdicts


def _check_roles(model: ExplicitPDTMC, spec: AugmentationSpec) -> None:
    layout = model.layout
    missing = [
        role for role, present in (
            ('environment', layout.k_name is not None),
            ('turn', layout.t_name is not None),
            ('controller', bool(layout.c_names)),
        ) if not present
    ]
    if missing:
        raise MissingRolesError(missing)
    if spec.tensor.classes != layout.classes:
        raise ArityMismatchError(layout.classes, spec.tensor.classes, what="classes")
    report = check_turn_structure(model)
    if report:
        raise UnsupportedModelError(f"it breaks the turn structure: {report.violations[0]}")


def _decision_points(model: ExplicitPDTMC) -> Dict[Context, DecisionPoint]:
    """Find which perfect-perception family each class uses at every t=3 context."""
    family_of = model.family_of()
    used: Dict[Context, Dict[int, str]] = defaultdict(dict)
    fixed: Dict[Context, int] = {}
    for source, state in enumerate(model.states):
        if state.t != 3:
            continue
        names = {family_of[e.parameter].name for e in model.transitions[source]
                 if e.parameter is not None and e.parameter in family_of}
        if len(names) > 1:
            raise UnsupportedModelError(
                f"state {source} draws on families {', '.join(sorted(names))}")
        if names:
            used[(state.z, state.c)][state.k] = names.pop()
        else:
            fixed.setdefault((state.z, state.c), source)
    # the classifier's output cannot tell a fixed decision from a parametric one
    for context, source in fixed.items():
        if context in used:
            raise UnsupportedModelError(
                f"state {source} decides without a controller parameter "
                "where other classes use one")
    classes = model.layout.classes
    return {
        context: tuple(by_class.get(k) for k in range(1, classes + 1))
        for context, by_class in used.items()
    }


def family_name(prefix: str, context: Context, khat: int, verdicts: Verdicts) -> str:
    """
    Name the classifier-perception family deciding at a context.

    Families are named ``<prefix>_z<z>_k<k̂>_v<verdicts>_c<c>`` and their
    members ``<family>_<c'>``. The verdict part is left out without
    verifiers. A family shared by several contexts is named after the first.

    :param prefix: The name prefix
    :param context: The (z, c) pair of the deciding state
    :param khat: The predicted class
    :param verdicts: The verifier verdicts
    :return: The family name
    """
    z, c = context
    verdict_part = f"_v{render_verdicts(verdicts)}" if verdicts else ''
    return f"{prefix}_z{render_configuration(z)}_k{khat}{verdict_part}_c{render_configuration(c)}"


@log_to_debug
def augment(model: ExplicitPDTMC, spec: AugmentationSpec) -> ExplicitPDTMC:
    """
    Build the classifier-perception model of a perfect-perception model.

    States are (z, k, k̂, v, t, c). The initial state perceives its true
    class with every verdict true. At t=1 the managed system moves as in the
    original model with the perception held. At t=2 every environment move
    to class k' is split over the perceptions (k̂', v') of k', weighted by
    their probability; perceptions of probability zero are omitted. At t=3
    the controller moves as in the original model but with a family chosen
    by the perception. Labels and rewards are those of the underlying
    perfect-perception states.

    Perfect-perception families tie decisions across contexts. The
    augmented families keep that tying: contexts that use the same family
    for every true class share one family per perception. Families are
    named by :func:`family_name`.

    :param model: A turn-structured perfect-perception model
    :param spec: The tensor and naming settings
    :raises MissingRolesError: If the model has no environment, turn or controller variables
    :raises ArityMismatchError: If the tensor's class count differs from the model's
    :raises UnsupportedModelError: If the model breaks the turn structure
    :raises StateExplosionError: If the augmented model grows past the state limit
    :return: The augmented model, reachable states only
    """
    _check_roles(model, spec)
    tensor = spec.tensor
    with timed(logger, "Augmenting the model"):
        perceptions = {
            k: [(khat, v, float(p)) for khat, v, p in tensor.perceptions(k)]
            for k in range(1, tensor.classes + 1)
        }
        decisions = _decision_points(model)
        family_of = model.family_of()

        initial_base = model.states[model.initial]
        initial = initial_base._replace(khat=initial_base.k, v=(True,) * tensor.n)
        numbering: Dict[StateTuple, int] = {initial: 0}
        states: List[StateTuple] = [initial]
        bases: List[int] = [model.initial]
        # entries hold a group and target configuration in place of the parameter name
        rows: List[List[Tuple[int, float, _Group | None, Configuration | None, str | None]]] = []
        groups: Dict[_Group, Set[Context]] = defaultdict(set)
        targets: Dict[_Group, Set[Configuration]] = defaultdict(set)

        def visit(state: StateTuple, base: int) -> int:
            if state not in numbering:
                numbering[state] = len(states)
                states.append(state)
                bases.append(base)
                check_state_limit(len(states), spec.state_limit)
                queue.append(state)
            return numbering[state]

        queue = deque([initial])
        while queue:
            state = queue.popleft()
            base = bases[numbering[state]]
            row = []
            for entry in model.transitions[base]:
                target = model.states[entry.target]
                if state.t == 2:
                    for khat, v, p in perceptions[target.k]:
                        idx = visit(target._replace(khat=khat, v=v), entry.target)
                        row.append((idx, entry.constant * p, None, None, entry.parameter))
                    continue
                idx = visit(target._replace(khat=state.khat, v=state.v), entry.target)
                if state.t == 3 and entry.parameter is not None and entry.parameter in family_of:
                    assert state.khat is not None and state.v is not None
                    decision = decisions[(state.z, state.c)]
                    group = _Group(decision, state.khat, state.v)
                    groups[group].add((state.z, state.c))
                    targets[group].add(target.c)
                    row.append((idx, entry.constant, group, target.c, None))
                else:
                    row.append((idx, entry.constant, None, None, entry.parameter))
            rows.append(row)

        by_group = {
            group: make_family(
                family_name(spec.controller_param_prefix, min(contexts), group.khat, group.verdicts),
                targets[group], observed=group.khat, verdicts=group.verdicts,
                contexts=contexts, decision=group.decision, tag='')
            for group, contexts in groups.items()
        }
        transitions = [
            [
                TransitionEntry(
                    idx, constant,
                    by_group[group].member_for(c) if group is not None and c is not None else parameter)
                for idx, constant, group, c, parameter in row
            ]
            for row in rows
        ]
        families = sorted(by_group.values(), key=lambda f: f.name)

        labels = {
            name: [idx for idx, base in enumerate(bases) if base in ids]
            for name, ids in model.labels.items()
        }
        rewards = []
        for structure in model.rewards:
            state_rewards = {
                idx: structure.state_rewards[base] for idx, base in enumerate(bases)
                if base in structure.state_rewards}
            transition_rewards = {}
            if structure.transition_rewards:
                for source, row in enumerate(transitions):
                    for entry in row:
                        key = (bases[source], bases[entry.target])
                        if key in structure.transition_rewards:
                            value = structure.transition_rewards[key]
                            transition_rewards[(source, entry.target)] = value
            rewards.append(RewardStructure(structure.name, state_rewards, transition_rewards))

    augmented = ExplicitPDTMC(
        states=states,
        initial=0,
        transitions=transitions,
        labels=labels,
        rewards=rewards,
        families=families,
        layout=model.layout,
    )
    logger.info(
        f"Augmentation produced {len(augmented)} states "
        f"and {len(families)} parameter families from {len(model)} states")
    return augmented


def fold_controller(
    dnn_assignment: ControllerAssignment,
    tensor: ConfusionTensor,
    families: Iterable[ParameterFamily] | None = None,
) -> ControllerAssignment:
    """
    Find the perfect-perception controller that behaves like a classifier-perception one.

    Each perfect-perception parameter becomes the probability of its
    decision averaged over what the classifier may report for the true class:
    the sum over (k̂, v) of p(k, k̂, v) times the classifier-perception
    parameter for (k̂, v).

    :param dnn_assignment: An assignment of an augmented model's families
    :param tensor: The tensor the model was augmented with
    :param families: The perfect-perception families, derived from the
        assignment's families when not given
    :raises ValueError: If the assignment's families do not come from augmentation
    :return: The perfect-perception assignment
    """
    by_decision: Dict[DecisionPoint, Dict[Tuple[int, Verdicts], ParameterFamily]] = defaultdict(dict)
    for family in dnn_assignment.families:
        if family.observed is None or family.verdicts is None or not family.decision:
            raise ValueError(f"Family {family.name!r} does not come from augmentation")
        by_decision[family.decision][(family.observed, family.verdicts)] = family
    if not by_decision:
        raise ValueError("The assignment carries no augmented families")

    values: Dict[str, float] = {}
    derived: Dict[str, ParameterFamily] = {}
    for decision, group in sorted(by_decision.items(), key=lambda item: str(item[0])):
        all_targets = sorted({c for family in group.values() for c in family.targets})
        for k, perfect in enumerate(decision, start=1):
            if perfect is None:
                continue
            folded = []
            for target in all_targets:
                total = 0.0
                for khat, verdicts, p in tensor.perceptions(k):
                    family = group.get((khat, verdicts))
                    if family is None:
                        raise ValueError(
                            f"No augmented family for class {khat} with verdicts "
                            f"{render_verdicts(verdicts) or '-'} at decision {decision}")
                    if target in family.targets:
                        total += float(p) * dnn_assignment[family.member_for(target)]
                folded.append(total)
            names = [member_name(perfect, target) for target in all_targets]
            if perfect in derived:
                previous = [values[name] for name in names]
                if any(abs(a - b) > 1e-12 for a, b in zip(previous, folded)):
                    logger.warning(
                        f"Family {perfect!r} folds to different values at different decisions; "
                        "keeping the first")
                continue
            values.update(zip(names, folded))
            derived[perfect] = make_family(perfect, all_targets, observed=k)

    chosen = tuple(families) if families is not None else tuple(derived.values())
    return ControllerAssignment(values, chosen, ControllerKind.PERFECT)


class QueryGap(NamedTuple):
    """
    One query evaluated on both models.

    :param query: The quantitative query
    :param augmented: Its value on the instantiated augmented model
    :param perfect: Its value on the instantiated perfect-perception model
    """
    query: PctlQuery
    augmented: float
    perfect: float

    @property
    def gap(self) -> float:
        if math.isinf(self.augmented) or math.isinf(self.perfect):
            return 0.0 if self.augmented == self.perfect else math.inf
        return abs(self.augmented - self.perfect)


class EquivalenceReport(NamedTuple):
    """
    The outcome of comparing an augmented model with the folded perfect-perception model.

    :param gaps: One entry per query
    :param folded: The folded perfect-perception assignment
    :param tolerance: The largest acceptable gap
    """
    gaps: Tuple[QueryGap, ...]
    folded: ControllerAssignment
    tolerance: float = EQUIVALENCE_TOLERANCE

    @property
    def flagged(self) -> Tuple[QueryGap, ...]:
        """The queries whose gap exceeds the tolerance."""
        return tuple(g for g in self.gaps if g.gap > self.tolerance)

    @property
    def ok(self) -> bool:
        return not self.flagged

    @property
    def max_gap(self) -> float:
        return max((g.gap for g in self.gaps), default=0.0)


def check_equivalence(
    perfect: ExplicitPDTMC,
    augmented: ExplicitPDTMC,
    dnn_assignment: ControllerAssignment,
    queries: Sequence[PctlQuery],
    *,
    tensor: ConfusionTensor,
    tolerance: float = EQUIVALENCE_TOLERANCE,
) -> EquivalenceReport:
    """
    Compare quantitative queries on an augmented model and its folded counterpart.

    :param perfect: The perfect-perception model
    :param augmented: The model augmented from it with ``tensor``
    :param dnn_assignment: An assignment of the augmented model's families
    :param queries: Quantitative queries
    :param tensor: The tensor used for augmentation. The augmented model
        keeps only products of perception and environment probabilities, so
        folding the assignment needs the tensor itself
    :raises ValueError: If a query is not quantitative
    :return: The value of every query on both models
    """
    folded = fold_controller(dnn_assignment, tensor, perfect.families)
    augmented_instance = instantiate(augmented, dnn_assignment)
    perfect_instance = instantiate(perfect, folded)
    gaps = []
    for query in queries:
        if not query.quantitative:
            raise ValueError(f"Query {query} is not quantitative")
        gap = QueryGap(query, pmc(query, augmented_instance), pmc(query, perfect_instance))
        logger.debug(f"{query}: augmented {gap.augmented!r}, perfect {gap.perfect!r}")
        gaps.append(gap)
    report = EquivalenceReport(tuple(gaps), folded, tolerance)
    if not report.ok:
        logger.warning(f"{len(report.flagged)} queries differ by more than {tolerance}")
    return report


def check_controller_independence(model: ExplicitPDTMC) -> ValidationReport:
    """
    Check that controller decisions depend on the perception and not on the true class.

    States at t=3 that differ only in k must move to the same configurations
    with the same weights.

    :param model: An augmented model
    :return: One violation per state disagreeing with the first state of its group
    """
    groups: Dict[Tuple[object, ...], List[int]] = defaultdict(list)
    for idx, state in enumerate(model.states):
        if state.t == 3:
            groups[(state.z, state.khat, state.v, state.c)].append(idx)

    def decisions(idx: int) -> Tuple[Tuple[Configuration, float, str | None], ...]:
        return tuple(sorted(
            (model.states[e.target].c, e.constant, e.parameter)
            for e in model.transitions[idx]))

    violations = []
    for members in groups.values():
        expected = decisions(members[0])
        for idx in members[1:]:
            if decisions(idx) != expected:
                violations.append(Violation(
                    'controller-independence', idx,
                    f"decisions differ from those of state {members[0]}", other=members[0]))
    return ValidationReport(violations)


# Source level augmentation, for inspection

def _fresh(base: str, taken: Set[str]) -> str:
    name = base
    while name in taken:
        name += '_'
    taken.add(name)
    return name


def _substitute(expression: Expression, names: Mapping[str, str]) -> Expression:
    if isinstance(expression, Identifier):
        if expression.name in names:
            return Identifier(names[expression.name], expression.pos)
        return expression
    if isinstance(expression, UnaryOp):
        return UnaryOp(expression.op, _substitute(expression.operand, names), expression.pos)
    if isinstance(expression, BinaryOp):
        return BinaryOp(
            expression.op, _substitute(expression.left, names),
            _substitute(expression.right, names), expression.pos)
    if isinstance(expression, Conditional):
        return Conditional(
            _substitute(expression.condition, names), _substitute(expression.if_true, names),
            _substitute(expression.if_false, names), expression.pos)
    if isinstance(expression, FunctionCall):
        return FunctionCall(
            expression.name, tuple(_substitute(a, names) for a in expression.args), expression.pos)
    return expression


def _perception_probability(
    tensor: ConfusionTensor, new_class: Expression, khat: int, verdicts: Verdicts,
) -> Expression:
    """An expression for p(k', k̂, v) where k' is the class after the move."""
    result: Expression = Literal(0.0)
    for k in range(tensor.classes, 0, -1):
        p = float(tensor.probability(k, khat, verdicts))
        result = Conditional(BinaryOp('=', new_class, Literal(k)), Literal(p), result)
    return result


def _conjunction(parts: Sequence[Expression]) -> Expression:
    result = parts[0]
    for part in parts[1:]:
        result = BinaryOp('&', result, part)
    return result


@log_to_debug
def augment_source(ast: ModelAst, tensor: ConfusionTensor) -> ModelAst:
    """
    Rewrite model source so the controller reads a classifier's output.

    The environment module gains a predicted class and one boolean per
    verifier, resampled on every environment move. Controller guards read
    the predicted class instead of the true one and are split by verdicts,
    each part using its own family. The result is meant for reading; the
    explicit :func:`augment` is what synthesis uses.

    :param ast: A perfect-perception model with environment and controller roles
    :param tensor: The classifier's confusion tensor
    :raises MissingRolesError: If a role is missing
    :return: The rewritten model
    """
    environment = ast.modules_with_role(Role.ENVIRONMENT)
    controllers = ast.modules_with_role(Role.CONTROLLER)
    missing = [r for r, m in (('environment', environment), ('controller', controllers)) if not m]
    if missing or not environment[0].variables:
        raise MissingRolesError(missing or ['environment'])
    env = environment[0]
    k_decl = env.variables[0]
    taken = {v.name for m in ast.modules for v in m.variables}
    taken.update(c.name for c in ast.constants)
    taken.update(f.name for f in ast.formulas)
    khat_name = _fresh('khat', taken)
    verdict_names = [_fresh(f"v{i}", taken) for i in range(1, tensor.n + 1)]

    new_variables = [VariableDecl(khat_name, Literal(1), Literal(tensor.classes), k_decl.initial)]
    new_variables.extend(
        VariableDecl(name, None, None, Literal(True)) for name in verdict_names)
    commands = []
    for command in env.commands:
        updates = []
        for update in command.updates:
            new_class: Expression = Identifier(k_decl.name)
            for assignment in update.assignments:
                if assignment.variable == k_decl.name:
                    new_class = assignment.expression
            for khat in range(1, tensor.classes + 1):
                for verdicts in tensor.verdicts:
                    p = _perception_probability(tensor, new_class, khat, verdicts)
                    probability = (
                        p if update.probability is None else BinaryOp('*', update.probability, p))
                    perception = (Assignment(khat_name, Literal(khat)),) + tuple(
                        Assignment(name, Literal(bool(v))) for name, v in zip(verdict_names, verdicts))
                    assignments = update.assignments + perception
                    updates.append(Update(probability, assignments))
        commands.append(Command(command.action, command.guard, tuple(updates)))
    new_env = ModuleAst(env.name, env.variables + tuple(new_variables), tuple(commands), env.role)

    parameters = set(ast.parameters)
    families: List[str] = []
    new_controllers = {}
    for controller in controllers:
        commands = []
        for command in controller.commands:
            guard = _substitute(command.guard, {k_decl.name: khat_name})
            for verdicts in tensor.verdicts:
                suffix = f"_v{render_verdicts(verdicts)}" if tensor.n else ''
                renames = {p: p + suffix for p in parameters}
                literals = [
                    Identifier(name) if v else UnaryOp('!', Identifier(name))
                    for name, v in zip(verdict_names, verdicts)]
                updates = []
                for update in command.updates:
                    probability = update.probability
                    if isinstance(probability, Identifier) and probability.name in parameters:
                        probability = Identifier(renames[probability.name], probability.pos)
                        if probability.name not in families:
                            families.append(probability.name)
                    elif probability is not None:
                        probability = _substitute(probability, {k_decl.name: khat_name})
                    assignments = tuple(
                        Assignment(a.variable, _substitute(a.expression, {k_decl.name: khat_name}))
                        for a in update.assignments)
                    updates.append(Update(probability, assignments))
                commands.append(Command(
                    command.action, _conjunction([guard, *literals]), tuple(updates)))
        new_controllers[controller.name] = ModuleAst(
            controller.name, controller.variables, tuple(commands), controller.role)

    modules = tuple(
        new_env if m.name == env.name else new_controllers.get(m.name, m) for m in ast.modules)
    constants = tuple(c for c in ast.constants if c.name not in parameters)
    return ModelAst(
        constants=constants,
        formulas=ast.formulas,
        labels=ast.labels,
        modules=modules,
        rewards=ast.rewards,
        controller_params=tuple(families),
    )
