"""
The decsynth command line.

The subcommands follow the pipeline: quantify a classifier into a confusion
tensor, build and augment a model, synthesise controllers, score the fronts
and validate controllers in the robot simulator. Every artifact written
carries a manifest of the run that produced it, and an artifact is only
overwritten by a run over the same inputs unless --force is given.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import (
    Any, Callable, Dict, Iterator, Mapping, NamedTuple, Sequence, Tuple,
)

import numpy as np

from . import pdtmc
from ._version import __version__
from .augment import AugmentationSpec, augment, augment_source
from .builder import BuildOptions, build
from .config import Profile, get_profile, resolve_seed
from .controller import ControllerAssignment
from .exceptions import DecsynthError, InputDriftError, InputFileError
from .language import format_model, parse
from .logging import log_to_debug, setup_logging
from .models import STUDIES, requirements_path, source_path
from .pareto import ParetoFront, hv, igd
from .pctl import parse_query, pmc
from .simulator import (
    EncounterBuckets, SimConfig, SurrogatePerception, estimate_time_constants,
    generate_dataset, model_gap, robot_constants, validate_controller,
)
from .synth import (
    GaSettings, Requirements, controller_kind, evolutionary_search,
    grid_search,
)
from .uncertainty import (
    ConfusionTensor, accuracy_report, ingest, perfect_tensor, read_samples,
    write_samples,
)
from .utils import default_jobs, format_real, sha256_file

logger = logging.getLogger(__name__)

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

_MANIFEST_COMMENT = '// manifest '
# Options that change how a run is carried out, not what it produces
_RUN_FLAGS = frozenset({'handler', 'debug', 'trace', 'force', 'jobs'})


class RunManifest(NamedTuple):
    """
    What produced an artifact.

    :param subcommand: The subcommand that ran
    :param inputs: The path of each input file, keyed by its role
    :param options: Every resolved option of the run
    :param version: The decsynth version
    :param seed: The seed of the run, None if it used no randomness
    :param hashes: The SHA-256 of each input file, keyed by its role
    """
    subcommand: str
    inputs: Dict[str, str]
    options: Dict[str, Any]
    version: str
    seed: int | None
    hashes: Dict[str, str]

    @classmethod
    def create(
        cls,
        args: argparse.Namespace,
        inputs: Mapping[str, Path | None],
        seed: int | None = None,
    ) -> RunManifest:
        """
        Describe a run, hashing its input files.

        Shipped studies are recorded by the path of their source files.
        """
        present = {role: path for role, path in inputs.items() if path is not None}
        return cls(
            subcommand=_subcommand(args),
            inputs={role: str(path) for role, path in present.items()},
            options=_options(args),
            version=__version__,
            seed=seed,
            hashes={role: sha256_file(path) for role, path in present.items()},
        )

    def to_json(self) -> Dict[str, Any]:
        return self._asdict()


def _subcommand(args: argparse.Namespace) -> str:
    action = getattr(args, 'action', None)
    return f"{args.command} {action}" if action else args.command


def _options(args: argparse.Namespace) -> Dict[str, Any]:
    options: Dict[str, Any] = {}
    for key, value in sorted(vars(args).items()):
        if key in _RUN_FLAGS:
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, (list, tuple)):
            value = [str(v) for v in value]
        options[key] = value
    return options


# Artifacts

def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + '.manifest.json')


def read_artifact_manifest(path: Path) -> Dict[str, Any] | None:
    """
    Read the manifest embedded in an artifact.

    JSON documents hold it under ``manifest``, explicit models and ``.pm``
    renderings in a leading comment, and CSV files in a sidecar
    ``<name>.manifest.json``.

    :param path: The artifact
    :return: The manifest, or None if the artifact has none
    """
    if path.suffix == '.csv':
        sidecar = _sidecar(path)
        return json.loads(sidecar.read_text()) if sidecar.exists() else None
    text = path.read_text()
    if path.suffix == '.json':
        try:
            document = json.loads(text)
        except json.JSONDecodeError:
            return None
        return document.get('manifest') if isinstance(document, dict) else None
    if path.suffix == '.pm':
        first = text.split('\n', 1)[0]
        if not first.startswith(_MANIFEST_COMMENT):
            return None
        return json.loads(first[len(_MANIFEST_COMMENT):])
    return pdtmc.read_manifest(text)


def _guard(path: Path, manifest: RunManifest, force: bool) -> None:
    """
    Refuse to overwrite an artifact produced from other inputs.

    :raises InputDriftError: If the artifact exists with different input
        hashes, or without a manifest, and force is not set
    """
    if not path.exists():
        return
    previous = read_artifact_manifest(path)
    if previous is not None and previous.get('hashes') == manifest.hashes:
        logger.debug(f"Replacing {path}, produced from the same inputs")
        return
    if not force:
        raise InputDriftError(str(path))
    logger.warning(f"Overwriting {path}, which was produced from different inputs")


def _write_json(path: Path, document: Mapping[str, Any], manifest: RunManifest, force: bool) -> None:
    _guard(path, manifest, force)
    path.write_text(json.dumps({**document, 'manifest': manifest.to_json()}, indent=2) + '\n')
    logger.info(f"Wrote {path}")


def _write_csv(path: Path, writer: Callable[[Path], None], manifest: RunManifest, force: bool) -> None:
    _guard(path, manifest, force)
    writer(path)
    _sidecar(path).write_text(json.dumps(manifest.to_json(), indent=2) + '\n')
    logger.info(f"Wrote {path}")


def _write_model(path: Path, model: pdtmc.ExplicitPDTMC, manifest: RunManifest, force: bool) -> None:
    _guard(path, manifest, force)
    pdtmc.save(model, path, manifest.to_json())
    logger.info(f"Wrote {path}")


# Inputs

@contextmanager
def _reading(path: Path | str) -> Iterator[None]:
    """Name the file in any error raised while using it."""
    try:
        yield
    except InputFileError:
        raise
    except (DecsynthError, ValueError, KeyError) as e:
        raise InputFileError(str(path), e) from e


def _pairs(items: Sequence[str], flag: str) -> Iterator[Tuple[str, str]]:
    for item in items:
        name, sep, value = item.partition('=')
        if not sep or not name.strip():
            raise ValueError(f"{flag} expects name=value, got {item!r}")
        yield name.strip(), value.strip()


def _constant(raw: str) -> bool | int | float:
    if raw in ('true', 'false'):
        return raw == 'true'
    try:
        return int(raw)
    except ValueError:
        return float(raw)


def _model_path(model: str) -> Path:
    return source_path(model) if model in STUDIES else Path(model)


def _study(args: argparse.Namespace) -> str | None:
    model = getattr(args, 'model', None)
    return model if model in STUDIES else None


def _settings(args: argparse.Namespace) -> Profile:
    return get_profile(args.profile or 'default')


def _build_options(args: argparse.Namespace) -> BuildOptions:
    constants = {name: _constant(raw) for name, raw in _pairs(getattr(args, 'const', []), '--const')}
    return BuildOptions(
        constants=constants,
        parameters=frozenset(getattr(args, 'param', [])),
        state_limit=_settings(args)['state_limit'],
    )


def _load_model(path: Path, opts: BuildOptions) -> pdtmc.ExplicitPDTMC:
    """Build a ``.pm`` source, or read an explicit model."""
    with _reading(path):
        if path.suffix == '.pm':
            return build(parse(path.read_text()), opts)
        if opts.constants or opts.parameters:
            raise ValueError("--const and --param only apply to .pm sources")
        return pdtmc.load(path)


def _load_tensor(path: Path) -> ConfusionTensor:
    with _reading(path):
        return ConfusionTensor.load(path)


def _load_front(path: Path) -> ParetoFront:
    with _reading(path):
        return ParetoFront.load(path)


def _pipeline_model(args: argparse.Namespace) -> pdtmc.ExplicitPDTMC:
    """
    Load the model of a run, augmenting it when a tensor is given.

    :raises ValueError: If a tensor is given for a model that is already augmented
    """
    path = _model_path(args.model)
    model = _load_model(path, _build_options(args))
    if args.tensor is None:
        return model
    if any(state.augmented for state in model.states):
        raise ValueError(f"{path} is already augmented, drop --tensor")
    tensor = _load_tensor(args.tensor)
    spec = AugmentationSpec(
        tensor,
        deterministic=getattr(args, 'deterministic', False),
        state_limit=_settings(args)['state_limit'],
    )
    with _reading(path):
        return augment(model, spec)


def _assignment(model: pdtmc.ExplicitPDTMC, pairs: Sequence[str]) -> ControllerAssignment:
    """
    Read ``--assign`` values for a model's families.

    A two-member family can be given by its name and one number, the
    probability of its last member; members can always be given by name.
    """
    families = {family.name: family for family in model.families}
    values: Dict[str, float] = {}
    for name, raw in _pairs(pairs, '--assign'):
        value = float(raw)
        family = families.get(name)
        if family is None:
            values[name] = value
        elif len(family.members) == 2:
            values[family.members[0]] = 1.0 - value
            values[family.members[1]] = value
        else:
            raise ValueError(
                f"Family {name!r} has {len(family.members)} members, assign them by name")
    return ControllerAssignment(values, model.families, controller_kind(model.families))


def _requirements(args: argparse.Namespace) -> Tuple[Requirements, Path]:
    path = args.requirements
    if path is None:
        study = _study(args)
        if study is None:
            raise ValueError("--requirements is needed unless the model is a shipped study")
        path = requirements_path(study)
    with _reading(path):
        return Requirements.load(path), path


def _print_front(front: ParetoFront) -> None:
    print('\t'.join(o.name for o in front.objectives))
    for member in front:
        values = ' '.join(
            f"{name}={format_real(value)}" for name, value in sorted(member.assignment.values.items()))
        print('\t'.join([*(format_real(v) for v in member.objectives), values]))


# Subcommands

@log_to_debug
def _quantify(args: argparse.Namespace) -> None:
    with _reading(args.samples):
        samples, n = read_samples(args.samples)
        classes = args.classes or max((max(s.true, s.pred) for s in samples), default=0)
        tensor = ingest(samples, classes, n)
    manifest = RunManifest.create(args, {'samples': args.samples})
    _write_json(args.out, tensor.to_json(), manifest, args.force)
    print('verdicts\tsamples\taccuracy')
    for row in accuracy_report(tensor).rows():
        print('\t'.join(row))


@log_to_debug
def _build(args: argparse.Namespace) -> None:
    path = _model_path(args.model)
    model = _load_model(path, _build_options(args))
    print(
        f"{len(model)} states, {model.n_transitions} transitions, "
        f"{len(model.families)} parameter families")
    if args.out is not None:
        _write_model(args.out, model, RunManifest.create(args, {'model': path}), args.force)


@log_to_debug
def _augment(args: argparse.Namespace) -> None:
    model = _pipeline_model(args)
    print(f"{len(model)} states, {len(model.families)} parameter families")
    for family in model.families:
        print(f"{family.name}\t{' '.join(family.members)}")
    manifest = RunManifest.create(args, {'model': _model_path(args.model), 'tensor': args.tensor})
    _write_model(args.out, model, manifest, args.force)


@log_to_debug
def _emit(args: argparse.Namespace) -> None:
    path = _model_path(args.model)
    tensor = _load_tensor(args.tensor)
    with _reading(path):
        text = format_model(augment_source(parse(path.read_text()), tensor))
    if args.out is None:
        print(text, end='')
        return
    manifest = RunManifest.create(args, {'model': path, 'tensor': args.tensor})
    _guard(args.out, manifest, args.force)
    args.out.write_text(f"{_MANIFEST_COMMENT}{json.dumps(manifest.to_json(), sort_keys=True)}\n{text}")
    logger.info(f"Wrote {args.out}")


@log_to_debug
def _check(args: argparse.Namespace) -> None:
    model = _pipeline_model(args)
    query = parse_query(args.query)
    if model.is_parametric or args.assign:
        model = pdtmc.instantiate(model, _assignment(model, args.assign))
    value = pmc(query, model)
    if query.bound is None:
        print(format_real(value))
    else:
        print('true' if query.bound.holds(value) else 'false')


@log_to_debug
def _synth(args: argparse.Namespace) -> None:
    settings = _settings(args)
    model = _pipeline_model(args)
    requirements, requirements_file = _requirements(args)
    seed = resolve_seed(args.seed, settings)
    if args.method == 'grid':
        front = grid_search(
            model, requirements,
            step=args.step if args.step is not None else settings['grid_step'],
            deterministic=args.deterministic,
            candidate_limit=(
                args.candidate_limit if args.candidate_limit is not None
                else settings['candidate_limit']),
            jobs=args.jobs,
            keep_evaluated=args.keep_evaluated,
        )
    else:
        ga = GaSettings(
            population=args.population if args.population is not None else settings['population'],
            max_evaluations=(
                args.max_evals if args.max_evals is not None else settings['max_evaluations']),
            seed=seed,
            deterministic=args.deterministic,
            crossover_rate=args.crossover_rate,
            crossover_eta=args.crossover_eta,
            mutation_eta=args.mutation_eta,
            mutation_rate=args.mutation_rate,
        )
        front = evolutionary_search(model, requirements, ga, args.jobs, args.keep_evaluated)
    _print_front(front)

    manifest = RunManifest.create(
        args,
        {'model': _model_path(args.model), 'tensor': args.tensor, 'requirements': requirements_file},
        seed if args.method == 'ga' else None,
    )
    if args.out is not None:
        _write_json(args.out, front.to_json(args.keep_evaluated), manifest, args.force)
    if args.csv is not None:
        _write_csv(args.csv, front.save_csv, manifest, args.force)


@log_to_debug
def _pareto(args: argparse.Namespace) -> None:
    front = _load_front(args.front)
    reference = _load_front(args.reference)
    if args.profile is None:
        # score with the profile the reference was synthesised under
        previous = read_artifact_manifest(args.reference) or {}
        args.profile = previous.get('options', {}).get('profile')
    settings = _settings(args)
    scale = args.hv_scale if args.hv_scale is not None else settings['hv_scale']
    seed = resolve_seed(args.seed, settings)
    scores = {
        'igd': igd(front, reference),
        'hv': hv(front, reference, scale, args.samples, seed),
        'hv_scale': scale,
        'front_size': len(front),
        'reference_size': len(reference),
    }
    print(f"IGD\t{format_real(scores['igd'])}")
    print(f"HV\t{format_real(scores['hv'])}")
    if args.out is not None:
        manifest = RunManifest.create(args, {'front': args.front, 'reference': args.reference}, seed)
        _write_json(args.out, scores, manifest, args.force)


def _sim_config(args: argparse.Namespace) -> SimConfig:
    return SimConfig(seed=resolve_seed(args.seed, _settings(args))).check()


@log_to_debug
def _sim_dataset(args: argparse.Namespace) -> None:
    cfg = _sim_config(args)
    if args.samples_out is not None and args.tensor is None:
        raise ValueError("--samples-out needs a --tensor to perceive the spawns with")
    rng = np.random.default_rng(cfg.seed)
    surrogate = None
    if args.tensor is not None:
        surrogate = SurrogatePerception(_load_tensor(args.tensor), rng)
    dataset = generate_dataset(cfg, args.per_class, surrogate, rng)
    manifest = RunManifest.create(args, {'tensor': args.tensor}, cfg.seed)
    _write_csv(args.out, lambda path: dataset.write_encounters(path, cfg), manifest, args.force)
    if args.samples_out is not None:
        assert surrogate is not None and dataset.samples is not None
        samples = dataset.samples
        n = surrogate.tensor.n
        _write_csv(args.samples_out, lambda path: write_samples(path, samples, n), manifest, args.force)
    print(f"{len(dataset.labels)} spawns, {args.per_class} per class")


@log_to_debug
def _sim_constants(args: argparse.Namespace) -> None:
    cfg = _sim_config(args)
    constants = estimate_time_constants(cfg, args.samples)
    overrides = robot_constants(constants)
    for name, value in overrides.items():
        print(f"--const {name}={format_real(value)}")
    if args.out is not None:
        manifest = RunManifest.create(args, {}, cfg.seed)
        _write_json(args.out, {**constants._asdict(), 'constants': overrides}, manifest, args.force)


def _controller(args: argparse.Namespace, model: pdtmc.ExplicitPDTMC) -> ControllerAssignment:
    if args.front is None:
        return _assignment(model, args.assign)
    if args.assign:
        raise ValueError("Give either --assign or --front, not both")
    front = _load_front(args.front)
    if not 0 <= args.member < len(front):
        raise ValueError(f"--member must be in 0..{len(front) - 1}, got {args.member}")
    values = front.members[args.member].assignment.values
    return ControllerAssignment(values, model.families, controller_kind(model.families))


@log_to_debug
def _sim_validate(args: argparse.Namespace) -> None:
    cfg = _sim_config(args)
    model = _pipeline_model(args)
    assignment = _controller(args, model)
    tensor = _load_tensor(args.tensor) if args.tensor is not None else perfect_tensor(2)
    rng = np.random.default_rng(cfg.seed)
    buckets = EncounterBuckets.build(cfg, args.bucket_size, rng)
    result = validate_controller(
        cfg, assignment, SurrogatePerception(tensor, rng), buckets,
        p_collider=args.p_collider,
        p_occ=args.p_occ,
        wait_time=args.wait_time,
        n_journeys=args.journeys,
        n_waypoints=args.waypoints,
        jobs=args.jobs,
    )
    gap = model_gap(result, model, assignment)
    rows = [
        ("journey time", result.mean_time, None),
        ("journey collisions", result.collision_rate, None),
        ("waypoint collision-free", gap.sim_collision_free, gap.model_collision_free),
        ("waypoint time", gap.sim_time, gap.model_time),
    ]
    for name, simulated, predicted in rows:
        line = f"{name}\tsim {format_real(simulated)}"
        print(line if predicted is None else f"{line}\tmodel {format_real(predicted)}")
    if args.out is not None:
        manifest = RunManifest.create(
            args,
            {'model': _model_path(args.model), 'tensor': args.tensor, 'front': args.front},
            cfg.seed,
        )
        document = {
            'validation': result.to_json(args.raw),
            'model_gap': {
                **gap._asdict(),
                'collision_free_gap': gap.collision_free_gap,
                'time_gap': gap.time_gap,
            },
            'assignment': dict(sorted(assignment.values.items())),
        }
        _write_json(args.out, document, manifest, args.force)


# Parser

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _add_model_arguments(parser: argparse.ArgumentParser, tensor: bool = True) -> None:
    parser.add_argument(
        'model',
        help=f"A .pm source, an explicit model, or a shipped study ({', '.join(STUDIES)})")
    parser.add_argument(
        '--const', action='append', default=[], metavar='NAME=VALUE',
        help="Override a constant of a .pm source")
    parser.add_argument(
        '--param', action='append', default=[], metavar='NAME',
        help="Keep a name symbolic as a parameter family")
    if tensor:
        parser.add_argument(
            '--tensor', type=Path, help="Augment the model with this confusion tensor first")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='decsynth',
        description="Synthesise discrete-event controllers for systems with classifier perception.",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--debug', action='store_true', help="Enable debug logging")
    parser.add_argument('--trace', action='store_true', help="Enable trace logging")
    parser.add_argument(
        '--profile', help="The study profile, defaults to the study named by the model")
    parser.add_argument(
        '--jobs', type=_positive_int, default=None,
        help="Worker processes, defaults to the available CPUs")
    parser.add_argument(
        '--force', action='store_true',
        help="Overwrite artifacts produced from different inputs")
    commands = parser.add_subparsers(dest='command', metavar='COMMAND', required=True)

    quantify = commands.add_parser('quantify', help="Count verified samples into a confusion tensor")
    quantify.add_argument('samples', type=Path, help="CSV of true,pred,v1..vn rows")
    quantify.add_argument('--classes', type=_positive_int, help="The number of classes K")
    quantify.add_argument('--out', type=Path, required=True, help="The tensor JSON to write")
    quantify.set_defaults(handler=_quantify)

    build_cmd = commands.add_parser('build', help="Build the explicit model of a source")
    _add_model_arguments(build_cmd, tensor=False)
    build_cmd.add_argument('--out', type=Path, help="The explicit model to write")
    build_cmd.set_defaults(handler=_build)

    augment_cmd = commands.add_parser('augment', help="Augment a model with classifier perception")
    _add_model_arguments(augment_cmd, tensor=False)
    augment_cmd.add_argument('tensor', type=Path, help="The confusion tensor JSON")
    augment_cmd.add_argument(
        '--deterministic', action='store_true', help="The controller will be deterministic")
    augment_cmd.add_argument('--out', type=Path, required=True, help="The explicit model to write")
    augment_cmd.set_defaults(handler=_augment)

    emit = commands.add_parser('emit', help="Write the augmented model as readable source")
    emit.add_argument('model', help="A .pm source or a shipped study")
    emit.add_argument('tensor', type=Path, help="The confusion tensor JSON")
    emit.add_argument('--out', type=Path, help="The .pm file to write, stdout if not given")
    emit.set_defaults(handler=_emit)

    check = commands.add_parser('check', help="Model check a query")
    _add_model_arguments(check)
    check.add_argument('query', help="The PCTL query, e.g. 'P=? [ F \"done\" ]'")
    check.add_argument(
        '--assign', action='append', default=[], metavar='NAME=VALUE',
        help="Value of a parameter, or of a two-member family's last member")
    check.set_defaults(handler=_check)

    synth = commands.add_parser('synth', help="Synthesise a Pareto front of controllers")
    _add_model_arguments(synth)
    synth.add_argument(
        '--requirements', type=Path, help="Requirements file, defaults to the study's")
    synth.add_argument('--method', choices=('grid', 'ga'), default='grid')
    synth.add_argument('--step', type=float, help="Grid spacing")
    synth.add_argument('--population', type=_positive_int, help="Genetic algorithm population")
    synth.add_argument('--max-evals', type=_positive_int, help="Genetic algorithm evaluation budget")
    synth.add_argument(
        '--crossover-rate', type=float, default=0.9, help="Probability that two parents are recombined")
    synth.add_argument(
        '--crossover-eta', type=float, default=15.0, help="Distribution index of the crossover")
    synth.add_argument(
        '--mutation-eta', type=float, default=20.0, help="Distribution index of the mutation")
    synth.add_argument(
        '--mutation-rate', type=float, help="Per-gene mutation probability, 1/genes by default")
    synth.add_argument('--seed', type=int, help="Random seed")
    synth.add_argument('--deterministic', action='store_true', help="Only deterministic controllers")
    synth.add_argument('--candidate-limit', type=_positive_int, help="Most grid candidates")
    synth.add_argument(
        '--keep-evaluated', action='store_true', help="Record every evaluated candidate")
    synth.add_argument('--out', type=Path, help="The front JSON to write")
    synth.add_argument('--csv', type=Path, help="The front CSV to write")
    synth.set_defaults(handler=_synth)

    pareto = commands.add_parser('pareto', help="Score a front against a reference front")
    pareto.add_argument('front', type=Path, help="The front, JSON or CSV")
    pareto.add_argument('reference', type=Path, help="The reference front, JSON or CSV")
    pareto.add_argument('--hv-scale', type=float, help="Nadir scaling factor")
    pareto.add_argument(
        '--samples', type=_positive_int, default=10**6,
        help="Monte Carlo samples above two objectives")
    pareto.add_argument('--seed', type=int, help="Random seed of the Monte Carlo estimate")
    pareto.add_argument('--out', type=Path, help="The scores JSON to write")
    pareto.set_defaults(handler=_pareto)

    sim = commands.add_parser('sim', help="Run the mobile robot simulator")
    actions = sim.add_subparsers(dest='action', metavar='ACTION', required=True)

    dataset = actions.add_parser('dataset', help="Generate a class-balanced dataset of spawns")
    dataset.add_argument('--per-class', type=_positive_int, default=1000)
    dataset.add_argument('--tensor', type=Path, help="Perceive the spawns with this tensor")
    dataset.add_argument('--seed', type=int)
    dataset.add_argument('--out', type=Path, required=True, help="The spawns CSV to write")
    dataset.add_argument('--samples-out', type=Path, help="The verified samples CSV to write")
    dataset.set_defaults(handler=_sim_dataset)

    constants = actions.add_parser('constants', help="Measure the robot model's constants")
    constants.add_argument('--samples', type=_positive_int, default=10_000)
    constants.add_argument('--seed', type=int)
    constants.add_argument('--out', type=Path, help="The constants JSON to write")
    constants.set_defaults(handler=_sim_constants)

    validate = actions.add_parser('validate', help="Simulate journeys under a controller")
    _add_model_arguments(validate)
    validate.add_argument(
        '--assign', action='append', default=[], metavar='NAME=VALUE',
        help="Value of a parameter, or of a two-member family's last member")
    validate.add_argument('--front', type=Path, help="Take the controller from this front")
    validate.add_argument('--member', type=int, default=0, help="Index of the front member")
    validate.add_argument('--p-collider', type=float, default=0.5)
    validate.add_argument('--p-occ', type=float, default=0.12)
    validate.add_argument('--wait-time', type=float, default=5.0)
    validate.add_argument('--journeys', type=_positive_int, default=1000)
    validate.add_argument('--waypoints', type=_positive_int, default=100)
    validate.add_argument('--bucket-size', type=_positive_int, default=1000)
    validate.add_argument('--seed', type=int)
    validate.add_argument('--raw', action='store_true', help="Record every journey")
    validate.add_argument('--out', type=Path, help="The validation JSON to write")
    validate.set_defaults(handler=_sim_validate)

    return parser


def _message(error: BaseException) -> str:
    if type(error) is KeyError and error.args:
        return str(error.args[0])
    return str(error)


def dispatch(argv: Sequence[str] | None = None) -> int:
    """
    Run one subcommand.

    :param argv: The arguments, without the program name; sys.argv if None
    :return: 0 on success, 1 if the run failed, 2 if the arguments are invalid
    """
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 for --help and --version
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    setup_logging(args.debug, args.trace)
    logger.debug(f"decsynth v{__version__}")
    args.profile = args.profile or _study(args)
    args.jobs = args.jobs or default_jobs()

    try:
        args.handler(args)
    except (DecsynthError, ValueError, KeyError, OSError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"decsynth: error: {_message(e)}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def main() -> None:
    """The console script entry point."""
    sys.exit(dispatch())

