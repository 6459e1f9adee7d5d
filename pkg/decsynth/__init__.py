from .augment import AugmentationSpec, augment, check_equivalence, fold_controller
from .builder import BuildOptions, build, check_turn_structure
from .controller import ControllerAssignment, ControllerKind, ParameterFamily
from .exceptions import DecsynthError
from .language import format_model, parse
from .logging import add_trace_level
from .pareto import ParetoFront, hv, igd
from .pctl import parse_query, pmc, pmc_all, satisfies
from .pdtmc import ExplicitPDTMC, instantiate, reachable, validate
from .synth import (
    GaSettings, Requirements, evaluate_candidates, evolutionary_search,
    grid_search, reference_front,
)
from .uncertainty import ConfusionTensor, accuracy_report, ingest, marginalize

add_trace_level()

__all__ = [
    'AugmentationSpec',
    'BuildOptions',
    'ConfusionTensor',
    'ControllerAssignment',
    'ControllerKind',
    'DecsynthError',
    'ExplicitPDTMC',
    'GaSettings',
    'ParameterFamily',
    'ParetoFront',
    'Requirements',
    'accuracy_report',
    'augment',
    'build',
    'check_equivalence',
    'check_turn_structure',
    'evaluate_candidates',
    'evolutionary_search',
    'fold_controller',
    'format_model',
    'grid_search',
    'hv',
    'igd',
    'ingest',
    'instantiate',
    'marginalize',
    'parse',
    'parse_query',
    'pmc',
    'pmc_all',
    'reachable',
    'reference_front',
    'satisfies',
    'validate',
]
