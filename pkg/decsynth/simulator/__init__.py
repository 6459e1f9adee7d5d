"""Simulator of the mobile robot study, for datasets and controller validation."""
from .journeys import (
    EncounterBuckets, ModelGap, TimeConstants, ValidationResult,
    estimate_time_constants, model_gap, robot_constants, validate_controller,
)
from .kinematics import (
    COLLISION, NO_COLLISION, EncounterState, Encounters, JourneyOutcome,
    SimConfig, label_oracle, sample_encounters, simulate_batch,
    simulate_encounter,
)
from .perception import Dataset, SurrogatePerception, generate_dataset

__all__ = [
    'COLLISION',
    'Dataset',
    'EncounterBuckets',
    'EncounterState',
    'Encounters',
    'JourneyOutcome',
    'ModelGap',
    'NO_COLLISION',
    'SimConfig',
    'SurrogatePerception',
    'TimeConstants',
    'ValidationResult',
    'estimate_time_constants',
    'generate_dataset',
    'label_oracle',
    'model_gap',
    'robot_constants',
    'sample_encounters',
    'simulate_batch',
    'simulate_encounter',
    'validate_controller',
]
