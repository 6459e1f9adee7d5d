"""
Implementation of loading study profiles.

A profile holds the settings of one case study: the hypervolume scale, grid
step, genetic algorithm settings, seed and the caps applied while building
and searching. Built-in profiles exist for the robot and SafeSCAD studies.
A JSON file can override them. The environment variable DECSYNTH_CONFIG_PATH
specifies a directory where it, and its children, are searched for the JSON
file to load.

Example configuration file:
```json
{
    "robot": {"grid_step": 0.05, "seed": 7},
    "safescad": {"population": 200}
}
```
"""
from __future__ import annotations

import copy
import json
import logging
import os
from pathlib import Path
from typing import Dict, TypedDict

from .exceptions import ConfigKeyError

logger = logging.getLogger(__name__)

# The name of the environment variable that specifies the path to search
# for configuration files
CONFIG_ENV_VAR = "DECSYNTH_CONFIG_PATH"
# The name of the environment variable supplying a seed when none is given
SEED_ENV_VAR = "DECSYNTH_SEED"
# The name of the configuration file
CONFIG_NAME = "decsynth.json"


class Profile(TypedDict):
    """
    The settings of one study.

    :param hv_scale: Factor applied to the reference front's extrema to find the nadir
    :param grid_step: Step of the exhaustive search
    :param population: Population size of the genetic algorithm
    :param max_evaluations: Evaluation budget of the genetic algorithm
    :param seed: The default seed
    :param state_limit: The largest state space that may be built
    :param candidate_limit: The most candidates the grid search may enumerate
    """
    hv_scale: float
    grid_step: float
    population: int
    max_evaluations: int
    seed: int
    state_limit: int
    candidate_limit: int


_BASE_PROFILE: Profile = {
    "hv_scale": 1.5,
    "grid_step": 0.1,
    "population": 100,
    "max_evaluations": 10_000,
    "seed": 0,
    "state_limit": 10**7,
    "candidate_limit": 10**8,
}

# The built-in profiles used if no file overrides them
DEFAULT_PROFILES: Dict[str, Profile] = {
    "default": dict(_BASE_PROFILE),  # type: ignore[dict-item]
    "robot": {**_BASE_PROFILE, "hv_scale": 1.5, "grid_step": 0.1},
    "safescad": {
        **_BASE_PROFILE,
        "hv_scale": 1.75,
        "population": 1000,
        "max_evaluations": 200_000,
    },
}


def load() -> Dict[str, Profile]:
    """
    Search for a configuration file and merge it over the built-in profiles.

    Searches the path identified by DECSYNTH_CONFIG_PATH and its children for
    decsynth.json (set by CONFIG_NAME) and reads it.

    :raises FileNotFoundError: If the configured search path does not exist
    :return: All profiles, keyed by name
    """
    profiles = copy.deepcopy(DEFAULT_PROFILES)
    search_path = os.environ.get(CONFIG_ENV_VAR)
    if search_path:
        search_root = Path(search_path)
        if not search_root.is_dir():
            raise FileNotFoundError(f"Configuration path {search_path} does not exist")
        for item in sorted(search_root.iterdir()):
            try:
                if item.is_dir() and (item / CONFIG_NAME).exists():
                    return _merge(profiles, _load_config(item / CONFIG_NAME))
                elif item.name == CONFIG_NAME:
                    return _merge(profiles, _load_config(item))
            except PermissionError:
                logger.debug(f"Unable to read {item}")
        else:
            logger.info(f"No JSON configuration files found in {search_path}")
    else:
        logger.debug(f"{CONFIG_ENV_VAR} not set, using built-in profiles")
    return profiles


def get_profile(name: str) -> Profile:
    """
    Load the named profile.

    Unknown names start from the base settings, so a configuration file can
    define new studies.

    :param name: The profile name
    :return: The profile's settings
    """
    profiles = load()
    if name not in profiles:
        logger.warning(f"Profile {name!r} is not defined, using default settings")
        return profiles["default"]
    return profiles[name]


def resolve_seed(flag: int | None, profile: Profile) -> int:
    """
    Pick the seed for a run.

    A seed given on the command line wins, then DECSYNTH_SEED, then the profile.

    :param flag: The seed from the command line, if any
    :param profile: The active profile
    :raises ValueError: If DECSYNTH_SEED is not an integer
    :return: The seed to use
    """
    if flag is not None:
        return flag
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed:
        try:
            return int(env_seed)
        except ValueError as e:
            raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from e
    return profile["seed"]


def _merge(profiles: Dict[str, Profile], overrides: Dict[str, Dict[str, object]]) -> Dict[str, Profile]:
    for name, fields in overrides.items():
        base = profiles.get(name, profiles["default"])
        merged = dict(base)
        merged.update(fields)
        profiles[name] = merged  # type: ignore[assignment]
    return profiles


def _load_config(path: Path) -> Dict[str, Dict[str, object]]:
    """
    Load the profile overrides from a JSON file, found by `load`.

    The file must be a JSON object mapping profile names to objects of profile fields.

    :param path: The path to the configuration file
    :raises RuntimeError: If the configuration file is invalid JSON
    :raises TypeError: If the file or one of its profiles is not a JSON object
    :raises ConfigKeyError: If a profile names an unknown field
    :return: The overrides, keyed by profile name
    """
    logger.info(f"Loading configuration from {path}")
    with path.open() as file:
        try:
            obj = json.load(file)
        except json.decoder.JSONDecodeError as e:
            raise RuntimeError("Unable to load configuration.") from e

    if not isinstance(obj, dict):
        raise TypeError(f"Found configuration file, but format is invalid. Got: {obj}")

    for name, fields in obj.items():
        if not isinstance(fields, dict):
            raise TypeError(f"Profile {name!r} must be a JSON object. Got: {fields}")
        # check keys are known at runtime
        for key in fields.keys():
            if key not in Profile.__annotations__:
                raise ConfigKeyError(key)

    return obj
