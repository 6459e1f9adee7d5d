"""The model sources and requirements of the shipped case studies."""
from __future__ import annotations

from pathlib import Path
from typing import Tuple

MODELS_DIR = Path(__file__).parent

# The shipped studies, by name
STUDIES: Tuple[str, ...] = ('robot', 'safescad')


def _path(name: str, suffix: str) -> Path:
    if name not in STUDIES:
        raise KeyError(f"Unknown study {name!r}, expected one of {', '.join(STUDIES)}")
    return MODELS_DIR / f"{name}{suffix}"


def source_path(name: str) -> Path:
    """
    Locate the model source of a study.

    :param name: The study name
    :raises KeyError: If the study is not shipped
    :return: The path of its ``.pm`` file
    """
    return _path(name, '.pm')


def requirements_path(name: str) -> Path:
    """Locate the requirements file of a study."""
    return _path(name, '.req')


def load_source(name: str) -> str:
    """
    Read the model source of a study.

    :param name: The study name
    :raises KeyError: If the study is not shipped
    :return: The source text
    """
    return source_path(name).read_text()


def load_requirements(name: str) -> str:
    """Read the requirements text of a study."""
    return requirements_path(name).read_text()
