"""General utility functions for the decsynth package."""
from __future__ import annotations

import hashlib
import logging
import math
import os
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)

# Tolerance used for every stochasticity and simplex check
PROBABILITY_TOLERANCE = 1e-9


def probability_bounds_check(
        value: Any,
        err_msg: str,
        min_val: float = 0.0,
        max_val: float = 1.0,
) -> float:
    """
    Test that a value can be converted to a float and is within the given bounds.

    Errors are caught and re-raised with a more descriptive message.

    :param value: The value to test
    :param err_msg: The error message to raise if the value is invalid or out of bounds
    :param min_val: The minimum allowed value, defaults to 0
    :param max_val: The maximum allowed value, defaults to 1
    :raises TypeError: If the value cannot be converted to a float
    :raises ValueError: If the value is out of bounds or not finite
    :return: The input value converted to a float
    """
    try:
        new_val = float(value)
    except (TypeError, ValueError) as e:
        raise TypeError(err_msg) from e

    if not math.isfinite(new_val):
        raise ValueError(err_msg)
    if (new_val < min_val) or (new_val > max_val):
        raise ValueError(err_msg)

    return new_val


def sha256_file(path: Path | str) -> str:
    """
    Hash the contents of a file.

    :param path: The file to hash
    :return: The hex digest of the file's SHA-256
    """
    digest = hashlib.sha256()
    with Path(path).open('rb') as file:
        for chunk in iter(lambda: file.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def format_real(value: float) -> str:
    """
    Render a float so that reading it back gives the same float.

    Infinite values render as ``inf`` and ``-inf``.

    :param value: The value to render
    :return: The shortest exact decimal rendering
    """
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return repr(float(value))


def default_jobs() -> int:
    """
    Number of worker processes to use when none is requested.

    :return: The CPUs available to this process, at least 1
    """
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        # not available on every platform
        return max(1, os.cpu_count() or 1)
