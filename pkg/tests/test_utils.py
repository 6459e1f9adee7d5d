"""Test the shared helpers and the debug logging wrapper."""
from __future__ import annotations

import ast
import hashlib
import logging
import math
from pathlib import Path

import pytest

import decsynth
from decsynth.logging import TRACE, log_to_debug, setup_logging, short_repr, timed
from decsynth.utils import format_real, probability_bounds_check, sha256_file


@pytest.mark.parametrize("value,expected", [
    (0.5, 0.5),
    ("0.25", 0.25),
    (1, 1.0),
    (0, 0.0),
])
def test_probability_bounds_check(value: object, expected: float) -> None:
    assert probability_bounds_check(value, "bad") == expected


@pytest.mark.parametrize("value,error", [
    ("half", TypeError),
    (None, TypeError),
    (1.01, ValueError),
    (-0.1, ValueError),
    (math.inf, ValueError),
    (math.nan, ValueError),
])
def test_probability_bounds_check_errors(value: object, error: type) -> None:
    with pytest.raises(error, match="bad value"):
        probability_bounds_check(value, "bad value")


def test_probability_bounds_check_limits() -> None:
    assert probability_bounds_check(4, "bad", max_val=5) == 4.0
    with pytest.raises(ValueError):
        probability_bounds_check(4, "bad", min_val=4.5, max_val=5)


@pytest.mark.parametrize("value,text", [
    (0.1, '0.1'),
    (1.0, '1.0'),
    (10.104166666666666, '10.104166666666666'),
    (math.inf, 'inf'),
    (-math.inf, '-inf'),
])
def test_format_real(value: float, text: str) -> None:
    assert format_real(value) == text
    assert float(format_real(value)) == value


def test_sha256_file(tmp_path) -> None:
    path = tmp_path / 'data.bin'
    data = bytes(range(256)) * 1000
    path.write_bytes(data)

    assert sha256_file(path) == hashlib.sha256(data).hexdigest()


def test_short_repr() -> None:
    assert short_repr('abc') == "'abc'"
    long = short_repr('x' * 500, limit=20)
    assert len(long) == 20
    assert long.endswith('...')


def test_log_to_debug(caplog) -> None:
    """Test that calls and results are logged to the function's module logger."""
    @log_to_debug
    def add(a: int, b: int = 0) -> int:
        return a + b

    with caplog.at_level(logging.DEBUG, logger=__name__):
        assert add(2, b=3) == 5

    assert [r.name for r in caplog.records] == [__name__, __name__]
    assert "Calling test_log_to_debug.<locals>.add(2, b=3)" in caplog.records[0].getMessage()
    assert "returned 5" in caplog.records[1].getMessage()
    assert add.__name__ == 'add'


def test_timed(caplog) -> None:
    logger = logging.getLogger('decsynth.tests')
    with caplog.at_level(logging.DEBUG, logger='decsynth.tests'):
        with timed(logger, "Nothing"):
            pass

    assert caplog.records[0].getMessage().startswith("Nothing took ")


def test_setup_logging() -> None:
    """Test the levels set for each flag, and that handlers are not duplicated."""
    root = logging.getLogger()
    saved_level = root.level
    handlers = list(root.handlers)
    try:
        setup_logging(debug_logging=True, trace_logging=False)
        assert root.level == logging.DEBUG
        assert logging.getLogger('lark').level == logging.WARNING

        setup_logging(debug_logging=False, trace_logging=True)
        assert root.level == TRACE
        assert logging.getLevelName(TRACE) == 'TRACE'
        assert logging.getLogger('lark').level == logging.NOTSET

        setup_logging(debug_logging=False, trace_logging=False)
        assert root.level == logging.INFO
        assert len(root.handlers) == max(len(handlers), 1)
    finally:
        root.setLevel(saved_level)
        for handler in root.handlers[:]:
            if handler not in handlers:
                root.removeHandler(handler)


def _module_level_unions(path: Path) -> list:
    tree = ast.parse(path.read_text())
    found = []
    for node in tree.body:
        if not isinstance(node, ast.Assign):
            continue
        for subscript in ast.walk(node.value):
            if not isinstance(subscript, ast.Subscript):
                continue
            for inner in ast.walk(subscript.slice):
                if isinstance(inner, ast.BinOp) and isinstance(inner.op, ast.BitOr):
                    found.append(f"{path.name}:{node.lineno}")
    return found


def test_type_aliases_import_on_python39() -> None:
    """
    Test that module-level type aliases avoid ``X | Y``.

    Annotations are deferred, but aliases are evaluated on import, and
    Python 3.9 cannot combine types with ``|``.
    """
    package = Path(decsynth.__file__).parent
    found = [hit for path in sorted(package.rglob('*.py')) for hit in _module_level_unions(path)]

    assert found == []
