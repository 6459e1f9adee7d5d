"""
Logging setup shared by the library and the command line.

Log records go to stderr, so the results a subcommand prints on stdout can
be piped on without them.
"""
import functools
import logging
import sys
import time
from contextlib import contextmanager
from typing import Callable, Iterator, TypeVar

if sys.version_info < (3, 10):
    from typing_extensions import ParamSpec
else:
    from typing import ParamSpec
Param = ParamSpec("Param")
RetType = TypeVar("RetType")

# Add a TRACE level to logging, below DEBUG, for per-state and per-candidate detail
TRACE = 5

# Argument reprs longer than this are shortened in debug logs,
# models and tensors would otherwise flood the output
MAX_REPR_LENGTH = 120

# Third party loggers only shown in trace mode
_QUIET_LOGGERS = ('lark',)


def add_trace_level() -> None:
    """Set logging to label messages at level 5 as "TRACE"."""
    logging.addLevelName(TRACE, "TRACE")


def setup_logging(debug_logging: bool, trace_logging: bool) -> None:
    """
    Send log records to stderr at the requested level.

    INFO by default, DEBUG or TRACE on request. The level is set on the root
    logger so every decsynth module inherits it. Records are formatted as
    ``<logger name> - <log level> - <message>``.

    Calling this again changes the level but never adds a second handler.

    :param debug_logging: Show DEBUG records
    :param trace_logging: Show TRACE records, and those of the grammar parser
    """
    if trace_logging:
        level = TRACE
    elif debug_logging:
        level = logging.DEBUG
    else:
        level = logging.INFO

    root_logger = logging.getLogger()
    if not root_logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(fmt='%(name)s - %(levelname)s - %(message)s'))
        root_logger.addHandler(handler)
    root_logger.setLevel(level)

    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.NOTSET if trace_logging else logging.WARNING)
    if level < logging.INFO:
        logging.getLogger(__name__).log(level, f"Logging at {logging.getLevelName(level)}")


def short_repr(value: object, limit: int = MAX_REPR_LENGTH) -> str:
    """
    Return the repr of a value, truncated to a maximum length.

    :param value: The value to represent
    :param limit: The maximum number of characters to return
    :return: The possibly truncated repr
    """
    text = repr(value)
    if len(text) <= limit:
        return text
    return text[:limit - 3] + '...'


def log_to_debug(func: Callable[Param, RetType]) -> Callable[Param, RetType]:
    """
    Wrap a function to log its arguments and return value at DEBUG level.

    Logging is to the function's module logger.

    :param func: A function to wrap in debug logging
    :return: The wrapped function
    """
    logger = logging.getLogger(func.__module__)

    @functools.wraps(func)
    def wrapper_debug(*args: Param.args, **kwargs: Param.kwargs) -> RetType:
        args_repr = [short_repr(a) for a in args]
        kwargs_repr = [f"{k}={short_repr(v)}" for k, v in kwargs.items()]
        signature = ", ".join(args_repr + kwargs_repr)

        logger.debug(f"Calling {func.__qualname__}({signature})")
        value = func(*args, **kwargs)
        logger.debug(f"{func.__qualname__!r} returned {short_repr(value)}")

        return value
    return wrapper_debug


@contextmanager
def timed(logger: logging.Logger, task: str) -> Iterator[None]:
    """
    Log how long the enclosed block took, at DEBUG level.

    :param logger: The logger to report to
    :param task: A short description of the block
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        logger.debug(f"{task} took {time.perf_counter() - start:.3f}s")
