"""Various helper functions for minwave."""
import os
import logging
from typing import Any, Union, TypeVar, Sequence
import coloredlogs
import numpy as np
import voluptuous as vol
from minwave.const import ENV_THREADS

# typing typevar
T = TypeVar('T')

LOGGER = logging.getLogger(__name__)

LEVELS = {
    'debug': logging.DEBUG,
    'info': logging.INFO,
    'warn': logging.WARNING,
    'warning': logging.WARNING,
    'error': logging.ERROR,
    'critical': logging.CRITICAL
}


def set_loggers(logger, file=None, level='info'):
    """Sets up loggers."""
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    level = str(level).lower()
    if level not in LEVELS:
        logger.warning("Unknown log level %s, using info", level)
        level = 'info'
    if file:
        try:
            os.remove(file)
        except OSError:
            pass
        handler = logging.FileHandler(file)
        handler.setLevel(LEVELS[level])
        formatter = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        handler.setFormatter(logging.Formatter(formatter))
        root.addHandler(handler)

    coloredlogs.install(level=level.upper())


def thread_count():
    """Worker count for thread pools, from the environment."""
    raw = os.environ.get(ENV_THREADS)
    if not raw:
        return 1
    try:
        count = int(raw)
    except ValueError:
        LOGGER.warning("Ignoring non-integer %s=%s", ENV_THREADS, raw)
        return 1
    return max(1, count)


def string(value: Any) -> str:
    """Force value to string if not None."""
    if value is not None:
        return str(value)
    raise vol.Invalid("string value is None")


def boolean(value: Any) -> bool:
    """Validate and coerce a boolean value."""
    if isinstance(value, str):
        value = value.lower()
        if value in ('1', 'true', 'yes', 'on', 'enable'):
            return True
        if value in ('0', 'false', 'no', 'off', 'disable'):
            return False
        raise vol.Invalid("invalid boolean value {}".format(value))
    return bool(value)


def ensure_list(value: Union[T, Sequence[T]]) -> Sequence[T]:
    """Wrap value in list if it is not one."""
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


def positive(value: Any) -> float:
    """Validate a strictly positive real number."""
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise vol.Invalid("expected a number, got {}".format(value))
    if number <= 0:
        raise vol.Invalid("expected a positive number, got {}".format(value))
    return number


def _is_pair(value):
    """True when value looks like a [re, im] pair of numbers."""
    return (isinstance(value, (list, tuple)) and len(value) == 2 and
            all(isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in value))


def _to_complex(value):
    """Recursively convert nested [re, im] pairs to complex numbers."""
    if isinstance(value, bool):
        raise vol.Invalid("boolean is not a number")
    if isinstance(value, (int, float)):
        return complex(value)
    if _is_pair(value):
        return complex(value[0], value[1])
    if isinstance(value, (list, tuple)) and value:
        return [_to_complex(item) for item in value]
    raise vol.Invalid("malformed complex value {}".format(value))


def complex_array(value: Any) -> np.ndarray:
    """Coerce a scalar, vector or matrix of [re, im] pairs."""
    array = np.array(_to_complex(value), dtype=complex)
    if array.ndim > 2:
        raise vol.Invalid("expected at most a matrix, got {} axes".format(
            array.ndim))
    return array


def as_matrix(value, size=None):
    """Promote a scalar or array to a square complex matrix."""
    array = np.atleast_2d(np.asarray(value, dtype=complex))
    if array.shape == (1, 1) and size is not None and size > 1:
        return array[0, 0] * np.eye(size, dtype=complex)
    return array


def real_array(value: Any) -> np.ndarray:
    """Coerce a number, vector or matrix of real numbers."""
    try:
        array = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise vol.Invalid("expected real numbers, got {}".format(value))
    if array.ndim > 2:
        raise vol.Invalid("expected at most a matrix, got {} axes".format(
            array.ndim))
    return array


def even_order(value: Any) -> int:
    """Validate an even quadrature order of at least 2."""
    try:
        order = int(value)
    except (TypeError, ValueError):
        raise vol.Invalid("expected an integer, got {}".format(value))
    if order < 2 or order % 2:
        raise vol.Invalid("quadrature order must be even and >= 2, "
                          "got {}".format(value))
    return order
