"""Optional numba acceleration.

Set ``AMINOTHREAD_DISABLE_NUMBA=1`` before import to force the pure-numpy
code paths (useful for debugging and for the kernel benchmark).
"""

import logging
import os

logger = logging.getLogger(__name__)

_FLAG = "AMINOTHREAD_DISABLE_NUMBA"


def _flag_set():
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    if _flag_set():
        raise ImportError(f"disabled via {_FLAG}")
    import numba as _numba
except ImportError as exc:  # pragma: no cover - depends on environment
    _numba = None
    logger.debug("numba unavailable: %s", exc)

HAVE_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
