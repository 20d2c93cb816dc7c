"""Numba switch.

Set ``REARRANGE_BENCH_DISABLE_JIT=1`` to route every kernel through its pure
numpy implementation. The flag is read once at import time.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}

DISABLE_JIT = os.environ.get("REARRANGE_BENCH_DISABLE_JIT", "").strip().lower() not in _FALSEY

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLE_JIT


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator.

    The compiled variant is always built when numba exists, so benchmarks can
    compare both paths in one process regardless of ``DISABLE_JIT``.
    """
    if _numba_njit is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    return _numba_njit(*args, **kwargs)
