"""Numba switch.

Hot kernels are compiled with numba when it is importable. Setting
``NETPOWER_DISABLE_NUMBA=1`` forces the pure-numpy code paths, which are
kept numerically equivalent and are exercised by the test suite.
"""

from __future__ import annotations

import os

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    NUMBA_AVAILABLE = False

_DISABLED = os.environ.get("NETPOWER_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched without numba."""
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


__all__ = ["njit", "USE_NUMBA", "NUMBA_AVAILABLE", "backend"]
