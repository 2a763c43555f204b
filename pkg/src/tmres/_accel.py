"""Numba switch.

Set ``TMRES_DISABLE_NUMBA=1`` to run the pure-numpy kernels instead of the
compiled ones. The flag is read once at import time.
"""
from __future__ import annotations

import os

_FLAG = os.environ.get("TMRES_DISABLE_NUMBA", "").strip().lower()

try:  # pragma: no cover - depends on environment
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in {"1", "true", "yes", "on"}


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
