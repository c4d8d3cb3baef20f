"""Numba availability and the compiled/fallback switch.

Kernels in :mod:`netsel.kernels` exist in two flavours: a numba-compiled
loop and a pure-numpy fallback. ``NETSEL_DISABLE_NUMBA=1`` (or a missing
numba install) routes every public kernel to the fallback. Both flavours
produce identical outputs; the switch only changes speed.
"""

from __future__ import annotations

import os

_FLAG = "NETSEL_DISABLE_NUMBA"


def _disabled_by_env() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise the identity decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)

    def wrap(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
