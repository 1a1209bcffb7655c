"""Numba switch.

Set ``SRFB_DISABLE_JIT=1`` to force the pure-numpy kernels, e.g. when
debugging or on platforms without a working numba install.
"""
import os

_FALSY = {"1", "true", "yes", "on"}

try:  # pragma: no cover - depends on environment
    import numba
except ImportError:  # pragma: no cover
    numba = None

JIT_DISABLED = os.environ.get("SRFB_DISABLE_JIT", "").strip().lower() in _FALSY
USE_NUMBA = numba is not None and not JIT_DISABLED


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is available, else return None."""
    if numba is None:
        return None
    return numba.njit(cache=True, nogil=True)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
