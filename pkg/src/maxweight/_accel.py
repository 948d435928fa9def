"""Numba switch.

Kernels in :mod:`maxweight._kernels` exist twice: a loop form compiled with
``numba.njit`` and a numpy form.  ``MAXWEIGHT_NUMBA=0`` (read once, at import)
selects the numpy form; so does a missing numba install.  Both forms perform
the same floating-point operations in the same order, so traces are
bit-identical across backends.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("MAXWEIGHT_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(func):
    """Compile ``func`` with numba when it is importable, else return it as is."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
