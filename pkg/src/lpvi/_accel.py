"""Backend switch for the compiled kernels.

Set ``LPVI_DISABLE_NUMBA=1`` before import to force the pure-numpy
path. Without numba installed the numpy path is used regardless.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
_disabled = os.environ.get("LPVI_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = NUMBA_AVAILABLE and not _disabled


def njit(fn=None, **kwargs):
    """``numba.njit`` with on-disk caching; identity decorator without numba."""
    if not NUMBA_AVAILABLE:
        return fn if fn is not None else (lambda f: f)
    kwargs.setdefault("cache", True)
    if fn is None:
        return numba.njit(**kwargs)
    return numba.njit(**kwargs)(fn)


def backend():
    return "numba" if USE_NUMBA else "numpy"
