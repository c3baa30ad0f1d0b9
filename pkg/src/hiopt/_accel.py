"""Optional numba acceleration.

Every hot kernel in the package is written once as plain Python over numpy
arrays and passed through :func:`jit`.  With numba importable and the
environment variable ``HIOPT_DISABLE_NUMBA`` unset (or ``0``), kernels are
compiled with ``@njit(cache=True, nogil=True)``; otherwise the Python source
runs as-is and the per-depth argmax switches to a vectorized numpy version.
"""

from __future__ import annotations

import os

DISABLE_ENV = "HIOPT_DISABLE_NUMBA"

try:  # pragma: no cover - numba is a declared dependency
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _flag_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


ENABLED: bool = numba is not None and not _flag_disabled()


def jit(fn):
    """Compile ``fn`` in nopython mode when acceleration is enabled."""
    if ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def jit_signature(*argtypes):
    """Like :func:`jit` but compiled eagerly for one argument signature.

    Kernels that take an objective as an argument need this: a plain
    dispatcher argument is typed per process and defeats the disk cache,
    while a first-class function type is stable.
    """

    def wrap(fn):
        if ENABLED:
            return numba.njit(argtypes, cache=True, nogil=True)(fn)
        return fn

    return wrap


if numba is not None:
    from numba import types as _t

    # f(x, theta) -> float, both arguments contiguous float64 vectors
    POINT_SIGNATURE = _t.float64(_t.float64[::1], _t.float64[::1])
    POINT_FUNCTION = _t.FunctionType(POINT_SIGNATURE)
else:  # pragma: no cover
    POINT_SIGNATURE = POINT_FUNCTION = None


def jit_point(fn):
    """Compile an objective's point kernel ``f(x, theta) -> float``."""
    if ENABLED:
        return numba.njit(POINT_SIGNATURE, cache=True, nogil=True)(fn)
    return fn


def as_kernel_function(fn):
    """``fn`` ready to pass into compiled kernels, or None if it cannot be.

    Lazily jitted user functions get compiled for the point signature here.
    """
    if not ENABLED:
        return None
    from numba.core.registry import CPUDispatcher

    if not isinstance(fn, CPUDispatcher):
        return None
    if POINT_SIGNATURE.args in fn.overloads:
        return fn
    # eagerly compiled dispatchers refuse compile() even for a known signature
    try:
        fn.compile(POINT_SIGNATURE)
    except Exception:  # wrong arity or types: let the Python kernel report it
        return None
    return fn


def is_compiled(fn) -> bool:
    """True if ``fn`` is a numba dispatcher usable from inside compiled kernels."""
    return as_kernel_function(fn) is not None


def backend_name() -> str:
    return "numba" if ENABLED else "numpy"
