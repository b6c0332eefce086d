"""Numba switch.

Hot kernels are decorated with :func:`njit`.  Setting ``STROBOSAM_NO_JIT=1``
in the environment before import turns the decorator into a no-op so the very
same kernels run as plain numpy code (slow, but handy for debugging and for the
jit-vs-numpy benchmark).

Right-hand sides passed to the integrators are typed first-class functions
(:data:`RHS_SIG`); this keeps the integrator kernels cacheable on disk.
"""
import inspect
import os

_FLAG = os.environ.get("STROBOSAM_NO_JIT", "").strip().lower()
USE_NUMBA = _FLAG in ("", "0", "false", "no")

if USE_NUMBA:
    try:
        import numba
        from numba import types
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"

if USE_NUMBA:
    RHS_SIG = types.float64[::1](types.float64, types.float64[::1], types.float64[::1])
    RHS_TYPE = types.FunctionType(RHS_SIG)
else:
    RHS_SIG = RHS_TYPE = None


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` or identity; accepts an optional signature."""
    if args and inspect.isfunction(args[0]):
        if not USE_NUMBA:
            return args[0]
        return numba.njit(cache=True, **kwargs)(args[0])
    if not USE_NUMBA:
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def rhs_jit(fn):
    """Compile ``fn(t, y, p) -> dy`` with the integrator's rhs signature."""
    if not USE_NUMBA:
        return fn
    return numba.njit(RHS_SIG, cache=True)(fn)


def sig(builder):
    """Build a kernel signature lazily (``None`` on the numpy backend)."""
    return builder(types) if USE_NUMBA else None
