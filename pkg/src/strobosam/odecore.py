"""Explicit Runge-Kutta integration used as macro-integrator by every technique.

The adaptive solver is the Dormand-Prince 8(5,3) pair with its 7th order
continuous extension (Hairer, Norsett & Wanner, "Solving ODEs I", II.10),
compiled with numba.  Output at requested times is produced by the dense
output; the step-size sequence never sees the output grid.

Right-hand sides handed to the kernels must be jitted functions with the
signature ``rhs(t, y, p) -> dy`` where ``p`` is a float64 parameter vector.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from ._jit import RHS_TYPE, njit, rhs_jit, sig

__all__ = [
    "IntegrationError",
    "StepSizeUnderflow",
    "BudgetExhausted",
    "DivergenceError",
    "MacroConfig",
    "Trajectory",
    "adaptive_integrate",
    "fixed_rk4",
    "rhs_jit",
]


class IntegrationError(RuntimeError):
    """Base class for integration failures."""


class StepSizeUnderflow(IntegrationError):
    """stiffness/accuracy failure: step size fell below round-off level."""


class BudgetExhausted(IntegrationError):
    """budget exhausted: more than ``max_steps`` steps attempted."""


class DivergenceError(IntegrationError):
    """divergence: the numerical state became non-finite."""


# status codes returned by the kernels
OK = 0
UNDERFLOW = 1
BUDGET = 2
DIVERGED = 3

_ERRORS = {
    UNDERFLOW: (StepSizeUnderflow, "stiffness/accuracy failure"),
    BUDGET: (BudgetExhausted, "budget exhausted"),
    DIVERGED: (DivergenceError, "divergence"),
}

N_STAGES = _dop.N_STAGES
N_EXT = _dop.N_STAGES_EXTENDED
A = np.ascontiguousarray(_dop.A, dtype=np.float64)
B = np.ascontiguousarray(_dop.B, dtype=np.float64)
C = np.ascontiguousarray(_dop.C, dtype=np.float64)
E3 = np.ascontiguousarray(_dop.E3, dtype=np.float64)
E5 = np.ascontiguousarray(_dop.E5, dtype=np.float64)
D = np.ascontiguousarray(_dop.D, dtype=np.float64)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass
class MacroConfig:
    """Settings of the adaptive macro-integrator.

    ``output_times`` must be strictly monotone in the direction of
    integration and lie inside the span; ``None`` means "span end points only".
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    initial_step: Optional[float] = None
    max_steps: int = 50_000_000
    output_times: Optional[Sequence[float]] = None
    max_factor: float = MAX_FACTOR
    min_factor: float = MIN_FACTOR
    safety: float = SAFETY

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not (0 < self.min_factor < 1 < self.max_factor and 0 < self.safety <= 1):
            raise ValueError("step controller limits out of range")


@dataclass
class Trajectory:
    """Time-stamped samples of a numerical solution."""

    times: np.ndarray
    states: np.ndarray
    technique: str = ""
    wall_time: float = 0.0
    params: Any = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states differ in length")
        d = np.diff(self.times)
        if d.size and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("times must be strictly monotone")

    def __len__(self):
        return self.times.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# ---------------------------------------------------------------- kernels


@njit
def _rms(x):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return np.sqrt(s / x.shape[0])


@njit
def _all_finite(y):
    for i in range(y.shape[0]):
        if not np.isfinite(y[i]):
            return False
    return True


@njit
def _initial_step(fun, p, t0, y0, f0, direction, span, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = fun(t0 + h0 * direction, y0 + h0 * direction * f0, p)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1, span)


@njit
def _dense_coeffs(fun, p, t, y, f_old, y_new, f_new, h, K):
    """Fill the three extra stages and return the interpolation rows."""
    n = y.shape[0]
    for s in range(N_STAGES + 1, N_EXT):
        dy = np.zeros(n)
        for r in range(s):
            a = A[s, r]
            if a != 0.0:
                dy += a * K[r]
        K[s] = fun(t + C[s] * h, y + h * dy, p)
    F = np.empty((7, n))
    delta = y_new - y
    F[0] = delta
    F[1] = h * f_old - delta
    F[2] = 2.0 * delta - h * (f_new + f_old)
    for i in range(4):
        acc = np.zeros(n)
        for r in range(N_EXT):
            d = D[i, r]
            if d != 0.0:
                acc += d * K[r]
        F[3 + i] = h * acc
    return F


@njit
def _dense_eval(F, y_old, x):
    """Evaluate the continuous extension at fraction ``x`` of the step."""
    out = np.zeros(y_old.shape[0])
    for i in range(7):
        out += F[6 - i]
        if i % 2 == 0:
            out *= x
        else:
            out *= 1.0 - x
    return out + y_old


@njit(sig(lambda T: T.Tuple((T.int64, T.float64[:, ::1], T.int64, T.float64[::1]))(
    RHS_TYPE, T.float64[::1], T.float64, T.float64[::1], T.float64, T.float64[::1],
    T.float64, T.float64, T.float64, T.int64, T.float64, T.float64, T.float64)))
def dop853_kernel(fun, p, t0, y0, t_end, t_out, rtol, atol, h_init,
                  max_steps, max_factor, min_factor, safety):
    """Integrate ``y' = fun(t, y, p)`` from ``t0`` to ``t_end``.

    Returns ``(status, y_out, n_filled, stats)`` where ``y_out[i]`` is the
    state at ``t_out[i]`` and ``stats = [accepted, rejected, nfev, t_reached]``.
    """
    n = y0.shape[0]
    n_out = t_out.shape[0]
    y_out = np.full((n_out, n), np.nan)
    stats = np.zeros(4)
    direction = 1.0 if t_end > t0 else -1.0
    span = abs(t_end - t0)
    K = np.empty((N_EXT, n))

    t = t0
    y = y0.copy()
    f = fun(t, y, p)
    nfev = 1
    k_out = 0
    while k_out < n_out and t_out[k_out] == t0:
        y_out[k_out] = y
        k_out += 1

    if h_init > 0.0:
        h_abs = min(h_init, span)
    else:
        h_abs = _initial_step(fun, p, t, y, f, direction, span, rtol, atol)
        nfev += 1

    accepted = 0
    rejected = 0
    status = 0
    err5 = np.empty(n)
    err3 = np.empty(n)
    ytmp = np.empty(n)
    while direction * (t_end - t) > 0.0:
        if accepted + rejected >= max_steps:
            status = 2
            break
        min_step = 10.0 * abs(np.nextafter(t, direction * np.inf) - t)
        if h_abs < min_step:
            h_abs = min_step
        step_rejected = False
        nonfinite = False
        while True:
            if h_abs < min_step:
                status = 3 if nonfinite else 1
                break
            h = h_abs * direction
            t_new = t + h
            if direction * (t_new - t_end) > 0.0:
                t_new = t_end
            h = t_new - t
            h_abs = abs(h)

            K[0] = f
            for s in range(1, N_STAGES):
                for i in range(n):
                    acc_i = 0.0
                    for r in range(s):
                        acc_i += A[s, r] * K[r, i]
                    ytmp[i] = y[i] + h * acc_i
                K[s] = fun(t + C[s] * h, ytmp, p)
            y_new = np.empty(n)
            for i in range(n):
                acc_i = 0.0
                for r in range(N_STAGES):
                    acc_i += B[r] * K[r, i]
                y_new[i] = y[i] + h * acc_i
            f_new = fun(t_new, y_new, p)
            K[N_STAGES] = f_new
            nfev += N_STAGES

            for i in range(n):
                scale = atol + max(abs(y[i]), abs(y_new[i])) * rtol
                e5 = 0.0
                e3 = 0.0
                for r in range(N_STAGES + 1):
                    e5 += E5[r] * K[r, i]
                    e3 += E3[r] * K[r, i]
                err5[i] = e5 / scale
                err3[i] = e3 / scale
            n5 = 0.0
            n3 = 0.0
            for i in range(n):
                n5 += err5[i] * err5[i]
                n3 += err3[i] * err3[i]
            if n5 == 0.0 and n3 == 0.0:
                err = 0.0
            else:
                err = h_abs * n5 / np.sqrt((n5 + 0.01 * n3) * n)

            if not np.isfinite(err) or not _all_finite(y_new):
                nonfinite = True
                h_abs *= min_factor
                step_rejected = True
                rejected += 1
                continue
            nonfinite = False
            if err < 1.0:
                if err == 0.0:
                    factor = max_factor
                else:
                    factor = min(max_factor, safety * err ** (-1.0 / 8.0))
                if step_rejected:
                    factor = min(1.0, factor)
                h_abs *= factor
                break
            h_abs *= max(min_factor, safety * err ** (-1.0 / 8.0))
            step_rejected = True
            rejected += 1
        if status != 0:
            break

        accepted += 1
        # outputs falling inside (t, t_new]
        if k_out < n_out and direction * (t_out[k_out] - t_new) <= 0.0:
            F = np.empty((0, 0))
            have_dense = False
            while k_out < n_out and direction * (t_out[k_out] - t_new) <= 0.0:
                if t_out[k_out] == t_new:
                    y_out[k_out] = y_new
                else:
                    if not have_dense:
                        F = _dense_coeffs(fun, p, t, y, f, y_new, f_new, h, K)
                        nfev += N_EXT - N_STAGES - 1
                        have_dense = True
                    y_out[k_out] = _dense_eval(F, y, (t_out[k_out] - t) / h)
                k_out += 1
        t = t_new
        y = y_new
        f = f_new

    stats[0] = accepted
    stats[1] = rejected
    stats[2] = nfev
    stats[3] = t
    return status, y_out, k_out, stats


@njit(sig(lambda T: T.Tuple((T.float64[::1], T.float64[:, ::1]))(
    RHS_TYPE, T.float64[::1], T.float64, T.float64[::1], T.float64)))
def dense_step(fun, p, t, y, h):
    """One DOP853 step of size ``h`` and its interpolation rows (for testing)."""
    n = y.shape[0]
    K = np.empty((N_EXT, n))
    f = fun(t, y, p)
    K[0] = f
    for s in range(1, N_STAGES):
        dy = np.zeros(n)
        for r in range(s):
            dy += A[s, r] * K[r]
        K[s] = fun(t + C[s] * h, y + h * dy, p)
    acc = np.zeros(n)
    for r in range(N_STAGES):
        acc += B[r] * K[r]
    y_new = y + h * acc
    f_new = fun(t + h, y_new, p)
    K[N_STAGES] = f_new
    F = _dense_coeffs(fun, p, t, y, f, y_new, f_new, h, K)
    return y_new, F


@njit(sig(lambda T: T.Tuple((T.int64, T.float64[:, ::1]))(
    RHS_TYPE, T.float64[::1], T.float64, T.float64[::1], T.float64, T.int64)))
def rk4_kernel(fun, p, t0, y0, h, n_steps):
    n = y0.shape[0]
    out = np.empty((n_steps + 1, n))
    out[0] = y0
    y = y0.copy()
    status = 0
    for j in range(n_steps):
        t = t0 + j * h
        k1 = fun(t, y, p)
        k2 = fun(t + 0.5 * h, y + 0.5 * h * k1, p)
        k3 = fun(t + 0.5 * h, y + 0.5 * h * k2, p)
        k4 = fun(t + h, y + h * k3, p)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[j + 1] = y
        if not _all_finite(y):
            status = 3
            break
    return status, out


# ---------------------------------------------------------------- wrappers


def _raise_for(status: int, where: float):
    exc, msg = _ERRORS[status]
    raise exc(f"{msg} at t={where:.17g}")


def _as_pvec(p) -> np.ndarray:
    if p is None:
        return np.zeros(1)
    if hasattr(p, "pack"):
        p = p.pack()
    return np.ascontiguousarray(p, dtype=np.float64).reshape(-1)


def adaptive_integrate(rhs: Callable, y0, span, cfg: Optional[MacroConfig] = None,
                       p=None, technique: str = "", params: Any = None) -> Trajectory:
    """Integrate ``y' = rhs(t, y, p)`` over ``span`` with DOP853.

    Parameters
    ----------
    rhs : jitted callable ``(t, y, p) -> ndarray``
    y0 : array_like
    span : (t_start, t_end); either direction
    cfg : MacroConfig; states are returned at ``cfg.output_times`` (or at the
        two span ends when unset)
    p : float64 vector or object with ``pack()`` forwarded to ``rhs``

    Raises
    ------
    StepSizeUnderflow, BudgetExhausted, DivergenceError
    """
    cfg = cfg or MacroConfig()
    t0, t1 = float(span[0]), float(span[1])
    if t0 == t1:
        raise ValueError("empty integration span")
    y0 = np.ascontiguousarray(y0, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state must be finite")
    if cfg.output_times is None:
        t_out = np.array([t0, t1])
    else:
        t_out = np.ascontiguousarray(cfg.output_times, dtype=np.float64).reshape(-1)
        direction = np.sign(t1 - t0)
        if t_out.size > 1 and not np.all(direction * np.diff(t_out) > 0):
            raise ValueError("output_times must be strictly monotone along the span")
        lo, hi = min(t0, t1), max(t0, t1)
        if t_out.size and (t_out.min() < lo or t_out.max() > hi):
            raise ValueError("output_times outside the integration span")
    h_init = float(cfg.initial_step) if cfg.initial_step else 0.0

    start = time.perf_counter()
    status, y_out, n_filled, stats = dop853_kernel(
        rhs, _as_pvec(p), t0, y0, t1, t_out, float(cfg.rel_tol),
        float(cfg.abs_tol), h_init, int(cfg.max_steps), float(cfg.max_factor),
        float(cfg.min_factor), float(cfg.safety))
    wall = time.perf_counter() - start
    if status != OK:
        _raise_for(status, stats[3])
    return Trajectory(t_out, y_out, technique=technique, wall_time=wall,
                      params=params,
                      stats={"accepted": int(stats[0]), "rejected": int(stats[1]),
                             "nfev": int(stats[2])})


def fixed_rk4(rhs: Callable, y0, span, h: float, p=None, technique: str = "rk4",
              params: Any = None) -> Trajectory:
    """Classical RK4 with constant step ``h``; ``h`` must divide the span."""
    t0, t1 = float(span[0]), float(span[1])
    n_steps = int(round((t1 - t0) / h))
    if n_steps <= 0 or abs(n_steps * h - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValueError("h must divide the span length exactly")
    y0 = np.ascontiguousarray(y0, dtype=np.float64).reshape(-1)
    start = time.perf_counter()
    status, out = rk4_kernel(rhs, _as_pvec(p), t0, y0, float(h), n_steps)
    wall = time.perf_counter() - start
    if status != OK:
        _raise_for(status, t0)
    times = t0 + h * np.arange(n_steps + 1)
    times[-1] = t1
    return Trajectory(times, out, technique=technique, wall_time=wall, params=params)
