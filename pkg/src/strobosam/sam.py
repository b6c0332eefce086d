"""Stroboscopic averaging method (SAM) for the swept-frequency Duffing system.

The averaged vector field is never written down: at a macro time ``tau_M``
and state ``y*`` it is estimated by central differences of powers of the
one-period map, each power computed by Strang-split micro-integration of the
oscillatory system started at the *initial* time ``tau0``.  The slow forcing
phase is carried by the rescaled slow time ``tau_tilde``, seeded with
``tau_M``.  Mixing up those two seeds gives an algorithm that does not
approximate the Duffing system at all; ``swap_phases=True`` reproduces that
mistake on purpose for regression tests.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._jit import njit, rhs_jit
from .duffing import (N_PARAMS, P_ALPHA, P_B, P_EPS, P_GAMMA, P_OMEGA0, P_TAU0,
                      OscillatorParams)
from .odecore import MacroConfig, Trajectory, adaptive_integrate

P_M = N_PARAMS
P_DIFF = N_PARAMS + 1
P_SWAP = N_PARAMS + 2


@dataclass(frozen=True)
class MicroConfig:
    """Micro-integration settings; the substep is always ``T0/m``."""

    m: int = 40
    diff_order: int = 2
    swap_phases: bool = False

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.diff_order not in (2, 4):
            raise ValueError("diff_order must be 2 or 4")

    def h(self, params: OscillatorParams) -> float:
        return params.T0 / self.m


def pack(params: OscillatorParams, micro: MicroConfig) -> np.ndarray:
    return np.concatenate([params.pack(),
                           [float(micro.m), float(micro.diff_order),
                            1.0 if micro.swap_phases else 0.0]])


@njit
def strang_step(theta, v, tt, j, h, p):
    """Advance ``(theta, v, tau_tilde)`` over micro-step ``j`` of size ``h``.

    ``h < 0`` gives the backward micro-integration.  Returns the new triple.
    """
    om = p[P_OMEGA0]
    eps = p[P_EPS]
    ch = np.cos(0.5 * om * h)
    sh = np.sin(0.5 * om * h)
    th_half = ch * theta + sh * v / om
    v_half = -om * sh * theta + ch * v
    tt_half = tt + 0.5 * h
    if p[P_SWAP] != 0.0:
        # deliberately wrong convention: fast part from tau_tilde, slow part from tau0
        base = tt - j * h
        slow = 0.5 * p[P_ALPHA] * (p[P_TAU0] + (j + 0.5) * h) ** 2
    else:
        base = p[P_TAU0]
        slow = 0.5 * p[P_ALPHA] * tt_half * tt_half
    kick = h * eps * p[P_GAMMA] * th_half * th_half * th_half
    kick += eps * p[P_B] / om * (np.sin(om * (base + (j + 1) * h) - slow)
                                 - np.sin(om * (base + j * h) - slow))
    v_half += kick
    theta_new = ch * th_half + sh * v_half / om
    v_new = -om * sh * th_half + ch * v_half
    return theta_new, v_new, tt_half + 0.5 * h


@njit
def _micro(theta, v, tau_m, j_start, j_stop, h, p):
    """Strang steps ``j_start .. j_stop-1`` of a micro-integration seeded at ``tau_m``."""
    for j in range(j_start, j_stop):
        # tau_tilde is recomputed from j rather than accumulated
        theta, v, _ = strang_step(theta, v, tau_m + j * h, j, h, p)
    return theta, v


@njit
def poincare_pow_kernel(theta, v, tau_m, k, p):
    m = int(p[P_M])
    h = 2.0 * np.pi / p[P_OMEGA0] / m
    if k < 0:
        h = -h
        k = -k
    return _micro(theta, v, tau_m, 0, k * m, h, p)


@rhs_jit
def sam_rhs(t, y, p):
    """Estimated averaged field at macro time ``t`` (= tau_M)."""
    m = int(p[P_M])
    T0 = 2.0 * np.pi / p[P_OMEGA0]
    h = T0 / m
    out = np.empty(2)
    if p[P_DIFF] == 4.0:
        # the first period of each two-period sweep gives the +-1 powers
        tf, vf = _micro(y[0], y[1], t, 0, m, h, p)
        tf2, vf2 = _micro(tf, vf, t, m, 2 * m, h, p)
        tb, vb = _micro(y[0], y[1], t, 0, m, -h, p)
        tb2, vb2 = _micro(tb, vb, t, m, 2 * m, -h, p)
        out[0] = (-tf2 + 8.0 * tf - 8.0 * tb + tb2) / (12.0 * T0)
        out[1] = (-vf2 + 8.0 * vf - 8.0 * vb + vb2) / (12.0 * T0)
    else:
        tf, vf = _micro(y[0], y[1], t, 0, m, h, p)
        tb, vb = _micro(y[0], y[1], t, 0, m, -h, p)
        out[0] = (tf - tb) / (2.0 * T0)
        out[1] = (vf - vb) / (2.0 * T0)
    return out


# ---------------------------------------------------------------- public API


def strang_micro_step(state, j: int, h: float, params: OscillatorParams,
                      backward: bool = False, micro: MicroConfig = MicroConfig()):
    """One Strang step from ``state = (theta, v, tau_tilde)``.

    ``h`` is the (positive) substep; ``backward=True`` flips its sign.
    """
    theta, v, tt = state
    step = -h if backward else h
    return strang_step(float(theta), float(v), float(tt), int(j), float(step),
                       pack(params, micro))


def poincare_pow(y_star, tau_M: float, k: int, params: OscillatorParams,
                 micro: MicroConfig = MicroConfig()):
    """Apply ``k`` periods (|k| <= 2) of the micro-integrated one-period map."""
    if k not in (-2, -1, 1, 2):
        raise ValueError("k must be one of -2, -1, 1, 2")
    th, v = poincare_pow_kernel(float(y_star[0]), float(y_star[1]), float(tau_M),
                                int(k), pack(params, micro))
    return float(th), float(v)


def sam_f_eval(y_star, tau_M: float, params: OscillatorParams,
               micro: MicroConfig = MicroConfig()):
    d = sam_rhs(float(tau_M), np.asarray(y_star, dtype=np.float64), pack(params, micro))
    return float(d[0]), float(d[1])


def stroboscopic_times(tau0: float, tau_end: float, T0: float) -> np.ndarray:
    n = int(np.floor((tau_end - tau0) / T0 + 1e-9))
    return tau0 + T0 * np.arange(n + 1)


def sam_integrate(y0, span, params: OscillatorParams, macro: MacroConfig | None = None,
                  micro: MicroConfig = MicroConfig()) -> Trajectory:
    """Macro-integrate the SAM field from ``span[0]`` (which must equal tau0).

    Output defaults to every stroboscopic time in the span.
    """
    tau0, tau_end = float(span[0]), float(span[1])
    if abs(tau0 - params.tau0) > 1e-12 * max(1.0, abs(tau0)):
        raise ValueError("SAM must start at the micro-integration origin tau0")
    if tau_end - tau0 < params.T0 * (1 - 1e-12):
        raise ValueError("span shorter than one period")
    macro = macro or MacroConfig()
    if macro.output_times is None:
        macro = MacroConfig(**{**macro.__dict__,
                               "output_times": stroboscopic_times(tau0, tau_end, params.T0)})
    tech = f"sam_d{micro.diff_order}"
    start = time.perf_counter()
    traj = adaptive_integrate(sam_rhs, y0, (tau0, tau_end), macro, pack(params, micro),
                              technique=tech, params=params)
    traj.wall_time = time.perf_counter() - start
    return traj
