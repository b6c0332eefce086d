"""Hand-derived stroboscopically averaged Duffing fields.

The averaged systems live in the rotating frame ``(theta_hat, v_hat)`` and
depend on time only through the slow forcing phase ``c = alpha*tau**2/2``.
Both orders assume the micro-rotation was started at a stroboscopic time,
i.e. ``omega0*tau0`` is a multiple of ``2*pi`` (the second-order field is
only available in that case and the check is enforced for it).
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ._jit import rhs_jit
from .duffing import P_ALPHA, P_B, P_EPS, P_GAMMA, P_OMEGA0, OscillatorParams


class PolarState(NamedTuple):
    r: float
    phi: float


@rhs_jit
def aver1_rhs(t, y, p):
    om = p[P_OMEGA0]
    eps = p[P_EPS]
    g = p[P_GAMMA]
    b = p[P_B]
    c = 0.5 * p[P_ALPHA] * t * t
    th = y[0]
    w = y[1] / om
    rr = th * th + w * w
    out = np.empty(2)
    out[0] = -eps / (8.0 * om) * (3.0 * g * rr * w + 4.0 * b * np.sin(c))
    out[1] = eps / 8.0 * (3.0 * g * rr * th + 4.0 * b * np.cos(c))
    return out


@rhs_jit
def aver2_rhs(t, y, p):
    om = p[P_OMEGA0]
    eps = p[P_EPS]
    g = p[P_GAMMA]
    b = p[P_B]
    c = 0.5 * p[P_ALPHA] * t * t
    sc = np.sin(c)
    cc = np.cos(c)
    th = y[0]
    w = y[1] / om
    th2 = th * th
    w2 = w * w
    out = aver1_rhs(t, y, p)
    k = 3.0 * eps * eps * g / 256.0
    out[0] -= k / (om * om * om) * (
        g * (19.0 * th2 * th2 + 70.0 * th2 * w2 + 35.0 * w2 * w2) * w
        - 24.0 * b * th * w * cc
        + 12.0 * b * (3.0 * th2 + 5.0 * w2) * sc)
    out[1] -= k / (om * om) * (
        g * (13.0 * th2 * th2 - 38.0 * th2 * w2 - 35.0 * w2 * w2) * th
        - 72.0 * b * th * w * sc
        + 4.0 * b * (5.0 * th2 + 3.0 * w2) * cc)
    return out


@rhs_jit
def polar1_rhs(t, y, p):
    om = p[P_OMEGA0]
    eps = p[P_EPS]
    r = y[0]
    mis = y[1] + 0.5 * p[P_ALPHA] * t * t
    out = np.empty(2)
    out[0] = -eps * p[P_B] / (2.0 * om) * np.sin(mis)
    out[1] = -eps * (3.0 * p[P_GAMMA] / (8.0 * om) * r * r
                     + p[P_B] / (2.0 * om) / r * np.cos(mis))
    return out


def check_stroboscopic_tau0(params: OscillatorParams, tol: float = 1e-9):
    """Raise unless ``tau0`` is an integer number of periods."""
    q = params.tau0 / params.T0
    if abs(q - round(q)) > tol * max(1.0, abs(q)):
        raise ValueError("second-order form invalid for this tau0: tau0/T0 is not an integer")


def averaged1_rhs(theta_hat, v_hat, tau, params: OscillatorParams):
    d = aver1_rhs(float(tau), np.array([theta_hat, v_hat], dtype=np.float64), params.pack())
    return float(d[0]), float(d[1])


def averaged2_rhs(theta_hat, v_hat, tau, params: OscillatorParams):
    check_stroboscopic_tau0(params)
    d = aver2_rhs(float(tau), np.array([theta_hat, v_hat], dtype=np.float64), params.pack())
    return float(d[0]), float(d[1])


def polar_averaged1_rhs(state, tau, params: OscillatorParams):
    """``(dr/dtau, dphi/dtau)`` of the first-order field in polar variables."""
    r, phi = state
    if not r > 0:
        raise ValueError("polar singularity: r must be positive")
    d = polar1_rhs(float(tau), np.array([r, phi], dtype=np.float64), params.pack())
    return float(d[0]), float(d[1])


def hat_to_polar(theta_hat, v_hat, params: OscillatorParams):
    """``theta_hat = r cos(phi)``, ``v_hat = -omega0 r sin(phi)``.

    Vectorised; for scalar input returns a :class:`PolarState`.  The phase is
    the principal value in ``(-pi, pi]``; use :func:`unwrap_phase` on a
    sequence to obtain a continuous mismatch.
    """
    th = np.asarray(theta_hat, dtype=float)
    w = np.asarray(v_hat, dtype=float) / params.omega0
    r = np.hypot(th, w)
    if np.any(r == 0):
        raise ValueError("phase undefined at the origin")
    phi = np.arctan2(-w, th)
    if r.ndim == 0:
        return PolarState(float(r), float(phi))
    return r, phi


def polar_to_hat(state, params: OscillatorParams):
    r, phi = (np.asarray(x, dtype=float) for x in state)
    th = r * np.cos(phi)
    v = -params.omega0 * r * np.sin(phi)
    if th.ndim == 0:
        return float(th), float(v)
    return th, v


def unwrap_phase(phi):
    return np.unwrap(np.asarray(phi, dtype=float))
