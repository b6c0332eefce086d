"""Forced Duffing oscillator with a linearly swept forcing frequency.

    theta'' + omega0^2 theta - eps*gamma*theta^3 = eps*B*cos(psi),
    psi(tau) = omega0*tau - alpha*tau^2/2.

Three formulations are provided: the physical first-order system in
``(theta, v)``, the rotating-frame system in ``(theta_hat, v_hat, tau_hat)``
obtained by factoring out the free rotation started at ``tau0``, and the
linear maps between the two frames.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from ._jit import rhs_jit

# layout of the packed parameter vector shared by every kernel
P_B, P_GAMMA, P_EPS, P_OMEGA0, P_ALPHA, P_TAU0 = range(6)
N_PARAMS = 6


@dataclass(frozen=True)
class OscillatorParams:
    B: float = 2.0
    gamma: float = (2 * np.pi) ** 2 / 6
    epsilon: float = 0.05
    omega0: float = 2 * np.pi
    alpha: float = 1e-4
    tau0: float = -1000.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    @property
    def T0(self) -> float:
        """Period of the linearised oscillator."""
        return 2 * np.pi / self.omega0

    def pack(self) -> np.ndarray:
        return np.array([self.B, self.gamma, self.epsilon, self.omega0,
                         self.alpha, self.tau0], dtype=np.float64)

    def with_(self, **changes) -> "OscillatorParams":
        return replace(self, **changes)

    @classmethod
    def reference(cls, epsilon=0.05, alpha=1e-4, tau0=-1000.0, omega0=2 * np.pi):
        """The autoresonance case study: ``B = 2``, ``gamma = omega0**2/6``."""
        return cls(B=2.0, gamma=omega0 ** 2 / 6, epsilon=epsilon, omega0=omega0,
                   alpha=alpha, tau0=tau0)


class PhysState(NamedTuple):
    theta: float
    v: float


class RotatingState(NamedTuple):
    theta_hat: float
    v_hat: float
    tau_hat: float


# ---------------------------------------------------------------- kernels


@rhs_jit
def phys_rhs(t, y, p):
    om = p[P_OMEGA0]
    th = y[0]
    out = np.empty(2)
    out[0] = y[1]
    out[1] = (-om * om * th + p[P_EPS] * p[P_GAMMA] * th * th * th
              + p[P_EPS] * p[P_B] * np.cos(om * t - 0.5 * p[P_ALPHA] * t * t))
    return out


@rhs_jit
def rot_rhs(t, y, p):
    om = p[P_OMEGA0]
    eps = p[P_EPS]
    arg = om * (t - p[P_TAU0])
    c = np.cos(arg)
    s = np.sin(arg)
    th = c * y[0] + s * y[1] / om
    slow = (p[P_ALPHA] / (eps * eps)) * 0.5 * y[2] * y[2]
    force = p[P_GAMMA] * th * th * th + p[P_B] * np.cos(om * t - slow)
    out = np.empty(3)
    out[0] = -eps * force * s / om
    out[1] = eps * force * c
    out[2] = eps
    return out


# ---------------------------------------------------------------- public API


def sweep_phase(tau, params: OscillatorParams):
    """Forcing phase ``omega0*tau - alpha*tau**2/2`` (vectorised)."""
    tau = np.asarray(tau, dtype=float)
    return params.omega0 * tau - 0.5 * params.alpha * tau * tau


def duffing_rhs(state, tau: float, params: OscillatorParams) -> np.ndarray:
    return phys_rhs(float(tau), np.asarray(state, dtype=np.float64), params.pack())


def rotate_to_phys(r, tau, params: OscillatorParams) -> PhysState:
    """Map rotating-frame ``(theta_hat, v_hat[, tau_hat])`` to ``(theta, v)``.

    Works elementwise on arrays as well (``r`` of shape ``(..., 2+)`` with a
    matching ``tau``).
    """
    r = np.asarray(r, dtype=float)
    th, v = _rotate(r[..., 0], r[..., 1], np.asarray(tau, dtype=float), params, +1)
    if th.ndim == 0:
        return PhysState(float(th), float(v))
    return np.stack([th, v], axis=-1)


def phys_to_rotating(s, tau, params: OscillatorParams):
    """Inverse of :func:`rotate_to_phys` at the same ``tau``."""
    s = np.asarray(s, dtype=float)
    th, v = _rotate(s[..., 0], s[..., 1], np.asarray(tau, dtype=float), params, -1)
    if th.ndim == 0:
        return float(th), float(v)
    return np.stack([th, v], axis=-1)


def _rotate(a, b, tau, params, sign):
    om = params.omega0
    arg = om * (tau - params.tau0)
    c, s = np.cos(arg), sign * np.sin(arg)
    return c * a + s * b / om, -om * s * a + c * b


def rotating_rhs(r, tau: float, params: OscillatorParams) -> np.ndarray:
    """Right-hand side of the enlarged rotating-frame system.

    ``r = (theta_hat, v_hat, tau_hat)`` with ``tau_hat = eps*tau`` along exact
    solutions; the last component of the result is ``eps``.
    """
    if params.epsilon == 0:
        raise ValueError("degenerate slow time: epsilon = 0, use the physical formulation")
    return rot_rhs(float(tau), np.asarray(r, dtype=np.float64), params.pack())
