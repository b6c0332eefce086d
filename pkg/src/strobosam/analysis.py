"""Autoresonance diagnostics and the minimum-forcing threshold experiment."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .averaging import PolarState, hat_to_polar
from .duffing import OscillatorParams, phys_to_rotating
from .odecore import DivergenceError, Trajectory

DETECTION_RATIO = 1.0 / 3.0
BRACKET = (0.95, 1.10)
BRACKET_WIDTH = 1e-6


class BracketError(RuntimeError):
    """The initial bracket does not enclose the threshold."""


class RootSolveError(RuntimeError):
    pass


class ActionMismatch(NamedTuple):
    I: float
    Phi: float


@dataclass(frozen=True)
class AutoresonanceVerdict:
    detected: bool
    I_final: float
    I0_final: float
    relative_gap: float


@dataclass
class ThresholdResult:
    alpha: float
    technique: str
    eps_lo: float
    eps_hi: float
    eps_min: float
    eps_app: float
    iterations: int
    wall_time: float
    runs: int = 0

    @property
    def mean_run_time(self) -> float:
        return self.wall_time / self.runs if self.runs else float("nan")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "technique": self.technique,
                "eps_lo": self.eps_lo, "eps_hi": self.eps_hi,
                "eps_min": self.eps_min, "eps_app": self.eps_app,
                "iterations": self.iterations, "runs": self.runs,
                "wall_time": self.wall_time, "mean_run_time": self.mean_run_time}


def epsilon_app(alpha: float, params: OscillatorParams) -> float:
    """Closed-form forcing threshold above which the mismatch potential has a well.

    eps_app**2 = 2**(10/3) / 3**(5/3) * B**(-4/3) * gamma**(-2/3) * omega0**2 * alpha
    """
    if params.B <= 0 or params.gamma <= 0:
        raise ValueError("threshold undefined (linear/unforced case)")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    e2 = (2 ** (10 / 3) / 3 ** (5 / 3) * params.B ** (-4 / 3)
          * params.gamma ** (-2 / 3) * params.omega0 ** 2 * alpha)
    return math.sqrt(e2)


def action_mismatch(p: PolarState, tau, params: OscillatorParams) -> ActionMismatch:
    """Action ``r**2/2`` and phase mismatch ``phi + alpha*tau**2/2``.

    ``phi`` should be the continuously unwrapped phase when ``Phi`` is to be
    followed in time.
    """
    r, phi = p
    return ActionMismatch(0.5 * r * r, phi + 0.5 * params.alpha * tau * tau)


def _I0_residual(x, tau, params):
    om = params.omega0
    a = 3 * params.gamma / (4 * om)
    b = math.sqrt(2) * params.B / (4 * om)
    return params.alpha * tau - params.epsilon * (a * x * x - b / x)


def solve_I0(tau: float, params: OscillatorParams, max_iter: int = 200) -> float:
    """Quasi-static action at ``tau``.

    Unique positive root of
    ``alpha*tau - eps*(3*gamma/(4*omega0)*I0 - sqrt(2)*B/(4*omega0)/sqrt(I0)) = 0``,
    found by bracketed Newton iteration in ``x = sqrt(I0)``.
    """
    if not (params.epsilon > 0 and params.B > 0 and params.gamma > 0):
        raise ValueError("solve_I0 needs epsilon, B, gamma > 0")
    om = params.omega0
    eps = params.epsilon
    a = 3 * params.gamma / (4 * om)
    b = math.sqrt(2) * params.B / (4 * om)

    def res(x):
        return _I0_residual(x, tau, params)

    lo, hi = 1.0, 1.0
    if res(1.0) > 0:
        while res(hi) > 0:
            lo, hi = hi, 2 * hi
            if hi > 1e150:
                raise RootSolveError("root solve failure: no upper bracket")
    else:
        while res(lo) < 0:
            lo, hi = 0.5 * lo, lo
            if lo < 1e-150:
                raise RootSolveError("root solve failure: no lower bracket")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = res(x)
        if r == 0:
            break
        if r > 0:
            lo = x
        else:
            hi = x
        dr = -eps * (2 * a * x + b / (x * x))
        x_new = x - r / dr
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 4e-16 * x:
            x = x_new
            break
        x = x_new
    else:
        raise RootSolveError("root solve failure: iteration budget exhausted")
    return x * x


def well_threshold_eps2(I0: float, alpha: float, params: OscillatorParams) -> float:
    """Value of eps**2 above which the mismatch potential has a well at ``I0``.

    With ``V(Phi) = eps*c*sqrt(I0)*cos(Phi) - alpha/S*Phi`` and
    ``S = eps*(3*gamma/(4*omega0) + sqrt(2)*B/(8*omega0)*I0**-1.5)``, a
    stationary point exists iff ``eps*c*sqrt(I0) >= alpha/S``.

    As a function of ``I0`` this vanishes at both ends and peaks at
    ``I0* = (sqrt(2)*B/(3*gamma))**(2/3)``; the peak value is
    ``epsilon_app(alpha)**2``, the forcing that keeps a well open for every
    ``I0`` a captured solution visits.
    """
    if not I0 > 0:
        raise ValueError("invalid action: I0 must be positive")
    om = params.omega0
    c = math.sqrt(2) * params.B / (2 * om)
    s = 3 * params.gamma / (4 * om) + math.sqrt(2) * params.B / (8 * om) * I0 ** -1.5
    return alpha / (c * math.sqrt(I0) * s)


def amplitude_samples(traj: Trajectory, params: OscillatorParams) -> np.ndarray:
    """Rotating-frame amplitude ``r`` at every sample of a physical trajectory."""
    rot = phys_to_rotating(traj.states[:, :2], traj.times, params)
    return np.hypot(rot[:, 0], rot[:, 1] / params.omega0)


def detect_autoresonance(traj: Trajectory, params: OscillatorParams,
                         ratio: float = DETECTION_RATIO) -> AutoresonanceVerdict:
    """Compare the final action with the quasi-static action at the final time."""
    tau = float(traj.times[-1])
    y = traj.states[-1]
    if not np.all(np.isfinite(y)):
        raise DivergenceError("divergence: non-finite final state")
    th_hat, v_hat = phys_to_rotating(y[:2], tau, params)
    r = math.hypot(th_hat, v_hat / params.omega0)
    I = 0.5 * r * r
    I0 = solve_I0(tau, params)
    gap = abs(I - I0) / I0
    return AutoresonanceVerdict(bool(gap <= ratio), I, I0, gap)


def growth_exponent(traj: Trajectory, window, params: OscillatorParams) -> float:
    """Least-squares slope of ``log r`` against ``log tau`` inside ``window``."""
    a, b = window
    if a <= 0:
        raise ValueError("fit window must lie at positive times")
    mask = (traj.times >= a) & (traj.times <= b)
    if mask.sum() < 20:
        raise ValueError("insufficient data: fewer than 20 samples in window")
    sub = Trajectory(traj.times[mask], traj.states[mask])
    r = amplitude_samples(sub, params)
    slope, _ = np.polyfit(np.log(sub.times), np.log(r), 1)
    return float(slope)


def threshold_bisection(alpha: float, technique: str, params: OscillatorParams,
                        cfg=None, predicate: Optional[Callable[[float], bool]] = None,
                        width: float = BRACKET_WIDTH, bracket=BRACKET,
                        trace: Optional[list] = None) -> ThresholdResult:
    """Bisect on eps for the smallest forcing producing autoresonance.

    ``predicate(eps)`` decides autoresonance; by default it runs ``technique``
    through :func:`strobosam.experiment.run_technique` with ``cfg``.
    Every evaluated ``(eps, verdict)`` is appended to ``trace`` when given.
    """
    params = params.with_(alpha=alpha)
    e_app = epsilon_app(alpha, params)
    if predicate is None:
        from .experiment import ExperimentConfig, autoresonates
        cfg = cfg or ExperimentConfig()

        def predicate(eps):
            return autoresonates(technique, alpha, eps, cfg)

    start = time.perf_counter()
    runs = 0

    def check(eps):
        nonlocal runs
        runs += 1
        ok = bool(predicate(eps))
        if trace is not None:
            trace.append((eps, ok))
        return ok

    lo, hi = bracket[0] * e_app, bracket[1] * e_app
    if check(lo) or not check(hi):
        raise BracketError(
            f"bracket failure: threshold outside [{bracket[0]}, {bracket[1]}]*eps_app "
            f"(alpha={alpha:g}, technique={technique})")
    it = 0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if check(mid):
            hi = mid
        else:
            lo = mid
        it += 1
    return ThresholdResult(alpha=alpha, technique=str(technique), eps_lo=lo, eps_hi=hi,
                           eps_min=0.5 * (lo + hi), eps_app=e_app, iterations=it,
                           wall_time=time.perf_counter() - start, runs=runs)
