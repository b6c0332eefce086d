"""The six integration techniques and the autoresonance experiment around them."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import averaging, sam
from .analysis import AutoresonanceVerdict, detect_autoresonance
from .duffing import OscillatorParams, phys_rhs, rot_rhs, rotate_to_phys
from .odecore import IntegrationError, MacroConfig, Trajectory, adaptive_integrate


class TechniqueId(str, enum.Enum):
    DIRECT = "direct"
    TRANSFORMED = "transformed"
    AVERAGED1 = "averaged1"
    AVERAGED2 = "averaged2"
    SAM_D2 = "sam_d2"
    SAM_D4 = "sam_d4"

    def __str__(self):
        return self.value


TECHNIQUES = tuple(t.value for t in TechniqueId)


def default_alpha_grid(n: int = 8, lo: float = 1e-6, hi: float = 1e-3) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n)


@dataclass
class ExperimentConfig:
    B: float = 2.0
    gamma: Optional[float] = None  # None -> omega0**2 / 6
    omega0: float = 2 * np.pi
    tau0: float = -1000.0
    tau_end: float = 5000.0
    theta0: float = 1e-9
    v0: float = 0.0
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    m: int = 40
    alphas: tuple = field(default_factory=lambda: tuple(default_alpha_grid()))
    repeat: int = 10

    def params(self, alpha: float, epsilon: float) -> OscillatorParams:
        g = self.omega0 ** 2 / 6 if self.gamma is None else self.gamma
        return OscillatorParams(B=self.B, gamma=g, epsilon=epsilon, omega0=self.omega0,
                                alpha=alpha, tau0=self.tau0)

    def output_times(self) -> np.ndarray:
        return sam.stroboscopic_times(self.tau0, self.tau_end, 2 * np.pi / self.omega0)

    def macro(self) -> MacroConfig:
        return MacroConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                           output_times=self.output_times())

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass
class RunResult:
    technique: str
    trajectory: Optional[Trajectory]
    verdict: Optional[AutoresonanceVerdict]
    wall_time: float
    status: str = "ok"
    message: str = ""


def integrate_technique(technique, params: OscillatorParams, cfg: ExperimentConfig,
                        macro: Optional[MacroConfig] = None) -> Trajectory:
    """One integration with ``technique``; states are physical ``(theta, v)``."""
    t = TechniqueId(technique)
    macro = macro or cfg.macro()
    span = (cfg.tau0, cfg.tau_end)
    y0 = np.array([cfg.theta0, cfg.v0])
    start = time.perf_counter()
    if t is TechniqueId.DIRECT:
        traj = adaptive_integrate(phys_rhs, y0, span, macro, params)
        states = traj.states
    elif t is TechniqueId.TRANSFORMED:
        if params.epsilon == 0:
            raise ValueError("degenerate slow time: epsilon = 0")
        z0 = np.array([cfg.theta0, cfg.v0, params.epsilon * cfg.tau0])
        traj = adaptive_integrate(rot_rhs, z0, span, macro, params)
        states = rotate_to_phys(traj.states, traj.times, params)
    elif t in (TechniqueId.AVERAGED1, TechniqueId.AVERAGED2):
        averaging.check_stroboscopic_tau0(params)
        rhs = averaging.aver1_rhs if t is TechniqueId.AVERAGED1 else averaging.aver2_rhs
        traj = adaptive_integrate(rhs, y0, span, macro, params)
        states = rotate_to_phys(traj.states, traj.times, params)
    else:
        micro = sam.MicroConfig(m=cfg.m, diff_order=2 if t is TechniqueId.SAM_D2 else 4)
        traj = sam.sam_integrate(y0, span, params, macro, micro)
        states = traj.states
    wall = time.perf_counter() - start
    return Trajectory(traj.times, states, technique=t.value, wall_time=wall,
                      params=params, stats=traj.stats)


def run_technique(technique, alpha: float, epsilon: float, cfg: ExperimentConfig,
                  repeat: Optional[int] = None) -> RunResult:
    """Integrate, detect autoresonance and time the run (mean over ``repeat``)."""
    params = cfg.params(alpha, epsilon)
    n = cfg.repeat if repeat is None else repeat
    times = []
    traj = None
    try:
        for _ in range(max(1, n)):
            traj = integrate_technique(technique, params, cfg)
            times.append(traj.wall_time)
        verdict = detect_autoresonance(traj, params)
    except IntegrationError as exc:
        return RunResult(str(TechniqueId(technique)), traj, None,
                         float(np.mean(times)) if times else float("nan"),
                         status="divergence", message=str(exc))
    return RunResult(str(TechniqueId(technique)), traj, verdict, float(np.mean(times)))


def autoresonates(technique, alpha: float, epsilon: float, cfg: ExperimentConfig) -> bool:
    """Bisection predicate; a run that blows up is not autoresonant."""
    res = run_technique(technique, alpha, epsilon, cfg, repeat=1)
    return res.verdict is not None and res.verdict.detected
