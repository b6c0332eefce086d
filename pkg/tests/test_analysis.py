import math

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar

from strobosam import analysis as an
from strobosam.averaging import PolarState, hat_to_polar
from strobosam.duffing import OscillatorParams, rotate_to_phys
from strobosam.odecore import DivergenceError, Trajectory

P = OscillatorParams.reference()


def closed_form_eps2(alpha, B, gamma, omega0):
    return 2 ** (10 / 3) / 3 ** (5 / 3) * B ** (-4 / 3) * gamma ** (-2 / 3) * omega0 ** 2 * alpha


def test_epsilon_app_values():
    assert an.epsilon_app(0.0, P) == 0
    assert an.epsilon_app(1e-4, P) == pytest.approx(0.02685, abs=5e-6)
    assert an.epsilon_app(1e-4, P) ** 2 == pytest.approx(
        closed_form_eps2(1e-4, P.B, P.gamma, P.omega0), rel=1e-14)
    for a in (1e-6, 3e-5, 2e-3):
        assert an.epsilon_app(4 * a, P) == pytest.approx(2 * an.epsilon_app(a, P), rel=1e-14)


def test_epsilon_app_errors():
    with pytest.raises(ValueError, match="threshold undefined"):
        an.epsilon_app(1e-4, P.with_(B=0))
    with pytest.raises(ValueError, match="threshold undefined"):
        an.epsilon_app(1e-4, P.with_(gamma=0))


def test_action_mismatch():
    assert an.action_mismatch(PolarState(0, 0.3), 5.0, P).I == 0
    am = an.action_mismatch(PolarState(2, -np.pi), 0.0, P)
    assert am == pytest.approx((2, -np.pi))


def test_action_mismatch_composition(rng):
    for _ in range(10):
        th, v = rng.normal(size=2)
        tau = rng.uniform(-1000, 5000)
        am = an.action_mismatch(hat_to_polar(th, v, P), tau, P)
        r2 = th * th + (v / P.omega0) ** 2
        assert am.I == pytest.approx(r2 / 2, rel=1e-14)
        phi = math.atan2(-v / P.omega0, th)
        assert am.Phi == pytest.approx(phi + P.alpha * tau * tau / 2, rel=1e-14)


def residual(I0, tau, p):
    return p.alpha * tau - p.epsilon * (3 * p.gamma / (4 * p.omega0) * I0
                                        - math.sqrt(2) * p.B / (4 * p.omega0) / math.sqrt(I0))


def test_solve_I0_constructed_root():
    a = 3 * P.gamma / (4 * P.omega0)
    b = math.sqrt(2) * P.B / (4 * P.omega0)
    tau_star = P.epsilon * (a - b) / P.alpha
    assert an.solve_I0(tau_star, P) == pytest.approx(1.0, rel=1e-14)


def test_solve_I0_reference_value():
    p = P.with_(epsilon=2.685e-3)
    tau = 5e-3 / p.alpha
    oracle = brentq(lambda I: residual(I, tau, p), 1e-8, 1e4, xtol=1e-15, rtol=1e-15)
    got = an.solve_I0(tau, p)
    assert got == pytest.approx(oracle, rel=1e-13)
    assert got == pytest.approx(2.46, abs=5e-3)


def test_solve_I0_residual_random(rng):
    for _ in range(100):
        p = OscillatorParams(B=rng.uniform(0.1, 10), gamma=rng.uniform(0.1, 50),
                             epsilon=rng.uniform(1e-4, 0.5), omega0=rng.uniform(0.5, 20),
                             alpha=10 ** rng.uniform(-7, -2), tau0=0)
        tau = rng.uniform(-5000, 5000)
        I0 = an.solve_I0(tau, p)
        assert I0 > 0
        assert abs(residual(I0, tau, p)) <= 1e-12 * p.epsilon * max(1.0, I0)


def test_solve_I0_monotone_in_tau():
    taus = np.linspace(-1000, 5000, 61)
    I0 = np.array([an.solve_I0(t, P) for t in taus])
    assert np.all(np.diff(I0) > 0)


def test_solve_I0_preconditions():
    with pytest.raises(ValueError):
        an.solve_I0(0.0, P.with_(epsilon=0))


def test_well_threshold_properties():
    for I0 in (1e-3, 0.5, 2.0, 40.0):
        w = an.well_threshold_eps2(I0, 1e-4, P)
        assert w > 0
        assert an.well_threshold_eps2(I0, 2e-4, P) == pytest.approx(2 * w, rel=1e-15)
    with pytest.raises(ValueError, match="invalid action"):
        an.well_threshold_eps2(0.0, 1e-4, P)


def test_well_threshold_stationary_point():
    # the only stationary point is a maximum: a well must exist at every I0
    # the captured solution passes through, so the closed form is the supremum
    I_star = (math.sqrt(2) * P.B / (3 * P.gamma)) ** (2 / 3)
    w = an.well_threshold_eps2(I_star, 1e-4, P)
    assert w == pytest.approx(an.epsilon_app(1e-4, P) ** 2, rel=1e-12)
    for f in (0.9, 1.1):
        assert an.well_threshold_eps2(f * I_star, 1e-4, P) < w
    assert an.well_threshold_eps2(1e-12, 1e-4, P) < 1e-6 * w
    assert an.well_threshold_eps2(1e12, 1e-4, P) < 1e-3 * w


def _random_params(rng):
    return OscillatorParams(B=rng.uniform(0.1, 10), gamma=rng.uniform(0.1, 50),
                            omega0=rng.uniform(0.5, 20), alpha=10 ** rng.uniform(-7, -2),
                            epsilon=0.05, tau0=0.0)


def test_well_threshold_maximum_is_closed_form(rng):
    for p in [P] + [_random_params(rng) for _ in range(20)]:
        res = minimize_scalar(lambda u: -an.well_threshold_eps2(math.exp(u), p.alpha, p),
                              bounds=(-30, 30), method="bounded", options={"xatol": 1e-10})
        assert -res.fun == pytest.approx(an.epsilon_app(p.alpha, p) ** 2, rel=1e-8)


def _traj_ending_at(I, tau, p):
    r = math.sqrt(2 * I)
    th, v = rotate_to_phys((r, 0.0), tau, p)
    return Trajectory(np.array([tau - 1, tau]), np.array([[0.0, 0.0], [th, v]]))


def test_detect_on_synthetic_end_state():
    tau = 5000.0
    I0 = an.solve_I0(tau, P)
    v = an.detect_autoresonance(_traj_ending_at(I0, tau, P), P)
    assert v.detected and v.relative_gap == pytest.approx(0, abs=1e-13)
    assert v.I0_final == I0
    assert an.detect_autoresonance(_traj_ending_at(I0 * (1 + 0.3), tau, P), P).detected
    assert not an.detect_autoresonance(_traj_ending_at(I0 * (1 - 0.4), tau, P), P).detected


def test_detect_non_finite():
    tr = Trajectory(np.array([0.0, 1.0]), np.array([[0.0, 0.0], [np.nan, 0.0]]))
    with pytest.raises(DivergenceError):
        an.detect_autoresonance(tr, P)


def test_detect_reference_runs(captured_run, weak_run):
    p, tr = captured_run
    assert an.detect_autoresonance(tr, p).detected
    p, tr = weak_run
    assert not an.detect_autoresonance(tr, p).detected


def _power_law_traj(exponent, c=0.3):
    tau = np.linspace(1000, 5000, 200)
    r = c * tau ** exponent
    states = rotate_to_phys(np.column_stack([r, np.zeros_like(r)]), tau, P)
    return Trajectory(tau, states)


def test_growth_exponent_synthetic():
    assert an.growth_exponent(_power_law_traj(0.5), (1000, 5000), P) == pytest.approx(0.5, abs=1e-12)
    assert an.growth_exponent(_power_law_traj(0.0), (1000, 5000), P) == pytest.approx(0.0, abs=1e-12)


def test_growth_exponent_errors():
    tr = _power_law_traj(0.5)
    with pytest.raises(ValueError, match="insufficient data"):
        an.growth_exponent(tr, (1000, 1300), P)
    with pytest.raises(ValueError):
        an.growth_exponent(tr, (-10, 5000), P)


def test_growth_exponent_reference_run(captured_run):
    p, tr = captured_run
    assert 0.4 <= an.growth_exponent(tr, (1000, 5000), p) <= 0.6


def test_bisection_synthetic():
    c = 1.02 * an.epsilon_app(1e-4, P)
    trace = []
    res = an.threshold_bisection(1e-4, "direct", P, predicate=lambda e: e >= c, trace=trace)
    assert abs(res.eps_min - c) <= 5e-7
    assert res.eps_lo < c <= res.eps_hi
    assert 0 < res.eps_hi - res.eps_lo <= 1e-6
    assert res.runs == len(trace) == res.iterations + 2
    # enclosure invariant along the whole search
    lo, hi = trace[0][0], trace[1][0]
    for eps, ok in trace[2:]:
        assert lo < eps < hi
        lo, hi = (lo, eps) if ok else (eps, hi)
    assert (lo, hi) == (res.eps_lo, res.eps_hi)
    d = res.to_dict()
    assert d["eps_min"] == res.eps_min and d["technique"] == "direct"


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_bisection_bracket_failure(c):
    e = an.epsilon_app(1e-4, P)
    with pytest.raises(an.BracketError, match="bracket failure"):
        an.threshold_bisection(1e-4, "direct", P, predicate=lambda x: x >= c * e)


def test_bisection_direct_alpha_1e4(reference_cfg):
    trace = []
    res = an.threshold_bisection(1e-4, "direct", P, reference_cfg, trace=trace)
    assert 0.95 * 0.02685 <= res.eps_min <= 1.10 * 0.02685
    assert trace[0] == (pytest.approx(0.95 * res.eps_app), False)
    assert trace[1] == (pytest.approx(1.10 * res.eps_app), True)
    assert res.eps_hi - res.eps_lo <= 1e-6


def test_bisection_averaged_agrees_with_direct(reference_cfg):
    d = an.threshold_bisection(1e-4, "direct", P, reference_cfg)
    a = an.threshold_bisection(1e-4, "averaged1", P, reference_cfg)
    assert abs(a.eps_min / d.eps_min - 1) <= 0.02
