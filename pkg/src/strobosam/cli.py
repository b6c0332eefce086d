"""Command line front end.

    strobosam simulate  --technique direct --alpha 1e-4 --epsilon 0.05 --out run.csv
    strobosam threshold --technique sam_d2 --alpha 1e-4
    strobosam sweep     --techniques all --alphas 1e-6,1e-5,1e-4 --out sweep.csv
    strobosam bench     --technique averaged1 --alpha 1e-5 --epsilon 0.009 --repeat 10

Exit status: 0 success, 1 usage error, 2 numerical failure (a JSON error
object is written to stderr).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import numpy as np

from .analysis import BracketError, RootSolveError, detect_autoresonance, threshold_bisection
from .averaging import unwrap_phase
from .duffing import phys_to_rotating
from .experiment import TECHNIQUES, ExperimentConfig, integrate_technique, run_technique
from .odecore import IntegrationError

SIMULATE_COLUMNS = ("tau", "theta", "v", "r", "I", "Phi")
SWEEP_COLUMNS = ("alpha", "technique", "eps_min", "eps_app", "eps_lo", "eps_hi",
                 "iterations", "wall_time", "status")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# ---------------------------------------------------------------- config


def read_config(path: str) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def _coerce(name: str, value: str):
    if name == "alphas":
        return tuple(float(a) for a in value.split(",") if a.strip())
    if name == "gamma" and value.lower() in ("", "none", "default"):
        return None
    if name in ("m", "repeat"):
        return int(value)
    return float(value)


def build_config(args) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            if k not in known:
                raise UsageError(f"unknown config key {k!r}")
            try:
                values[k] = _coerce(k, v)
            except ValueError as exc:
                raise UsageError(f"bad value for {k}: {v!r}") from exc
    overrides = {"B": args.B, "gamma": args.gamma, "omega0": args.omega0,
                 "tau0": args.tau0, "tau_end": args.tau_end, "theta0": args.theta0,
                 "v0": args.v0, "rel_tol": args.rtol, "abs_tol": args.atol, "m": args.m}
    values.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "repeat", None) is not None:
        values["repeat"] = args.repeat
    if getattr(args, "alphas", None):
        values["alphas"] = _coerce("alphas", args.alphas)
    cfg = ExperimentConfig(**values)
    if cfg.m < 1 or cfg.repeat < 1:
        raise UsageError("m and repeat must be positive")
    return cfg


def _technique(name: str) -> str:
    if name not in TECHNIQUES:
        raise argparse.ArgumentTypeError(
            f"unknown technique {name!r} (choose from {', '.join(TECHNIQUES)})")
    return name


def _techniques(names: str):
    if names == "all":
        return list(TECHNIQUES)
    return [_technique(s.strip()) for s in names.split(",") if s.strip()]


# ---------------------------------------------------------------- outputs


def trajectory_rows(traj, params):
    """(tau, theta, v, r, I, Phi) per sample, Phi from the unwrapped phase."""
    rot = phys_to_rotating(traj.states[:, :2], traj.times, params)
    w = rot[:, 1] / params.omega0
    r = np.hypot(rot[:, 0], w)
    phi = unwrap_phase(np.arctan2(-w, rot[:, 0]))
    Phi = np.where(r > 0, phi + 0.5 * params.alpha * traj.times ** 2, np.nan)
    return np.column_stack([traj.times, traj.states[:, 0], traj.states[:, 1],
                            r, 0.5 * r * r, Phi])


def write_csv(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _fail(kind: str, message: str, **extra) -> int:
    err = {"error": kind, "message": message}
    err.update(extra)
    sys.stderr.write(json.dumps(err) + "\n")
    return EXIT_NUMERICAL


# ---------------------------------------------------------------- commands


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    params = cfg.params(args.alpha, args.epsilon)
    try:
        traj = integrate_technique(args.technique, params, cfg)
    except IntegrationError as exc:
        return _fail("divergence", str(exc), technique=args.technique)
    summary = {"technique": args.technique, "alpha": args.alpha, "epsilon": args.epsilon,
               "tau_final": float(traj.times[-1]), "wall_time": traj.wall_time,
               "status": "ok", "verdict": None, "I_final": None, "I0_final": None,
               "relative_gap": None}
    if params.epsilon > 0 and params.B > 0 and params.gamma > 0:
        try:
            v = detect_autoresonance(traj, params)
        except (IntegrationError, RootSolveError) as exc:
            return _fail("divergence", str(exc), technique=args.technique)
        summary.update(verdict=v.detected, I_final=v.I_final, I0_final=v.I0_final,
                       relative_gap=v.relative_gap)
    else:
        summary["status"] = "verdict_undefined"

    fh, close = _open_out(args.out)
    try:
        write_csv(fh, SIMULATE_COLUMNS, trajectory_rows(traj, params))
    finally:
        if close:
            fh.close()
    text = json.dumps(summary, indent=2)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    elif close:
        print(text)
    else:
        sys.stderr.write(text + "\n")
    return EXIT_OK


def cmd_threshold(args, cfg: ExperimentConfig) -> int:
    try:
        res = threshold_bisection(args.alpha, args.technique, cfg.params(args.alpha, 1.0), cfg)
    except BracketError as exc:
        return _fail("bracket_failure", str(exc), alpha=args.alpha, technique=args.technique)
    print(json.dumps(res.to_dict(), indent=2))
    return EXIT_OK


def _sweep_one(job):
    alpha, technique, cfg = job
    try:
        res = threshold_bisection(alpha, technique, cfg.params(alpha, 1.0), cfg)
    except BracketError as exc:
        from .analysis import epsilon_app
        nan = float("nan")
        return (alpha, technique, nan, epsilon_app(alpha, cfg.params(alpha, 1.0)), nan, nan,
                0, nan, "bracket_failure"), str(exc)
    return (alpha, technique, res.eps_min, res.eps_app, res.eps_lo, res.eps_hi,
            res.iterations, res.mean_run_time, "ok"), None


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    techniques = _techniques(args.techniques)
    jobs = [(float(a), t, cfg) for a in cfg.alphas for t in techniques]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    order = {t: i for i, t in enumerate(TECHNIQUES)}
    results.sort(key=lambda r: (r[0][0], order[r[0][1]]))
    fh, close = _open_out(args.out)
    try:
        write_csv(fh, SWEEP_COLUMNS, [r[0] for r in results])
    finally:
        if close:
            fh.close()
    failures = [{"alpha": r[0][0], "technique": r[0][1], "message": r[1]}
                for r in results if r[1] is not None]
    if failures:
        return _fail("bracket_failure", f"{len(failures)} threshold search(es) failed",
                     failures=failures)
    return EXIT_OK


def cmd_bench(args, cfg: ExperimentConfig) -> int:
    times = []
    res = None
    for _ in range(cfg.repeat):
        res = run_technique(args.technique, args.alpha, args.epsilon, cfg, repeat=1)
        if res.status != "ok":
            return _fail("divergence", res.message, technique=args.technique)
        times.append(res.wall_time)
    t = np.array(times)
    out = {"technique": args.technique, "alpha": args.alpha, "epsilon": args.epsilon,
           "repeat": int(t.size), "mean": float(t.mean()), "min": float(t.min()),
           "max": float(t.max()), "verdict": res.verdict.detected}
    print(json.dumps(out, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("experiment")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--B", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--omega0", type=float)
    g.add_argument("--tau0", type=float)
    g.add_argument("--tau-end", dest="tau_end", type=float)
    g.add_argument("--theta0", type=float)
    g.add_argument("--v0", type=float)
    g.add_argument("--rtol", type=float)
    g.add_argument("--atol", type=float)
    g.add_argument("--m", type=int, help="Strang substeps per period for SAM")

    p = _Parser(prog="strobosam", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="one run, CSV + JSON summary")
    s.add_argument("--technique", type=_technique, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.add_argument("--summary", help="JSON summary path")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("threshold", parents=[common], help="eps bisection for one alpha")
    s.add_argument("--technique", type=_technique, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("sweep", parents=[common], help="thresholds over alphas x techniques")
    s.add_argument("--techniques", default="all")
    s.add_argument("--alphas", help="comma separated (default: 8 log-spaced in [1e-6, 1e-3])")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("bench", parents=[common], help="timing statistics")
    s.add_argument("--technique", type=_technique, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--repeat", type=int)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "techniques", None):
            _techniques(args.techniques)
        cfg = build_config(args)
    except (UsageError, argparse.ArgumentTypeError, OSError) as exc:
        sys.stderr.write(f"strobosam: error: {exc}\n")
        return EXIT_USAGE
    try:
        return args.func(args, cfg)
    except ValueError as exc:
        sys.stderr.write(f"strobosam: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
