"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter (the switch is read at import time).
Spans are short because the fallback executes the step loops in Python.

    python3 benchmarks/bench_jit.py [--repeat 3] [--json out.json]
"""
import argparse
import json
import os
import subprocess
import sys

CASES = [
    ("direct", -900.0),
    ("transformed", -900.0),
    ("averaged1", 0.0),
    ("averaged2", 0.0),
    ("sam_d2", -950.0),
    ("sam_d4", -950.0),
]

WORKER = r"""
import json, sys, time
import numpy as np
from strobosam import BACKEND
from strobosam.experiment import ExperimentConfig, integrate_technique
cases, repeat = json.loads(sys.argv[1]), int(sys.argv[2])
out = {"backend": BACKEND, "results": {}}
for tech, tau_end in cases:
    cfg = ExperimentConfig(tau_end=tau_end)
    p = cfg.params(1e-4, 0.05)
    integrate_technique(tech, p, cfg)  # warm-up (jit compile or cache load)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        tr = integrate_technique(tech, p, cfg)
        times.append(time.perf_counter() - t)
    out["results"][tech] = {"min": min(times), "final": tr.final.tolist()}
print(json.dumps(out))
"""


def run_backend(no_jit: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env["STROBOSAM_NO_JIT"] = "1" if no_jit else "0"
    proc = subprocess.run([sys.executable, "-c", WORKER, json.dumps(CASES), str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write raw timings here")
    args = ap.parse_args(argv)

    jit = run_backend(False, args.repeat)
    ref = run_backend(True, args.repeat)
    print(f"{'technique':<12} {'span':>6} {'numba [s]':>11} {'numpy [s]':>11} {'speed-up':>9} {'max |diff|':>11}")
    for tech, tau_end in CASES:
        a, b = jit["results"][tech], ref["results"][tech]
        diff = max(abs(x - y) for x, y in zip(a["final"], b["final"]))
        print(f"{tech:<12} {tau_end + 1000:6.0f} {a['min']:11.5f} {b['min']:11.4f} "
              f"{b['min'] / a['min']:8.0f}x {diff:11.1e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"numba": jit, "numpy": ref, "cases": CASES}, fh, indent=2)


if __name__ == "__main__":
    main()
