import csv
import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from strobosam import cli


def schema(name):
    text = resources.files("strobosam").joinpath(f"schemas/{name}.schema.json").read_text()
    return json.loads(text)


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


SHORT = ["--tau-end", "-980"]


def test_simulate_unforced_linear_is_constant(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code, stdout, _ = run(["simulate", "--technique", "averaged1", "--alpha", "1e-4",
                           "--epsilon", "0", "--B", "0", "--out", str(out)] + SHORT, capsys)
    assert code == 0
    header, rows = read_csv(out.read_text())
    assert tuple(header) == cli.SIMULATE_COLUMNS
    data = np.array(rows, dtype=float)
    assert len(data) == 21
    # rotating back at tau0 + k*T0 only leaves sin(2*pi*k) round-off
    assert np.allclose(data[:, 1], 1e-9, rtol=1e-14) and np.max(np.abs(data[:, 2])) < 1e-20
    summary = json.loads(stdout)
    jsonschema.validate(summary, schema("simulate_summary"))
    assert summary["status"] == "verdict_undefined" and summary["verdict"] is None

    code, stdout, _ = run(["simulate", "--technique", "direct", "--alpha", "1e-4",
                           "--epsilon", "0", "--B", "0", "--out", str(out)] + SHORT, capsys)
    data = np.array(read_csv(out.read_text())[1], dtype=float)
    # absolute tolerance 1e-12 per step over 20 periods
    bound = 10 * 1e-12 * 20
    assert np.max(np.abs(data[:, 1] - 1e-9)) < bound
    assert np.max(np.abs(data[:, 2])) < bound


def test_simulate_csv_to_stdout_summary_to_stderr(capsys):
    code, out, err = run(["simulate", "--technique", "sam_d2", "--alpha", "1e-4",
                          "--epsilon", "0.05"] + SHORT, capsys)
    assert code == 0
    header, rows = read_csv(out)
    assert tuple(header) == cli.SIMULATE_COLUMNS
    for row in rows:
        for cell in row:
            assert repr(float(cell)) == cell
    summary = json.loads(err)
    jsonschema.validate(summary, schema("simulate_summary"))
    assert isinstance(summary["verdict"], bool)
    assert summary["I0_final"] > 0


def test_simulate_columns_are_consistent(capsys):
    _, out, _ = run(["simulate", "--technique", "direct", "--alpha", "1e-4",
                     "--epsilon", "0.05"] + SHORT, capsys)
    tau, theta, v, r, I, Phi = np.array(read_csv(out)[1], dtype=float).T
    assert np.allclose(I, r * r / 2, rtol=1e-15)
    # at stroboscopic times the rotating frame coincides with the physical one
    assert np.allclose(r, np.hypot(theta, v / (2 * np.pi)), rtol=1e-9)
    assert np.all(np.abs(np.diff(Phi - 0.5e-4 * tau ** 2)) < np.pi)


def test_simulate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(["simulate", "--technique", "sam_d4", "--alpha", "1e-4", "--epsilon",
                    "0.05", "--out", str(path), "--summary", str(tmp_path / "s.json")]
                   + SHORT, capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    jsonschema.validate(json.loads((tmp_path / "s.json").read_text()),
                        schema("simulate_summary"))


def test_config_file_and_flag_precedence(tmp_path, capsys):
    conf = tmp_path / "exp.conf"
    conf.write_text("# short run\ntau_end = -990\nm = 20\n\ntheta0 = 0.5  # bigger start\n")
    _, out, _ = run(["simulate", "--technique", "direct", "--alpha", "1e-4", "--epsilon",
                     "0.05", "--config", str(conf)], capsys)
    data = np.array(read_csv(out)[1], dtype=float)
    assert data[-1, 0] == -990 and data[0, 1] == 0.5
    _, out, _ = run(["simulate", "--technique", "direct", "--alpha", "1e-4", "--epsilon",
                     "0.05", "--config", str(conf), "--tau-end", "-995"], capsys)
    assert np.array(read_csv(out)[1], dtype=float)[-1, 0] == -995


@pytest.mark.parametrize("text", ["bogus = 1\n", "tau_end -990\n", "m = many\n"])
def test_bad_config_is_usage_error(tmp_path, capsys, text):
    conf = tmp_path / "bad.conf"
    conf.write_text(text)
    code, _, err = run(["simulate", "--technique", "direct", "--alpha", "1e-4",
                        "--epsilon", "0.05", "--config", str(conf)], capsys)
    assert code == 1 and "error" in err


@pytest.mark.parametrize("argv", [
    [],
    ["simulate", "--technique", "rk4", "--alpha", "1e-4", "--epsilon", "0.05"],
    ["simulate", "--technique", "direct", "--alpha", "1e-4"],
    ["simulate", "--technique", "direct", "--alpha", "x", "--epsilon", "0.05"],
    ["sweep", "--techniques", "direct,rk4"],
    ["simulate", "--technique", "direct", "--alpha", "1e-4", "--epsilon", "0.05",
     "--config", "/nonexistent/file.conf"],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = cli.main(argv)
        raise SystemExit(code)
    assert exc.value.code == 1


def test_divergence_exit_code(capsys):
    code, _, err = run(["simulate", "--technique", "direct", "--alpha", "1e-3",
                        "--epsilon", "0.0934"], capsys)
    assert code == 2
    payload = json.loads(err)
    jsonschema.validate(payload, schema("error"))
    assert payload["error"] == "divergence"


def test_bracket_failure_exit_code(capsys):
    code, _, err = run(["threshold", "--technique", "direct", "--alpha", "1e-3"], capsys)
    assert code == 2
    payload = json.loads(err)
    jsonschema.validate(payload, schema("error"))
    assert payload["error"] == "bracket_failure"


def test_threshold_direct(capsys):
    code, out, _ = run(["threshold", "--technique", "direct", "--alpha", "1e-4"], capsys)
    assert code == 0
    res = json.loads(out)
    jsonschema.validate(res, schema("threshold_result"))
    assert 0.95 * 0.02685 <= res["eps_min"] <= 1.10 * 0.02685
    assert res["eps_hi"] - res["eps_lo"] <= 1e-6


def test_bench(capsys):
    code, out, _ = run(["bench", "--technique", "averaged1", "--alpha", "1e-5",
                        "--epsilon", "0.009", "--repeat", "3"], capsys)
    assert code == 0
    stats = json.loads(out)
    jsonschema.validate(stats, schema("bench"))
    assert stats["repeat"] == 3 and stats["min"] <= stats["mean"] <= stats["max"]


def _strip_timing(text):
    header, rows = read_csv(text)
    k = header.index("wall_time")
    return [r[:k] + r[k + 1:] for r in rows]


def test_sweep_parallel_matches_serial(tmp_path, capsys):
    base = ["sweep", "--techniques", "averaged2,averaged1", "--alphas", "1e-4,1e-5"]
    code, serial, _ = run(base, capsys)
    assert code == 0
    code, parallel, _ = run(base + ["--jobs", "2"], capsys)
    assert code == 0
    assert _strip_timing(serial) == _strip_timing(parallel)
    header, rows = read_csv(serial)
    assert tuple(header) == cli.SWEEP_COLUMNS
    assert [(float(r[0]), r[1]) for r in rows] == [
        (1e-5, "averaged1"), (1e-5, "averaged2"), (1e-4, "averaged1"), (1e-4, "averaged2")]


def test_sweep_all_techniques(capsys):
    code, out, _ = run(["sweep", "--techniques", "all", "--alphas", "1e-5,1e-4"], capsys)
    assert code == 0
    header, rows = read_csv(out)
    assert len(rows) == 12
    col = {h: i for i, h in enumerate(header)}
    for r in rows:
        assert r[col["status"]] == "ok"
        assert float(r[col["eps_hi"]]) - float(r[col["eps_lo"]]) <= 1e-6
        assert 0.95 <= float(r[col["eps_min"]]) / float(r[col["eps_app"]]) <= 1.10


@pytest.mark.slow
def test_sweep_default_grid(capsys):
    code, out, err = run(["sweep"], capsys)
    header, rows = read_csv(out)
    assert len(rows) == 48
    col = {h: i for i, h in enumerate(header)}
    failed = [r for r in rows if r[col["status"]] != "ok"]
    for r in rows:
        if r[col["status"]] == "ok":
            assert float(r[col["eps_hi"]]) - float(r[col["eps_lo"]]) <= 1e-6
    # every row must carry a converged bracket; at alpha = 1e-3 the captured
    # solution crosses the potential barrier before tau = 5000
    if failed:
        assert code == 2
        jsonschema.validate(json.loads(err), schema("error"))
    assert not failed, [(r[0], r[1]) for r in failed]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "strobosam", "simulate", "--technique",
                           "averaged1", "--alpha", "1e-4", "--epsilon", "0.05",
                           "--tau-end", "-995"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == ",".join(cli.SIMULATE_COLUMNS)
    proc = subprocess.run([sys.executable, "-m", "strobosam", "simulate"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
