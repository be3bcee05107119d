import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gmfilter.cli import main
from gmfilter.validate import fixture_path


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "gmfilter", *args], capture_output=True, text=True, timeout=600)


def test_filter_toy(tmp_path):
    out = tmp_path / "f"
    assert main(["filter", fixture_path("toy_t1"), "--out", str(out), "--oracle", "200"]) == 0
    rep = json.loads((out / "delta.json").read_text())
    assert rep["oracle"]["relative_difference"] < 1e-2
    assert abs(rep["delta"] - rep["delta_integral"]) <= 1e-6 * rep["delta"]
    h = np.loadtxt(out / "h.csv", delimiter=",", skiprows=1)
    assert h.shape == (4096, 3)
    taps = np.loadtxt(out / "taps.csv", delimiter=",", skiprows=1)
    assert taps.shape[1] == 2


def test_filter_single_value_and_flags(tmp_path):
    out = tmp_path / "sv"
    assert main(["filter", fixture_path("psarima_t2"), "--out", str(out), "--single-value", "3",
                 "--grid", "1024", "--blocks", "16"]) == 0
    rep = json.loads((out / "delta.json").read_text())
    assert rep["single_value"] == 3 and rep["truncation_L"] == 16 and rep["grid"] == 1024


def test_missing_file_exit_2(tmp_path):
    r = run_cli("filter", str(tmp_path / "missing.json"), "--out", str(tmp_path))
    assert r.returncode == 2
    err = json.loads(r.stderr.strip().splitlines()[-1])
    assert err["error"] == "InputError"


def test_corrupted_density_exit_2(tmp_path):
    (tmp_path / "bad.json").write_text('{"T": 1, "M_grid": ')
    cfg = {"spec": {"patterns": [{"s": 1}]}, "signal": {"type": "white"},
           "noise": {"type": "file", "path": "bad.json"}, "coefficients": [1.0]}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    r = run_cli("filter", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o"))
    assert r.returncode == 2 and "density" in json.loads(r.stderr)["message"]


def test_unsupported_pair_exit_3(tmp_path):
    cfg = json.loads(open(fixture_path("minimax_t1")).read())
    cfg["minimax"]["class_f"] = {"kind": "D0_1", "P": [[0.1]]}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["minimax", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")]) == 3


def test_minimax_singleton_and_semi(tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["minimax", fixture_path("singleton_t1"), "--out", str(out)]) == 0
    rep = json.loads((out / "minimax.json").read_text())
    assert rep["semi_uncertain"] and rep["residuals"]["max"] <= 1e-6
    assert rep["audit"]["max_relative_excess_delta"] <= 1e-4
    for name in ("f0.json", "g0.json", "h0.csv"):
        assert (out / name).exists()
    cfg = json.loads(open(fixture_path("semi_t1")).read())
    cfg["minimax"]["semi"] = False
    cfg["minimax"]["audit_samples"] = 0
    (tmp_path / "semi.json").write_text(json.dumps(cfg))
    capsys.readouterr()
    assert main(["minimax", str(tmp_path / "semi.json"), "--semi", "--audit", "10", "--out", str(tmp_path / "s")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["audit_ok"] and summary["residual_max"] <= 1e-4


def test_minimax_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["minimax", fixture_path("semi_t1"), "--audit", "5", "--out", str(tmp_path / d)]) == 0
    a = json.loads((tmp_path / "a" / "minimax.json").read_text())
    b = json.loads((tmp_path / "b" / "minimax.json").read_text())
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b
    assert (tmp_path / "a" / "h0.csv").read_bytes() == (tmp_path / "b" / "h0.csv").read_bytes()


def test_simulate(tmp_path):
    out = tmp_path / "s"
    assert main(["simulate", fixture_path("toy_t1"), "--out", str(out), "--replications", "2000",
                 "--frames", "50"]) == 0
    rep = json.loads((out / "simulate.json").read_text())
    assert abs(rep["monte_carlo"]["z_score"]) < 3
    rows = np.loadtxt(out / "series.csv", delimiter=",", skiprows=1)
    assert rows.shape == (51, 6)
    np.testing.assert_allclose(rows[:, 3] + rows[:, 4], rows[:, 5])


def test_increments_command(capsys):
    spec = '{"patterns": [{"s": 1, "R": 0, "D": 0.2}, {"s": 2, "R": 1, "D": 0.1}]}'
    assert main(["increments", "--spec", spec]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["integer_part"]["coefficients"] == [1, 0, -1]
    assert out["classification"]["stationary"]
    assert [r["nu_over_pi"] for r in out["root_set"]] == ["0", "1"]
    assert main(["increments", "--spec", "{bad"]) == 2


def test_validate_subset(tmp_path):
    assert main(["validate", "--quick", "--checks", "1,2,5", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "validation.json").read_text())
    assert [c["id"] for c in rep["checks"]] == [1, 2, 5] and rep["passed"]
    assert os.path.exists(tmp_path / "timings.json")
