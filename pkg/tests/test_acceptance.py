"""Acceptance criteria 1-7 at their stated tolerances and budgets.

Each test records one PASS/FAIL line; pytest prints them in an
"acceptance criteria" summary section, a direct script run prints them inline.
"""

import json
import subprocess
import sys
import time

import pytest

from gmfilter.validate import BUDGETS, canonical_json, run_check


def run_criterion(k, report=print):
    t0 = time.perf_counter()
    res = run_check(k, quick=False, seed=0)
    elapsed = time.perf_counter() - t0
    within = k not in BUDGETS or elapsed < BUDGETS[k]
    ok = res.passed and within
    budget = f" budget {BUDGETS[k]:g}s" if k in BUDGETS else ""
    report(f"[{'PASS' if ok else 'FAIL'}] criterion {k} ({res.name}): {elapsed:.2f}s{budget} "
           f"measured={json.dumps(res.measured, sort_keys=True)}")
    return res, within


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
def test_criterion(k, acceptance_log):
    res, within = run_criterion(k, acceptance_log)
    assert res.passed, res.to_dict()
    assert within, f"criterion {k} exceeded its runtime budget"


def _quick_validate(out):
    cmd = [sys.executable, "-m", "gmfilter", "validate", "--quick", "--seed", "0", "--out", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    with open(out / "validation.json") as fh:
        return json.load(fh)


def test_criterion_7_determinism(tmp_path, acceptance_log):
    a = _quick_validate(tmp_path / "a")
    b = _quick_validate(tmp_path / "b")
    same = canonical_json(a) == canonical_json(b)
    acceptance_log(f"[{'PASS' if same else 'FAIL'}] criterion 7 (determinism): validate --quick twice, "
           f"identical modulo timestamp={same}")
    assert same


if __name__ == "__main__":
    import pathlib
    import tempfile

    for k in range(1, 7):
        run_criterion(k)
    with tempfile.TemporaryDirectory() as d:
        test_criterion_7_determinism(pathlib.Path(d), print)
