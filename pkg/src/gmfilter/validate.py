"""Acceptance suite: increment algebra, Gegenbauer series, oracle, Monte Carlo,
homogeneity, minimax and determinism checks on the shipped fixtures.

Each check returns a :class:`CheckResult` with measured and expected values.
Result JSON is deterministic for a given seed; wall-clock timings are kept in
a separate record.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from importlib import resources

import numpy as np

from .config import RunConfig
from .filtering import solve_filter
from .increments import (IncrementSpec, check_stationarity, expand_by_dense_product, expand_increment_coeffs,
                         expansion_coeffs_G, fractional_factor, random_spec, seasonal_root_set)
from .oracles import oracle_finite_window
from .pipeline import run_filter, run_minimax, run_monte_carlo

FILTER_FIXTURES = ("toy_t1", "psarima_t2")
MINIMAX_FIXTURES = ("minimax_t1", "semi_t1")
SINGLETON_FIXTURES = ("singleton_t1",)
BUDGETS = {1: 1.0, 2: 5.0, 3: 120.0, 4: 600.0, 6: 300.0}


@dataclass
class CheckResult:
    id: int
    name: str
    passed: bool
    measured: dict
    expected: dict
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "passed": bool(self.passed), "measured": self.measured,
                "expected": self.expected, "details": self.details}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.id}: {self.name} {json.dumps(self.measured, sort_keys=True)}"


def fixture_path(name: str) -> str:
    return str(resources.files("gmfilter") / "data" / f"{name}.json")


def load_fixture(name: str) -> RunConfig:
    return RunConfig.load(fixture_path(name))


# -- 1: increment algebra -----------------------------------------------------------------

def check_increments(n_specs: int = 200, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    mismatches = bad_sum = bad_first = bad_last = 0
    for _ in range(n_specs):
        spec = random_spec(rng, max_patterns=3, max_order=3, max_span=12, min_order=1)
        e = expand_increment_coeffs(spec).as_int64().tolist()
        mismatches += e != expand_by_dense_product(spec)
        bad_sum += sum(e) != 0
        bad_first += e[0] != 1
        bad_last += e[-1] != (-1) ** sum(p.R for p in spec.patterns)
    measured = {"specs": n_specs, "expansion_mismatches": int(mismatches), "sum_violations": int(bad_sum),
                "leading_violations": int(bad_first), "trailing_violations": int(bad_last)}
    passed = bool(mismatches == bad_sum == bad_first == bad_last == 0)
    return CheckResult(1, "increment algebra", passed, measured,
                       {"expansion_mismatches": 0, "sum_violations": 0, "leading_violations": 0,
                        "trailing_violations": 0})


# -- 2: Gegenbauer ------------------------------------------------------------------------

def _fractional_spec(s, D) -> IncrementSpec:
    return IncrementSpec.from_lists(list(s), R=[0] * len(s), D=list(D))


def _example_items():
    """Spec builders with expected root fractions, exponents and stationarity rule."""
    return [
        ((1, 2), {Fraction(0): lambda a, b: a + b, Fraction(1): lambda a, b: b},
         lambda a, b: abs(a + b) < 0.5 and abs(b) < 0.5),
        ((2, 3), {Fraction(0): lambda a, b: a + b, Fraction(2, 3): lambda a, b: b, Fraction(1): lambda a, b: a},
         lambda a, b: abs(a + b) < 0.5 and abs(b) < 0.5 and abs(a) < 0.5),
        ((2, 4), {Fraction(0): lambda a, b: a + b, Fraction(1, 2): lambda a, b: b, Fraction(1): lambda a, b: a + b},
         lambda a, b: abs(a + b) < 0.5 and abs(b) < 0.5),
    ]


def check_gegenbauer(n_draws: int = 200, seed: int = 0, length: int = 4096, m_max: int = 256) -> CheckResult:
    rng = np.random.default_rng(seed)
    lam = np.linspace(-np.pi, np.pi, 1001)[1:-1:2]
    set_errors = exponent_errors = rule_errors = 0
    factor_err = series_err = 0.0
    for s, expected, rule in _example_items():
        for _ in range(n_draws):
            a, b = rng.uniform(-0.9, 0.9, size=2)
            spec = _fractional_spec(s, (a, b))
            roots = seasonal_root_set(spec)
            if set(roots.fractions) != set(expected):
                set_errors += 1
                continue
            for q, d in zip(roots.fractions, roots.D_nu):
                exponent_errors += d != expected[q](a, b)
            rule_errors += check_stationarity(spec).stationary != rule(a, b)
            # |chi^(D)|^{-2} against the pattern product
            direct = np.abs(1 - np.exp(-1j * lam * s[0])) ** (-2 * a) * np.abs(1 - np.exp(-1j * lam * s[1])) ** (-2 * b)
            factor_err = max(factor_err, float(np.max(np.abs(fractional_factor(spec, lam) / direct - 1))))
        spec = _fractional_spec(s, rng.uniform(-0.45, 0.45, size=2))
        gp = expansion_coeffs_G(spec, length, "+")
        gm = expansion_coeffs_G(spec, length, "-")
        conv = np.convolve(gp[: m_max + 1], gm[: m_max + 1])[: m_max + 1]
        conv[0] -= 1.0
        series_err = max(series_err, float(np.max(np.abs(conv))))
    measured = {"root_set_errors": int(set_errors), "exponent_errors": int(exponent_errors),
                "stationarity_rule_errors": int(rule_errors), "factorization_rel_error": factor_err,
                "inverse_series_error": series_err}
    passed = bool(set_errors == exponent_errors == rule_errors == 0 and factor_err <= 1e-10 and series_err <= 1e-8)
    return CheckResult(2, "Gegenbauer", passed, measured,
                       {"root_set_errors": 0, "exponent_errors": 0, "stationarity_rule_errors": 0,
                        "factorization_rel_error": "<= 1e-10", "inverse_series_error": "<= 1e-8"},
                       {"items": 3, "draws_per_item": n_draws, "m_max": m_max, "series_length": length})


# -- 3: oracle cross-validation -----------------------------------------------------------

def check_cross_validation(window: int = 200) -> CheckResult:
    measured = {}
    passed = True
    for name in FILTER_FIXTURES:
        run = run_filter(load_fixture(name))
        sol = run.solution
        oracle = oracle_finite_window(run.f, run.g, run.config.spec, sol.a, W=window)
        rel = abs(oracle - sol.delta) / sol.delta
        measured[name] = {"delta": sol.delta, "oracle": oracle, "oracle_rel_diff": rel,
                          "form_rel_diff": sol.consistency(), "truncation_L": sol.L}
        passed &= rel <= 1e-2 and sol.consistency() <= 1e-6
    return CheckResult(3, "oracle cross-validation", bool(passed), measured,
                       {"oracle_rel_diff": "<= 1e-2", "form_rel_diff": "<= 1e-6", "window": window})


# -- 4: Monte Carlo -----------------------------------------------------------------------

def check_monte_carlo(replications: int = 10_000, seed: int = 0) -> CheckResult:
    measured = {}
    passed = True
    for name in FILTER_FIXTURES:
        cfg = load_fixture(name).override(seed=seed)
        _, mc = run_monte_carlo(cfg, replications=replications)
        d = mc.to_dict()
        measured[name] = {k: d[k] for k in ("mse", "stderr", "delta", "z_score", "orthogonality_max_ratio")}
        passed &= abs(mc.z_score) <= 3.0 and mc.orthogonality_ok
    return CheckResult(4, "Monte Carlo", bool(passed), measured,
                       {"abs_z_score": "<= 3", "orthogonality_max_ratio": "<= 3", "lags": "0..19"},
                       {"replications": replications, "seed": seed})


# -- 5: homogeneity -----------------------------------------------------------------------

def check_homogeneity(factors=(0.1, 1.0, 7.0)) -> CheckResult:
    measured = {}
    passed = True
    for name in FILTER_FIXTURES:
        run = run_filter(load_fixture(name))
        base = run.solution
        scale = float(np.max(np.abs(base.h)))
        h_err = d_err = 0.0
        for c in factors:
            sol = solve_filter(run.f.scaled(c), run.g.scaled(c), base.a, run.config.spec,
                               tol=run.config.tol, ridge=run.config.ridge)
            h_err = max(h_err, float(np.max(np.abs(sol.h - base.h))) / scale)
            d_err = max(d_err, abs(sol.delta - c * base.delta) / (c * base.delta))
        measured[name] = {"h_max_rel_diff": h_err, "delta_scaling_rel_error": d_err}
        passed &= h_err <= 1e-10 and d_err <= 1e-8
    return CheckResult(5, "homogeneity", bool(passed), measured,
                       {"h_max_rel_diff": "<= 1e-10", "delta_scaling_rel_error": "<= 1e-8",
                        "factors": list(factors)})


# -- 6: minimax ---------------------------------------------------------------------------

def _feasibility_worst(sol) -> float:
    return max(max(v.values()) for v in sol.feasibility().values())


def check_minimax(samples: int = 100, seed: int = 0, tol: float = 1e-4, singleton_tol: float = 1e-6) -> CheckResult:
    measured = {}
    passed = True
    for name in MINIMAX_FIXTURES:
        run = run_minimax(load_fixture(name).override(seed=seed), audit=samples)
        sol, au = run.solution, run.audit
        row = {"delta0": sol.delta0, "relative_gap": sol.gap / sol.delta0, "residual_max": sol.residuals["max"],
               "complementary_slackness": max(sol.residuals[k]["complementary_slackness"]
                                              for k in ("signal", "noise") if k in sol.residuals),
               "feasibility_max": _feasibility_worst(sol),
               "dominance_excess": au["max_relative_excess_delta"],
               "right_saddle_excess": au["max_relative_excess_cross"],
               "left_saddle_margin": au["min_relative_margin_left"],
               "skipped_singular": au["skipped_singular"], "nominal_delta": run.nominal_delta}
        measured[name] = row
        passed &= (row["relative_gap"] <= tol and row["residual_max"] <= tol
                   and row["complementary_slackness"] <= tol and row["feasibility_max"] <= 1e-8
                   and row["dominance_excess"] <= tol and row["right_saddle_excess"] <= tol
                   and row["left_saddle_margin"] >= -tol and row["skipped_singular"] == 0)
    for name in SINGLETON_FIXTURES:
        run = run_minimax(load_fixture(name).override(seed=seed), audit=0)
        sol = run.solution
        rel = abs(sol.delta0 - run.nominal_delta) / run.nominal_delta
        g_nominal = run.config.densities(M=sol.problem.M)[1]
        g_err = float(np.max(np.abs(np.asarray(sol.g0.values) - np.asarray(g_nominal.values))))
        measured[name] = {"delta0": sol.delta0, "classical_delta": run.nominal_delta, "delta_rel_diff": rel,
                          "residual_max": sol.residuals["max"], "g0_max_abs_diff": g_err}
        passed &= rel <= singleton_tol and sol.residuals["max"] <= singleton_tol and g_err <= singleton_tol
    return CheckResult(6, "minimax", bool(passed), measured,
                       {"relative_gap": f"<= {tol}", "residual_max": f"<= {tol}",
                        "complementary_slackness": f"<= {tol}", "feasibility_max": "<= 1e-8",
                        "dominance_excess": f"<= {tol}", "right_saddle_excess": f"<= {tol}",
                        "left_saddle_margin": f">= -{tol}", "singleton_rel_diff": f"<= {singleton_tol}",
                        "singleton_residual": f"<= {singleton_tol}"},
                       {"samples": samples, "seed": seed})


# -- 7: determinism -----------------------------------------------------------------------

def canonical_json(report: dict) -> str:
    """Report JSON without the timestamp, with sorted keys."""
    return json.dumps({k: v for k, v in report.items() if k != "timestamp"}, sort_keys=True, indent=2)


def check_determinism(seed: int = 0) -> CheckResult:
    first, _ = run_suite(quick=True, seed=seed, determinism=False)
    second, _ = run_suite(quick=True, seed=seed, determinism=False)
    a, b = canonical_json(first), canonical_json(second)
    return CheckResult(7, "determinism", a == b, {"identical": a == b, "bytes": len(a)}, {"identical": True},
                       {"suite": "quick", "seed": seed})


# -- suite --------------------------------------------------------------------------------

def _settings(quick: bool) -> dict:
    if quick:
        return {"replications": 1000, "samples": 10, "specs": 200, "draws": 50}
    return {"replications": 10_000, "samples": 100, "specs": 200, "draws": 200}


def run_check(k: int, quick: bool = False, seed: int = 0) -> CheckResult:
    st = _settings(quick)
    if k == 1:
        return check_increments(st["specs"], seed)
    if k == 2:
        return check_gegenbauer(st["draws"], seed)
    if k == 3:
        return check_cross_validation()
    if k == 4:
        return check_monte_carlo(st["replications"], seed)
    if k == 5:
        return check_homogeneity()
    if k == 6:
        return check_minimax(st["samples"], seed)
    if k == 7:
        return check_determinism(seed)
    raise ValueError(f"unknown check {k}")


def run_suite(quick: bool = False, seed: int = 0, determinism: bool = True, checks=None,
              echo=None) -> tuple[dict, dict]:
    """Run the checks; returns ``(report, timings)``.

    ``report`` is deterministic apart from its ``timestamp`` field.
    """
    ids = list(checks) if checks is not None else [1, 2, 3, 4, 5, 6] + ([7] if determinism else [])
    results, timings = [], {}
    for k in ids:
        t0 = time.perf_counter()
        res = run_check(k, quick, seed)
        elapsed = time.perf_counter() - t0
        timings[str(k)] = {"seconds": elapsed, "budget": BUDGETS.get(k),
                           "within_budget": BUDGETS.get(k) is None or elapsed < BUDGETS[k]}
        results.append(res)
        if echo is not None:
            echo(res.line())
    report = {
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "quick": quick,
        "seed": seed,
        "passed": all(r.passed for r in results),
        "failed": [r.id for r in results if not r.passed],
        "checks": [r.to_dict() for r in results],
    }
    return report, timings
