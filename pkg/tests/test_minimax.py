import numpy as np
import pytest
from numpy.testing import assert_allclose

from gmfilter.classes import DensityClass, compile_class
from gmfilter.errors import UnsupportedError
from gmfilter.filtering import solve_filter
from gmfilter.increments import IncrementSpec
from gmfilter.minimax import (MinimaxProblem, _ip, cross_delta, filter_mse, fit_multipliers, least_favorable,
                              least_favorable_noise_semi, minimax_characteristic, sampling_audit,
                              saddle_residuals)
from gmfilter.spectral import SpectralDensityGrid, midpoint_grid

M = 128
SPEC = IncrementSpec.from_lists([1])
A = [1.0, 0.5, 0.25]


def noise_base(M=M):
    lam = midpoint_grid(M)
    return SpectralDensityGrid((0.25 * (1 + 0.5 * np.cos(lam)) / (2 * np.pi))[:, None, None])


def signal_white(M=M):
    return SpectralDensityGrid.constant(np.eye(1) / (2 * np.pi), M)


def pair_classes(c=1.0):
    g = noise_base()
    q = float(np.mean(g.values.real)) * c
    cls_f = DensityClass("D0_2", {"p": c / (2 * np.pi)})
    cls_g = DensityClass("DVU_2", {"V": g.scaled(0.5 * c), "U": g.scaled(2.0 * c), "q": q})
    return cls_f, cls_g


def semi_class(eps, g=None):
    g = noise_base() if g is None else g
    return DensityClass("Deps_4", {"eps": eps, "g1": g, "Q": np.mean(np.asarray(g.values), axis=0)})


@pytest.fixture(scope="module")
def pair_solution():
    cls_f, cls_g = pair_classes()
    return least_favorable(cls_f, cls_g, A, SPEC, M=M)


@pytest.fixture(scope="module")
def problem():
    return MinimaxProblem.build(SPEC, A, M=M)


def test_evaluate_matches_filter(problem):
    f, g = signal_white(), noise_base()
    ev = problem.evaluate(f.values, g.values)
    ref = solve_filter(f, g, A, SPEC, L=problem.L)
    assert_allclose(ev.delta, ref.delta, rtol=1e-12)
    assert_allclose(cross_delta(ev, f, g), ev.delta, rtol=1e-6)
    assert_allclose(filter_mse(problem, ev.h_inc, f.values, g.values), ev.delta, rtol=1e-8)


def test_cross_delta_linear(problem, rng):
    f, g = signal_white(), noise_base()
    ev = problem.evaluate(f.values, g.values)
    f2, g2 = f.scaled(0.3), g.scaled(2.0)
    tf, tg = cross_delta(ev, f, g, parts=True)
    tf2, tg2 = cross_delta(ev, f2, g2, parts=True)
    assert_allclose(cross_delta(ev, f + f2, g + g2, parts=True), (tf + tf2, tg + tg2), rtol=1e-12)
    zero = SpectralDensityGrid.zeros(1, M)
    assert cross_delta(ev, f, zero, parts=True)[1] == 0.0


def test_gradient_is_exact(problem, rng):
    f, g = np.asarray(signal_white().values), np.asarray(noise_base().values)
    ev = problem.evaluate(f, g)
    for grad, which in ((ev.Hf, "f"), (ev.Hg, "g")):
        d = (rng.uniform(0.5, 1.5, M) / (2 * np.pi))[:, None, None] * (0.2 if which == "g" else 1.0)
        h = 1e-4
        up = problem.evaluate(f + h * d, g) if which == "f" else problem.evaluate(f, g + h * d)
        dn = problem.evaluate(f - h * d, g) if which == "f" else problem.evaluate(f, g - h * d)
        assert_allclose((up.delta - dn.delta) / (2 * h), _ip(grad, d), rtol=1e-5)


def test_concavity(problem, rng):
    f, g = np.asarray(signal_white().values), np.asarray(noise_base().values)
    f2 = f * rng.uniform(0.5, 2.0, M)[:, None, None]
    g2 = g * rng.uniform(0.5, 2.0, M)[:, None, None]
    mid = problem.evaluate(0.5 * (f + f2), 0.5 * (g + g2)).delta
    assert mid >= 0.5 * (problem.evaluate(f, g).delta + problem.evaluate(f2, g2).delta) - 1e-12


def test_pair_solution(pair_solution):
    sol = pair_solution
    assert sol.converged and sol.gap / sol.delta0 <= 1e-6
    hist = np.array(sol.history)
    assert np.all(np.diff(hist) >= -1e-12 * abs(hist[-1]))
    assert sol.residuals["max"] <= 1e-4
    for v in sol.feasibility().values():
        assert v["moment_residual"] <= 1e-8 and v["pointwise_violation"] <= 1e-10
    audit = sampling_audit(sol, samples=30, seed=1)
    assert audit["max_relative_excess_delta"] <= 1e-4
    assert audit["max_relative_excess_cross"] <= 1e-4
    assert audit["min_relative_margin_left"] >= -1e-4
    assert_allclose(minimax_characteristic(sol), sol.h0)
    d = sol.to_dict()
    assert d["class_f"] == "D0_2" and "alpha2" in d["multipliers"]["signal"] and "beta2" in d["multipliers"]["noise"]


def test_residuals_larger_off_optimum(pair_solution, rng):
    sol = pair_solution
    pr = sol.problem
    for _ in range(3):
        fv = sol.compiled["f"].sample(rng)
        gv = sol.compiled["g"].sample(rng)
        ev = pr.evaluate(fv, gv)
        rf = fit_multipliers(sol.compiled["f"], fv, ev.Hf)["stationarity"]
        rg = fit_multipliers(sol.compiled["g"], gv, ev.Hg)["stationarity"]
        assert max(rf, rg) > 10 * sol.residuals["max"]


def test_residuals_scale_invariant(pair_solution):
    sol = pair_solution
    c = 3.0
    cls_f, cls_g = pair_classes(c)
    ratio = sol.problem.rho
    ev = sol.problem.evaluate(c * np.asarray(sol.f0.values), c * np.asarray(sol.g0.values))
    assert_allclose(ev.h_inc, sol.h0_inc, atol=1e-10)
    for name, cls, X, G in (("f", cls_f, sol.f0.values, ev.Hf), ("g", cls_g, sol.g0.values, ev.Hg)):
        cc = compile_class(cls, 1, M, ratio)
        base = fit_multipliers(sol.compiled[name], np.asarray(X), sol.evaluation.Hf if name == "f" else sol.evaluation.Hg)
        scaled = fit_multipliers(cc, c * np.asarray(X), G)
        assert_allclose(scaled["stationarity"], base["stationarity"], rtol=1e-4, atol=1e-9)
        assert_allclose(scaled["theta"], base["theta"], rtol=1e-6)


def test_singleton_semi():
    f, g = signal_white(), noise_base()
    sol = least_favorable_noise_semi(f, semi_class(0.0), A, SPEC)
    assert_allclose(sol.g0.values, g.values, atol=1e-12)
    ref = solve_filter(f, g, A, SPEC, L=sol.problem.L)
    assert_allclose(sol.delta0, ref.delta, rtol=1e-10)
    assert_allclose(sol.h0, ref.h, atol=1e-10)
    assert sol.residuals["max"] <= 1e-6


def test_singleton_band():
    f, g = signal_white(), noise_base()
    cls = DensityClass("DVU_2", {"V": g, "U": g, "q": float(np.mean(g.values.real))})
    sol = least_favorable_noise_semi(f, cls, A, SPEC)
    assert_allclose(sol.g0.values, g.values, atol=1e-12)
    assert sol.residuals["max"] <= 1e-6


def test_semi_monotone_in_eps():
    f = signal_white()
    deltas = [least_favorable_noise_semi(f, semi_class(e), A, SPEC).delta0 for e in (0.0, 0.1, 0.3)]
    assert np.all(np.diff(deltas) > 0)
    sol = least_favorable_noise_semi(f, semi_class(0.3), A, SPEC)
    audit = sampling_audit(sol, samples=20, seed=2)
    assert audit["max_relative_excess_cross"] <= 1e-4 and audit["max_relative_excess_delta"] <= 1e-4


def test_unsupported_pair():
    cls_f, cls_g = pair_classes()
    with pytest.raises(UnsupportedError):
        least_favorable(DensityClass("D0_1", {"P": np.eye(1)}), cls_g, A, SPEC, M=M)
    with pytest.raises(UnsupportedError):
        least_favorable_noise_semi(signal_white(), cls_f, A, SPEC)
