"""Config-driven runs shared by the command line and the validation suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import InputError, NumericalError
from .filtering import FilterSolution, solve_filter
from .minimax import MinimaxSolution, least_favorable, least_favorable_noise_semi, sampling_audit
from .oracles import oracle_finite_window
from .simulate import MonteCarloResult, monte_carlo_mse
from .spectral import SpectralDensityGrid


@dataclass(eq=False)
class FilterRun:
    config: RunConfig
    f: SpectralDensityGrid
    g: SpectralDensityGrid
    solution: FilterSolution

    def report(self, oracle_window: int | None = None) -> dict:
        out = {"name": self.config.name, "grid": self.config.grid, "period": self.config.spec.period,
               **self.solution.summary()}
        if oracle_window is not None:
            oracle = oracle_finite_window(self.f, self.g, self.config.spec, self.solution.a, W=oracle_window)
            out["oracle"] = {"window": oracle_window, "mse": oracle,
                             "relative_difference": abs(oracle - self.solution.delta) / self.solution.delta}
        return out


def run_filter(cfg: RunConfig) -> FilterRun:
    """Classical filter for the configured densities and functional."""
    f, g, _ = cfg.densities()
    sol = solve_filter(f, g, cfg.functional(), cfg.spec, L=cfg.truncation, tol=cfg.tol, ridge=cfg.ridge)
    return FilterRun(cfg, f, g, sol)


@dataclass(eq=False)
class MinimaxRun:
    config: RunConfig
    solution: MinimaxSolution
    nominal_delta: float | None
    audit: dict | None

    def report(self) -> dict:
        out = {"name": self.config.name, **self.solution.to_dict(), "nominal_delta": self.nominal_delta}
        if self.audit is not None:
            out["audit"] = self.audit
        return out


def run_minimax(cfg: RunConfig, semi: bool | None = None, audit: int | None = None) -> MinimaxRun:
    """Least favorable densities for the configured classes.

    ``semi`` overrides ``minimax.semi``; ``audit`` overrides
    ``minimax.audit_samples`` (0 disables the sampling audit).
    """
    mm = cfg.minimax
    if "class_g" not in mm:
        raise InputError("minimax runs need 'minimax.class_g'")
    semi = bool(mm.get("semi", False)) if semi is None else semi
    f, g, res = cfg.densities(need_signal=cfg.signal is not None or semi,
                              need_noise=cfg.noise is not None)
    knobs = {k: type_(mm[k]) for k, type_ in (("max_iter", int), ("gap_tol", float), ("tol", float)) if k in mm}
    a = cfg.functional()
    cls_g = res.density_class(mm["class_g"])
    if semi:
        sol = least_favorable_noise_semi(f, cls_g, a, cfg.spec, L=cfg.truncation, **knobs)
    else:
        if "class_f" not in mm:
            raise InputError("minimax runs without 'semi' need 'minimax.class_f'")
        cls_f = res.density_class(mm["class_f"])
        sol = least_favorable(cls_f, cls_g, a, cfg.spec, M=cfg.grid, L=cfg.truncation, **knobs)
    nominal = None
    if f is not None and g is not None:
        try:
            nominal = float(sol.problem.evaluate(np.asarray(f.values), np.asarray(g.values)).delta)
        except NumericalError:
            nominal = None
    samples = int(mm.get("audit_samples", 0)) if audit is None else audit
    report = sampling_audit(sol, samples=samples, seed=cfg.seed) if samples > 0 else None
    return MinimaxRun(cfg, sol, nominal, report)


def run_monte_carlo(cfg: RunConfig, replications: int | None = None) -> tuple[FilterRun, MonteCarloResult]:
    """Monte Carlo check of the configured filter."""
    run = run_filter(cfg)
    sim = cfg.simulation
    reps = int(sim.get("replications", 10_000)) if replications is None else replications
    mc = monte_carlo_mse(run.solution, run.f, run.g, replications=reps, seed=cfg.seed,
                         orth_lags=int(sim.get("orth_lags", 20)))
    return run, mc
