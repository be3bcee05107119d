"""Simulation of periodically correlated GM-increment sequences and Monte Carlo checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .filtering import FilterSolution, estimate_functional
from .increments import IncrementSpec, expand_increment_coeffs, integrate_levels
from .lift import LiftedSeries
from .psarima import PSARIMAModel, check_ar_invertible, integrate_scalar, simulate_stationary
from .spectral import SpectralDensityGrid, to_increment_density

BATCH = 1000


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    model : PSARIMAModel or SpectralDensityGrid
    length : int
        Scalar samples (PSARIMA) or frames (density synthesis).
    """

    model: object
    length: int = 1000
    burn_in: int = 500
    seed: int = 0
    replications: int = 1

    def __post_init__(self):
        if self.length < 1 or self.burn_in < 0 or self.replications < 1:
            raise InputError("length and replications must be positive, burn-in non-negative")


def simulate_psarima(cfg: SimConfig) -> np.ndarray:
    """Scalar PSARIMA path of ``cfg.length`` samples (after burn-in).

    The stationary part is generated by the periodic ARMA recursion and then
    integrated through the model's increment operator (lags in frames) with
    zero initial values.  The first returned sample has season 0.
    """
    model = cfg.model
    if not isinstance(model, PSARIMAModel):
        raise InputError("simulate_psarima needs a PSARIMA model")
    check_ar_invertible(model, "forward")
    rng = np.random.default_rng(cfg.seed)
    y = simulate_stationary(model, cfg.length, rng, burn_in=cfg.burn_in)
    x = integrate_scalar(y, model)
    return x[len(x) - cfg.length:] if model.integration is not None else x


def _spectral_factor(values: np.ndarray) -> np.ndarray:
    """Pointwise square roots ``L L^* = f`` (eigen-based, PSD safe)."""
    w, v = np.linalg.eigh(0.5 * (values + np.conj(np.swapaxes(values, 1, 2))))
    return v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]


def _synthesize(factor: np.ndarray, frames: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` independent real Gaussian sequences, shape ``(count, frames, T)``."""
    M, T, _ = factor.shape
    pairs = (count + 1) // 2
    z = (rng.standard_normal((pairs, M, T)) + 1j * rng.standard_normal((pairs, M, T))) / np.sqrt(2.0)
    y = np.einsum("mij,rmj->rmi", factor, z) * np.sqrt(2.0 * np.pi / M)
    t = np.arange(frames)
    phase = np.exp(1j * np.pi * t * (1.0 / M - 1.0))
    x = np.fft.ifft(y, axis=1)[:, :frames, :] * M * phase[None, :, None]
    out = np.concatenate([np.sqrt(2.0) * x.real, np.sqrt(2.0) * x.imag], axis=0)
    return out[:count]


def simulate_from_density(f: SpectralDensityGrid, frames: int, seed=0, count: int = 1):
    """Gaussian stationary T-vector sequence(s) with density ``f``.

    Spectral synthesis on the density's midpoint grid; the covariance equals
    the midpoint quadrature of ``int e^{i lam m} f dlam`` for ``|m| < M``.
    When ``frames`` exceeds the grid size the density is re-sampled on a
    larger grid if it has a source function.

    Returns a :class:`LiftedSeries` for ``count == 1`` and an array of shape
    ``(count, frames, T)`` otherwise.
    """
    if frames > f.M:
        M2 = 1 << int(np.ceil(np.log2(frames)))
        if f.source is None:
            raise InputError("series longer than the density grid; provide a finer grid", frames=frames, M=f.M)
        f = f.refine(M2)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = _synthesize(_spectral_factor(f.values), frames, rng, count)
    if count == 1:
        return LiftedSeries(f.T, out[0])
    return out


@dataclass(frozen=True)
class MonteCarloResult:
    mse: float
    stderr: float
    replications: int
    delta: float
    z_score: float
    orth_cov: np.ndarray
    orth_stderr: np.ndarray

    @property
    def orthogonality_ok(self) -> bool:
        return bool(np.all(np.abs(self.orth_cov) <= 3.0 * self.orth_stderr))

    def to_dict(self) -> dict:
        return {
            "mse": self.mse, "stderr": self.stderr, "replications": self.replications,
            "delta": self.delta, "z_score": self.z_score,
            "orthogonality_max_ratio": float(np.max(np.abs(self.orth_cov) / self.orth_stderr)),
            "orthogonality_ok": self.orthogonality_ok,
        }


def _batch(solution: FilterSolution, f_inc: SpectralDensityGrid, g: SpectralDensityGrid,
           frames: int, rng: np.random.Generator, count: int, orth_lags: int):
    spec: IncrementSpec = solution.spec
    n = spec.n_gamma
    inc_xi = _synthesize(_spectral_factor(f_inc.values), frames, rng, count)
    eta = _synthesize(_spectral_factor(g.values), frames + n, rng, count)
    # chronological levels with n zero frames in front
    xi = integrate_levels(np.moveaxis(inc_xi, 1, 0), spec)
    xi = np.moveaxis(xi, 0, 1)
    zeta = xi + eta
    Z = zeta[:, ::-1, :]  # lag order, most recent first
    X = xi[:, ::-1, :]
    N = solution.a.N
    target = np.einsum("rkt,kt->r", X[:, : N + 1, :], solution.a.blocks)
    est = estimate_functional(Z, solution)
    err = est - target
    # observed increments at lags 0..orth_lags-1 (lag order)
    e = expand_increment_coeffs(spec).as_array()
    inc = np.zeros((count, orth_lags, spec.period))
    for i in np.flatnonzero(e):
        inc += e[i] * Z[:, i:i + orth_lags, :]
    return err, inc


def monte_carlo_mse(solution: FilterSolution, f: SpectralDensityGrid, g: SpectralDensityGrid,
                    replications: int = 10_000, seed: int = 0, orth_lags: int = 20) -> MonteCarloResult:
    """Empirical MSE of :func:`estimate_functional` over independent replications.

    ``f`` is the signal density in structural form; increments are
    synthesized from ``|chi|^2/|beta|^2 f`` and re-integrated with zero
    initial values.  Replications are drawn in batches from spawned seed
    sequences so results do not depend on batching or threads.
    """
    spec = solution.spec
    f_inc = to_increment_density(spec, f)
    frames = max(solution.taps.shape[0] + spec.n_gamma, solution.a.N + 1, orth_lags + spec.n_gamma) + 1
    if frames >= f.M // 2:
        raise InputError("density grid too coarse for the required window", frames=frames, M=f.M)
    n_batches = (replications + BATCH - 1) // BATCH
    children = np.random.SeedSequence(seed).spawn(n_batches)
    errs, incs = [], []
    for b, child in enumerate(children):
        count = min(BATCH, replications - b * BATCH)
        err, inc = _batch(solution, f_inc, g, frames, np.random.default_rng(child), count, orth_lags)
        errs.append(err)
        incs.append(inc)
    err = np.concatenate(errs)
    inc = np.concatenate(incs)
    sq = err ** 2
    mse = float(sq.mean())
    stderr = float(sq.std(ddof=1) / np.sqrt(len(sq)))
    prod = err[:, None, None] * inc
    orth = prod.mean(axis=0)
    orth_se = prod.std(axis=0, ddof=1) / np.sqrt(len(sq))
    z = (mse - solution.delta) / stderr if stderr > 0 else 0.0
    return MonteCarloResult(mse, stderr, int(len(sq)), float(solution.delta), float(z), orth, orth_se)


def frame_mean_drift(frames: np.ndarray, pieces: int = 4, batches: int = 40) -> float:
    """Largest standardized deviation of chunk means from the overall mean.

    The series is cut into ``pieces`` chunks.  The long-run variance that
    standardizes the deviations is estimated by batch means, so serial
    correlation does not inflate the statistic.
    """
    x = np.asarray(frames, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    blen = n // batches
    if blen < 2:
        raise InputError("series too short for the drift diagnostic", length=n)
    bm = x[: blen * batches].reshape(batches, blen, -1).mean(axis=1)
    lrv = bm.var(axis=0, ddof=1) * blen
    overall = x.mean(axis=0)
    worst = 0.0
    for ch in np.array_split(x, pieces, axis=0):
        se = np.sqrt(lrv * (1.0 / len(ch) - 1.0 / n))
        worst = max(worst, float(np.max(np.abs(ch.mean(axis=0) - overall) / se)))
    return worst
