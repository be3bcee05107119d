"""Optimal linear filtering of a functional of a GM-increment signal.

The observed sequence is ``zeta = xi + eta`` where ``xi`` has stationary GM
increments with density ``f`` (in the structural form, see
:mod:`gmfilter.spectral`) and ``eta`` is stationary noise with density
``g``.  For a finitely supported functional ``A xi = sum_k a(k)^T xi(-k)``
the optimal estimate from ``zeta(k), k <= 0`` is

    A_hat xi = sum_k a(k)^T zeta(-k) - sum_k s(k)^T (chi zeta)(-k),

where ``s(k)`` are the taps of the increment-side transfer function.  The
mean-square error is returned on the covariance scale of this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .increments import IncrementSpec, expand_increment_coeffs
from .lift import LiftedCoefficients, lift_coefficients, lift_history, single_value_coefficients
from .operators import (
    GridContext,
    assemble_operators,
    assemble_rhs,
    coefficient_tables,
    grid_context,
    max_truncation,
    solve_for_c,
)
from .spectral import SpectralDensityGrid

TWO_PI = 2.0 * np.pi
L_START = 32
TAP_TAIL = 1e-6


def a_minus_mu(a: LiftedCoefficients, spec: IncrementSpec) -> np.ndarray:
    """Blocks ``a_mu(K) = sum_l e(l - K + n) a(l)`` for ``K = 0..N+n``.

    These are the coefficients of ``A(z) z^n chi(1/z)``, i.e. the functional
    re-expressed through the increments it implies.
    """
    e = expand_increment_coeffs(spec).as_array()
    blocks = np.asarray(a.blocks, dtype=float)
    out = np.zeros((blocks.shape[0] + len(e) - 1, blocks.shape[1]))
    for t in range(blocks.shape[1]):
        out[:, t] = np.convolve(blocks[:, t], e[::-1])
    return out


@dataclass(frozen=True, eq=False)
class TapReport:
    length: int
    tail_energy: float
    acausal_energy: float
    max_imag: float

    def to_dict(self) -> dict:
        return {"length": self.length, "tail_energy": self.tail_energy,
                "acausal_energy": self.acausal_energy, "max_imag": self.max_imag}


@dataclass(frozen=True, eq=False)
class FilterSolution:
    """Spectral characteristic, coefficients, MSE and taps of the optimal filter.

    Attributes
    ----------
    h : ndarray (M, T)
        Spectral characteristic against the signal's structural measure.
    h_inc : ndarray (M, T)
        Transfer function acting on the observed increments.
    c : ndarray (L, T)
        Block coefficients of ``C(e^{i lam})``.
    delta : float
        MSE from the bilinear form.
    delta_integral : float
        MSE from the direct frequency-domain integral.
    """

    spec: IncrementSpec
    lam: np.ndarray
    a: LiftedCoefficients
    a_mu: np.ndarray
    h: np.ndarray
    h_inc: np.ndarray
    c: np.ndarray
    delta: float
    delta_integral: float
    rhs_term: float
    q_term: float
    L: int
    taps: np.ndarray
    tap_report: TapReport
    solve_residual: float
    truncation_history: list = field(default_factory=list)

    def consistency(self) -> float:
        """Relative gap between the bilinear and integral forms."""
        return abs(self.delta - self.delta_integral) / max(abs(self.delta), 1e-300)

    def summary(self) -> dict:
        return {
            "delta": self.delta,
            "delta_integral": self.delta_integral,
            "relative_form_gap": self.consistency(),
            "bilinear_rhs_term": self.rhs_term,
            "q_term": self.q_term,
            "truncation_L": self.L,
            "truncation_history": self.truncation_history,
            "solve_residual": self.solve_residual,
            "taps": self.tap_report.to_dict(),
        }


def transfer_values(coeff_blocks: np.ndarray, lam: np.ndarray, offset: int = 0, sign: int = -1) -> np.ndarray:
    """``sum_k b_k e^{sign i lam (k + offset)}`` on the grid, shape (M, T)."""
    k = np.arange(coeff_blocks.shape[0]) + offset
    phase = np.exp(sign * 1j * np.outer(lam, k))
    return phase @ coeff_blocks


def _bilinear(tables, a_mu, a_blocks, L):
    ops = assemble_operators(tables, L, a_mu.shape[0], a_blocks.shape[0])
    rhs = assemble_rhs(a_mu, ops)
    c, rep = solve_for_c(ops, rhs)
    lin = float(np.real(np.vdot(rhs, c.reshape(-1))))
    av = a_blocks.reshape(-1)
    quad = float(np.real(np.vdot(av, ops.Q @ av)))
    return c, TWO_PI * lin, TWO_PI * quad, rep.residual


def choose_truncation(tables, a_mu, a_blocks, L_cap: int, tol: float, L: int | None = None):
    """Adaptive truncation: double ``L`` from 32 until the MSE settles."""
    if L is not None:
        if L > L_cap:
            raise NumericalError("requested truncation exceeds what the grid supports", L=L, cap=L_cap)
        c, lin, quad, res = _bilinear(tables, a_mu, a_blocks, L)
        return L, c, lin, quad, res, [[L, lin + quad]]
    L = min(L_START, L_cap)
    c, lin, quad, res = _bilinear(tables, a_mu, a_blocks, L)
    history = [[L, lin + quad]]
    while L < L_cap:
        L2 = min(2 * L, L_cap)
        c2, lin2, quad2, res2 = _bilinear(tables, a_mu, a_blocks, L2)
        d_old, d_new = lin + quad, lin2 + quad2
        history.append([L2, d_new])
        L, c, lin, quad, res = L2, c2, lin2, quad2, res2
        if abs(d_new - d_old) <= tol * max(abs(d_new), 1e-300):
            break
    return L, c, lin, quad, res, history


def _taps(h_inc: np.ndarray, lam: np.ndarray, tail: float = TAP_TAIL):
    """Taps ``s(k) = (1/2 pi) int h_inc e^{i lam k} dlam`` truncated by tail energy."""
    M = len(lam)
    k = np.arange(-(M // 2) + 1, M // 2)
    # phi_{-k}(h_inc) via the midpoint FFT identity
    spectrum = np.fft.fft(h_inc, axis=0) / M
    j = -k
    phase = np.where(j % 2 == 0, 1.0, -1.0) * np.exp(-1j * np.pi * j / M)
    s = phase[:, None] * spectrum[j % M]
    energy = np.sum(np.abs(s) ** 2, axis=1)
    total = float(energy.sum())
    causal = energy[k >= 0]
    acausal = float(energy[k < 0].sum()) / total if total > 0 else 0.0
    if total == 0:
        return np.zeros((1, h_inc.shape[1])), TapReport(1, 0.0, 0.0, 0.0)
    tail_from = np.cumsum(causal[::-1])[::-1] / total  # tail_from[K] = energy at k >= K
    length = int(np.argmax(np.append(tail_from, 0.0) < tail)) if np.any(tail_from < tail) else len(causal)
    length = max(length, 1)
    taps = s[k >= 0][:length]
    tail_val = float(tail_from[length]) if length < len(causal) else 0.0
    rep = TapReport(length, tail_val, acausal, float(np.max(np.abs(taps.imag))))
    return taps, rep


def characteristic_rows(ctx: GridContext, a_blocks: np.ndarray, c: np.ndarray) -> dict:
    """Row vectors on the grid: ``A``, ``C``, ``X = chi A g - C``, ``Y = chi A f + |beta|^2 C``
    and their products with ``p^{-1}``."""
    lam = ctx.lam
    A = transfer_values(a_blocks, lam, sign=-1)
    C = transfer_values(c, lam, offset=1, sign=+1)
    chi_plus = np.conj(ctx.chi)  # chi(e^{i lam}) for real coefficients
    X = chi_plus[:, None] * np.einsum("mi,mij->mj", A, ctx.g) - C
    Y = chi_plus[:, None] * np.einsum("mi,mij->mj", A, ctx.f) + (np.abs(ctx.beta) ** 2)[:, None] * C
    return {"A": A, "C": C, "X": X, "Y": Y,
            "Xp": np.einsum("mi,mij->mj", X, ctx.pinv), "Yp": np.einsum("mi,mij->mj", Y, ctx.pinv)}


def _characteristics(ctx: GridContext, a_blocks: np.ndarray, c: np.ndarray):
    rows = characteristic_rows(ctx, a_blocks, c)
    Xp, Yp = rows["Xp"], rows["Yp"]
    h = Xp * (np.conj(ctx.beta) / np.conj(ctx.chi))[:, None]
    h_inc = Xp / ctx.rho[:, None]
    # direct integral form of the MSE
    t1 = np.real(np.einsum("mi,mij,mj->m", Yp, ctx.g, np.conj(Yp))) / np.abs(ctx.chi) ** 2
    t2 = np.real(np.einsum("mi,mij,mj->m", Xp, ctx.f, np.conj(Xp))) / ctx.rho
    delta_int = float(np.sum(t1 + t2) * (TWO_PI / ctx.M))
    return h, h_inc, delta_int


def solve_filter(f: SpectralDensityGrid, g: SpectralDensityGrid, a, spec: IncrementSpec,
                 L: int | None = None, tol: float = 1e-4, ridge: float = 0.0,
                 ctx: GridContext | None = None) -> FilterSolution:
    """Optimal filter for the functional with scalar coefficients ``a``.

    Parameters
    ----------
    a : array_like or LiftedCoefficients
        Scalar coefficients ``a(0..M)`` (lifted with period ``spec.period``)
        or already lifted blocks.
    L : int, optional
        Fixed truncation; adaptive when omitted.
    tol : float
        Relative MSE change accepted by the adaptive truncation.
    """
    T = ctx.T if ctx is not None else f.T
    if T != spec.period:
        raise InputError("density dimension must equal the period", T=T, period=spec.period)
    lifted = a if isinstance(a, LiftedCoefficients) else lift_coefficients(a, spec.period)
    a_blocks = np.asarray(lifted.blocks, dtype=float)
    a_mu = a_minus_mu(lifted, spec)
    if ctx is None:
        ctx = grid_context(f, g, spec, ridge=ridge)
    L_cap = max_truncation(ctx.M, a_mu.shape[0], spec.n_gamma)
    if L is not None:
        L_tab = L
    else:
        L_tab = L_cap
    tables = coefficient_tables(ctx, L_tab, a_mu.shape[0], a_blocks.shape[0])
    L, c, lin, quad, res, history = choose_truncation(tables, a_mu, a_blocks, L_cap, tol, L)
    h, h_inc, delta_int = _characteristics(ctx, a_blocks, c)
    taps, tap_rep = _taps(h_inc, ctx.lam)
    delta = lin + quad
    return FilterSolution(spec, ctx.lam, lifted, a_mu, h, h_inc, c, delta, delta_int, lin, quad, L,
                          taps, tap_rep, res, history)


def mse(f, g, a, spec, **kwargs) -> float:
    return solve_filter(f, g, a, spec, **kwargs).delta


def lag_frames(zeta, T: int) -> np.ndarray:
    """Lag-ordered frames of a chronological history (most recent first).

    Accepts a scalar history ending at time 0 or a ready frame array of
    shape ``(n_frames, T)`` (or ``(R, n_frames, T)`` for batches).
    """
    z = np.asarray(zeta, dtype=float)
    if z.ndim == 1:
        return lift_history(z, T).frames
    if z.shape[-1] != T:
        raise InputError("frame width must equal the period", T=T, got=z.shape[-1])
    return z


def estimate_functional(zeta, solution: FilterSolution, taps: np.ndarray | None = None) -> np.ndarray:
    """Apply the optimal filter to observed data.

    Parameters
    ----------
    zeta : array_like
        Either a chronological scalar history ending at time 0, or lag
        frames of shape ``(n_frames, T)`` / ``(R, n_frames, T)`` where frame
        ``m`` holds ``zeta(-m)``.
    """
    spec = solution.spec
    T = spec.period
    Z = lag_frames(zeta, T)
    taps = np.real(solution.taps if taps is None else taps)
    e = expand_increment_coeffs(spec).as_array()
    n = len(e) - 1
    K = taps.shape[0]
    N = solution.a.N
    need = max(K + n, N + 1)
    if Z.shape[-2] < need:
        raise InputError("insufficient history for the filter", required_frames=need, frames=int(Z.shape[-2]))
    plug_in = np.einsum("...kt,kt->...", Z[..., : N + 1, :], solution.a.blocks)
    inc = np.zeros(Z.shape[:-2] + (K, T))
    for i in np.flatnonzero(e):
        inc += e[i] * Z[..., i:i + K, :]
    correction = np.einsum("...kt,kt->...", inc, taps)
    return plug_in - correction


def estimate_single_value(zeta, M: int, spec: IncrementSpec, f: SpectralDensityGrid,
                          g: SpectralDensityGrid, **kwargs):
    """Estimate of the value ``M`` steps before the present; returns ``(estimate, solution)``."""
    lifted = single_value_coefficients(M, spec.period)
    sol = solve_filter(f, g, lifted, spec, **kwargs)
    est = estimate_functional(zeta, sol) if zeta is not None else None
    return est, sol
