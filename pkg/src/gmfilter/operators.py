"""Matrix Fourier-coefficient operators and the block linear system.

Notation on the grid (``chi = chi(e^{-i lam})``, ``beta = beta(i lam)``)::

    rho = |chi|^2 / |beta|^2            p = f + |beta|^2 g
    w   = p^{-1} / rho                  (inverse density of observed increments)

Fourier coefficients ``phi_j(F) = (1/2 pi) int e^{-i lam j} F(lam) dlam`` are
taken with the midpoint rule, which on the midpoint grid is an FFT with a
phase correction.  The families are

    S_j = phi_j(g w),   P_j = phi_j(w),   Q_j = phi_j(f p^{-1} g)

and the index-form blocks are ``S_{l,k} = S_{l+k}``, ``P_{l,k} = P_{l-k}``
and ``Q_{l,k} = Q_{l-k}``.  The block matrices act on column vectors, so
the S and P blocks are stored transposed::

    bS[L, K] = S_{L+1+K-n}^T,   bP[L, K] = P_{L-K}^T,   bQ[L, K] = Q_{L-K}

With these, ``bP c = bS a_mu`` gives the coefficients of
``C(e^{i lam}) = sum_k c_k e^{i lam (k+1)}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InputError, NumericalError
from .increments import IncrementSpec, beta_at, chi_at
from .spectral import COND_CAP, SpectralDensityGrid, check_compatible, hermitian_inverse


@dataclass(frozen=True, eq=False)
class GridContext:
    """Pointwise quantities shared by the operator and filter computations."""

    spec: IncrementSpec
    lam: np.ndarray
    chi: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    f: np.ndarray
    g: np.ndarray
    p: np.ndarray
    pinv: np.ndarray

    @property
    def M(self) -> int:
        return len(self.lam)

    @property
    def T(self) -> int:
        return self.f.shape[1]

    @property
    def w(self) -> np.ndarray:
        return self.pinv / self.rho[:, None, None]

    @property
    def gw(self) -> np.ndarray:
        return self.g @ self.w

    @property
    def kernel_q(self) -> np.ndarray:
        return self.f @ self.pinv @ self.g


def grid_context(f: SpectralDensityGrid, g: SpectralDensityGrid, spec: IncrementSpec,
                 ridge: float = 0.0, cond_cap: float = COND_CAP) -> GridContext:
    check_compatible(f, g)
    if not spec.is_integer:
        raise InputError("filtering requires an integer-mode increment spec; "
                         "fold fractional orders into the density first")
    lam = f.lambdas
    chi = chi_at(spec, lam)
    beta = beta_at(spec, lam)
    if np.min(np.abs(chi)) < 1e-12:
        raise NumericalError("increment response vanishes at a grid point")
    rho = np.abs(chi) ** 2 / np.abs(beta) ** 2
    p = f.values + (np.abs(beta) ** 2)[:, None, None] * g.values
    pinv = hermitian_inverse(p, cond_cap=cond_cap, ridge=ridge, lambdas=lam)
    return GridContext(spec, lam, chi, beta, rho, np.asarray(f.values), np.asarray(g.values), p, pinv)


def fourier_coefficients(F: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """``phi_j(F)`` for ``j = lo..hi`` (inclusive) by the midpoint rule.

    Returns shape ``(hi - lo + 1,) + F.shape[1:]``.  Indices must satisfy
    ``|j| < M/2`` to avoid aliasing.
    """
    M = F.shape[0]
    if max(abs(lo), abs(hi)) >= M // 2:
        raise NumericalError("Fourier index exceeds half the grid size; refine the grid",
                             max_index=max(abs(lo), abs(hi)), M=M)
    spectrum = np.fft.fft(F, axis=0) / M
    j = np.arange(lo, hi + 1)
    phase = np.where(j % 2 == 0, 1.0, -1.0) * np.exp(-1j * np.pi * j / M)
    shape = (-1,) + (1,) * (F.ndim - 1)
    return phase.reshape(shape) * spectrum[j % M]


@dataclass(frozen=True, eq=False)
class CoefficientTables:
    """Precomputed coefficient families over a range of indices."""

    n_gamma: int
    T: int
    s_lo: int
    S: np.ndarray
    P: np.ndarray  # P[j] for j = 0..jmax (negative j by Hermitian symmetry)
    Q: np.ndarray

    def s(self, j):
        return self.S[np.asarray(j) - self.s_lo]

    def p(self, j):
        j = np.asarray(j)
        out = self.P[np.abs(j)]
        neg = j < 0
        if np.any(neg):
            out = out.copy()
            out[neg] = np.conj(np.swapaxes(out[neg], -1, -2))
        return out

    def q(self, j):
        j = np.asarray(j)
        out = self.Q[np.abs(j)]
        neg = j < 0
        if np.any(neg):
            out = out.copy()
            out[neg] = np.conj(np.swapaxes(out[neg], -1, -2))
        return out


def coefficient_tables(ctx: GridContext, L_max: int, ncols: int, nq: int) -> CoefficientTables:
    """Coefficient families large enough for truncation up to ``L_max`` blocks.

    ``ncols`` is the number of blocks of ``a_mu`` and ``nq`` that of ``a``.
    """
    n = ctx.spec.n_gamma
    s_lo, s_hi = 1 - n, L_max + ncols - n
    S = fourier_coefficients(ctx.gw, s_lo, s_hi)
    P = fourier_coefficients(ctx.w, 0, L_max)
    Q = fourier_coefficients(ctx.kernel_q, 0, nq)
    return CoefficientTables(n, ctx.T, s_lo, S, P, Q)


def max_truncation(M: int, ncols: int, n_gamma: int) -> int:
    """Largest truncation whose Fourier indices stay below ``M/2``."""
    return max(1, min(1024, M // 2 - 2 - max(ncols - n_gamma, 0), M // 4))


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Dense block matrices at truncation ``L``.

    ``S`` has shape ``(L T, ncols T)``; ``P`` is ``(L T, L T)`` Hermitian PD;
    ``Q`` is ``(nq T, nq T)`` Hermitian PSD.
    """

    L: int
    T: int
    n_gamma: int
    ncols: int
    nq: int
    S: np.ndarray
    P: np.ndarray
    Q: np.ndarray

    def min_eig_P(self) -> float:
        return float(np.linalg.eigvalsh(self.P)[0])

    def toeplitz_defect(self) -> float:
        """Largest deviation of P and Q from block Toeplitz structure."""
        T = self.T
        worst = 0.0
        for mat, nb in ((self.P, self.L), (self.Q, self.nq)):
            blocks = mat.reshape(nb, T, nb, T).transpose(0, 2, 1, 3)
            for d in range(-nb + 1, nb):
                diag = np.array([blocks[i, i - d] for i in range(max(d, 0), min(nb, nb + d))])
                if len(diag) > 1:
                    worst = max(worst, float(np.max(np.abs(diag - diag[0]))))
        return worst


def _block_matrix(blocks: np.ndarray) -> np.ndarray:
    """``(R, C, T, T)`` blocks to a dense ``(R T, C T)`` matrix."""
    R, C, T, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(R * T, C * T)


def assemble_operators(tables: CoefficientTables, L: int, ncols: int, nq: int) -> OperatorSet:
    n, T = tables.n_gamma, tables.T
    Lr = np.arange(L)[:, None]
    Kc = np.arange(ncols)[None, :]
    S = _block_matrix(np.swapaxes(tables.s(Lr + 1 + Kc - n), -1, -2))
    P = _block_matrix(np.swapaxes(tables.p(Lr - Lr.T), -1, -2))
    Kr = np.arange(nq)[:, None]
    Q = _block_matrix(tables.q(Kr - Kr.T))
    P = 0.5 * (P + P.conj().T)
    Q = 0.5 * (Q + Q.conj().T)
    return OperatorSet(L, T, n, ncols, nq, S, P, Q)


def fourier_blocks(f: SpectralDensityGrid, g: SpectralDensityGrid, spec: IncrementSpec, L: int,
                   ncols: int | None = None, nq: int | None = None, ridge: float = 0.0) -> OperatorSet:
    """Operators S, P, Q at truncation ``L``.

    ``ncols`` (width of S) defaults to ``L + n``; ``nq`` (size of Q) to ``L``.
    """
    if L < 1:
        raise InputError("truncation must be >= 1", L=L)
    ctx = grid_context(f, g, spec, ridge=ridge)
    ncols = L + spec.n_gamma if ncols is None else ncols
    nq = L if nq is None else nq
    return assemble_operators(coefficient_tables(ctx, L, ncols, nq), L, ncols, nq)


def assemble_rhs(a_mu: np.ndarray, ops: OperatorSet) -> np.ndarray:
    """``bS a_mu`` for the stacked block vector ``a_mu`` of length ``ncols T``."""
    a_mu = np.asarray(a_mu)
    flat = a_mu.reshape(-1)
    if flat.size != ops.ncols * ops.T:
        raise InputError("coefficient vector does not match the operator width",
                         expected=ops.ncols * ops.T, got=int(flat.size))
    return ops.S @ flat


@dataclass(frozen=True)
class SolveReport:
    residual: float
    min_pivot: float


def solve_for_c(ops: OperatorSet, rhs: np.ndarray) -> tuple[np.ndarray, SolveReport]:
    """Solve ``bP c = rhs`` by Cholesky; returns ``c`` with shape ``(L, T)``."""
    rhs = np.asarray(rhs, dtype=complex).reshape(-1)
    try:
        factor = cho_factor(ops.P, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("operator P is not positive definite", min_eigenvalue=ops.min_eig_P()) from exc
    c = cho_solve(factor, rhs)
    diag = np.abs(np.diag(factor[0])) ** 2
    norm = float(np.linalg.norm(rhs))
    res = float(np.linalg.norm(ops.P @ c - rhs)) / norm if norm > 0 else 0.0
    if res > 1e-8:
        raise NumericalError("block system solve is inaccurate", residual=res)
    report = SolveReport(res, float(np.min(diag)))
    return c.reshape(ops.L, ops.T), report
