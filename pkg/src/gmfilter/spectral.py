"""Matrix-valued spectral densities on a midpoint frequency grid.

Convention: a stationary T-vector sequence with density ``f`` has
covariance ``R(m) = E[x(t+m) x(t)^*] = int_{-pi}^{pi} e^{i lam m} f(lam) dlam``,
so white noise with identity covariance has ``f = I / (2 pi)``.

The density ``f`` of a GM-increment signal enters the filtering formulas
in the form fixed by the spectral representation of its structural
function: the increment sequence itself has density
``|chi(e^{-i lam})|^2 / |beta(i lam)|^2 f(lam)``.  Helpers convert between
the two forms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, NumericalError
from .increments import IncrementSpec, beta_at, chi_at, fractional_factor, increment_ratio

DEFAULT_GRID = 4096
COND_CAP = 1e12

DensityFunction = Callable[[np.ndarray], np.ndarray]


def midpoint_grid(M: int) -> np.ndarray:
    """Frequencies ``-pi + (m + 1/2) 2 pi / M`` for ``m = 0..M-1``."""
    if M < 2:
        raise InputError("grid size must be at least 2", M=M)
    return -np.pi + (np.arange(M) + 0.5) * (2.0 * np.pi / M)


def _as_matrices(values, T: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None, None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise InputError("density values must have shape (M, T, T)", shape=list(arr.shape))
    if T is not None and arr.shape[1] != T:
        raise InputError("density dimension mismatch", expected=T, got=arr.shape[1])
    return arr


@dataclass(frozen=True, eq=False)
class SpectralDensityGrid:
    """Hermitian PSD matrices sampled on the midpoint grid.

    Parameters
    ----------
    values : ndarray, shape (M, T, T)
        Density matrices at :func:`midpoint_grid` frequencies.
    source : callable, optional
        Function of an array of frequencies returning ``(len, T, T)``
        values.  When present the density can be re-sampled on a finer
        grid (used by the minimality check).
    """

    values: np.ndarray
    source: DensityFunction | None = None

    def __post_init__(self):
        vals = _as_matrices(self.values)
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)
        if not np.all(np.isfinite(vals)):
            bad = np.flatnonzero(~np.all(np.isfinite(vals), axis=(1, 2)))
            raise NumericalError("density has non-finite values", frequencies=self.lambdas[bad[:10]].tolist())
        scale = max(1.0, float(np.max(np.abs(vals)))) if vals.size else 1.0
        herm = float(np.max(np.abs(vals - np.conj(np.swapaxes(vals, 1, 2))))) if vals.size else 0.0
        if herm > 1e-12 * scale:
            raise InputError("density matrices are not Hermitian", max_asymmetry=herm)
        vals_h = 0.5 * (vals + np.conj(np.swapaxes(vals, 1, 2)))
        low = float(np.min(np.linalg.eigvalsh(vals_h))) if vals.size else 0.0
        if low < -1e-10 * scale:
            raise InputError("density matrices are not positive semidefinite", min_eigenvalue=low)

    # -- constructors ---------------------------------------------------------------
    @classmethod
    def from_function(cls, fn: DensityFunction, M: int = DEFAULT_GRID) -> "SpectralDensityGrid":
        lam = midpoint_grid(M)
        return cls(_as_matrices(fn(lam)), fn)

    @classmethod
    def constant(cls, matrix, M: int = DEFAULT_GRID) -> "SpectralDensityGrid":
        mat = np.atleast_2d(np.asarray(matrix, dtype=complex))

        def fn(lam, mat=mat):
            return np.broadcast_to(mat, (len(lam),) + mat.shape).copy()

        return cls.from_function(fn, M)

    @classmethod
    def zeros(cls, T: int, M: int = DEFAULT_GRID) -> "SpectralDensityGrid":
        return cls.constant(np.zeros((T, T)), M)

    # -- shape --------------------------------------------------------------------------
    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @property
    def lambdas(self) -> np.ndarray:
        return midpoint_grid(self.M)

    @property
    def dlam(self) -> float:
        return 2.0 * np.pi / self.M

    # -- algebra --------------------------------------------------------------------------
    def scaled(self, c: float) -> "SpectralDensityGrid":
        src = None if self.source is None else (lambda lam, s=self.source: c * s(lam))
        return SpectralDensityGrid(c * self.values, src)

    def __add__(self, other: "SpectralDensityGrid") -> "SpectralDensityGrid":
        check_compatible(self, other)
        src = None
        if self.source is not None and other.source is not None:
            src = lambda lam, a=self.source, b=other.source: a(lam) + b(lam)  # noqa: E731
        return SpectralDensityGrid(self.values + other.values, src)

    def multiply(self, weight: np.ndarray, weight_fn: Callable | None = None) -> "SpectralDensityGrid":
        """Pointwise product with a non-negative scalar function."""
        src = None
        if self.source is not None and weight_fn is not None:
            src = lambda lam, s=self.source, w=weight_fn: w(lam)[:, None, None] * s(lam)  # noqa: E731
        return SpectralDensityGrid(np.asarray(weight)[:, None, None] * self.values, src)

    def refine(self, M: int) -> "SpectralDensityGrid":
        if self.source is None:
            raise InputError("density has no source function and cannot be re-sampled")
        return SpectralDensityGrid.from_function(self.source, M)

    def trace(self) -> np.ndarray:
        return np.real(np.einsum("mii->m", self.values))

    def integral(self) -> np.ndarray:
        """``int f(lam) dlam`` by the midpoint rule (a T x T matrix)."""
        return self.values.sum(axis=0) * self.dlam

    def covariance(self, lags: Sequence[int]) -> np.ndarray:
        """``R(m) = int e^{i lam m} f(lam) dlam`` for each lag."""
        lags = np.atleast_1d(np.asarray(lags))
        phase = np.exp(1j * np.outer(lags, self.lambdas))
        return np.einsum("km,mij->kij", phase, self.values) * self.dlam

    # -- serialization ----------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "M_grid": self.M,
            "re": np.real(self.values).reshape(self.M, -1).tolist(),
            "im": np.imag(self.values).reshape(self.M, -1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralDensityGrid":
        try:
            T, M = int(data["T"]), int(data["M_grid"])
            re = np.asarray(data["re"], dtype=float)
            im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
            vals = (re + 1j * im).reshape(M, T, T)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed density grid: {exc}") from exc
        return cls(vals)

    def save(self, path: str) -> None:
        if str(path).endswith(".npz"):
            np.savez(path, T=self.T, M_grid=self.M, values=self.values)
        else:
            with open(path, "w") as fh:
                json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str) -> "SpectralDensityGrid":
        try:
            if str(path).endswith(".npz"):
                with np.load(path) as data:
                    return cls(data["values"])
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, ValueError, KeyError) as exc:
            raise InputError(f"unreadable density file: {exc}", path=str(path)) from exc
        return cls.from_dict(data)

    def trace_csv_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.lambdas.tolist(), self.trace().tolist()))


def check_compatible(*grids: SpectralDensityGrid) -> None:
    first = grids[0]
    for other in grids[1:]:
        if other.M != first.M or other.T != first.T:
            raise InputError("density grids do not match", shapes=[(g.M, g.T) for g in grids])


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def hermitian_inverse(p: np.ndarray, cond_cap: float = COND_CAP, ridge: float = 0.0,
                      lambdas: np.ndarray | None = None) -> np.ndarray:
    """Pointwise inverse of Hermitian PD matrices via eigendecomposition.

    Parameters
    ----------
    ridge : float
        Relative ridge ``eps``; ``p + eps * mean(trace p / T) * I`` is
        inverted instead.  Default off.

    Raises
    ------
    NumericalError
        If any matrix is not positive definite or its condition number
        exceeds ``cond_cap``.
    """
    p = _herm(np.asarray(p, dtype=complex))
    T = p.shape[-1]
    if ridge > 0:
        level = float(np.mean(np.real(np.einsum("mii->m", p)))) / T
        p = p + ridge * level * np.eye(T)
    w, v = np.linalg.eigh(p)
    top = np.max(np.abs(w), axis=1)
    bad = (w[:, 0] <= 0) | (w[:, 0] * cond_cap < top)
    if np.any(bad):
        idx = np.flatnonzero(bad)
        where = (lambdas[idx[:10]].tolist() if lambdas is not None else idx[:10].tolist())
        raise NumericalError("combined density is singular or ill-conditioned on the grid",
                             frequencies=where, count=int(idx.size),
                             min_eigenvalue=float(np.min(w[:, 0])))
    return np.einsum("mij,mj,mkj->mik", v, 1.0 / w, np.conj(v))


def combined_density(f: SpectralDensityGrid, g: SpectralDensityGrid, spec: IncrementSpec) -> SpectralDensityGrid:
    """``p(lam) = f(lam) + |beta(i lam)|^2 g(lam)``."""
    check_compatible(f, g)
    b2 = np.abs(beta_at(spec, f.lambdas)) ** 2
    src = None
    if f.source is not None and g.source is not None:
        def src(lam, fs=f.source, gs=g.source):
            return fs(lam) + (np.abs(beta_at(spec, lam)) ** 2)[:, None, None] * gs(lam)
    return SpectralDensityGrid(f.values + b2[:, None, None] * g.values, src)


def to_increment_density(spec: IncrementSpec, f: SpectralDensityGrid) -> SpectralDensityGrid:
    """Density of the increment sequence: ``|chi|^2/|beta|^2 f``."""
    return f.multiply(increment_ratio(spec, f.lambdas), lambda lam: increment_ratio(spec, lam))


def from_increment_density(spec: IncrementSpec, f_inc: SpectralDensityGrid) -> SpectralDensityGrid:
    """Inverse of :func:`to_increment_density`: ``|beta|^2/|chi|^2 f_inc``."""
    return f_inc.multiply(1.0 / increment_ratio(spec, f_inc.lambdas),
                          lambda lam: 1.0 / increment_ratio(spec, lam))


def fractional_density(spec: IncrementSpec, base: SpectralDensityGrid) -> SpectralDensityGrid:
    """Multiply ``base`` by the Gegenbauer factor of the fractional orders.

    The base density must be bounded away from zero and infinity on the grid.
    """
    vals = _herm(base.values)
    eig = np.linalg.eigvalsh(vals)
    if not np.all(np.isfinite(eig)) or np.min(eig) <= 0:
        raise InputError("base density must be bounded away from zero", min_eigenvalue=float(np.min(eig)))
    from .increments import seasonal_root_set

    roots = seasonal_root_set(spec)
    lam = base.lambdas
    for nu in roots.nus:
        if np.any(np.isclose(np.abs(lam), nu, atol=1e-14, rtol=0)):
            raise NumericalError("grid point coincides with a unit-root frequency", nu=float(nu))
    return base.multiply(fractional_factor(spec, lam), lambda x: fractional_factor(spec, x))


@dataclass(frozen=True)
class MinimalityReport:
    value: float
    refined_value: float
    relative_change: float
    finite: bool

    def to_dict(self) -> dict:
        return {"value": self.value, "refined_value": self.refined_value,
                "relative_change": self.relative_change, "finite": self.finite}


def _minimality_integral(fv, gv, lam, spec, ridge) -> float:
    b2 = np.abs(beta_at(spec, lam)) ** 2
    p = fv + b2[:, None, None] * gv
    pinv = hermitian_inverse(p, ridge=ridge, lambdas=lam)
    integrand = np.real(np.einsum("mii->m", pinv)) / increment_ratio(spec, lam)
    return float(np.sum(integrand) * (2 * np.pi / len(lam)))


def check_minimality(f: SpectralDensityGrid, g: SpectralDensityGrid, spec: IncrementSpec,
                     ridge: float = 0.0, threshold: float = 0.10) -> MinimalityReport:
    """Quadrature of ``int Tr[|beta|^2/|chi|^2 p^{-1}] dlam`` with a refinement test.

    The value is recomputed on a grid of twice the size when both densities
    carry source functions, otherwise on the half-size subgrid of even
    indices.  The integral is declared infinite when it moves by more than
    ``threshold`` relative.
    """
    check_compatible(f, g)
    lam = f.lambdas
    value = _minimality_integral(f.values, g.values, lam, spec, ridge)
    if f.source is not None and g.source is not None:
        lam2 = midpoint_grid(2 * f.M)
        other = _minimality_integral(_as_matrices(f.source(lam2)), _as_matrices(g.source(lam2)),
                                     lam2, spec, ridge)
    else:
        other = _minimality_integral(f.values[::2], g.values[::2], lam[::2], spec, ridge)
    rel = abs(other - value) / max(abs(value), abs(other), 1e-300)
    return MinimalityReport(value, other, rel, bool(rel <= threshold and np.isfinite(value)))


def structural_cov(spec: IncrementSpec, f: SpectralDensityGrid, m, mu1: Sequence[int] | None = None,
                   mu2: Sequence[int] | None = None) -> np.ndarray:
    """Structural covariance ``D(m; mu1, mu2)`` by the midpoint rule.

    ``D = int e^{i lam m} chi_{mu1}(e^{-i lam}) chi_{mu2}(e^{i lam}) |beta|^{-2} f(lam) dlam``.
    Returns an array of shape ``(len(m), T, T)`` (or ``(T, T)`` for scalar m).
    """
    lam = f.lambdas
    weight = (chi_at(spec, lam, mu1, sign=-1) * chi_at(spec, lam, mu2, sign=+1)
              / np.abs(beta_at(spec, lam)) ** 2)
    if not np.all(np.isfinite(weight)):
        raise NumericalError("structural integrand is not finite on the grid")
    lags = np.atleast_1d(np.asarray(m))
    phase = np.exp(1j * np.outer(lags, lam)) * weight[None, :]
    out = np.einsum("km,mij->kij", phase, f.values) * f.dlam
    return out[0] if np.ndim(m) == 0 else out


def density_from_psarima(model, M: int = DEFAULT_GRID, layout: str = "lag") -> SpectralDensityGrid:
    """Spectral density of the blocked stationary increments of a PSARIMA model.

    See :class:`gmfilter.psarima.PSARIMAModel` for conventions.  The returned
    grid is the density of the increment sequence (suitable for simulation
    and for :func:`from_increment_density`).
    """
    from .psarima import varma_density

    return SpectralDensityGrid.from_function(lambda lam: varma_density(model, lam, layout), M)
