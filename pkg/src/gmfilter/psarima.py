"""Periodic seasonal ARIMA models and their T-blocked vector form.

Scalar model (season ``k = t mod T``)::

    sum_j Phi_k(j) Y(t-j) = sum_j Theta_k(j) eps(t-j),   Var eps(t) = sigma2_k

with ``X`` obtained from the stationary ``Y`` by integrating through an
increment operator whose lags are measured in frames (one frame = T steps).

Blocking layouts
----------------
``"forward"``
    slot ``r`` of frame ``j`` holds time ``jT + r``.
``"lag"``
    slot ``r`` of frame ``j`` holds time ``jT - r``.  This is the layout in
    which a functional ``sum_k a(k) x(-k)`` lifts to ``sum_m a(m)^T x(-m)``
    with ``a_p(m) = a(mT + p - 1)``; the filtering pipeline uses it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .increments import IncrementSpec, integrate_levels

LAYOUTS = {"forward": 1, "lag": -1}


@dataclass(frozen=True)
class PSARIMAModel:
    """Periodic ARMA coefficient tables plus an optional integration spec.

    Parameters
    ----------
    ar, ma : list of T sequences
        ``ar[k][j] = Phi_k(j)``; ``ma[k][j] = Theta_k(j)``.  ``Phi_k(0)`` must
        be nonzero (usually 1).
    sigma2 : list of T floats
        Innovation variances per season.
    integration : IncrementSpec, optional
        Increment operator in frame units.
    """

    ar: tuple
    ma: tuple
    sigma2: tuple
    integration: IncrementSpec | None = None

    def __post_init__(self):
        ar = tuple(np.asarray(a, dtype=float) for a in self.ar)
        ma = tuple(np.asarray(b, dtype=float) for b in self.ma)
        s2 = tuple(float(v) for v in np.broadcast_to(np.asarray(self.sigma2, dtype=float), (len(ar),)))
        object.__setattr__(self, "ar", ar)
        object.__setattr__(self, "ma", ma)
        object.__setattr__(self, "sigma2", s2)
        if len(ar) == 0 or len(ar) != len(ma):
            raise InputError("ar and ma tables need one entry per season")
        if any(a.ndim != 1 or a.size == 0 or a[0] == 0 for a in ar):
            raise InputError("every AR polynomial needs a nonzero leading coefficient")
        if any(b.ndim != 1 or b.size == 0 for b in ma):
            raise InputError("every MA polynomial needs at least one coefficient")
        if any(v < 0 for v in s2):
            raise InputError("innovation variances must be non-negative")
        if self.integration is not None and self.integration.period != len(ar):
            raise InputError("integration spec period must equal the number of seasons")

    @property
    def T(self) -> int:
        return len(self.ar)

    @classmethod
    def from_dict(cls, data: dict) -> "PSARIMAModel":
        unknown = set(data) - {"ar", "ma", "sigma2", "integration"}
        if unknown:
            raise InputError("unknown PSARIMA keys", keys=sorted(unknown))
        integ = data.get("integration")
        return cls(tuple(data["ar"]), tuple(data["ma"]), tuple(np.atleast_1d(data["sigma2"])),
                   None if integ is None else IncrementSpec.from_dict(integ))

    def to_dict(self) -> dict:
        out = {"ar": [a.tolist() for a in self.ar], "ma": [b.tolist() for b in self.ma],
               "sigma2": list(self.sigma2)}
        if self.integration is not None:
            out["integration"] = self.integration.to_dict()
        return out


def block_polynomial(tables, T: int, layout: str = "lag") -> list[np.ndarray]:
    """Matrices ``Pi_l`` of the blocked operator ``sum_l Pi_l z^l``.

    Row ``r`` (slot of time ``jT + sigma r``) and column ``r'`` of ``Pi_l``
    hold ``Phi_k(lT + sigma (r - r'))`` with ``k = sigma r mod T``.
    """
    if layout not in LAYOUTS:
        raise InputError("unknown layout", layout=layout)
    sig = LAYOUTS[layout]
    order = max(len(t) for t in tables) - 1
    nblocks = (order + T - 1) // T + 1
    mats = [np.zeros((T, T)) for _ in range(nblocks + 1)]
    for r in range(T):
        coef = tables[(sig * r) % T]
        for l in range(nblocks + 1):
            for rp in range(T):
                j = l * T + sig * (r - rp)
                if 0 <= j < len(coef):
                    mats[l][r, rp] = coef[j]
    while len(mats) > 1 and not np.any(mats[-1]):
        mats.pop()
    return mats


def _eval_poly(mats: list[np.ndarray], z: np.ndarray) -> np.ndarray:
    powers = z[:, None] ** np.arange(len(mats))[None, :]
    return np.einsum("ml,lij->mij", powers, np.stack(mats))


def check_ar_invertible(model: PSARIMAModel, layout: str = "lag", n_points: int = 2048) -> None:
    """Verify ``det Pi(z) != 0`` on the closed unit disc.

    The determinant is sampled on the unit circle; zero winding number and a
    nonvanishing minimum modulus exclude zeros inside.  On failure the
    polynomial is recovered by FFT and its roots of modulus <= 1.05 are
    reported.
    """
    mats = block_polynomial(model.ar, model.T, layout)
    z = np.exp(2j * np.pi * np.arange(n_points) / n_points)
    det = np.linalg.det(_eval_poly(mats, z))
    scale = float(np.max(np.abs(det)))
    winding = int(round(np.sum(np.diff(np.unwrap(np.angle(np.append(det, det[0]))))) / (2 * np.pi)))
    if np.min(np.abs(det)) > 1e-10 * scale and winding == 0:
        return
    coeffs = np.fft.fft(det) / n_points
    degree = model.T * (len(mats) - 1)
    poly = coeffs[: degree + 1]
    roots = np.roots(poly[::-1]) if degree > 0 else np.array([])
    near = sorted((complex(r) for r in roots if abs(r) <= 1.05), key=abs)
    raise NumericalError("AR operator is not invertible on the unit disc",
                         near_unit_roots=[[r.real, r.imag, abs(r)] for r in near])


def varma_density(model: PSARIMAModel, lam: np.ndarray, layout: str = "lag") -> np.ndarray:
    """``(1/2 pi) Pi(e^{-i lam})^{-1} Xi Sigma Xi^* Pi^{-*}`` on frequencies ``lam``."""
    check_ar_invertible(model, layout)
    T = model.T
    sig = LAYOUTS[layout]
    Pi = block_polynomial(model.ar, T, layout)
    Xi = block_polynomial(model.ma, T, layout)
    z = np.exp(-1j * np.asarray(lam))
    P = _eval_poly(Pi, z)
    X = _eval_poly(Xi, z)
    S = np.diag([model.sigma2[(sig * r) % T] for r in range(T)])
    H = np.linalg.solve(P, X)
    f = np.einsum("mij,jk,mlk->mil", H, S, np.conj(H)) / (2 * np.pi)
    return 0.5 * (f + np.conj(np.swapaxes(f, 1, 2)))


def simulate_stationary(model: PSARIMAModel, length: int, rng: np.random.Generator,
                        burn_in: int = 500, phase: int = 0) -> np.ndarray:
    """Simulate the stationary periodic ARMA part ``Y(0..length-1)``.

    ``phase`` is the season of the first returned sample.
    """
    T = model.T
    p = max(len(a) for a in model.ar) - 1
    q = max(len(b) for b in model.ma) - 1
    burn = int(burn_in)
    n = length + burn
    start_season = (phase - burn) % T
    sd = np.sqrt(np.array(model.sigma2))
    seasons = (start_season + np.arange(n)) % T
    eps = rng.standard_normal(n) * sd[seasons]
    y = np.zeros(n)
    ar = [np.pad(a, (0, p + 1 - len(a))) for a in model.ar]
    ma = [np.pad(b, (0, q + 1 - len(b))) for b in model.ma]
    for t in range(n):
        k = seasons[t]
        acc = 0.0
        for j in range(0, min(q, t) + 1):
            acc += ma[k][j] * eps[t - j]
        for j in range(1, min(p, t) + 1):
            acc -= ar[k][j] * y[t - j]
        y[t] = acc / ar[k][0]
    return y[burn:]


def integrate_scalar(y: np.ndarray, model: PSARIMAModel) -> np.ndarray:
    """Integrate increments through the frame-unit operator with zero initial values."""
    if model.integration is None:
        return np.asarray(y, dtype=float)
    return integrate_levels(y, model.integration, lag_unit=model.T)
