"""Independent time-domain oracle for the filtering MSE.

The best linear estimate of ``A eta`` from the observed increments
``u(-k) = (chi zeta)(-k), k = 0..W`` is computed from explicit covariances
and the normal equations.  Nothing here touches the operator machinery.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalError
from .increments import IncrementSpec, expand_increment_coeffs
from .lift import LiftedCoefficients, lift_coefficients
from .spectral import SpectralDensityGrid, structural_cov


def _autocov_table(g: SpectralDensityGrid, max_lag: int) -> np.ndarray:
    """``R(m)`` for ``m = -max_lag..max_lag`` (index ``m + max_lag``)."""
    return g.covariance(np.arange(-max_lag, max_lag + 1))


def oracle_finite_window(f: SpectralDensityGrid, g: SpectralDensityGrid, spec: IncrementSpec, a,
                         W: int = 200, jitter: float = 1e-10, return_weights: bool = False):
    """MSE of the best linear estimate of ``A eta`` from ``W + 1`` increment frames.

    Parameters
    ----------
    f : SpectralDensityGrid
        Signal density in structural form.
    g : SpectralDensityGrid
        Noise density.
    a : array_like or LiftedCoefficients
        The functional.
    W : int
        Window: increments at frames ``0, -1, ..., -W`` are observed.
    """
    lifted = a if isinstance(a, LiftedCoefficients) else lift_coefficients(a, spec.period)
    A = np.asarray(lifted.blocks, dtype=float)
    N = A.shape[0] - 1
    T = spec.period
    e = expand_increment_coeffs(spec).as_array()
    n = len(e) - 1
    max_lag = W + 2 * n + N + 1
    R = _autocov_table(g, max_lag)

    def r_eta(m):
        return R[np.asarray(m) + max_lag]

    # increment covariance D(m) = D_xi(m) + D_eta(m), m = -W..W
    lags = np.arange(-W, W + 1)
    D = structural_cov(spec, f, lags)
    nz = np.flatnonzero(e)
    for k in nz:
        for kp in nz:
            D = D + e[k] * e[kp] * r_eta(lags - k + kp)
    # Sigma[(j, k)] = E[u(-j) u(-k)^*] = D(k - j)
    idx = np.arange(W + 1)
    blocks = D[(idx[None, :] - idx[:, None]) + W]  # (W+1, W+1, T, T)
    Sigma = blocks.transpose(0, 2, 1, 3).reshape((W + 1) * T, (W + 1) * T)
    Sigma = 0.5 * (Sigma + Sigma.conj().T)
    # c[k] = E[u(-k) (A eta)^*] = sum_l sum_i e(i) R(l - k - i) a_l
    c = np.zeros((W + 1, T), dtype=complex)
    for k in range(W + 1):
        for i in nz:
            c[k] += e[i] * np.einsum("lij,lj->i", r_eta(np.arange(N + 1) - k - i), A)
    # Var(A eta) = sum_{l, j} a_l^T R(j - l) a_j
    Lg = np.arange(N + 1)
    Rb = r_eta(Lg[None, :] - Lg[:, None])  # (l, j, T, T)
    var = np.einsum("li,ljik,jk->", A, Rb, A)
    scale = float(np.real(np.trace(Sigma))) / Sigma.shape[0]
    jit = 0.0
    for _ in range(2):
        try:
            factor = cho_factor(Sigma + jit * scale * np.eye(Sigma.shape[0]), lower=True)
            break
        except np.linalg.LinAlgError:
            jit = jitter
    else:
        raise NumericalError("oracle covariance is not positive definite beyond jitter")
    cv = c.reshape(-1)
    weights = cho_solve(factor, cv)
    mse = float(np.real(var - np.vdot(cv, weights)))
    if return_weights:
        return mse, weights.reshape(W + 1, T)
    return mse


def oracle_sequence(f, g, spec, a, windows) -> list[float]:
    return [oracle_finite_window(f, g, spec, a, W) for W in windows]
