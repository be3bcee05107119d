"""Translation between scalar T-periodic problems and T-vector problems.

Series are lifted frame by frame: frame ``m``, slot ``p`` (1-based) holds
``x(mT + p - 1)``.  For the filtering problem the observed history is
lifted in lag order, i.e. ``x(k)`` is the value observed ``k`` steps before
the present.  With that ordering a functional ``sum_k a(k) x(-k)`` equals
``sum_m a(m)^T xvec(-m)`` with ``a_p(m) = a(mT + p - 1)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True, eq=False)
class LiftedSeries:
    """Frames ``(n_frames, T)`` of a lifted scalar series."""

    T: int
    frames: np.ndarray

    def unlift(self) -> np.ndarray:
        return self.frames.reshape(-1).copy()


@dataclass(frozen=True, eq=False)
class LiftedCoefficients:
    """Blocks ``a(0..N)`` of a lifted functional, shape ``(N + 1, T)``."""

    T: int
    blocks: np.ndarray
    M: int

    @property
    def N(self) -> int:
        return self.blocks.shape[0] - 1

    def condition_report(self) -> dict:
        """The two summability sums of the functional (always finite here)."""
        norms = np.linalg.norm(self.blocks, axis=1)
        k = np.arange(len(norms))
        return {"sum_norm": float(norms.sum()), "sum_weighted_sq": float(((k + 1) * norms ** 2).sum()),
                "finite": True}


def lift_series(x, T: int) -> LiftedSeries:
    """Frame ``m``, slot ``p`` holds ``x(mT + p - 1)``.

    A trailing partial frame is dropped with a warning.
    """
    if T < 1:
        raise InputError("period must be positive", T=T)
    x = np.asarray(x, dtype=float).reshape(-1)
    full = (len(x) // T) * T
    if full != len(x):
        warnings.warn(f"dropping {len(x) - full} trailing samples that do not fill a frame", stacklevel=2)
    return LiftedSeries(T, x[:full].reshape(-1, T))


def lift_history(history, T: int) -> LiftedSeries:
    """Lift a chronologically ordered history ending at time 0 in lag order.

    Frame ``m`` slot ``p`` holds the observation at time ``-(mT + p - 1)``;
    frames are returned with ``m = 0`` (most recent) first.
    """
    h = np.asarray(history, dtype=float).reshape(-1)
    return lift_series(h[::-1], T)


def lift_coefficients(a, T: int) -> LiftedCoefficients:
    """``N = [M/T]``; ``a_p(m) = a(mT + p - 1)`` padded with zeros past ``M``."""
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size == 0:
        raise InputError("coefficient list must be non-empty")
    M = a.size - 1
    N = M // T
    blocks = np.zeros((N + 1) * T)
    blocks[: M + 1] = a
    return LiftedCoefficients(T, blocks.reshape(N + 1, T), M)


def unlift_coefficients(lifted: LiftedCoefficients) -> np.ndarray:
    return lifted.blocks.reshape(-1)[: lifted.M + 1].copy()


def index_single_value(M: int, T: int) -> tuple[int, int]:
    """Block and 1-based slot of the single value at lag ``M``: ``([M/T], M + 1 - NT)``."""
    if M < 0:
        raise InputError("lag must be non-negative", M=M)
    N = M // T
    return N, M + 1 - N * T


def single_value_coefficients(M: int, T: int) -> LiftedCoefficients:
    a = np.zeros(M + 1)
    a[M] = 1.0
    return lift_coefficients(a, T)


def functional_value(a, x_lagged) -> float:
    """``sum_k a(k) x(-k)`` with ``x_lagged[k] = x(-k)``."""
    a = np.asarray(a, dtype=float)
    return float(np.dot(a, np.asarray(x_lagged, dtype=float)[: a.size]))
