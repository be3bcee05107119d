"""Generalized multiple (GM) increment operators.

A GM increment applies the product of seasonal differences

    chi(B) = prod_j (1 - B^{mu_j s_j})^{d_j}

to a sequence.  This module expands the operator into exact integer
coefficients, evaluates its frequency response chi(e^{-i lam}) and the
companion polynomial beta(i lam), and handles the fractional (Gegenbauer)
decomposition used to classify stationarity and long memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import poch

from .errors import InputError

#: Largest admissible operator degree n(gamma) for exact expansion.
DEFAULT_DEGREE_CAP = 10**6
#: Default truncation of the G+/G- inverse series.
DEFAULT_SERIES_LENGTH = 4096


@dataclass(frozen=True)
class Pattern:
    """One seasonal factor ``(1 - B^{mu s})^{R + D}``."""

    s: int
    mu: int = 1
    R: int = 1
    D: float = 0.0

    def __post_init__(self):
        for name in ("s", "mu", "R"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InputError(f"pattern field {name!r} must be an integer", value=repr(value))
        if self.s < 1:
            raise InputError("seasonal period s must be >= 1", s=int(self.s))
        if self.mu < 1:
            raise InputError("step mu must be >= 1 (negative steps are not supported)", mu=int(self.mu))
        if self.R < 0:
            raise InputError("integer order R must be >= 0", R=int(self.R))
        if not math.isfinite(float(self.D)):
            raise InputError("fractional order D must be finite", D=float(self.D))

    @property
    def order(self) -> float:
        """Total order ``R + D``."""
        return self.R + float(self.D)


@dataclass(frozen=True)
class IncrementSpec:
    """A GM increment operator together with the lifting period.

    Parameters
    ----------
    patterns : sequence of Pattern
        Seasonal factors.  A non-seasonal factor (``s = 1``) may appear
        only as the first entry; the remaining periods strictly increase.
    period : int
        Period ``T`` of the underlying periodically correlated sequence.
        The operator acts on the lifted T-vector sequence, so ``s`` is
        measured in frames.
    """

    patterns: tuple[Pattern, ...]
    period: int = 1

    def __post_init__(self):
        pats = tuple(self.patterns)
        object.__setattr__(self, "patterns", pats)
        if not isinstance(self.period, (int, np.integer)) or self.period < 1:
            raise InputError("period T must be a positive integer", period=repr(self.period))
        seasonal = [p.s for p in pats if p.s > 1]
        if any(b <= a for a, b in zip(seasonal, seasonal[1:])):
            raise InputError("seasonal periods must be strictly increasing", s=[p.s for p in pats])
        if any(p.s == 1 for p in pats[1:]):
            raise InputError("a non-seasonal pattern (s=1) may only be the first entry")
        if self.has_fractional and any(p.mu != 1 for p in pats):
            raise InputError("fractional orders require all steps mu equal to 1")

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_lists(cls, s: Sequence[int], mu: Sequence[int] | None = None,
                   R: Sequence[int] | None = None, D: Sequence[float] | None = None,
                   period: int = 1) -> "IncrementSpec":
        r = len(s)
        mu = [1] * r if mu is None else list(mu)
        R = [1] * r if R is None else list(R)
        D = [0.0] * r if D is None else list(D)
        if not (len(mu) == len(R) == len(D) == r):
            raise InputError("pattern field lists must have equal length")
        return cls(tuple(Pattern(int(s[i]), int(mu[i]), int(R[i]), float(D[i])) for i in range(r)),
                   int(period))

    @classmethod
    def from_dict(cls, data: dict) -> "IncrementSpec":
        if not isinstance(data, dict) or "patterns" not in data:
            raise InputError("increment spec must be an object with a 'patterns' list")
        unknown = set(data) - {"patterns", "period"}
        if unknown:
            raise InputError("unknown increment spec keys", keys=sorted(unknown))
        pats = []
        for item in data["patterns"]:
            extra = set(item) - {"s", "mu", "R", "D"}
            if extra:
                raise InputError("unknown pattern keys", keys=sorted(extra))
            pats.append(Pattern(item["s"], item.get("mu", 1), item.get("R", 1), float(item.get("D", 0.0))))
        return cls(tuple(pats), data.get("period", 1))

    def to_dict(self) -> dict:
        return {
            "patterns": [{"s": int(p.s), "mu": int(p.mu), "R": int(p.R), "D": float(p.D)}
                         for p in self.patterns],
            "period": int(self.period),
        }

    # -- properties -----------------------------------------------------------
    @property
    def r(self) -> int:
        return len(self.patterns)

    @property
    def has_fractional(self) -> bool:
        return any(float(p.D) != 0.0 for p in self.patterns)

    @property
    def is_integer(self) -> bool:
        return not self.has_fractional

    @property
    def n_gamma(self) -> int:
        """Degree of the integer part ``sum_i mu_i s_i R_i``."""
        return int(sum(p.mu * p.s * p.R for p in self.patterns))

    @property
    def total_integer_order(self) -> int:
        return int(sum(p.R for p in self.patterns))

    def integer_part(self) -> "IncrementSpec":
        """The spec with fractional parts set to zero."""
        return IncrementSpec(tuple(Pattern(p.s, p.mu, p.R, 0.0) for p in self.patterns), self.period)

    def with_steps(self, mu: Sequence[int]) -> "IncrementSpec":
        if len(mu) != self.r:
            raise InputError("step vector length must equal the number of patterns")
        return IncrementSpec(tuple(Pattern(p.s, int(m), p.R, p.D) for p, m in zip(self.patterns, mu)),
                             self.period)


# -- exact coefficients ---------------------------------------------------------

@dataclass(frozen=True)
class IncrementCoeffs:
    """Exact coefficients ``e[k]`` of ``B^k`` in the expanded operator."""

    e: tuple[int, ...]

    @property
    def n_gamma(self) -> int:
        return len(self.e) - 1

    def as_array(self) -> np.ndarray:
        """Coefficients as float64 (exact while |e[k]| < 2**53)."""
        return np.array([float(v) for v in self.e])

    def as_int64(self) -> np.ndarray:
        limit = np.iinfo(np.int64).max
        if any(abs(v) > limit for v in self.e):
            raise OverflowError("increment coefficients exceed the int64 range")
        return np.array(self.e, dtype=np.int64)


def _poly_mul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            if bj:
                out[i + j] += ai * bj
    return out


def _sparse_power(step: int, d: int) -> dict[int, int]:
    """Nonzero coefficients of ``(1 - B^step)^d`` keyed by power."""
    return {step * k: (-1) ** k * math.comb(d, k) for k in range(d + 1)}


def expand_increment_coeffs(spec: IncrementSpec, cap: int = DEFAULT_DEGREE_CAP) -> IncrementCoeffs:
    """Expand ``prod_i (1 - B^{mu_i s_i})^{R_i}`` in exact integer arithmetic.

    Parameters
    ----------
    spec : IncrementSpec
        Must be in integer mode.
    cap : int
        Maximum admissible degree ``n(gamma)``.

    Returns
    -------
    IncrementCoeffs
    """
    if not spec.is_integer:
        raise InputError("exact expansion requires integer mode (all D = 0)")
    n = spec.n_gamma
    if n > cap:
        raise InputError("operator degree exceeds the configured cap", n_gamma=n, cap=cap)
    coeffs: dict[int, int] = {0: 1}
    for p in spec.patterns:
        factor = _sparse_power(p.mu * p.s, p.R)
        nxt: dict[int, int] = {}
        for i, ci in coeffs.items():
            for j, cj in factor.items():
                nxt[i + j] = nxt.get(i + j, 0) + ci * cj
        coeffs = {k: v for k, v in nxt.items() if v != 0}
    e = [0] * (n + 1)
    for k, v in coeffs.items():
        e[k] = v
    return IncrementCoeffs(tuple(e))


def expand_by_dense_product(spec: IncrementSpec) -> list[int]:
    """Reference expansion by dense multiplication of binomial factors."""
    out = [1]
    for p in spec.patterns:
        for _ in range(p.R):
            out = _poly_mul(out, [1] + [0] * (p.mu * p.s - 1) + [-1])
    return out


# -- frequency responses ------------------------------------------------------------

def chi_at(spec: IncrementSpec, lam, steps: Sequence[int] | None = None,
           sign: int = -1) -> np.ndarray:
    """Frequency response ``prod_j (1 - e^{sign i lam mu_j s_j})^{d_j}``.

    ``sign=-1`` gives chi(e^{-i lam}); ``sign=+1`` gives chi(e^{i lam}).
    Orders are ``R_j + D_j``; fractional powers use the principal branch.
    """
    lam = np.asarray(lam, dtype=float)
    out = np.ones(lam.shape, dtype=complex)
    mus = [p.mu for p in spec.patterns] if steps is None else list(steps)
    for p, mu in zip(spec.patterns, mus):
        base = 1.0 - np.exp(sign * 1j * lam * mu * p.s)
        d = p.order
        if float(d).is_integer():
            out = out * base ** int(d)
        else:
            out = out * base ** d
    return out


def beta_at(spec: IncrementSpec, lam) -> np.ndarray:
    """The polynomial ``prod_j prod_{|k| <= [s_j/2]} (i lam - 2 pi i k/s_j)^{d_j}``."""
    lam = np.asarray(lam, dtype=float)
    out = np.ones(lam.shape, dtype=complex)
    for p in spec.patterns:
        d = p.order
        half = p.s // 2
        for k in range(-half, half + 1):
            base = 1j * lam - 2j * np.pi * k / p.s
            out = out * (base ** int(d) if float(d).is_integer() else base ** d)
    return out


def increment_ratio(spec: IncrementSpec, lam) -> np.ndarray:
    """``|chi(e^{-i lam})|^2 / |beta(i lam)|^2`` (finite away from the roots)."""
    return np.abs(chi_at(spec, lam)) ** 2 / np.abs(beta_at(spec, lam)) ** 2


# -- roots and Gegenbauer factors ------------------------------------------------------

@dataclass(frozen=True)
class RootSet:
    """Frequencies ``nu in [0, pi]`` carrying a unit root of the operator.

    ``fractions[i]`` stores ``nu_i / pi`` exactly.
    """

    fractions: tuple[Fraction, ...]
    D_nu: tuple[float, ...]
    Dtilde_nu: tuple[float, ...]

    @property
    def nus(self) -> np.ndarray:
        return np.array([float(q) * np.pi for q in self.fractions])

    @property
    def per_nu(self) -> dict[float, tuple[float, float]]:
        return {float(q) * np.pi: (d, dt) for q, d, dt in zip(self.fractions, self.D_nu, self.Dtilde_nu)}

    def to_dict(self) -> list[dict]:
        return [{"nu_over_pi": str(q), "nu": float(q) * np.pi, "D": d, "Dtilde": dt}
                for q, d, dt in zip(self.fractions, self.D_nu, self.Dtilde_nu)]


def _check_fractional_mode(spec: IncrementSpec) -> None:
    if any(p.mu != 1 for p in spec.patterns):
        raise InputError("the Gegenbauer decomposition requires all steps mu equal to 1")


def seasonal_root_set(spec: IncrementSpec, orders: str = "fractional") -> RootSet:
    """Unit-root frequencies ``M`` and their exponents ``D_nu``, ``Dtilde_nu``.

    Parameters
    ----------
    orders : {"fractional", "total"}
        Use the fractional parts ``D_j`` (default) or the total orders
        ``R_j + D_j`` as the pattern exponents.
    """
    _check_fractional_mode(spec)
    weight: dict[Fraction, float] = {}
    for p in spec.patterns:
        dj = float(p.D) if orders == "fractional" else p.order
        for k in range(p.s // 2 + 1):
            q = Fraction(2 * k, p.s)
            weight[q] = weight.get(q, 0.0) + dj
    fr = tuple(sorted(weight))
    D = tuple(weight[q] for q in fr)
    Dt = tuple(d / 2 if q in (0, 1) else d for q, d in zip(fr, D))
    return RootSet(fr, D, Dt)


def gegenbauer_coeffs(u: float, d: float, n: int) -> np.ndarray:
    """Coefficients ``C_0..C_n`` of ``(1 - 2uB + B^2)^{-d}``.

    Computed by the three-term recurrence
    ``C_k = [2u(d+k-1) C_{k-1} - (2d+k-2) C_{k-2}] / k``.
    """
    if n < 0:
        raise InputError("n must be non-negative", n=n)
    if not -1.0 <= u <= 1.0:
        raise InputError("u must lie in [-1, 1]", u=u)
    if float(d) <= 0 and float(d).is_integer():
        raise InputError("d must not be a non-positive integer (Gamma pole)", d=d)
    return _gegenbauer_series(u, d, n)


def _gegenbauer_series(u: float, d: float, n: int) -> np.ndarray:
    c = np.zeros(n + 1)
    c[0] = 1.0
    if n >= 1:
        c[1] = 2.0 * d * u
    for k in range(2, n + 1):
        c[k] = (2.0 * u * (d + k - 1) * c[k - 1] - (2.0 * d + k - 2) * c[k - 2]) / k
    return c


def gegenbauer_explicit(u: float, d: float, n: int) -> float:
    """The explicit finite sum for ``C_n^{(d)}(u)`` (cross-check, small n)."""
    total = 0.0
    for k in range(n // 2 + 1):
        total += ((-1) ** k * (2 * u) ** (n - 2 * k) * poch(d, n - k)
                  / (math.factorial(k) * math.factorial(n - 2 * k)))
    return float(total)


def expansion_coeffs_G(spec: IncrementSpec, n: int = DEFAULT_SERIES_LENGTH,
                       sign: str = "+") -> np.ndarray:
    """Coefficients ``G(0..n-1)`` of ``prod_nu (1 - 2 cos(nu) B + B^2)^{-+Dtilde_nu}``.

    ``sign="+"`` gives the inverse series of the fractional operator,
    ``sign="-"`` gives the fractional operator itself.
    """
    if sign not in ("+", "-"):
        raise InputError("sign must be '+' or '-'", sign=sign)
    if n < 1:
        raise InputError("series length must be positive", n=n)
    roots = seasonal_root_set(spec)
    out = np.zeros(n)
    out[0] = 1.0
    for q, dt in zip(roots.fractions, roots.Dtilde_nu):
        if dt == 0.0:
            continue
        d = dt if sign == "+" else -dt
        c = _gegenbauer_series(math.cos(float(q) * math.pi), d, n - 1)
        out = np.convolve(out, c)[:n]
    return out


def fractional_factor(spec: IncrementSpec, lam) -> np.ndarray:
    """``prod_nu |(e^{-i nu} - e^{i lam})(e^{i nu} - e^{i lam})|^{-2 Dtilde_nu}``."""
    lam = np.asarray(lam, dtype=float)
    roots = seasonal_root_set(spec)
    out = np.ones(lam.shape)
    z = np.exp(1j * lam)
    for nu, dt in zip(roots.nus, roots.Dtilde_nu):
        if dt == 0.0:
            continue
        out = out * np.abs((np.exp(-1j * nu) - z) * (np.exp(1j * nu) - z)) ** (-2.0 * dt)
    return out


@dataclass(frozen=True)
class Classification:
    stationary: bool
    long_memory: bool
    invertible: bool
    per_nu: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"stationary": self.stationary, "long_memory": self.long_memory,
                "invertible": self.invertible, "per_nu": self.per_nu}


def check_stationarity(spec: IncrementSpec) -> Classification:
    """Classify the fractional part by the strict ranges of every ``D_nu``.

    Stationary: all ``|D_nu| < 1/2``.  Long memory: stationary and at least
    one ``0 < D_nu < 1/2``.  Invertible: all ``-1/2 < D_nu < 0``.
    """
    roots = seasonal_root_set(spec)
    rows = []
    for q, d, dt in zip(roots.fractions, roots.D_nu, roots.Dtilde_nu):
        rows.append({"nu_over_pi": str(q), "D": d, "Dtilde": dt,
                     "stationary": -0.5 < d < 0.5, "long_memory": 0.0 < d < 0.5,
                     "invertible": -0.5 < d < 0.0})
    stationary = all(r["stationary"] for r in rows)
    return Classification(
        stationary=stationary,
        long_memory=stationary and any(r["long_memory"] for r in rows),
        invertible=all(r["invertible"] for r in rows),
        per_nu=rows,
    )


# -- time-domain application ------------------------------------------------------------

def apply_increment(x, spec: IncrementSpec) -> np.ndarray:
    """Apply the integer-mode operator along axis 0.

    ``out[j] = sum_k e[k] x[j + n - k]`` for ``j = 0..len(x)-n-1``, i.e. the
    output at original index ``m = j + n`` uses lags ``m - n .. m``.
    """
    x = np.asarray(x)
    e = expand_increment_coeffs(spec).as_array()
    n = len(e) - 1
    if x.shape[0] <= n:
        raise InputError("series too short for the increment operator", length=int(x.shape[0]), n_gamma=n)
    length = x.shape[0] - n
    out = np.zeros((length,) + x.shape[1:], dtype=np.result_type(x.dtype, float))
    for k in np.flatnonzero(e):
        out += e[k] * x[n - k:n - k + length]
    return out


def apply_sequential(x, spec: IncrementSpec) -> np.ndarray:
    """Apply the operator one binomial factor at a time (reference path)."""
    out = np.asarray(x, dtype=float)
    for p in spec.patterns:
        lag = p.mu * p.s
        for _ in range(p.R):
            if out.shape[0] <= lag:
                raise InputError("series too short for the increment operator")
            out = out[lag:] - out[:-lag]
    return out


def random_spec(rng: np.random.Generator, max_patterns: int = 3, max_order: int = 3,
                max_span: int = 12, period: int = 1, min_order: int = 0) -> IncrementSpec:
    """Draw a random valid integer-mode spec with ``mu_i s_i <= max_span``."""
    r = int(rng.integers(1, max_patterns + 1))
    while True:
        s = sorted(set(int(v) for v in rng.integers(1, max_span + 1, size=r)))
        if len(s) == r:
            break
    pats = []
    for si in s:
        mu = int(rng.integers(1, max_span // si + 1))
        pats.append(Pattern(si, mu, int(rng.integers(min_order, max_order + 1)), 0.0))
    return IncrementSpec(tuple(pats), period)


def integrate_levels(increments, spec: IncrementSpec, lag_unit: int = 1) -> np.ndarray:
    """Invert the integer operator with zero initial values.

    Solves ``sum_k e[k] x[m - k*lag_unit] = y[m]`` recursively, where
    ``lag_unit`` rescales lags (e.g. ``T`` to integrate a scalar series
    through an operator expressed in frames).  The first ``n*lag_unit``
    levels are zero.
    """
    y = np.asarray(increments, dtype=float)
    e = expand_increment_coeffs(spec).as_array()
    n = len(e) - 1
    nz = [(k * lag_unit, e[k]) for k in np.flatnonzero(e) if k > 0]
    head = n * lag_unit
    x = np.zeros((y.shape[0] + head,) + y.shape[1:])
    if not nz:
        x[head:] = y
        return x
    from scipy.signal import lfilter

    a = np.zeros(head + 1)
    a[0] = 1.0
    for lag, coef in nz:
        a[lag] = coef
    x[head:] = lfilter([1.0], a, y, axis=0)
    return x
