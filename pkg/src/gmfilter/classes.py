"""Admissible classes of spectral densities on the grid.

Every class is a pointwise convex set intersected with moment equalities

    (1/2 pi) int k(lam) <E_i, X(lam)> dlam = b_i,

where ``k = |chi|^2/|beta|^2`` for signal classes (``D0_*``) and ``k = 1`` for
noise classes (``DVU_*``, ``Deps_*``).  On the midpoint grid the moment is
``(1/M) sum_m k_m Re tr(E_i X_m)``.

Pointwise sets by kind::

    D0_1..D0_4   X >= 0
    DVU_1        V <= X <= U                         (Loewner order)
    DVU_2        X >= 0, tr V <= tr X <= tr U
    DVU_3        X >= 0, v_kk <= X_kk <= u_kk
    DVU_4        X >= 0, <B2,V> <= <B2,X> <= <B2,U>
    Deps_1       X >= 0, tr X >= (1-eps) tr g1
    Deps_2       X >= 0, X_kk >= (1-eps) g1_kk
    Deps_3       X >= 0, <B2,X> >= (1-eps) <B2,g1>
    Deps_4       X >= (1-eps) g1

The contamination classes describe ``g = (1-eps) g1 + eps W`` with an
unknown density ``W``; the pointwise lower bounds above are exactly the
set of such ``g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InputError, NumericalError, UnsupportedError
from .spectral import SpectralDensityGrid

KINDS = [f"{base}_{k}" for base in ("D0", "DVU", "Deps") for k in (1, 2, 3, 4)]
PAIRS = {("D0_1", "DVU_1"), ("D0_2", "DVU_2"), ("D0_3", "DVU_3"), ("D0_4", "DVU_4")}
PROJ_TOL = 1e-10


def _herm(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _psd_clip(Y):
    w, v = np.linalg.eigh(_herm(Y))
    return np.einsum("...ij,...j,...kj->...ik", v, np.clip(w, 0.0, None), np.conj(v))


def _rtr(E, X):
    """``Re tr(E X)`` for a fixed matrix E and a stack X."""
    return np.real(np.einsum("ij,...ji->...", E, X))


def hermitian_basis(T: int) -> list[np.ndarray]:
    """Real basis of T x T Hermitian matrices, orthogonal in Re tr(A B)."""
    out = []
    for k in range(T):
        e = np.zeros((T, T), dtype=complex)
        e[k, k] = 1.0
        out.append(e)
    for k in range(T):
        for l in range(k + 1, T):
            e = np.zeros((T, T), dtype=complex)
            e[k, l] = e[l, k] = 1.0 / np.sqrt(2.0)
            out.append(e)
            e = np.zeros((T, T), dtype=complex)
            e[k, l], e[l, k] = -1j / np.sqrt(2.0), 1j / np.sqrt(2.0)
            out.append(e)
    return out


@dataclass(frozen=True, eq=False)
class DensityClass:
    """A class kind with its parameters.

    Parameters
    ----------
    kind : str
        One of ``D0_1..4``, ``DVU_1..4``, ``Deps_1..4``.
    params : dict
        ``P`` (D0_1), ``p`` (D0_2, D0_4), ``p_k`` (D0_3), ``B1`` (D0_4);
        ``V``, ``U`` as :class:`SpectralDensityGrid` and ``Q``/``q``/``q_k``/``B2``
        (DVU_*); ``eps``, ``g1`` and ``Q``/``q``/``q_k``/``B2`` (Deps_*).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError("unknown class kind", kind=self.kind, allowed=KINDS)
        need = {
            "D0_1": ["P"], "D0_2": ["p"], "D0_3": ["p_k"], "D0_4": ["B1", "p"],
            "DVU_1": ["V", "U", "Q"], "DVU_2": ["V", "U", "q"], "DVU_3": ["V", "U", "q_k"],
            "DVU_4": ["V", "U", "B2", "q"],
            "Deps_1": ["eps", "g1", "q"], "Deps_2": ["eps", "g1", "q_k"], "Deps_3": ["eps", "g1", "B2", "q"],
            "Deps_4": ["eps", "g1", "Q"],
        }[self.kind]
        missing = [k for k in need if k not in self.params]
        if missing:
            raise InputError("class parameters missing", kind=self.kind, missing=missing)
        if self.family == "Deps":
            eps = float(self.params["eps"])
            if not 0.0 <= eps < 1.0:
                raise InputError("contamination eps must lie in [0, 1)", eps=eps)

    @property
    def family(self) -> str:
        return self.kind.split("_")[0]

    @property
    def index(self) -> int:
        return int(self.kind.split("_")[1])

    @property
    def target(self) -> str:
        return "f" if self.family == "D0" else "g"


def _mat(x, T):
    a = np.atleast_2d(np.asarray(x, dtype=complex))
    if a.shape != (T, T):
        raise InputError("parameter matrix has the wrong shape", expected=[T, T], got=list(a.shape))
    return a


@dataclass(eq=False)
class CompiledClass:
    """A class bound to a grid: pointwise set, moments, projection, LMO."""

    cls: DensityClass
    T: int
    M: int
    weight: np.ndarray
    E: list
    b: np.ndarray
    kind_set: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    Emat: np.ndarray | None = None
    Lmat: np.ndarray | None = None
    Umat: np.ndarray | None = None

    # -- moments -------------------------------------------------------------------
    def moments(self, X: np.ndarray) -> np.ndarray:
        return np.array([np.mean(self.weight * _rtr(E, X)) for E in self.E])

    def moment_residual(self, X: np.ndarray) -> float:
        r = self.moments(X) - self.b
        return float(np.max(np.abs(r)) / max(1e-300, np.max(np.abs(self.b)), 1.0 if not np.any(self.b) else 0.0))

    # -- pointwise sets ------------------------------------------------------------
    def pointwise_violation(self, X: np.ndarray) -> float:
        """Largest violation of the pointwise constraints (absolute)."""
        X = _herm(X)
        worst = 0.0
        if self.kind_set == "loewner":
            worst = max(worst, float(np.max(-np.linalg.eigvalsh(X - self.Lmat)[:, 0])),
                        float(np.max(-np.linalg.eigvalsh(self.Umat - X)[:, 0])))
            return max(worst, 0.0)
        if self.kind_set == "psd_lower":
            return max(0.0, float(np.max(-np.linalg.eigvalsh(X - self.Lmat)[:, 0])))
        worst = max(worst, float(np.max(-np.linalg.eigvalsh(X)[:, 0])))
        if self.kind_set == "scalar_band":
            s = _rtr(self.Emat, X)
            worst = max(worst, float(np.max(self.lo - s)), float(np.max(s - self.hi)))
        elif self.kind_set == "diag_band":
            d = np.real(np.einsum("mii->mi", X))
            worst = max(worst, float(np.max(self.lo - d)), float(np.max(d - self.hi)))
        return max(worst, 0.0)

    def project_pointwise(self, Y: np.ndarray) -> np.ndarray:
        Y = _herm(Y)
        ks = self.kind_set
        if ks == "psd":
            return _psd_clip(Y)
        if ks == "psd_lower":
            return self.Lmat + _psd_clip(Y - self.Lmat)
        if ks == "scalar_band":
            return _project_scalar_band(Y, self.Emat, self.lo, self.hi)
        if ks == "diag_band":
            if self.T == 1:
                return np.clip(np.real(Y), np.maximum(self.lo, 0)[:, :, None], self.hi[:, :, None]) + 0j
            return _dykstra(Y, [_psd_clip, lambda Z: _clip_diag(Z, self.lo, self.hi)])
        if ks == "loewner":
            if self.T == 1:
                return np.clip(np.real(Y), np.real(self.Lmat), np.real(self.Umat)) + 0j
            return _dykstra(Y, [lambda Z: self.Lmat + _psd_clip(Z - self.Lmat),
                                lambda Z: self.Umat - _psd_clip(self.Umat - Z)])
        raise AssertionError(ks)

    # -- projection onto the whole class ------------------------------------------------
    def project(self, Y: np.ndarray, tol: float = PROJ_TOL) -> np.ndarray:
        """Euclidean projection onto the class (grid-weighted Frobenius norm).

        The moment equalities are handled through their dual variables
        ``theta``: ``X(theta) = Pi_C(Y - k sum_i theta_i E_i)`` with theta chosen
        so the moments match.
        """
        Y = _herm(np.asarray(Y, dtype=complex))
        if self.T == 1:
            return self._project_scalar(np.real(Y[:, 0, 0]))[:, None, None] + 0j
        if self._spectral:
            return self._project_spectral(Y, tol)
        k = self.weight[:, None, None]
        Es = np.stack(self.E)

        def X_of(theta):
            return self.project_pointwise(Y - k * np.einsum("i,ijk->jk", theta, Es)[None])

        def resid(theta):
            return self.moments(X_of(theta)) - self.b

        scale = max(float(np.max(np.abs(self.b))), 1e-300)
        if len(self.E) == 1:
            theta = _solve_monotone(lambda t: resid(np.array([t]))[0], scale, tol)
            X = X_of(np.array([theta]))
        else:
            X = self._project_multi(X_of, resid, scale, tol, Y, k, Es)
        if self.moment_residual(X) > 1e-6:
            raise NumericalError("projection onto the class did not converge",
                                 kind=self.cls.kind, moment_residual=self.moment_residual(X))
        return X

    @property
    def _spectral(self) -> bool:
        """Trace moment with a unitarily invariant pointwise set (eigenvectors stay fixed)."""
        eye = np.eye(self.T)
        if len(self.E) != 1 or np.max(np.abs(self.E[0] - eye)) > 0:
            return False
        return self.kind_set == "psd" or (self.kind_set == "scalar_band" and np.max(np.abs(self.Emat - eye)) == 0)

    def _eig_pointwise(self, mu: np.ndarray) -> np.ndarray:
        x = np.clip(mu, 0.0, None)
        if self.kind_set == "scalar_band":
            s0 = x.sum(axis=1)
            for target, mask in ((self.lo, s0 < self.lo), (self.hi, s0 > self.hi)):
                if np.any(mask):
                    x[mask] = _simplex(mu[mask], np.broadcast_to(target, s0.shape)[mask])
        return x

    def _project_spectral(self, Y: np.ndarray, tol: float) -> np.ndarray:
        mu, V = np.linalg.eigh(Y)
        k = self.weight[:, None]
        b = float(self.b[0])

        def resid(theta):
            return float(np.mean(self.weight * self._eig_pointwise(mu - theta * k).sum(axis=1))) - b

        theta = _solve_monotone(resid, max(abs(b), 1e-300), tol)
        x = self._eig_pointwise(mu - theta * k)
        return np.einsum("mij,mj,mkj->mik", V, x, np.conj(V))

    def _project_scalar(self, y: np.ndarray) -> np.ndarray:
        """Exact T = 1 projection: ``x = clip(y - theta k e, lo, hi)``.

        The moment of ``x`` is piecewise linear and nonincreasing in theta;
        the root is located among the breakpoints and interpolated.
        """
        lo = np.maximum(self.lo_scalar, 0.0)
        hi = self.hi_scalar
        c = self.weight * self.E_scalar
        b = float(self.b[0])

        def moment(theta):
            th = np.atleast_1d(theta)[:, None]
            return np.mean(c * np.clip(y - th * c, lo, hi), axis=1)

        bps = np.unique(np.concatenate([(y - lo) / c, ((y - hi) / c)[np.isfinite(hi)]]))
        vals = moment(bps)
        tol = 1e-12 * max(abs(b), 1e-300)
        unbounded = ~np.isfinite(hi)
        if b >= vals[0]:
            # left of all breakpoints every point is at its upper bound or free
            if not np.any(unbounded):
                if b > vals[0] + tol:
                    raise NumericalError("moment exceeds what the upper bounds allow", kind=self.cls.kind)
                theta = bps[0]
            else:
                slope = -np.sum(c[unbounded] ** 2) / len(y)
                theta = bps[0] + (b - vals[0]) / slope
        elif b <= vals[-1]:
            if b < vals[-1] - tol:
                raise NumericalError("moment is below what the lower bounds allow", kind=self.cls.kind)
            theta = bps[-1]
        else:
            j = int(np.searchsorted(-vals, -b))  # vals[j-1] > b >= vals[j]
            t0, t1, v0, v1 = bps[j - 1], bps[j], vals[j - 1], vals[j]
            theta = t0 + (b - v0) * (t1 - t0) / (v1 - v0)
        return np.clip(y - theta * c, lo, hi)

    def _project_multi(self, X_of, resid, scale, tol, Y, k, Es):
        # Concave dual: d(theta) = 1/2 |X - Y|^2 + theta (A X - b) (up to grid weights).
        def neg_dual(theta):
            X = X_of(theta)
            r = self.moments(X) - self.b
            val = 0.5 * np.mean(np.sum(np.abs(X - Y) ** 2, axis=(1, 2))) + float(np.dot(theta, r))
            return -val, -r

        theta0 = np.zeros(len(self.E))
        res = minimize(neg_dual, theta0, jac=True, method="BFGS",
                       options={"gtol": tol * scale, "maxiter": 500})
        theta = res.x
        # Newton polish on the residual map with a finite-difference Jacobian
        for _ in range(20):
            r = resid(theta)
            if np.max(np.abs(r)) <= tol * scale:
                break
            h = 1e-7 * max(1.0, float(np.max(np.abs(theta))))
            J = np.column_stack([(resid(theta + h * e) - r) / h for e in np.eye(len(theta))])
            try:
                step = np.linalg.lstsq(J, r, rcond=None)[0]
            except np.linalg.LinAlgError:
                break
            theta = theta - step
        return X_of(theta)

    # -- linear maximization over the class ------------------------------------------
    def lmo(self, G: np.ndarray) -> np.ndarray | None:
        """Maximize ``Re sum_m tr(G_m X_m)`` over the class, or None if no closed form."""
        G = _herm(G)
        T = self.T
        idx = self.cls.index
        fam = self.cls.family
        if T == 1:
            return self._lmo_scalar(np.real(G[:, 0, 0]))
        if fam == "D0" and idx in (2, 4):
            E = np.eye(T) if idx == 2 else self.Emat_moment
            u, val = _top_generalized(G, E)
            score = val / self.weight
            m = int(np.argmax(score))
            X = np.zeros_like(G)
            q = np.real(np.conj(u[m]) @ E @ u[m])
            X[m] = np.outer(u[m], np.conj(u[m])) * (self.b[0] * self.M / (self.weight[m] * q))
            return X
        if self.kind_set == "scalar_band" and len(self.E) == 1:
            u, val = _top_generalized(G, self.Emat)
            q = np.real(np.einsum("mi,ij,mj->m", np.conj(u), self.Emat, u))
            tau = _knapsack(val, self.weight, self.lo, self.hi, self.b[0], self.M)
            return np.einsum("m,mi,mj->mij", tau / q, u, np.conj(u))
        return None

    def _lmo_scalar(self, G1: np.ndarray) -> np.ndarray:
        lo = np.maximum(self.lo_scalar, 0.0)
        hi = self.hi_scalar
        e = self.E_scalar
        tau = _knapsack(G1 / e, self.weight, lo * e, hi * e, self.b[0], self.M)
        return (tau / self.E_scalar)[:, None, None] + 0j

    # scalar (T = 1) views ------------------------------------------------------------
    @property
    def E_scalar(self) -> float:
        return float(np.real(self.E[0][0, 0]))

    @property
    def lo_scalar(self) -> np.ndarray:
        if self.kind_set in ("psd",):
            return np.zeros(self.M)
        if self.kind_set in ("psd_lower", "loewner"):
            return np.real(self.Lmat[:, 0, 0])
        if self.kind_set == "scalar_band":
            return self.lo / float(np.real(self.Emat[0, 0]))
        return self.lo[:, 0]

    @property
    def hi_scalar(self) -> np.ndarray:
        if self.kind_set in ("psd", "psd_lower"):
            return np.full(self.M, np.inf)
        if self.kind_set == "loewner":
            return np.real(self.Umat[:, 0, 0])
        if self.kind_set == "scalar_band":
            return self.hi / float(np.real(self.Emat[0, 0]))
        return self.hi[:, 0]

    @property
    def Emat_moment(self) -> np.ndarray:
        return self.E[0]

    # -- sampling ------------------------------------------------------------------------
    def center(self) -> np.ndarray:
        """A feasible starting point: projection of a flat density."""
        level = self._flat_level()
        return self.project(np.broadcast_to(level * np.eye(self.T), (self.M, self.T, self.T)).astype(complex))

    def _flat_level(self) -> float:
        E = np.stack(self.E)
        tr = np.array([np.real(np.trace(e)) for e in E])
        denom = float(np.mean(self.weight)) * float(np.sum(np.abs(tr)))
        return float(np.sum(np.abs(self.b))) / denom if denom > 0 else 1.0

    def sample(self, rng: np.random.Generator, smooth: bool = True) -> np.ndarray:
        """A random member of the class (projection of a random density)."""
        lam = -np.pi + (np.arange(self.M) + 0.5) * 2 * np.pi / self.M
        level = self._flat_level()
        if smooth:
            K = 6
            out = np.zeros((self.M, self.T, self.T), dtype=complex)
            for _ in range(self.T + 1):
                coef = (rng.standard_normal((K, self.T)) + 1j * rng.standard_normal((K, self.T))) / np.arange(1, K + 1)[:, None]
                v = np.exp(1j * np.outer(lam, np.arange(K))) @ coef
                out += np.einsum("mi,mj->mij", v, np.conj(v))
            out *= level / max(float(np.mean(np.real(np.einsum("mii->m", out)))) / self.T, 1e-300)
            out *= np.exp(rng.uniform(-1.0, 1.0))
        else:
            Z = rng.standard_normal((self.M, self.T, self.T)) + 1j * rng.standard_normal((self.M, self.T, self.T))
            out = level * np.einsum("mij,mkj->mik", Z, np.conj(Z)) * rng.exponential(size=self.M)[:, None, None]
        return self.project(out)

    def contains(self, X: np.ndarray, tol: float = 1e-6) -> bool:
        scale = max(float(np.max(np.abs(X))), 1e-300)
        return self.moment_residual(X) <= tol and self.pointwise_violation(X) <= 1e-8 * max(scale, 1.0)


def _clip_diag(Z, lo, hi):
    out = Z.copy()
    d = np.real(np.einsum("mii->mi", Z))
    nd = np.clip(d, lo, hi)
    idx = np.arange(Z.shape[1])
    out[:, idx, idx] = nd
    return out


def _simplex(mu: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Rows of ``mu`` projected onto ``{x >= 0, sum x = target}`` (target >= 0)."""
    u = -np.sort(-mu, axis=1)
    css = np.cumsum(u, axis=1) - target[:, None]
    ind = np.arange(1, mu.shape[1] + 1)
    cond = u - css / ind > 0
    r = mu.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(mu.shape[0]), r] / (r + 1)
    return np.clip(mu - tau[:, None], 0.0, None)


def _dykstra(Y, projections, iters=2000, tol=1e-13):
    """Dykstra's alternating projections onto an intersection of convex sets."""
    X = Y.copy()
    incs = [np.zeros_like(Y) for _ in projections]
    scale = max(1.0, float(np.max(np.abs(Y))))
    for _ in range(iters):
        X_old = X
        for i, proj in enumerate(projections):
            Z = proj(X + incs[i])
            incs[i] = X + incs[i] - Z
            X = Z
        if np.max(np.abs(X - X_old)) <= tol * scale:
            break
    return X


def _solve_monotone(fun, scale, tol):
    """Root of a nonincreasing scalar function by bracketing and bisection."""
    r0 = fun(0.0)
    if abs(r0) <= tol * scale:
        return 0.0
    step = 1.0
    direction = 1.0 if r0 > 0 else -1.0
    a, fa = 0.0, r0
    b = direction * step
    fb = fun(b)
    n = 0
    while np.sign(fb) == np.sign(fa) and fb != 0:
        a, fa = b, fb
        step *= 4.0
        b = direction * step
        fb = fun(b)
        n += 1
        if n > 200:
            raise NumericalError("moment constraint cannot be met (class infeasible?)")
    lo, hi = (a, b) if a < b else (b, a)
    flo = fun(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if abs(fm) <= tol * scale or hi - lo <= 1e-16 * max(1.0, abs(mid)):
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _project_scalar_band(Y, E, lo, hi):
    """Project each ``Y_m`` onto ``{X >= 0, lo_m <= <E, X> <= hi_m}``.

    The single linear band has a scalar multiplier tau per point:
    ``X = Pi_psd(Y - tau E)`` with ``<E, X>`` nonincreasing in ``tau``.
    """
    X0 = _psd_clip(Y)
    s0 = _rtr(E, X0)
    out = X0.copy()
    for target, mask, sign in ((lo, s0 < lo, -1.0), (hi, s0 > hi, 1.0)):
        if not np.any(mask):
            continue
        idx = np.flatnonzero(mask)
        Ys = Y[idx]
        tg = np.broadcast_to(target, s0.shape)[idx]
        # bracket tau
        scale = np.maximum(np.abs(np.real(np.einsum("mii->m", Ys))), 1.0) + np.abs(tg)
        enorm = float(np.real(np.trace(E)))
        a = np.zeros(len(idx))
        b = sign * (scale / max(enorm, 1e-300) * 4.0 + 1.0)
        for _ in range(200):
            sb = _rtr(E, _psd_clip(Ys - b[:, None, None] * E))
            bad = (sb - tg) * sign > 0
            if not np.any(bad):
                break
            b = np.where(bad, b * 4.0, b)
        lo_t, hi_t = np.minimum(a, b), np.maximum(a, b)
        for _ in range(100):
            mid = 0.5 * (lo_t + hi_t)
            sm = _rtr(E, _psd_clip(Ys - mid[:, None, None] * E))
            above = sm > tg  # need larger tau
            lo_t = np.where(above, mid, lo_t)
            hi_t = np.where(above, hi_t, mid)
        tau = 0.5 * (lo_t + hi_t)
        out[idx] = _psd_clip(Ys - tau[:, None, None] * E)
    return out


def _top_generalized(G, E):
    """Top generalized eigenpairs of ``(G_m, E)`` with ``E`` positive definite."""
    Lc = np.linalg.cholesky(E)
    Li = np.linalg.inv(Lc)
    H = _herm(Li @ G @ np.conj(Li.T))
    w, v = np.linalg.eigh(H)
    top = v[:, :, -1]
    u = np.einsum("ji,mj->mi", np.conj(Li), top)  # u = L^{-*} v
    return u, w[:, -1]


def _knapsack(score, weight, lo, hi, budget, M):
    """Maximize ``sum score_m tau_m`` s.t. lo <= tau <= hi, (1/M) sum weight tau = budget.

    ``tau`` are the amounts of a scalar resource per point (the value per
    unit at point m is ``score_m``); ``weight`` converts amounts into the
    moment.  Points are filled greedily in order of ``score/weight``.
    """
    score = np.asarray(score, dtype=float)
    w = np.broadcast_to(np.asarray(weight, dtype=float), score.shape)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), score.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), score.shape)
    tau = lo.copy()
    remaining = budget * M - float(np.sum(w * lo))
    if remaining < -1e-9 * max(1.0, abs(budget * M)):
        raise NumericalError("class infeasible: lower bounds exceed the moment")
    order = np.argsort(-(score / w), kind="stable")
    for m in order:
        if remaining <= 0:
            break
        room = (hi[m] - lo[m]) * w[m]
        take = min(room, remaining)
        tau[m] += take / w[m]
        remaining -= take
    if remaining > 1e-9 * max(1.0, abs(budget * M)):
        raise NumericalError("class infeasible: upper bounds cannot carry the moment")
    return tau


def compile_class(cls: DensityClass, T: int, M: int, ratio: np.ndarray) -> CompiledClass:
    """Bind a class to a grid of size ``M``; ``ratio`` is ``|chi|^2/|beta|^2`` on it."""
    p = cls.params
    fam, idx = cls.family, cls.index
    weight = np.asarray(ratio, dtype=float) if fam == "D0" else np.ones(M)
    I = np.eye(T, dtype=complex)

    def grid(name):
        d = p[name]
        if not isinstance(d, SpectralDensityGrid):
            raise InputError(f"class parameter {name} must be a density grid")
        if d.M != M or d.T != T:
            raise InputError("class density grid does not match", name=name, M=d.M, T=d.T)
        return np.asarray(d.values)

    # moments
    if (fam == "D0" and idx == 1) or (fam in ("DVU", "Deps") and ((fam == "DVU" and idx == 1) or (fam == "Deps" and idx == 4))):
        Qm = _mat(p["P"] if fam == "D0" else p["Q"], T)
        E = hermitian_basis(T)
        b = np.array([np.real(np.trace(e @ Qm)) for e in E])
    elif idx == 2 and fam == "D0":
        E, b = [I], np.array([float(p["p"])])
    elif (fam == "D0" and idx == 3) or (fam == "DVU" and idx == 3) or (fam == "Deps" and idx == 2):
        vals = np.asarray(p["p_k"] if fam == "D0" else p["q_k"], dtype=float).reshape(-1)
        if vals.size != T:
            raise InputError("per-component moments need T values", got=int(vals.size), T=T)
        E = hermitian_basis(T)[:T]
        b = vals
    elif (fam == "D0" and idx == 4):
        E, b = [_mat(p["B1"], T)], np.array([float(p["p"])])
    elif (fam == "DVU" and idx == 2) or (fam == "Deps" and idx == 1):
        E, b = [I], np.array([float(p["q"])])
    elif (fam == "DVU" and idx == 4) or (fam == "Deps" and idx == 3):
        E, b = [_mat(p["B2"], T)], np.array([float(p["q"])])
    else:  # pragma: no cover
        raise AssertionError(cls.kind)
    for e in E:
        if np.max(np.abs(e - np.conj(e.T))) > 1e-12:
            raise InputError("weight matrices must be Hermitian")
    if (fam == "D0" and idx == 4) or (fam == "DVU" and idx == 4) or (fam == "Deps" and idx == 3):
        if np.min(np.linalg.eigvalsh(E[0])) <= 0:
            raise InputError("weight matrix must be positive definite")

    cc = CompiledClass(cls, T, M, weight, E, b, "psd")
    if fam == "D0":
        return cc
    if fam == "DVU":
        V, U = grid("V"), grid("U")
        if idx == 1:
            if np.min(np.linalg.eigvalsh(_herm(U - V))) < -1e-12:
                raise InputError("bounds must satisfy V <= U")
            cc.kind_set, cc.Lmat, cc.Umat = "loewner", _herm(V), _herm(U)
        elif idx in (2, 4):
            Em = I if idx == 2 else E[0]
            cc.kind_set, cc.Emat = "scalar_band", Em
            cc.lo, cc.hi = _rtr(Em, V), _rtr(Em, U)
        else:
            cc.kind_set = "diag_band"
            cc.lo = np.real(np.einsum("mii->mi", V))
            cc.hi = np.real(np.einsum("mii->mi", U))
        if cc.kind_set != "loewner" and np.any(cc.lo > cc.hi + 1e-12):
            raise InputError("bounds must satisfy V <= U")
    else:
        eps = float(p["eps"])
        g1 = grid("g1")
        base = (1.0 - eps) * _herm(g1)
        if idx == 4:
            cc.kind_set, cc.Lmat = "psd_lower", base
        elif idx in (1, 3):
            Em = I if idx == 1 else E[0]
            cc.kind_set, cc.Emat = "scalar_band", Em
            cc.lo, cc.hi = _rtr(Em, base), np.full(M, np.inf)
        else:
            cc.kind_set = "diag_band"
            cc.lo = np.real(np.einsum("mii->mi", base))
            cc.hi = np.full((M, T), np.inf)
    _check_feasible(cc)
    return cc


def _check_feasible(cc: CompiledClass) -> None:
    """Cheap feasibility test on the moment range of the pointwise bounds."""
    if cc.T != 1:
        return
    lo = np.maximum(cc.lo_scalar, 0.0)
    hi = cc.hi_scalar
    e = cc.E_scalar
    low = float(np.mean(cc.weight * lo * e))
    high = float(np.mean(cc.weight * hi * e))
    b = float(cc.b[0])
    slack = 1e-9 * max(1.0, abs(b))
    if b < low - slack or b > high + slack:
        raise InputError("class is infeasible: moment outside the range allowed by the bounds",
                         kind=cc.cls.kind, moment=b, attainable=[low, high])


def check_pair(cls_f: DensityClass | None, cls_g: DensityClass) -> None:
    """Reject class combinations outside the supported pairings."""
    if cls_f is None:
        if cls_g.family not in ("Deps", "DVU"):
            raise UnsupportedError("the noise class must be a DVU or Deps class", kind=cls_g.kind)
        return
    if cls_f.target != "f" or cls_g.target != "g":
        raise UnsupportedError("classes are in the wrong slots", f=cls_f.kind, g=cls_g.kind)
    if (cls_f.kind, cls_g.kind) not in PAIRS:
        raise UnsupportedError("unsupported class pair", f=cls_f.kind, g=cls_g.kind,
                               supported=sorted(PAIRS))
