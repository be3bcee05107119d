"""Least favorable densities and minimax-robust filters.

On the grid with a fixed truncation ``L`` the MSE ``Delta_L(f, g)`` is the
minimum over a filter family that does not depend on ``(f, g)`` (transfer
functions whose coefficients at future lags ``1..L`` vanish) of an
expression linear in ``(f, g)``.  It is therefore concave, and by Danskin's
theorem its gradient at ``(f, g)`` is the pair of pointwise matrices

    H_f = rho conj(h)^T h,    H_g = conj(v)^T v,    v = A - chi h,

with ``h`` the optimal increment-side transfer function.  The inner product
``(2 pi / M) sum_m Re tr(F_m H_m)`` of these with ``(f, g)`` is the cross
MSE ``Delta(h; f, g)``.  The least favorable pair maximizes ``Delta_L`` over
the product of the classes; the maximizer is found by projected-gradient
ascent with Barzilai-Borwein steps, and the Frank-Wolfe gap (from the exact
linear maximization over the class, where available) certifies optimality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .classes import CompiledClass, DensityClass, check_pair, compile_class
from .errors import InputError, NumericalError
from .filtering import FilterSolution, characteristic_rows, solve_filter
from .increments import IncrementSpec, beta_at, chi_at
from .lift import LiftedCoefficients, lift_coefficients
from .operators import GridContext, max_truncation
from .spectral import COND_CAP, SpectralDensityGrid, hermitian_inverse, midpoint_grid

TWO_PI = 2.0 * np.pi
MARGIN = 1e-6


def _herm(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


@dataclass(frozen=True, eq=False)
class MinimaxProblem:
    """Grid, truncation and functional shared by all evaluations."""

    spec: IncrementSpec
    a: LiftedCoefficients
    L: int
    lam: np.ndarray
    chi: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    A: np.ndarray
    cond_cap: float = COND_CAP

    @classmethod
    def build(cls, spec: IncrementSpec, a, M: int = 512, L: int | None = None,
              cond_cap: float = COND_CAP) -> "MinimaxProblem":
        if not spec.is_integer:
            raise InputError("minimax problems need an integer-mode increment spec")
        lifted = a if isinstance(a, LiftedCoefficients) else lift_coefficients(a, spec.period)
        lam = midpoint_grid(M)
        chi = chi_at(spec, lam)
        beta = beta_at(spec, lam)
        if np.min(np.abs(chi)) < 1e-12:
            raise NumericalError("increment response vanishes at a grid point")
        ncols = lifted.blocks.shape[0] + spec.n_gamma
        cap = max_truncation(M, ncols, spec.n_gamma)
        L = cap if L is None else int(L)
        if not 1 <= L <= cap:
            raise InputError("truncation outside the range supported by the grid", L=L, cap=cap)
        k = np.arange(lifted.blocks.shape[0])
        A = np.exp(-1j * np.outer(lam, k)) @ np.asarray(lifted.blocks, dtype=float)
        rho = np.abs(chi) ** 2 / np.abs(beta) ** 2
        return cls(spec, lifted, L, lam, chi, beta, rho, A, cond_cap)

    @property
    def M(self) -> int:
        return len(self.lam)

    @property
    def T(self) -> int:
        return self.spec.period

    def context(self, fv: np.ndarray, gv: np.ndarray) -> GridContext:
        p = fv + (np.abs(self.beta) ** 2)[:, None, None] * gv
        pinv = hermitian_inverse(p, cond_cap=self.cond_cap, lambdas=self.lam)
        return GridContext(self.spec, self.lam, self.chi, self.beta, self.rho, fv, gv, p, pinv)

    def evaluate(self, fv: np.ndarray, gv: np.ndarray) -> "Evaluation":
        fv = _herm(np.asarray(fv, dtype=complex))
        gv = _herm(np.asarray(gv, dtype=complex))
        ctx = self.context(fv, gv)
        sol = solve_filter(None, None, self.a, self.spec, L=self.L, ctx=ctx)
        rows = characteristic_rows(ctx, np.asarray(self.a.blocks, dtype=float), sol.c)
        return Evaluation(self, float(sol.delta), sol, ctx, rows)

    def grid(self, values: np.ndarray) -> SpectralDensityGrid:
        return SpectralDensityGrid(_herm(np.asarray(values, dtype=complex)))


@dataclass(frozen=True, eq=False)
class Evaluation:
    """The optimal filter at one density pair together with the MSE gradient."""

    problem: MinimaxProblem
    delta: float
    solution: FilterSolution
    ctx: GridContext
    rows: dict

    @property
    def h_inc(self) -> np.ndarray:
        return self.solution.h_inc

    @property
    def Hf(self) -> np.ndarray:
        h = self.h_inc
        return self.problem.rho[:, None, None] * np.einsum("mi,mj->mij", np.conj(h), h)

    @property
    def Hg(self) -> np.ndarray:
        v = self.problem.A - self.problem.chi[:, None] * self.h_inc
        return np.einsum("mi,mj->mij", np.conj(v), v)


def _ip(a: np.ndarray, b: np.ndarray) -> float:
    """Grid inner product ``(2 pi / M) sum_m Re tr(a_m b_m)`` of Hermitian stacks."""
    return float(np.real(np.einsum("mij,mji->", a, b))) * TWO_PI / a.shape[0]


def filter_mse(problem: MinimaxProblem, h_inc: np.ndarray, fv: np.ndarray, gv: np.ndarray) -> float:
    """MSE of the filter with increment-side transfer ``h_inc`` when the densities are ``(f, g)``."""
    v = problem.A - problem.chi[:, None] * h_inc
    tg = np.real(np.einsum("mi,mij,mj->m", v, gv, np.conj(v)))
    tf = problem.rho * np.real(np.einsum("mi,mij,mj->m", h_inc, fv, np.conj(h_inc)))
    return float(np.sum(tg + tf)) * TWO_PI / problem.M


def cross_delta(ev: Evaluation, fv, gv, parts: bool = False):
    """MSE of the filter optimal at the anchor ``ev`` when the densities are ``(f, g)``.

    Evaluates the two quadrature terms built from the anchor's
    ``X p^{-1}`` and ``Y p^{-1}`` rows::

        (1/2 pi) int |beta|^2/|chi|^2 X p^{-1} f p^{-1} X^*
      + (1/2 pi) int 1/|chi|^2 Y p^{-1} g p^{-1} Y^*

    (times ``2 pi`` on this package's covariance scale).
    """
    fv = np.asarray(fv.values if isinstance(fv, SpectralDensityGrid) else fv)
    gv = np.asarray(gv.values if isinstance(gv, SpectralDensityGrid) else gv)
    pr = ev.problem
    Xp, Yp = ev.rows["Xp"], ev.rows["Yp"]
    chi2 = np.abs(pr.chi) ** 2
    tf = (np.abs(pr.beta) ** 2 / chi2) * np.real(np.einsum("mi,mij,mj->m", Xp, fv, np.conj(Xp)))
    tg = np.real(np.einsum("mi,mij,mj->m", Yp, gv, np.conj(Yp))) / chi2
    w = TWO_PI / pr.M
    term_f, term_g = float(np.sum(tf)) * w, float(np.sum(tg)) * w
    return (term_f, term_g) if parts else term_f + term_g


# -- ascent ----------------------------------------------------------------------------------

@dataclass
class AscentResult:
    x: dict
    evaluation: Evaluation
    history: list
    gap: float | None
    converged: bool
    iterations: int
    rejected_steps: int
    message: str


def _lmo_gap(compiled: dict, x: dict, grad: dict) -> float | None:
    total = 0.0
    for name, cc in compiled.items():
        s = cc.lmo(grad[name])
        if s is None:
            return None
        total += _ip(grad[name], s - x[name])
    return total


def _evaluate(problem, x, fixed):
    fv = x["f"] if "f" in x else fixed["f"]
    gv = x["g"] if "g" in x else fixed["g"]
    return problem.evaluate(fv, gv)


def _grad(ev: Evaluation, names) -> dict:
    return {n: (ev.Hf if n == "f" else ev.Hg) for n in names}


def ascent(problem: MinimaxProblem, compiled: dict, x0: dict, fixed: dict | None = None,
           max_iter: int = 500, gap_tol: float = 1e-7, tol: float = 1e-6) -> AscentResult:
    """Projected-gradient ascent of ``Delta_L`` over a product of classes.

    Steps are Barzilai-Borwein scaled with a monotone backtracking line
    search, so the objective sequence never decreases.  A step whose
    combined density is singular (minimality violated) is rejected and
    halved.  Stops when the Frank-Wolfe gap is below ``gap_tol * Delta``
    or, when no closed-form linear maximizer exists, when the relative
    objective change stays below ``tol`` for five iterations.
    """
    fixed = fixed or {}
    names = list(compiled)
    x = {n: compiled[n].project(x0[n]) for n in names}
    ev = _evaluate(problem, x, fixed)
    grad = _grad(ev, names)
    history = [ev.delta]
    step = {}
    for n in names:
        xs, gs = np.sqrt(_ip(x[n], x[n])), np.sqrt(_ip(grad[n], grad[n]))
        step[n] = xs / max(gs, 1e-300) if xs > 0 else 1.0 / max(gs, 1e-300)
    step0 = dict(step)
    rejected = 0
    gap = _lmo_gap(compiled, x, grad)
    quiet = 0
    message = "iteration limit reached"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if gap is not None and gap <= gap_tol * abs(ev.delta):
            converged, message = True, "Frank-Wolfe gap below tolerance"
            it -= 1
            break
        y = {n: compiled[n].project(x[n] + step[n] * grad[n]) for n in names}
        d = {n: y[n] - x[n] for n in names}
        slope = sum(_ip(grad[n], d[n]) for n in names)
        if slope <= 1e-15 * abs(ev.delta):
            converged, message = True, "projected gradient step vanished"
            break
        t = 1.0
        while True:
            xn = {n: x[n] + t * d[n] for n in names}
            try:
                ev_n = _evaluate(problem, xn, fixed)
            except NumericalError:
                rejected += 1
                ev_n = None
            if ev_n is not None and ev_n.delta >= ev.delta + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-10:
                ev_n = None
                break
        if ev_n is None:
            message = "line search stalled"
            break
        grad_n = _grad(ev_n, names)
        for n in names:
            s_k = xn[n] - x[n]
            ss = _ip(s_k, s_k)
            sy = _ip(s_k, grad_n[n] - grad[n])
            if ss > 0:
                step[n] = ss / -sy if sy < 0 else 4.0 * step[n]
            step[n] = float(np.clip(step[n], 1e-12 * step0[n], 1e12 * step0[n]))
        rel = abs(ev_n.delta - ev.delta) / max(abs(ev_n.delta), 1e-300)
        x, ev, grad = xn, ev_n, grad_n
        history.append(ev.delta)
        gap = _lmo_gap(compiled, x, grad)
        if gap is None:
            quiet = quiet + 1 if rel < tol else 0
            if quiet >= 5:
                converged, message = True, "relative objective change below tolerance"
                break
    return AscentResult(x, ev, history, gap, converged, it, rejected, message)


# -- solutions -------------------------------------------------------------------------------

@dataclass(eq=False)
class MinimaxSolution:
    """Least favorable pair, minimax characteristic and diagnostics.

    Attributes
    ----------
    f0, g0 : SpectralDensityGrid
        Least favorable densities (``f0`` is the given density in the
        semi-uncertain problem).
    h0 : ndarray (M, T)
        Minimax spectral characteristic (against the structural measure).
    h0_inc : ndarray (M, T)
        Its increment-side transfer function.
    delta0 : float
        ``Delta_L(f0, g0)``.
    gap : float or None
        Frank-Wolfe duality gap at the solution (an upper bound on
        ``max Delta - delta0`` over the classes on the grid).
    residuals, multipliers : dict
        Stationarity-equation diagnostics, see :func:`saddle_residuals`.
    """

    problem: MinimaxProblem
    cls_f: DensityClass | None
    cls_g: DensityClass
    compiled: dict
    f0: SpectralDensityGrid
    g0: SpectralDensityGrid
    h0: np.ndarray
    h0_inc: np.ndarray
    delta0: float
    gap: float | None
    converged: bool
    iterations: int
    history: list
    message: str
    evaluation: Evaluation
    residuals: dict = field(default_factory=dict)
    multipliers: dict = field(default_factory=dict)
    slacks: dict = field(default_factory=dict)

    @property
    def semi(self) -> bool:
        return self.cls_f is None

    def to_dict(self) -> dict:
        return {
            "semi_uncertain": self.semi,
            "class_f": None if self.cls_f is None else self.cls_f.kind,
            "class_g": self.cls_g.kind,
            "grid": self.problem.M,
            "truncation_L": self.problem.L,
            "delta0": self.delta0,
            "frank_wolfe_gap": self.gap,
            "relative_gap": None if self.gap is None else self.gap / abs(self.delta0),
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
            "objective_first_last": [self.history[0], self.history[-1]],
            "feasibility": self.feasibility(),
            "residuals": self.residuals,
            "multipliers": self.multipliers,
        }

    def feasibility(self) -> dict:
        out = {}
        for name, cc in self.compiled.items():
            X = np.asarray((self.f0 if name == "f" else self.g0).values)
            out[name] = {"moment_residual": cc.moment_residual(X), "pointwise_violation": cc.pointwise_violation(X)}
        return out


def _finish(problem, cls_f, cls_g, compiled, res: AscentResult, fixed) -> MinimaxSolution:
    fv = res.x.get("f", fixed.get("f"))
    gv = res.x.get("g", fixed.get("g"))
    ev = res.evaluation
    sol = ev.solution
    out = MinimaxSolution(problem, cls_f, cls_g, compiled, problem.grid(fv), problem.grid(gv),
                          sol.h, sol.h_inc, ev.delta, res.gap, res.converged, res.iterations,
                          res.history, res.message, ev)
    saddle_residuals(out)
    return out


def _values(d) -> np.ndarray:
    return np.asarray(d.values if isinstance(d, SpectralDensityGrid) else d, dtype=complex)


def least_favorable(cls_f: DensityClass, cls_g: DensityClass, a, spec: IncrementSpec, M: int = 512,
                    f_init=None, g_init=None, L: int | None = None, max_iter: int = 500,
                    gap_tol: float = 1e-7, tol: float = 1e-6) -> MinimaxSolution:
    """Least favorable pair over ``cls_f x cls_g`` and the minimax filter.

    Only the four matching pairs ``(D0_k, DVU_k)`` are accepted.  Initial
    densities default to the projections of flat densities onto the classes.
    """
    check_pair(cls_f, cls_g)
    problem = MinimaxProblem.build(spec, a, M=M, L=L)
    compiled = {"f": compile_class(cls_f, problem.T, M, problem.rho),
                "g": compile_class(cls_g, problem.T, M, problem.rho)}
    x0 = {"f": compiled["f"].center() if f_init is None else _values(f_init),
          "g": compiled["g"].center() if g_init is None else _values(g_init)}
    res = ascent(problem, compiled, x0, max_iter=max_iter, gap_tol=gap_tol, tol=tol)
    return _finish(problem, cls_f, cls_g, compiled, res, {})


def least_favorable_noise_semi(f, cls_g: DensityClass, a, spec: IncrementSpec, g_init=None,
                               L: int | None = None, max_iter: int = 500, gap_tol: float = 1e-7,
                               tol: float = 1e-6) -> MinimaxSolution:
    """Least favorable noise density when the signal density ``f`` is known.

    The grid is that of ``f``.
    """
    check_pair(None, cls_g)
    fv = _values(f)
    problem = MinimaxProblem.build(spec, a, M=fv.shape[0], L=L)
    if fv.shape[1] != problem.T:
        raise InputError("density dimension must equal the period", T=fv.shape[1], period=problem.T)
    compiled = {"g": compile_class(cls_g, problem.T, problem.M, problem.rho)}
    x0 = {"g": compiled["g"].center() if g_init is None else _values(g_init)}
    res = ascent(problem, compiled, x0, fixed={"f": fv}, max_iter=max_iter, gap_tol=gap_tol, tol=tol)
    return _finish(problem, None, cls_g, compiled, res, {"f": fv})


def minimax_characteristic(sol: MinimaxSolution) -> np.ndarray:
    """``h0``: the optimal spectral characteristic at ``(f0, g0)``."""
    ev = sol.problem.evaluate(sol.f0.values, sol.g0.values)
    return ev.solution.h


# -- multipliers and residuals -------------------------------------------------------------------

_MULTIPLIER_NAMES = {
    ("D0", 1): "alpha_outer", ("D0", 2): "alpha2", ("D0", 3): "alpha_k2", ("D0", 4): "alpha2",
    ("DVU", 1): "beta_outer", ("DVU", 2): "beta2", ("DVU", 3): "beta_k2", ("DVU", 4): "beta2",
    ("Deps", 1): "beta2", ("Deps", 2): "beta_k2", ("Deps", 3): "beta2", ("Deps", 4): "beta_outer",
}


def _null_projector(D: np.ndarray, thr: float) -> np.ndarray:
    """Columns spanning the near-null space of each ``D_m`` (others zeroed)."""
    w, v = np.linalg.eigh(_herm(D))
    return v * (w <= thr)[:, None, :]


def _cone_projection(U: np.ndarray, G: np.ndarray, sign: float) -> np.ndarray:
    """Project onto ``{sign * U Y U^*: Y >= 0}``."""
    B = np.einsum("mji,mjk,mkl->mil", np.conj(U), G, U) * sign
    w, v = np.linalg.eigh(_herm(B))
    Bp = np.einsum("mij,mj,mkj->mik", v, np.clip(w, 0, None), np.conj(v))
    return sign * np.einsum("mij,mjk,mlk->mil", U, Bp, np.conj(U))


@dataclass(eq=False)
class _Cone:
    """Normal cone of the pointwise set at the solution, one per grid point."""

    low: np.ndarray | None          # near-null basis of X - lower bound
    up: np.ndarray | None           # near-null basis of upper bound - X
    rays: list                      # (E, sign, mask)

    def project(self, G: np.ndarray, sweeps: int = 30) -> tuple[np.ndarray, list]:
        parts = []
        if self.low is not None:
            parts.append(lambda Z: _cone_projection(self.low, Z, -1.0))
        if self.up is not None:
            parts.append(lambda Z: _cone_projection(self.up, Z, 1.0))
        for E, sign, mask in self.rays:
            nE = float(np.real(np.trace(E @ E)))
            def ray(Z, E=E, sign=sign, mask=mask, nE=nE):
                c = np.clip(sign * np.real(np.einsum("ij,mji->m", E, Z)) / nE, 0, None) * mask
                return sign * c[:, None, None] * E[None]
            parts.append(ray)
        comps = [np.zeros_like(G) for _ in parts]
        if not parts:
            return np.zeros_like(G), comps
        for _ in range(sweeps if len(parts) > 1 else 1):
            for i, P in enumerate(parts):
                rest = G - (sum(comps) - comps[i])
                comps[i] = P(rest)
        return sum(comps), comps


def _normal_cone(cc: CompiledClass, X: np.ndarray) -> tuple[_Cone, np.ndarray]:
    """Normal cone at ``X`` and the mask of points where some bound is active."""
    X = _herm(X)
    scale = max(float(np.max(np.abs(np.linalg.eigvalsh(X)))), 1e-300)
    thr = MARGIN * scale
    ks = cc.kind_set
    low = up = None
    rays = []
    if ks == "psd":
        low = _null_projector(X, thr)
    elif ks == "psd_lower":
        low = _null_projector(X - cc.Lmat, thr)
    elif ks == "loewner":
        low = _null_projector(X - cc.Lmat, thr)
        up = _null_projector(cc.Umat - X, thr)
    else:
        low = _null_projector(X, thr)
        if ks == "scalar_band":
            s = np.real(np.einsum("ij,mji->m", cc.Emat, X))
            sc = max(float(np.max(np.abs(s))), 1e-300) * MARGIN
            rays.append((cc.Emat, -1.0, (s - cc.lo <= sc).astype(float)))
            rays.append((cc.Emat, 1.0, (cc.hi - s <= sc).astype(float)))
        else:
            d = np.real(np.einsum("mii->mi", X))
            sc = max(float(np.max(np.abs(d))), 1e-300) * MARGIN
            for k in range(cc.T):
                Ek = np.zeros((cc.T, cc.T), dtype=complex)
                Ek[k, k] = 1.0
                rays.append((Ek, -1.0, (d[:, k] - cc.lo[:, k] <= sc).astype(float)))
                rays.append((Ek, 1.0, (cc.hi[:, k] - d[:, k] <= sc).astype(float)))
    active = np.zeros(cc.M, dtype=bool)
    for basis in (low, up):
        if basis is not None:
            active |= np.any(np.abs(basis) > 0, axis=(1, 2))
    for _, _, mask in rays:
        active |= mask > 0
    return _Cone(low, up, rays), active


def fit_multipliers(cc: CompiledClass, X: np.ndarray, G: np.ndarray) -> dict:
    """Fit the stationarity equation ``G / k = Lambda + Gamma`` at a solution.

    ``G`` is the MSE gradient for the variable, ``k`` the class moment
    weight, ``Lambda = sum_i theta_i E_i`` the moment multiplier and
    ``Gamma(lam)`` an element of the normal cone of the pointwise set at
    ``X(lam)``: it may be nonzero only where a bound is active (within a
    relative margin of 1e-6), with the sign the bound dictates.  Theta
    minimizes the total squared distance to the cones; the remaining
    distance is the residual.
    """
    N = _herm(G) / cc.weight[:, None, None]
    cone, active = _normal_cone(cc, X)
    Es = np.stack(cc.E)

    def resid(theta):
        R0 = N - np.einsum("i,ijk->jk", theta, Es)[None]
        proj, comps = cone.project(R0)
        return R0 - proj, proj, comps

    def obj(theta):
        R, _, _ = resid(theta)
        val = float(np.sum(np.abs(R) ** 2))
        grad = -2.0 * np.real(np.einsum("ijk,mkj->i", Es, R))
        return val, grad

    nE = np.array([float(np.real(np.trace(e @ e))) for e in cc.E])
    free = ~active if np.any(~active) else np.ones(cc.M, dtype=bool)
    theta0 = np.real(np.einsum("ijk,mkj->i", Es, N[free])) / free.sum() / nE
    if len(cc.E) == 1:
        span = float(np.max(np.abs(N))) + abs(theta0[0])
        r = minimize_scalar(lambda t: obj(np.array([t]))[0], bounds=(theta0[0] - 2 * span, theta0[0] + 2 * span),
                            method="bounded", options={"xatol": 1e-14 * max(span, 1e-300), "maxiter": 500})
        theta = np.array([r.x])
    else:
        r = minimize(obj, theta0, jac=True, method="BFGS", options={"gtol": 1e-14, "maxiter": 1000})
        theta = r.x
    R, proj, comps = resid(theta)
    Lam = np.einsum("i,ijk->jk", theta, Es)
    scale = max(float(np.linalg.norm(Lam)), float(np.max(np.linalg.norm(N, axis=(1, 2)))) * 1e-12, 1e-300)
    rn = np.linalg.norm(R, axis=(1, 2)) / scale
    return {
        "theta": theta, "Lambda": Lam, "Gamma": proj, "components": comps,
        "stationarity": float(np.max(rn)),
        "stationarity_rms": float(np.sqrt(np.mean(rn ** 2))),
        "complementary_slackness": float(np.max(rn[~active])) if np.any(~active) else 0.0,
        "active_sign": float(np.max(rn[active])) if np.any(active) else 0.0,
        "active_fraction": float(np.mean(active)),
    }


def _lam_json(Lam: np.ndarray, T: int):
    if T == 1:
        return float(np.real(Lam[0, 0]))
    return {"re": np.real(Lam).tolist(), "im": np.imag(Lam).tolist()}


def saddle_residuals(sol: MinimaxSolution) -> dict:
    """Stationarity residuals of the least favorable densities.

    For each uncertain density the gradient ``H`` of the MSE (the matrix
    ``rho^{-1} p^{-1} X^* X p^{-1}`` for ``f`` and ``|chi|^{-2} p^{-1} Y^* Y p^{-1}``
    for ``g``, in units of the class weight) must equal the moment
    multiplier plus a slack that vanishes wherever the pointwise bounds are
    inactive.  Residuals are relative to the multiplier's norm:

    ``stationarity``
        largest residual over the grid,
    ``complementary_slackness``
        largest residual where all bounds are inactive (slack forced to 0),
    ``active_sign``
        largest residual where a bound is active (slack sign-constrained).
    """
    ev = sol.evaluation
    residuals, multipliers = {}, {}
    for name, cc in sol.compiled.items():
        X = np.asarray((sol.f0 if name == "f" else sol.g0).values)
        G = ev.Hf if name == "f" else ev.Hg
        fit = fit_multipliers(cc, X, G)
        label = "signal" if name == "f" else "noise"
        residuals[label] = {k: fit[k] for k in ("stationarity", "stationarity_rms", "complementary_slackness",
                                                 "active_sign", "active_fraction")}
        key = _MULTIPLIER_NAMES[(cc.cls.family, cc.cls.index)]
        if key.endswith("k2"):
            val = [float(t) for t in fit["theta"]]
        elif key.endswith("outer"):
            val = _lam_json(fit["Lambda"], cc.T)
        else:
            val = float(fit["theta"][0])
        multipliers[label] = {key: val, "slack_extremes": [float(np.min(np.real(np.einsum("mii->m", fit["Gamma"])))),
                                                          float(np.max(np.real(np.einsum("mii->m", fit["Gamma"]))))]}
        sol.slacks[label] = fit["Gamma"]
    worst = max(r["stationarity"] for r in residuals.values())
    residuals["max"] = worst
    sol.residuals, sol.multipliers = residuals, multipliers
    return residuals


# -- sampling audit --------------------------------------------------------------------------------

def perturbed_transfer(h_inc: np.ndarray, lam: np.ndarray, rng: np.random.Generator, size: float,
                       taps: int = 8) -> np.ndarray:
    """``h_inc`` plus a random causal filter ``sum_k d_k e^{-i lam k}``."""
    d = rng.standard_normal((taps, h_inc.shape[1])) * size
    return h_inc + np.exp(-1j * np.outer(lam, np.arange(taps))) @ d


def sampling_audit(sol: MinimaxSolution, samples: int = 100, seed: int = 0) -> dict:
    """Check maximality and the saddle inequalities by random sampling.

    * dominance: ``Delta_L(f, g) <= delta0`` for in-class ``(f, g)``;
    * right inequality: ``Delta(h0; f, g) <= delta0`` for in-class ``(f, g)``;
    * left inequality: ``Delta(h; f0, g0) >= delta0`` for causal
      perturbations ``h`` of ``h0``.

    Excesses are reported relative to ``delta0``; singular samples
    (minimality violated) are skipped and counted.
    """
    rng = np.random.default_rng(seed)
    pr = sol.problem
    d0 = sol.delta0
    worst_dom = worst_cross = -np.inf
    worst_left = np.inf
    skipped = 0
    f0v, g0v = np.asarray(sol.f0.values), np.asarray(sol.g0.values)
    for i in range(samples):
        smooth = i % 2 == 0
        fv = sol.compiled["f"].sample(rng, smooth) if "f" in sol.compiled else f0v
        gv = sol.compiled["g"].sample(rng, smooth)
        worst_cross = max(worst_cross, (cross_delta(sol.evaluation, fv, gv) - d0) / d0)
        try:
            worst_dom = max(worst_dom, (pr.evaluate(fv, gv).delta - d0) / d0)
        except NumericalError:
            skipped += 1
        size = 10.0 ** rng.uniform(-4, -1) * float(np.max(np.abs(sol.h0_inc)) + 1e-300)
        h = perturbed_transfer(sol.h0_inc, pr.lam, rng, size)
        worst_left = min(worst_left, (filter_mse(pr, h, f0v, g0v) - d0) / d0)
    return {
        "samples": samples,
        "skipped_singular": skipped,
        "max_relative_excess_delta": float(worst_dom),
        "max_relative_excess_cross": float(worst_cross),
        "min_relative_margin_left": float(worst_left),
    }
