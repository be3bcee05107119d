"""JSON run configurations: densities, functionals, classes and numeric knobs.

A configuration is an object with the keys::

    spec          increment spec {"patterns": [...], "period": T}
    signal        density source of the signal (structural form after resolution)
    noise         density source of the noise
    coefficients  scalar coefficients a(0..N) of the functional
    single_value  alternatively, estimate the single value M steps back
    grid          number of frequency cells
    truncation    fixed block truncation (adaptive when null)
    tol           relative tolerance of the adaptive truncation
    ridge         relative ridge added to the combined density (0 = off)
    seed          random seed
    minimax       {"class_f": ..., "class_g": ..., "semi": bool, ...}
    simulation    {"replications": ..., "frames": ...}

Density sources are either the strings ``"signal"``/``"noise"`` (the
resolved densities of this configuration) or objects with a ``type``:

``white``      ``variance / (2 pi) * I``; for the signal these are the
               increments (white GM increments).
``constant``   a fixed matrix ``matrix`` (stationary density).
``psarima``    periodic ARMA tables ``ar``, ``ma``, ``sigma2`` (``layout`` lag
               by default); for the signal the density is by default that
               of the increments.
``file``       a saved grid (``path``, json or npz) with ``form`` either
               ``structural`` or ``increment``.
``scaled``     ``factor`` times another ``source``.

Signal densities given in increment form are divided by
``|chi|^2/|beta|^2`` to obtain the structural form used throughout.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .classes import DensityClass
from .errors import InputError
from .increments import IncrementSpec, increment_ratio
from .lift import LiftedCoefficients, lift_coefficients, single_value_coefficients
from .psarima import PSARIMAModel
from .spectral import SpectralDensityGrid, density_from_psarima, from_increment_density, midpoint_grid

TOP_KEYS = {"name", "spec", "signal", "noise", "coefficients", "single_value", "grid", "truncation",
            "tol", "ridge", "seed", "minimax", "simulation"}
MINIMAX_KEYS = {"class_f", "class_g", "semi", "max_iter", "gap_tol", "tol", "audit_samples"}
SIMULATION_KEYS = {"replications", "frames", "length", "burn_in", "orth_lags"}
SOURCE_KEYS = {
    "white": {"variance", "form"},
    "constant": {"matrix", "form"},
    "psarima": {"ar", "ma", "sigma2", "layout", "form"},
    "file": {"path", "form"},
    "scaled": {"source", "factor"},
}
CLASS_MATRIX_KEYS = {"P", "Q", "B1", "B2"}
CLASS_GRID_KEYS = {"V", "U", "g1"}
CLASS_SCALAR_KEYS = {"p", "q", "eps"}
CLASS_VECTOR_KEYS = {"p_k", "q_k"}


def _matrix(x, T: int) -> np.ndarray:
    a = np.asarray(x, dtype=complex)
    if a.ndim == 0:
        a = a * np.eye(T)
    if a.shape != (T, T):
        raise InputError("matrix parameter has the wrong shape", expected=[T, T], got=list(a.shape))
    return a


class DensityResolver:
    """Turns density sources into grids for one spec and grid size."""

    def __init__(self, spec: IncrementSpec, M: int, base_dir: str = "."):
        self.spec = spec
        self.M = M
        self.T = spec.period
        self.base_dir = base_dir
        self.named: dict[str, SpectralDensityGrid] = {}
        self._ratio = None

    @property
    def ratio(self) -> np.ndarray:
        if self._ratio is None:
            self._ratio = increment_ratio(self.spec, midpoint_grid(self.M))
        return self._ratio

    def resolve(self, src, role: str = "noise") -> SpectralDensityGrid:
        if isinstance(src, str):
            if src not in self.named:
                raise InputError("unknown density reference", ref=src, known=sorted(self.named))
            return self.named[src]
        if not isinstance(src, dict) or "type" not in src:
            raise InputError("density source must be a reference or an object with a 'type'")
        kind = src["type"]
        if kind not in SOURCE_KEYS:
            raise InputError("unknown density source type", type=kind, allowed=sorted(SOURCE_KEYS))
        unknown = set(src) - SOURCE_KEYS[kind] - {"type"}
        if unknown:
            raise InputError("unknown density source keys", type=kind, keys=sorted(unknown))
        if kind == "scaled":
            factor = float(src.get("factor", 1.0))
            if factor < 0:
                raise InputError("scale factor must be non-negative", factor=factor)
            return self.resolve(src["source"], role).scaled(factor)
        default_form = "increment" if kind in ("white", "psarima") and role == "signal" else "structural"
        form = src.get("form", default_form)
        if form not in ("increment", "structural"):
            raise InputError("density form must be 'increment' or 'structural'", form=form)
        if kind == "white":
            var = float(src.get("variance", 1.0))
            grid = SpectralDensityGrid.constant(var / (2 * np.pi) * np.eye(self.T), self.M)
        elif kind == "constant":
            grid = SpectralDensityGrid.constant(_matrix(src["matrix"], self.T), self.M)
        elif kind == "psarima":
            model = PSARIMAModel.from_dict({k: src[k] for k in ("ar", "ma", "sigma2") if k in src})
            if model.T != self.T:
                raise InputError("PSARIMA tables do not match the period", seasons=model.T, period=self.T)
            grid = density_from_psarima(model, self.M, src.get("layout", "lag"))
        else:
            path = src["path"]
            if not os.path.isabs(path):
                path = os.path.join(self.base_dir, path)
            if not os.path.exists(path):
                raise InputError("density file not found", path=path)
            grid = SpectralDensityGrid.load(path)
            if grid.M != self.M or grid.T != self.T:
                raise InputError("density file does not match the grid", path=path, M=grid.M, T=grid.T,
                                 expected_M=self.M, expected_T=self.T)
        if form == "increment":
            if role != "signal":
                raise InputError("only the signal density can be given in increment form")
            grid = from_increment_density(self.spec, grid)
        return grid

    # -- classes ---------------------------------------------------------------------------
    def moment_of(self, kind: str, key: str, d: SpectralDensityGrid, params: dict):
        """Moment of density ``d`` with the functional that ``key`` denotes in class ``kind``."""
        X = np.asarray(d.values)
        k = self.ratio if kind.startswith("D0") else np.ones(self.M)
        mean = np.mean(k[:, None, None] * X, axis=0)
        if key in ("P", "Q"):
            return mean
        if key in ("p_k", "q_k"):
            return np.real(np.diag(mean)).tolist()
        if kind in ("D0_4", "DVU_4", "Deps_3"):
            B = _matrix(params["B1" if kind == "D0_4" else "B2"], self.T)
            return float(np.real(np.trace(B @ mean)))
        return float(np.real(np.trace(mean)))

    def density_class(self, data: dict) -> DensityClass:
        if not isinstance(data, dict) or "kind" not in data:
            raise InputError("class must be an object with a 'kind'")
        kind = data["kind"]
        allowed = CLASS_MATRIX_KEYS | CLASS_GRID_KEYS | CLASS_SCALAR_KEYS | CLASS_VECTOR_KEYS | {"kind"}
        unknown = set(data) - allowed
        if unknown:
            raise InputError("unknown class keys", keys=sorted(unknown))
        params: dict = {}
        for key in CLASS_MATRIX_KEYS & set(data):
            if not (isinstance(data[key], dict) and "moment_of" in data[key]):
                params[key] = _matrix(data[key], self.T)
        for key in CLASS_GRID_KEYS & set(data):
            params[key] = self.resolve(data[key])
        for key in (CLASS_SCALAR_KEYS | CLASS_VECTOR_KEYS | CLASS_MATRIX_KEYS) & set(data):
            val = data[key]
            if isinstance(val, dict) and "moment_of" in val:
                src = val["moment_of"]
                params[key] = self.moment_of(kind, key, self.resolve(src, "signal" if src == "signal" else "noise"),
                                             {**data, **params})
            elif key in CLASS_SCALAR_KEYS:
                params[key] = float(val)
            elif key in CLASS_VECTOR_KEYS:
                params[key] = [float(v) for v in np.atleast_1d(val)]
        return DensityClass(kind, params)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration (see the module docstring for keys)."""

    spec: IncrementSpec
    signal: object = None
    noise: object = None
    coefficients: tuple | None = None
    single_value: int | None = None
    grid: int = 4096
    truncation: int | None = None
    tol: float = 1e-4
    ridge: float = 0.0
    seed: int = 0
    minimax: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    name: str = ""
    base_dir: str = "."

    def __post_init__(self):
        if self.grid < 16:
            raise InputError("grid must have at least 16 cells", grid=self.grid)
        if not self.tol > 0:
            raise InputError("tolerances must be positive", tol=self.tol)
        if self.ridge < 0:
            raise InputError("ridge must be non-negative", ridge=self.ridge)
        if self.truncation is not None and self.truncation < 1:
            raise InputError("truncation must be >= 1", truncation=self.truncation)
        if self.single_value is not None and self.single_value < 0:
            raise InputError("single_value must be non-negative", single_value=self.single_value)
        for key in ("gap_tol", "tol"):
            if key in self.minimax and not float(self.minimax[key]) > 0:
                raise InputError("tolerances must be positive", key=key)

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "RunConfig":
        if not isinstance(data, dict):
            raise InputError("configuration must be a JSON object")
        unknown = set(data) - TOP_KEYS
        if unknown:
            raise InputError("unknown configuration keys", keys=sorted(unknown))
        if "spec" not in data:
            raise InputError("configuration needs an increment 'spec'")
        mm = dict(data.get("minimax") or {})
        bad = set(mm) - MINIMAX_KEYS
        if bad:
            raise InputError("unknown minimax keys", keys=sorted(bad))
        sim = dict(data.get("simulation") or {})
        bad = set(sim) - SIMULATION_KEYS
        if bad:
            raise InputError("unknown simulation keys", keys=sorted(bad))
        coeffs = data.get("coefficients")
        return cls(
            spec=IncrementSpec.from_dict(data["spec"]),
            signal=data.get("signal"),
            noise=data.get("noise"),
            coefficients=None if coeffs is None else tuple(float(c) for c in coeffs),
            single_value=data.get("single_value"),
            grid=int(data.get("grid", 4096)),
            truncation=data.get("truncation"),
            tol=float(data.get("tol", 1e-4)),
            ridge=float(data.get("ridge", 0.0)),
            seed=int(data.get("seed", 0)),
            minimax=mm,
            simulation=sim,
            name=str(data.get("name", "")),
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        if not os.path.exists(path):
            raise InputError("configuration file not found", path=path)
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"configuration is not valid JSON: {exc}", path=path) from exc
        return cls.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))

    def override(self, **kwargs) -> "RunConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)

    def functional(self) -> LiftedCoefficients:
        T = self.spec.period
        if self.single_value is not None:
            return single_value_coefficients(int(self.single_value), T)
        if self.coefficients is None:
            raise InputError("configuration needs 'coefficients' or 'single_value'")
        return lift_coefficients(list(self.coefficients), T)

    def resolver(self, M: int | None = None) -> DensityResolver:
        return DensityResolver(self.spec, self.grid if M is None else M, self.base_dir)

    def densities(self, M: int | None = None, need_signal: bool = True, need_noise: bool = True):
        """Resolved ``(f, g, resolver)``; ``f`` is in structural form."""
        res = self.resolver(M)
        f = g = None
        if need_signal:
            if self.signal is None:
                raise InputError("configuration needs a 'signal' density")
            f = res.resolve(self.signal, "signal")
            res.named["signal"] = f
        if need_noise:
            if self.noise is None:
                raise InputError("configuration needs a 'noise' density")
            g = res.resolve(self.noise, "noise")
            res.named["noise"] = g
        return f, g, res
