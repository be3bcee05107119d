"""Command-line interface: ``gmfilter {filter,minimax,simulate,validate,increments}``.

Every command writes CSV/JSON files into ``--out`` and prints a JSON summary.
Failures print a structured JSON error to stderr and exit with 2 (input),
3 (unsupported) or 4 (numerical).  A failed validation exits with 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_json(path: str, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, int) else repr(float(getattr(v, "real", v))) for v in row])


def _complex_columns(name: str, T: int) -> list[str]:
    return [f"{part}_{name}{t}" for t in range(T) for part in ("re", "im")]


def _characteristic_rows(lam, h):
    import numpy as np

    h = np.asarray(h)
    for m in range(h.shape[0]):
        row = [lam[m]]
        for t in range(h.shape[1]):
            row += [h[m, t].real, h[m, t].imag]
        yield row


def _load_config(args):
    from .config import RunConfig

    cfg = RunConfig.load(args.config)
    kw = {"grid": getattr(args, "grid", None), "truncation": getattr(args, "blocks", None),
          "seed": getattr(args, "seed", None), "ridge": getattr(args, "regularize", None)}
    if getattr(args, "single_value", None) is not None:
        kw["single_value"] = args.single_value
    if getattr(args, "tol", None) is not None and args.command == "filter":
        kw["tol"] = args.tol
    return cfg.override(**kw)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


# -- commands ---------------------------------------------------------------------------------

def cmd_filter(args) -> int:
    from .pipeline import run_filter

    cfg = _load_config(args)
    run = run_filter(cfg)
    sol = run.solution
    out = _outdir(args)
    T = cfg.spec.period
    _write_csv(os.path.join(out, "h.csv"), ["lambda"] + _complex_columns("h", T), _characteristic_rows(sol.lam, sol.h))
    _write_csv(os.path.join(out, "taps.csv"), ["lag"] + [f"tap{t}" for t in range(T)],
               ([k] + list(sol.taps[k]) for k in range(sol.taps.shape[0])))
    report = {"timestamp": _timestamp(), "command": "filter", "config": os.path.basename(args.config),
              "single_value": cfg.single_value, **run.report(oracle_window=args.oracle)}
    _write_json(os.path.join(out, "delta.json"), report)
    print(json.dumps({"delta": sol.delta, "truncation_L": sol.L, "out": out}))
    return 0


def cmd_minimax(args) -> int:
    from .pipeline import run_minimax

    cfg = _load_config(args)
    if args.tol is not None:
        cfg = cfg.override(minimax={**cfg.minimax, "gap_tol": args.tol})
    run = run_minimax(cfg, semi=True if args.semi else None, audit=args.audit)
    sol = run.solution
    out = _outdir(args)
    sol.f0.save(os.path.join(out, "f0.json"))
    sol.g0.save(os.path.join(out, "g0.json"))
    T = cfg.spec.period
    _write_csv(os.path.join(out, "h0.csv"), ["lambda"] + _complex_columns("h", T),
               _characteristic_rows(sol.problem.lam, sol.h0))
    report = {"timestamp": _timestamp(), "command": "minimax", "config": os.path.basename(args.config),
              **run.report()}
    _write_json(os.path.join(out, "minimax.json"), report)
    summary = {"delta0": sol.delta0, "relative_gap": report["relative_gap"], "converged": sol.converged,
               "residual_max": sol.residuals["max"], "out": out}
    if run.audit is not None:
        au = run.audit
        summary["audit_ok"] = bool(au["max_relative_excess_delta"] <= args.audit_tol
                                   and au["max_relative_excess_cross"] <= args.audit_tol
                                   and au["min_relative_margin_left"] >= -args.audit_tol)
    print(json.dumps(summary))
    return 0


def cmd_simulate(args) -> int:
    import numpy as np

    from .increments import integrate_levels
    from .pipeline import run_monte_carlo
    from .simulate import simulate_from_density
    from .spectral import to_increment_density

    cfg = _load_config(args)
    run, mc = run_monte_carlo(cfg, replications=args.replications)
    spec = cfg.spec
    frames = int(args.frames or cfg.simulation.get("frames", 200))
    n = spec.n_gamma
    rng = np.random.default_rng(cfg.seed)
    inc = simulate_from_density(to_increment_density(spec, run.f), frames, seed=rng).frames
    xi = integrate_levels(inc, spec)
    eta = simulate_from_density(run.g, frames + n, seed=rng).frames
    out = _outdir(args)
    T = spec.period
    rows = ([f * T + t, f, t, xi[f, t], eta[f, t], xi[f, t] + eta[f, t]]
            for f in range(frames + n) for t in range(T))
    _write_csv(os.path.join(out, "series.csv"), ["time", "frame", "season", "signal", "noise", "observed"], rows)
    report = {"timestamp": _timestamp(), "command": "simulate", "config": os.path.basename(args.config),
              "seed": cfg.seed, "frames": frames, "zero_initial_frames": n, "monte_carlo": mc.to_dict(),
              "passed": bool(abs(mc.z_score) <= 3.0 and mc.orthogonality_ok)}
    _write_json(os.path.join(out, "simulate.json"), report)
    print(json.dumps({"mse": mc.mse, "stderr": mc.stderr, "delta": mc.delta, "z_score": mc.z_score,
                      "orthogonality_ok": mc.orthogonality_ok, "out": out}))
    return 0


def cmd_validate(args) -> int:
    from .validate import run_suite

    checks = None if args.checks is None else [int(c) for c in args.checks.split(",")]

    def echo(line):
        print(line, file=sys.stderr)

    report, timings = run_suite(quick=args.quick, seed=args.seed if args.seed is not None else 0,
                                determinism=not args.quick, checks=checks, echo=echo)
    out = _outdir(args)
    _write_json(os.path.join(out, "validation.json"), report)
    _write_json(os.path.join(out, "timings.json"), timings)
    print(json.dumps({"passed": report["passed"], "failed": report["failed"], "out": out}))
    return 0 if report["passed"] else 1


def cmd_increments(args) -> int:
    from .errors import InputError
    from .increments import IncrementSpec, check_stationarity, expand_increment_coeffs, seasonal_root_set

    if args.spec is not None:
        try:
            data = json.loads(args.spec)
        except json.JSONDecodeError as exc:
            raise InputError(f"--spec is not valid JSON: {exc}") from exc
    elif args.config is not None:
        if not os.path.exists(args.config):
            raise InputError("spec file not found", path=args.config)
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"spec file is not valid JSON: {exc}", path=args.config) from exc
        data = data.get("spec", data)
    else:
        raise InputError("give a spec file or --spec JSON")
    spec = IncrementSpec.from_dict(data)
    e = expand_increment_coeffs(spec.integer_part()).as_int64().tolist()
    out = {"spec": spec.to_dict(), "integer_part": {"n_gamma": len(e) - 1, "coefficients": e}}
    if all(p.mu == 1 for p in spec.patterns):
        out["root_set"] = seasonal_root_set(spec).to_dict()
        out["classification"] = check_stationarity(spec).to_dict()
    print(json.dumps(out, indent=2))
    return 0


# -- parser -----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmfilter", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread limit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tol_help):
        sp.add_argument("config", help="run configuration JSON")
        sp.add_argument("--out", default="gmfilter-out", help="output directory")
        sp.add_argument("--grid", type=int, help="number of frequency cells")
        sp.add_argument("--blocks", type=int, help="fixed block truncation L")
        sp.add_argument("--tol", type=float, help=tol_help)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--regularize", type=float, help="relative ridge on the combined density")
        sp.add_argument("--single-value", type=int, dest="single_value",
                        help="estimate the single value this many steps back")

    sp = sub.add_parser("filter", help="optimal filter for given densities")
    common(sp, "adaptive truncation tolerance")
    sp.add_argument("--oracle", type=int, default=None, metavar="W",
                    help="also report the finite-window oracle MSE")
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("minimax", help="least favorable densities and minimax filter")
    common(sp, "relative Frank-Wolfe gap tolerance")
    sp.add_argument("--semi", action="store_true", help="signal density known (noise uncertain only)")
    sp.add_argument("--audit", type=int, default=None, metavar="N", help="sampling audit size (0 = off)")
    sp.add_argument("--audit-tol", type=float, default=1e-4, dest="audit_tol")
    sp.set_defaults(func=cmd_minimax)

    sp = sub.add_parser("simulate", help="simulated path and Monte Carlo check of the filter")
    common(sp, "adaptive truncation tolerance")
    sp.add_argument("--replications", type=int)
    sp.add_argument("--frames", type=int, help="length of the written path in frames")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("validate", help="acceptance suite on the shipped fixtures")
    sp.add_argument("--quick", action="store_true", help="reduced replications and samples")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--checks", default=None, help="comma-separated check ids")
    sp.add_argument("--out", default="gmfilter-validate")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("increments", help="coefficients and classification of an increment spec")
    sp.add_argument("config", nargs="?", help="JSON file with a spec (or a run configuration)")
    sp.add_argument("--spec", help="inline spec JSON")
    sp.set_defaults(func=cmd_increments)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .errors import GMError

    try:
        return args.func(args)
    except GMError as exc:
        print(json.dumps(exc.to_dict(), default=str), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": "InputError", "message": str(exc), "details": {}}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
