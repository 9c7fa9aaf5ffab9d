"""Command line entry point: ``drift-spectra <mode> --config <path> [--strict] [--out-dir <path>]``.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 strict-mode
acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .asymptotics import (
    BoundaryMaximumError,
    ResidualFloorError,
    convergence_to_mu,
    default_expansion,
    fit_residual_order,
    non_increasing,
    partial_sums_monotone,
    records_to_csv,
    run_sweep,
    solve_rescaled,
    track_max_point,
)
from .config import MODES, RESCALED_THRESHOLD, ConfigError, ExperimentConfig, load_config
from .eigensolver import ConvergenceError, smallest_eigenpair
from .limit import (
    MissingLocalDataError,
    SolvabilityError,
    TruncationError,
    build_hermite_basis,
    closed_form_limit,
    gaussian_moment,
    multi_indices,
    rhs_function,
    solve_corrections,
)
from .model import BoxDomain, Grid
from .operator import OverflowGuardError, assemble_symmetric
from .oracles import constrained_solve_extrapolated
from .richardson import romberg

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_STRICT = 0, 2, 3, 4


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) or math.isinf(v) else v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _report(cfg: ExperimentConfig, results: dict, failures: list) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": cfg.mode,
        "config": cfg.resolved,
        "config_sha256": cfg.content_hash(),
        "results": results,
        "strict_failures": failures,
    }


def run_solve(cfg: ExperimentConfig):
    a = cfg.alpha
    V = cfg.potential
    if a >= RESCALED_THRESHOLD:
        sol = solve_rescaled(cfg.drift, V, cfg.eps, a, cfg.radius, cfg.levels, cfg.tol, cfg.max_iter)
        pair = sol.finest
        lam, err, frame = sol.lambda_numeric, sol.lambda_error, "rescaled"
    else:
        box = BoxDomain.cube(cfg.domain_radius, cfg.drift.dim)
        pairs = []
        for n in cfg.levels:
            op = assemble_symmetric(cfg.drift, V, Grid.uniform(box, n), cfg.eps, a)
            pairs.append(smallest_eigenpair(op, cfg.tol, cfg.max_iter))
        lams = [p.lambda_ for p in pairs]
        lam = romberg(lams) if len(lams) > 1 else lams[0]
        err = abs(lam - lams[-1])
        pair, frame = pairs[-1], "physical"
    d, scaled, count = track_max_point(pair.u, a)
    summary = (f"lambda_alpha = {lam:.10g}  lambda_alpha/alpha = {lam / a:.10g}  "
               f"residual = {pair.relative_residual:.2e}  d_alpha = ({', '.join('%.3e' % v for v in d)})")
    results = {
        "alpha": a, "frame": frame, "lambda": lam, "lambda_over_alpha": lam / a, "extrapolation_error": err,
        "relative_residual": pair.relative_residual, "iterations": pair.iterations, "gap_estimate": pair.gap_estimate,
        "d_alpha": list(d), "scaled_max_drift": scaled, "max_count": count, "mu": cfg.drift.mu,
    }
    return results, [summary], []


def run_sweep_mode(cfg: ExperimentConfig, out_dir: Path):
    lim = closed_form_limit(cfg.drift, cfg.eps)
    exp = default_expansion(cfg.potential, lim)
    records = run_sweep(cfg.drift, cfg.potential, cfg.eps, cfg.alpha_ladder, exp, cfg.radius, cfg.levels,
                        cfg.tol, cfg.max_iter, workers=cfg.workers)
    (out_dir / cfg.csv_name).write_text(records_to_csv(records))
    ok = [r for r in records if r.converged]
    failures = [f"solver failed at alpha={r.alpha:g}: {r.message}" for r in records if not r.converged]
    slopes = {}
    for k in range(1, exp.order):
        try:
            slope, r2, used = fit_residual_order(ok, k, cfg.tol)
            slopes[f"after_order_{k}"] = {"slope": slope, "r_squared": r2, "alphas": list(used)}
        except ResidualFloorError as exc:
            slopes[f"after_order_{k}"] = {"error": str(exc)}
    to_mu = convergence_to_mu(ok, lim.mu)
    checks = {}
    if ok:
        checks["lambda_over_alpha_to_mu"] = len(to_mu) < 2 or to_mu[-1] <= to_mu[0] * (1 + 1e-12)
        checks["partial_sums_monotone_at_largest_alpha"] = partial_sums_monotone(ok[-1])
        checks["sup_error_non_increasing"] = non_increasing([r.rescaled_sup_error for r in ok])
    if cfg.expected:
        key = f"after_order_{cfg.expected['order']}"
        fit = slopes.get(key, {"error": f"order {cfg.expected['order']} not available"})
        target, tol = cfg.expected["slope"], cfg.expected["slope_tol"]
        checks["expected_slope"] = "slope" in fit and abs(fit["slope"] - target) <= tol
    for name, passed in checks.items():
        if not passed:
            failures.append(f"check failed: {name}")
    results = {
        "expansion": {"kind": exp.kind, "coefficients": [list(c) for c in exp.coefficients]},
        "records": [
            {"alpha": r.alpha, "lambda_numeric": r.lambda_numeric, "lambda_error": r.lambda_error,
             "partial_sums": list(r.lambda_predicted_partial_sums), "sup_error": r.rescaled_sup_error,
             "d_alpha": list(r.d_alpha), "scaled_max_drift": r.scaled_max_drift, "max_count": r.max_count,
             "tail_mass": r.boundary_tail_mass, "pohozaev": r.pohozaev_residual, "converged": r.converged,
             "message": r.message}
            for r in records
        ],
        "slopes": slopes,
        "lambda_over_alpha_minus_mu": to_mu,
        "checks": checks,
        "csv": cfg.csv_name,
    }
    lines = [f"alpha={r.alpha:g}: lambda={r.lambda_numeric:.10g}" for r in records]
    for k, v in slopes.items():
        lines.append(f"residual {k}: " + (f"slope {v['slope']:.3f} (r^2 {v['r_squared']:.3f})" if "slope" in v else v["error"]))
    return results, lines, failures


def run_limit(cfg: ExperimentConfig):
    lim = closed_form_limit(cfg.drift, cfg.eps)
    basis = build_hermite_basis(cfg.drift, cfg.eps, 20)
    mass = basis.integrate(lim.Q(basis.nodes()) ** 2)
    moments = {}
    for order in (1, 2):
        for tau in multi_indices(cfg.drift.dim, order):
            moments["".join(map(str, tau))] = gaussian_moment(cfg.drift, cfg.eps, tau)
    results = {"mu": lim.mu, "Q0": lim.Q0, "sigma": list(lim.sigma), "int_Q_squared": mass, "moments": moments}
    V = cfg.potential
    if V.local_model is not None or V.homogeneous_part is not None:
        exp = default_expansion(V, lim)
        results["expansion"] = {"kind": exp.kind, "coefficients": [list(c) for c in exp.coefficients]}
    lines = [f"mu = {lim.mu:g}  Q(0) = {lim.Q0:.12g}  int Q^2 = {mass:.15f}"]
    if "expansion" in results:
        terms = " + ".join(f"({c:.6g}) alpha^{p:g}" for p, c in results["expansion"]["coefficients"])
        lines.append(f"lambda_alpha ~ {terms}")
    return results, lines, []


def _spectrum_rows(coeffs: np.ndarray, rel_cutoff: float = 1e-12) -> list:
    top = float(np.max(np.abs(coeffs)))
    if top == 0.0:
        return []
    idx = np.argwhere(np.abs(coeffs) > rel_cutoff * top)
    return [(tuple(int(i) for i in n), float(coeffs[tuple(n)])) for n in idx]


def run_corrections(cfg: ExperimentConfig, out_dir: Path, strict: bool):
    lim = closed_form_limit(cfg.drift, cfg.eps)
    V = cfg.potential
    which = cfg.corrections["which"]
    if V.local_model is None:
        for name, kind, field_name in (("phi2", "F2", "hessian_at_origin"), ("phi1", "F1", "gradient_at_origin")):
            if cfg.corrections["explicit"] and name in which:
                raise MissingLocalDataError(f"{kind} needs local data: potential.{field_name}")
        if V.homogeneous_part is None:
            raise MissingLocalDataError("potential has no local data: potential.hessian_at_origin")
    M = cfg.corrections.get("max_degree")
    basis = build_hermite_basis(cfg.drift, cfg.eps, M) if M else None
    cs = solve_corrections(V, lim, basis, which)
    basis = cs.basis
    results, lines, failures = {"max_degree": basis.max_degree, "corrections": {}}, [], []
    priors = {"phi1": ("F1", None), "phi2": ("F2", None), "phi3": ("F3", None), "phi4": ("F4", "phi3")}
    Qn = lim.Q(basis.nodes())
    for name, c in cs.items():
        rows = _spectrum_rows(c)
        path = out_dir / f"{name}_spectrum.csv"
        with open(path, "w") as fh:
            fh.write(",".join(f"n{j + 1}" for j in range(cfg.drift.dim)) + ",coefficient\n")
            for n, v in rows:
                fh.write(",".join(map(str, n)) + f",{v:.11e}\n")
        inner, box = cs.decay_constants(name)
        entry = {
            "identically_zero": not rows,
            "nonzero_coefficients": len(rows),
            "largest": [{"index": list(n), "value": v} for n, v in sorted(rows, key=lambda r: -abs(r[1]))[:10]],
            "psi0_coefficient": float(c[(0,) * cfg.drift.dim]),
            "inner_product_with_Q": basis.integrate(basis.synthesize(c) * Qn),
            "truncation_residual": cs.residuals.get(name),
            "decay": {"C_inner": inner, "C_box": box, "holds": box <= inner * (1 + 1e-9)},
            "spectrum_file": path.name,
        }
        if not entry["decay"]["holds"]:
            failures.append(f"{name}: decay bound violated")
        if strict:
            if cfg.drift.dim == 2:
                kind, prior = priors[name]
                F = rhs_function(kind, V, lim, basis, getattr(cs, prior) if prior else None)
                grid, ref = constrained_solve_extrapolated(lim, F, cfg.corrections["oracle_radius"])
                err = float(np.max(np.abs(basis.evaluate(c, grid.points()) - ref)))
                entry["dense_oracle_max_error"] = err
                if err > 1e-6:
                    failures.append(f"{name}: dense-oracle mismatch {err:.2e} > 1e-6")
            else:
                entry["dense_oracle_max_error"] = None
        results["corrections"][name] = entry
        desc = f"{name}: identically zero" if not rows else f"{name}: {len(rows)} nonzero coefficients"
        if rows and len(rows) <= 3:
            desc += " at " + ", ".join(f"n={n} ({v:.6g})" for n, v in rows)
        lines.append(desc)
    return results, lines, failures


def run_verify(cfg: ExperimentConfig):
    from .verify import CRITERIA

    results, lines, failures = {"criteria": []}, [], []
    for k in cfg.criteria:
        res = CRITERIA[k]()
        lines.append(res.line())
        results["criteria"].append({"number": k, "title": res.title, "passed": res.passed, "detail": res.detail})
        if not res.passed:
            failures.append(f"criterion {k} failed")
    return results, lines, failures


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drift-spectra", description="Principal eigenpairs under strong divergence-free drift.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--strict", action="store_true", help="exit 4 when an acceptance check fails")
    p.add_argument("--out-dir", type=Path, default=Path("."))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            if cfg.mode == "solve":
                results, lines, failures = run_solve(cfg)
            elif cfg.mode == "sweep":
                results, lines, failures = run_sweep_mode(cfg, out_dir)
            elif cfg.mode == "limit":
                results, lines, failures = run_limit(cfg)
            elif cfg.mode == "corrections":
                results, lines, failures = run_corrections(cfg, out_dir, args.strict)
            else:
                results, lines, failures = run_verify(cfg)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except MissingLocalDataError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, TruncationError, SolvabilityError, BoundaryMaximumError, OverflowGuardError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    report = _report(cfg, results, failures)
    (out_dir / cfg.json_name).write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    for line in lines:
        print(line)
    for f in failures:
        print(f"FAIL: {f}", file=sys.stderr)
    if args.strict and failures:
        solver = [f for f in failures if f.startswith("solver failed")]
        return EXIT_SOLVER if solver else EXIT_STRICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
