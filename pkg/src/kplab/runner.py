"""Experiment dispatch, CSV emission and run manifests."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, kernels
from .config import ExperimentConfig
from .control import make_bump
from .counterexample import gaussian_l2, observability_quotient, quotient_csv, quotient_slope, sup_slope
from .errors import ConfigurationError, ContractionError, DomainError, NumericalRegimeError
from .hum import hum_solve
from .nonlinear import SolverParams, picard_steer
from .observability import (ingham_csv, ingham_estimate, ingham_sandwich, lambda_scan, resonant_lambdas,
                            scan_csv, transit_csv, transit_report)
from .selftest import run_selftest
from .spectral import ModeGrid2D, random_spectrum

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python ones."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _pool_map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


# --------------------------------------------------------------------------
# experiments: each returns ({file name: text}, metrics)


def _exp_hum(cfg, threads):
    grid = ModeGrid2D(cfg.grid.K, cfg.grid.L)
    bump = make_bump(cfg.strip.a, cfg.strip.b, cfg.grid.K, n_quad=cfg.bump.n_quad)
    n_pairs = cfg.sweep.n_pairs or 1

    def one(ss):
        rng = np.random.default_rng(ss)
        u0 = random_spectrum(grid, rng)
        u1 = random_spectrum(grid, rng)
        return hum_solve(u0, u1, cfg.T, bump)

    sols = _pool_map(one, _seeds(cfg.seed, n_pairs), threads)
    rows = [(i, s.residual, s.control_norm, s.upsilon_bound, s.condition) for i, s in enumerate(sols)]
    files = {
        "hum.csv": _table(["pair", "residual", "control_norm", "upsilon_bound", "condition"], rows),
        "control.csv": sols[0].to_csv(),
    }
    metrics = {
        "residual": max(s.residual for s in sols),
        "control_norm": [s.control_norm for s in sols],
        "condition": sols[0].condition,
        "min_eig": sols[0].manifest()["min_eig"],
    }
    return files, metrics


def scan_lambdas(cfg):
    lams = cfg.sweep.lambdas
    if lams is None:
        lams = [0.5 * i for i in range(101)]
    lams = list(lams)
    if cfg.sweep.include_resonant is not False:
        lams += [x for x in resonant_lambdas(4) if x not in lams]
    return lams


def _exp_scan(cfg, threads):
    bump = make_bump(cfg.strip.a, cfg.strip.b, cfg.grid.K, n_quad=cfg.bump.n_quad)
    lams = scan_lambdas(cfg)
    kappa = cfg.sweep.weak_kappa
    rows = [r for chunk in _pool_map(lambda lam: lambda_scan(bump, cfg.grid.K, cfg.T, [lam], kappa),
                                     lams, threads) for r in chunk]
    base = next(r.min_eig for r in rows if r.lam == 0.0) if any(r.lam == 0.0 for r in rows) else None
    worst = min(rows, key=lambda r: r.min_eig)
    metrics = {"min_eig_inf": worst.min_eig, "argmin_lambda": worst.lam,
               "min_eig_lambda0": base, "all_positive": all(r.min_eig > 0 for r in rows)}
    if base:
        metrics["ratio_to_lambda0"] = worst.min_eig / base
    return {"scan_lambda.csv": scan_csv(rows)}, metrics


def _exp_ingham(cfg, threads):
    freqs = cfg.sweep.freqs or [float(k ** 3) for k in range(1, 7)]
    rep = ingham_estimate(sorted(freqs), cfg.T)
    rng = np.random.default_rng(cfg.seed)
    n_vec = cfg.sweep.n_vectors or 100
    vecs = rng.standard_normal((n_vec, len(freqs))) + 1j * rng.standard_normal((n_vec, len(freqs)))
    lower, upper = ingham_sandwich(rep, vecs)
    metrics = {"gamma": rep.gamma, "C1": rep.C1, "C2": rep.C2,
               "sandwich_worst_lower": lower, "sandwich_worst_upper": upper}
    return {"ingham.csv": ingham_csv([rep])}, metrics


def _exp_counterexample(cfg, threads):
    alpha = cfg.sweep.alpha if cfg.sweep.alpha is not None else 1.0
    n_list = cfg.sweep.n_list or [4, 8, 16, 32, 64]
    rows = _pool_map(lambda n: observability_quotient([n], cfg.T, alpha, B=cfg.sweep.B,
                                                      b_small=cfg.sweep.b_small)[0], n_list, threads)
    metrics = {
        "alpha": alpha, "Q": [r.Q for r in rows],
        "mass_ratio": [r.mass / gaussian_l2(r.eps) for r in rows],
        "Q_vertical": [r.Q_vertical for r in rows],
    }
    if len(rows) >= 2:
        metrics["Q_slope_in_h"] = quotient_slope(rows)
        metrics["sup_slope_in_eps"] = sup_slope(rows)
    return {"counterexample.csv": quotient_csv(rows)}, metrics


def _exp_nonlinear(cfg, threads):
    grid = ModeGrid2D(cfg.grid.K, cfg.grid.L)
    bump = make_bump(cfg.strip.a, cfg.strip.b, cfg.grid.K, n_quad=cfg.bump.n_quad)
    s = cfg.solver
    params = SolverParams(s.dt, s.dealias, s.max_picard, s.picard_tol, s.R)
    norm = cfg.sweep.data_norm or s.R
    rng = np.random.default_rng(cfg.seed)
    u0 = random_spectrum(grid, rng, norm=norm)
    u1 = random_spectrum(grid, rng, norm=norm)
    try:
        res = picard_steer(u0, u1, cfg.T, params, bump)
    except ContractionError as exc:
        files = {"picard.csv": _table(["iteration", "distance"], list(enumerate(map(float, exc.history), 1)))}
        raise _PartialFailure(exc, files, {"picard_history": exc.history}) from exc
    snaps = cfg.sweep.snapshots if cfg.sweep.snapshots is not None else [0.0, cfg.T / 2, cfg.T]
    files = {
        "picard.csv": _table(["iteration", "distance"], list(enumerate(map(float, res.history), 1))),
        "trajectory.csv": res.trajectory.to_csv(snapshot_times=snaps),
    }
    metrics = {"picard_history": list(res.history), "final_residual": res.miss,
               "dt": s.dt, "dealias": s.dealias, "warnings": list(res.trajectory.warnings)}
    return files, metrics


def _exp_transit(cfg, threads):
    lams = cfg.sweep.lambdas if cfg.sweep.lambdas is not None else [float(i) for i in range(51)]
    rows = transit_report(cfg.strip.a, cfg.strip.b, lams, cfg.grid.K)
    return {"transit.csv": transit_csv(rows)}, {"t_max_max": max(r[2] for r in rows)}


def _exp_selftest(cfg, threads):
    rows = run_selftest()
    text = _table(["module", "check", "passed"], [(m, c, "true" if ok else "false") for m, c, ok, _ in rows])
    failed = [f"{m}: {c} {e}".strip() for m, c, ok, e in rows if not ok]
    metrics = {"checks": len(rows), "failed": failed}
    if failed:
        raise _PartialFailure(NumericalRegimeError(f"{len(failed)} selftest check(s) failed"),
                              {"selftest.csv": text}, metrics)
    return {"selftest.csv": text}, metrics


EXPERIMENT_FUNCS = {
    "hum": _exp_hum, "scan-lambda": _exp_scan, "ingham": _exp_ingham,
    "counterexample": _exp_counterexample, "nonlinear-steer": _exp_nonlinear,
    "transit": _exp_transit, "selftest": _exp_selftest,
}


class _PartialFailure(Exception):
    def __init__(self, error, files, metrics):
        super().__init__(str(error))
        self.error = error
        self.files = files
        self.metrics = metrics


# --------------------------------------------------------------------------
# writing


def _atomic_write(path, text):
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out_dir, manifest):
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, threads=1, output_dir=None):
    """Run one experiment, write its CSVs and manifest, return ``(exit_code, manifest)``."""
    out_dir = output_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    files, metrics, error, code = {}, {}, None, EXIT_OK
    try:
        files, metrics = EXPERIMENT_FUNCS[cfg.experiment](cfg, max(1, int(threads)))
    except _PartialFailure as exc:
        files, metrics = exc.files, exc.metrics
        error = str(exc.error)
        code = EXIT_CONFIG if isinstance(exc.error, (ConfigurationError, DomainError)) else EXIT_NUMERICAL
    except (ConfigurationError, DomainError) as exc:
        error, code = str(exc), EXIT_CONFIG
    except NumericalRegimeError as exc:
        error, code = str(exc), EXIT_NUMERICAL
    for name in sorted(files):
        _atomic_write(os.path.join(out_dir, name), files[name])
    manifest = {
        "config": cfg.model_dump(),
        "library": "kplab", "version": __version__, "backend": kernels.backend(),
        "seed": cfg.seed, "threads": int(threads),
        "wall_clock_s": time.perf_counter() - start,
        "status": "ok" if code == EXIT_OK else "error",
        "exit_code": code, "error": error,
        "metrics": metrics, "outputs": sorted(files),
    }
    write_manifest(out_dir, manifest)
    return code, manifest
