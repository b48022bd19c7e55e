"""Config-driven Monte Carlo benchmark harness.

One dataset is drawn per (grid point, run) and shared by every estimator,
seeds are derived deterministically from the base seed and the cell
coordinates, and aggregation order is canonical, so results are bit-stable
across repeated and parallel invocations.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import baselines
from .constraints import DEFAULT_FAMILIES, box_spec_for
from .estimators import (
    PgdOptions,
    estimate_eig,
    estimate_frob,
    estimate_pgd,
    estimate_pls,
    tune_box_family,
    tune_order,
)
from .likelihood import LikelihoodContext, SampleSet
from .processes import ProcessSpec, nmse, sample, true_cm

__all__ = [
    "EstimatorInfo",
    "ESTIMATORS",
    "ExperimentConfig",
    "parse_config",
    "run_benchmark",
    "timing_benchmark",
    "worker_count",
]


@dataclass(frozen=True)
class EstimatorInfo:
    name: str
    kind: str  # "proposed" | "baseline"
    supports_icm: bool
    complexity: str
    min_samples: int = 1


ESTIMATORS = {
    info.name: info
    for info in (
        EstimatorInfo("scm", "baseline", False, "quadratic per entry pass"),
        EstimatorInfo("avg", "baseline", False, "quadratic (diagonal averages)"),
        EstimatorInfo("banding", "baseline", False, "linear in dim times bandwidth", 4),
        EstimatorInfo("tapering", "baseline", False, "linear in dim times bandwidth", 4),
        EstimatorInfo("circ", "baseline", True, "quadratic times log factor"),
        EstimatorInfo("em", "baseline", True, "cubic per iteration"),
        EstimatorInfo("shrink_avg", "baseline", False, "cubic (target build dominates)", 2),
        EstimatorInfo("shrink_const", "baseline", True, "quadratic", 2),
        EstimatorInfo("eig", "proposed", True, "cubic per iteration (small dims)", 2),
        EstimatorInfo("frob", "proposed", True, "quadratic per iteration", 2),
        EstimatorInfo("pgd", "proposed", True, "quadratic per iteration", 2),
        EstimatorInfo("pls", "proposed", True, "linear plus cubic in the order", 2),
    )
}


def _pd_inverse(mat):
    chol = np.linalg.cholesky(mat)  # raises LinAlgError when not PD
    ident = np.eye(mat.shape[0])
    half = np.linalg.solve(chol, ident)
    return half.T.conj() @ half


def _fit_for_benchmark(name: str, sample_set: SampleSet):
    """Run one estimator with its benchmark hyperparameter policy.

    Returns ``(cm, icm_or_none, meta)``; raises on estimator failure.
    """
    info = ESTIMATORS[name]
    scm = sample_set.scm
    meta = {}
    if name == "scm":
        return scm, None, meta
    if name == "avg":
        return baselines.toeplitz_avg(scm).dense(), None, meta
    if name in ("banding", "tapering"):
        spec = baselines.cv_tune_mask(sample_set.samples, kind=name)
        meta["mask_k"] = spec.k
        return baselines.band_estimate(scm, spec).dense(), None, meta
    if name == "circ":
        cm = baselines.circulant_mle(scm)
        return cm, _pd_inverse(cm), meta
    if name == "em":
        cm = baselines.em_toeplitz(scm, g=2 * sample_set.p)
        return cm, _pd_inverse(cm), meta
    if name in ("shrink_avg", "shrink_const"):
        target = "avg" if name == "shrink_avg" else "const"
        rho = baselines.shrink_coefficient(scm, target, sample_set.samples)
        meta["rho"] = rho
        cm = baselines.shrink(scm, target, rho=rho)
        icm = _pd_inverse(cm) if info.supports_icm else None
        return cm, icm, meta
    ctx = sample_set.context()
    if name == "frob":
        report = tune_order(lambda c, w: estimate_frob(c, order=w), ctx)
    elif name == "eig":
        report = tune_order(lambda c, w: estimate_eig(c, order=w), ctx)
    elif name == "pgd":
        report = tune_box_family(
            lambda spec: (lambda c, w: estimate_pgd(c, spec, w)), ctx
        )
    elif name == "pls":
        report = tune_box_family(
            lambda spec: (lambda c, w: estimate_pls(c, spec, order=w)), ctx
        )
    else:
        raise ValueError(f"unknown estimator {name!r}")
    meta["order"] = report.order
    meta["family"] = report.family_id
    meta["loglik"] = report.loglik
    meta["iterations"] = report.iterations
    meta["converged"] = report.converged
    return report.cm().dense(), report.icm_dense(), meta


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    points: tuple
    sigma2: float
    dims: tuple
    sample_counts: tuple
    estimators: tuple
    runs: int = 500
    seed: int = 0
    cm_nmse: bool = True
    icm_nmse: bool = True

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ValueError(
                    f"unknown estimator {name!r}; known: {', '.join(sorted(ESTIMATORS))}"
                )

    def process_spec(self, point, p) -> ProcessSpec:
        if self.kind == "ar":
            return ProcessSpec("ar", p, a=point, sigma2=self.sigma2)
        if self.kind == "ma":
            return ProcessSpec("ma", p, b=point, sigma2=self.sigma2)
        if self.kind == "arma":
            return ProcessSpec("arma", p, a=point[:1], b=point[1:], sigma2=self.sigma2)
        return ProcessSpec("fbm", p, h=float(np.atleast_1d(point)[0]))


_CONFIG_SCHEMA = {
    "grid": {"dims", "sample_counts", "runs", "seed"},
    "process": {"kind", "sigma2", "points"},
    "estimators": {"names"},
    "outputs": {"cm_nmse", "icm_nmse"},
    "timing": {"dims", "estimators", "reps", "sample_count", "seed"},
}


def parse_config(text: str) -> dict:
    """Parse the sectioned key/value config format.

    Values use JSON syntax (numbers, strings, booleans, nested lists).
    Unknown sections or keys are hard errors.
    """
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _CONFIG_SCHEMA:
                raise ValueError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if current is None:
            raise ValueError(f"line {lineno}: key outside of any section")
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, rhs = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_SCHEMA[current]:
            raise ValueError(f"line {lineno}: unknown key {key!r} in section [{current}]")
        try:
            value = json.loads(rhs.strip())
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
        sections[current][key] = value
    return sections


def config_from_sections(sections: dict) -> ExperimentConfig:
    grid = sections.get("grid", {})
    process = sections.get("process", {})
    estimators = sections.get("estimators", {})
    outputs = sections.get("outputs", {})
    for required, where in (("dims", "grid"), ("sample_counts", "grid"),
                            ("kind", "process"), ("points", "process"),
                            ("names", "estimators")):
        if required not in sections.get(where, {}):
            raise ValueError(f"missing required key {required!r} in section [{where}]")
    points = tuple(
        tuple(np.atleast_1d(pt).tolist()) for pt in process["points"]
    )
    return ExperimentConfig(
        kind=process["kind"],
        points=points,
        sigma2=float(process.get("sigma2", 1.0)),
        dims=tuple(int(d) for d in grid["dims"]),
        sample_counts=tuple(int(n) for n in grid["sample_counts"]),
        estimators=tuple(estimators["names"]),
        runs=int(grid.get("runs", 500)),
        seed=int(grid.get("seed", 0)),
        cm_nmse=bool(outputs.get("cm_nmse", True)),
        icm_nmse=bool(outputs.get("icm_nmse", True)),
    )


def derive_seed(base: int, point, p: int, n: int, run: int) -> int:
    key = f"{point!r}|{p}|{n}|{run}".encode()
    digest = hashlib.sha256(key).digest()
    return (base ^ int.from_bytes(digest[:8], "big")) & 0x7FFFFFFFFFFFFFFF


def _run_cell(config: ExperimentConfig, point, p: int, n: int, run: int):
    """All estimators on one shared dataset; returns per-estimator records."""
    spec = config.process_spec(point, p)
    seed = derive_seed(config.seed, point, p, n, run)
    data = sample(spec, n, seed)
    truth_cm = true_cm(spec).dense()
    truth_icm = _pd_inverse(truth_cm)
    records = []
    for name in config.estimators:
        rec = {"estimator": name, "run": run}
        start = time.perf_counter()
        try:
            cm, icm, meta = _fit_for_benchmark(name, data)
            rec["wall_ms"] = (time.perf_counter() - start) * 1e3
            rec.update(meta)
            if config.cm_nmse:
                rec["nmse_c"] = nmse(cm, truth_cm)
            if config.icm_nmse and ESTIMATORS[name].supports_icm and icm is not None:
                rec["nmse_icm"] = nmse(icm, truth_icm)
        except Exception as exc:  # failed cell: recorded, never silently dropped
            rec["wall_ms"] = (time.perf_counter() - start) * 1e3
            rec["error"] = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    return records


def worker_count() -> int:
    raw = os.environ.get("TOEPCOV_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return None, None
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, se


def _hist(values):
    out: dict = {}
    for v in values:
        key = str(v)
        out[key] = out.get(key, 0) + 1
    return dict(sorted(out.items()))


def _fmt(x):
    if x is None:
        return ""
    return f"{x:.10g}"


def run_benchmark(config: ExperimentConfig, out_dir: str, svg: bool = False, workers: int | None = None):
    """Execute the full grid and write results.csv / results.json.

    Returns the aggregated rows.  Output files contain no timestamps, so
    identical configs produce identical bytes.
    """
    os.makedirs(out_dir, exist_ok=True)
    cells = [
        (pi, point, di, p, ni, n)
        for pi, point in enumerate(config.points)
        for di, p in enumerate(config.dims)
        for ni, n in enumerate(config.sample_counts)
    ]
    tasks = [(cell, run) for cell in cells for run in range(config.runs)]
    workers = worker_count() if workers is None else max(1, workers)
    results: dict = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {}
            for cell, run in tasks:
                pi, point, di, p, ni, n = cell
                futs[(cell, run)] = pool.submit(_run_cell, config, point, p, n, run)
            for key, fut in futs.items():
                results[key] = fut.result()
    else:
        for cell, run in tasks:
            pi, point, di, p, ni, n = cell
            results[(cell, run)] = _run_cell(config, point, p, n, run)

    rows = []
    detail = []
    for cell in cells:
        pi, point, di, p, ni, n = cell
        per_run = [results[(cell, run)] for run in range(config.runs)]
        for name in config.estimators:
            recs = [
                rec for run_recs in per_run for rec in run_recs if rec["estimator"] == name
            ]
            ok = [r for r in recs if "error" not in r]
            nc = [r["nmse_c"] for r in ok if "nmse_c" in r]
            ni_vals = [r["nmse_icm"] for r in ok if "nmse_icm" in r]
            nc_mean, nc_se = _mean_se(nc)
            icm_mean, icm_se = _mean_se(ni_vals)
            row = {
                "process": config.kind,
                "point": json.dumps(list(point)),
                "dim": p,
                "samples": n,
                "estimator": name,
                "runs": config.runs,
                "failures": len(recs) - len(ok),
                "nmse_c_count": len(nc),
                "nmse_c_mean": nc_mean,
                "nmse_c_se": nc_se,
                "nmse_icm_count": len(ni_vals),
                "nmse_icm_mean": icm_mean,
                "nmse_icm_se": icm_se,
                "order_hist": _hist(r["order"] for r in ok if "order" in r),
                "family_hist": _hist(r["family"] for r in ok if "family" in r),
                "mask_hist": _hist(r["mask_k"] for r in ok if "mask_k" in r),
            }
            rows.append(row)
            detail.append(
                {
                    "process": config.kind,
                    "point": list(point),
                    "dim": p,
                    "samples": n,
                    "estimator": name,
                    "records": recs,
                }
            )

    # Wall times live in results.json only: the CSV is byte-deterministic.
    csv_path = os.path.join(out_dir, "results.csv")
    fields = [
        "process", "point", "dim", "samples", "estimator", "runs", "failures",
        "nmse_c_count", "nmse_c_mean", "nmse_c_se",
        "nmse_icm_count", "nmse_icm_mean", "nmse_icm_se",
        "order_hist", "family_hist", "mask_hist",
    ]
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(fields)
        for row in rows:
            writer.writerow(
                [
                    row[f] if f in ("process", "point", "dim", "samples", "estimator", "runs",
                                    "failures", "nmse_c_count", "nmse_icm_count")
                    else (json.dumps(row[f]) if f.endswith("_hist") else _fmt(row[f]))
                    for f in fields
                ]
            )
    json_path = os.path.join(out_dir, "results.json")
    with open(json_path, "w") as handle:
        json.dump({"config": _config_dict(config), "cells": detail}, handle, indent=1, sort_keys=True)
        handle.write("\n")
    if svg:
        _write_svg(config, rows, out_dir)
    return rows


def _config_dict(config: ExperimentConfig) -> dict:
    return {
        "kind": config.kind,
        "points": [list(pt) for pt in config.points],
        "sigma2": config.sigma2,
        "dims": list(config.dims),
        "sample_counts": list(config.sample_counts),
        "estimators": list(config.estimators),
        "runs": config.runs,
        "seed": config.seed,
        "cm_nmse": config.cm_nmse,
        "icm_nmse": config.icm_nmse,
    }


def _sweep_axis(config: ExperimentConfig):
    if len(config.points) > 1:
        return "point", [float(np.atleast_1d(pt)[0]) for pt in config.points]
    if len(config.sample_counts) > 1:
        return "samples", list(config.sample_counts)
    if len(config.dims) > 1:
        return "dim", list(config.dims)
    return "point", [0.0]


def _write_svg(config: ExperimentConfig, rows, out_dir):
    from .svg import line_chart

    axis, xs = _sweep_axis(config)
    for metric in ("nmse_c_mean", "nmse_icm_mean"):
        series = []
        for name in config.estimators:
            ys = []
            for x_idx in range(len(xs)):
                sub = [
                    r for r in rows
                    if r["estimator"] == name and _axis_index(config, r, axis) == x_idx
                ]
                ys.append(sub[0][metric] if sub and sub[0][metric] is not None else None)
            if any(y is not None for y in ys):
                series.append((name, xs, ys))
        if series:
            label = "covariance NMSE" if metric == "nmse_c_mean" else "precision NMSE"
            line_chart(
                series,
                os.path.join(out_dir, f"{metric}.svg"),
                title=f"{config.kind} sweep",
                xlabel=axis,
                ylabel=label,
            )


def _axis_index(config, row, axis):
    if axis == "point":
        return [json.dumps(list(pt)) for pt in config.points].index(row["point"])
    if axis == "samples":
        return list(config.sample_counts).index(row["samples"])
    return list(config.dims).index(row["dim"])


# -- timing ------------------------------------------------------------------

#: Hyperparameters pinned for timing: bandwidth and AR order fixed to 6.
TIMING_PIN = 6


def _timed_fit(name: str, scm, sample_set: SampleSet, box_cache: dict):
    p = scm.shape[0]
    if name == "scm":
        return lambda: scm
    if name == "avg":
        return lambda: baselines.toeplitz_avg(scm)
    if name in ("banding", "tapering"):
        spec = baselines.MaskSpec(name, TIMING_PIN)
        return lambda: baselines.band_estimate(scm, spec)
    if name == "circ":
        return lambda: baselines.circulant_mle(scm)
    if name == "em":
        return lambda: baselines.em_toeplitz(scm, g=2 * p)
    if name == "shrink_avg":
        return lambda: baselines.shrink(scm, "avg", samples=sample_set.samples)
    if name == "shrink_const":
        return lambda: baselines.shrink(scm, "const", samples=sample_set.samples)
    if name in ("pgd", "pls"):
        spec = box_cache.setdefault(p, box_spec_for(DEFAULT_FAMILIES[1], p))
        if name == "pgd":
            # fixed iteration budget: the iteration count is a data-dependent
            # prefactor in the complexity bound, like the pinned bandwidth
            opts = PgdOptions(max_iter=40, rel_tol=0.0, stat_tol=float("inf"))
            return lambda: estimate_pgd(LikelihoodContext(scm, sample_set.n), spec, TIMING_PIN, opts)
        return lambda: estimate_pls(
            LikelihoodContext(scm, sample_set.n), spec, TIMING_PIN, with_loglik=False
        )
    if name == "frob":
        return lambda: estimate_frob(LikelihoodContext(scm, sample_set.n), order=TIMING_PIN)
    if name == "eig":
        return lambda: estimate_eig(LikelihoodContext(scm, sample_set.n), order=TIMING_PIN)
    raise ValueError(f"unknown estimator {name!r}")


def timing_benchmark(dims, estimator_names, n: int = 64, reps: int = 5, seed: int = 2024):
    """Median wall time of one estimate per estimator and dimension.

    Hyperparameter tuning and the sample covariance computation are outside
    the timed region; bandwidth and order are pinned.
    """
    spec_params = {"a": (0.7,), "b": (0.3,), "sigma2": 0.64}
    rows = []
    box_cache: dict = {}
    for p in dims:
        process = ProcessSpec("arma", p, **spec_params)
        data = sample(process, n, derive_seed(seed, ("timing",), p, n, 0))
        scm = data.scm
        for name in estimator_names:
            fit = _timed_fit(name, scm, data, box_cache)
            fit()  # warm-up outside the timed region
            times = []
            for _ in range(reps):
                start = time.perf_counter()
                fit()
                times.append((time.perf_counter() - start) * 1e3)
            rows.append(
                {
                    "estimator": name,
                    "dim": p,
                    "median_ms": float(np.median(times)),
                    "complexity": ESTIMATORS[name].complexity,
                }
            )
    return rows


def write_timing_csv(rows, path):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["estimator", "dim", "median_ms", "complexity"])
        for row in rows:
            writer.writerow(
                [row["estimator"], row["dim"], _fmt(row["median_ms"]), row["complexity"]]
            )
