"""Command-line interface: estimate, benchmark, timing, list-estimators.

Exit codes: 0 success, 1 usage or parse error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import bench
from .constraints import DEFAULT_FAMILIES, box_spec_for
from .estimators import (
    estimate_eig,
    estimate_frob,
    estimate_pgd,
    estimate_pls,
    tune_box_family,
    tune_order,
    white_noise_report,
)
from .likelihood import SampleSet
from .toeplitz import NotPositiveDefiniteError, UnstableARError

USAGE_ERROR = 1
NUMERIC_ERROR = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="toepcov", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="fit one estimator to a CSV of samples")
    est.add_argument("--input", required=True, help="CSV file, one sample per row")
    est.add_argument("--estimator", required=True)
    est.add_argument("--order", default="auto", help="'auto' for BIC tuning or a fixed integer")
    est.add_argument("--icm", action="store_true", help="include the dense precision estimate")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--out", default=None, help="report path (stdout when omitted)")

    run = sub.add_parser("benchmark", help="run a config-driven Monte Carlo benchmark")
    run.add_argument("--config", required=True)
    run.add_argument("--runs", type=int, default=None, help="override the configured run count")
    run.add_argument("--seed", type=int, default=None, help="override the configured base seed")
    run.add_argument("--out", default="bench-out")
    run.add_argument("--svg", action="store_true")

    tim = sub.add_parser("timing", help="measure per-estimate wall time across dimensions")
    tim.add_argument("--config", default=None, help="optional config with a [timing] section")
    tim.add_argument("--runs", type=int, default=5, help="repetitions per measurement")
    tim.add_argument("--seed", type=int, default=2024)
    tim.add_argument("--out", default="timing.csv")

    sub.add_parser("list-estimators", help="print the estimator registry")
    return parser


def _read_samples(path: str) -> np.ndarray:
    rows = []
    width = None
    try:
        handle = open(path)
    except OSError as exc:
        raise _UsageError(f"cannot open {path}: {exc}")
    with handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                if not rows and width is None:
                    width = len(parts)  # header row
                    continue
                raise _UsageError(f"{path}:{lineno}: non-numeric value")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise _UsageError(f"{path}:{lineno}: expected {width} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise _UsageError(f"{path}: no samples found")
    return np.asarray(rows)


def _fit_gs(name, ctx, order_arg):
    if order_arg == "auto":
        if name == "pgd":
            return tune_box_family(lambda spec: (lambda c, w: estimate_pgd(c, spec, w)), ctx)
        if name == "pls":
            return tune_box_family(lambda spec: (lambda c, w: estimate_pls(c, spec, order=w)), ctx)
        if name == "frob":
            return tune_order(lambda c, w: estimate_frob(c, order=w), ctx)
        return tune_order(lambda c, w: estimate_eig(c, order=w), ctx)
    order = int(order_arg)
    if order == 0:
        return white_noise_report(ctx)
    if name in ("pgd", "pls"):
        best = None
        for family in DEFAULT_FAMILIES:
            spec = box_spec_for(family, ctx.p)
            rep = (
                estimate_pgd(ctx, spec, order)
                if name == "pgd"
                else estimate_pls(ctx, spec, order)
            )
            if best is None or rep.loglik > best.loglik:
                best = rep
        return best
    if name == "frob":
        return estimate_frob(ctx, order=order)
    return estimate_eig(ctx, order=order)


def _cmd_estimate(args) -> int:
    name = args.estimator
    if name not in bench.ESTIMATORS:
        raise _UsageError(
            f"unknown estimator {name!r}; see `toepcov list-estimators`"
        )
    info = bench.ESTIMATORS[name]
    if args.icm and not info.supports_icm:
        raise _UsageError(
            f"estimator {name!r} does not guarantee an invertible estimate; "
            "--icm is unavailable"
        )
    samples = _read_samples(args.input)
    data = SampleSet(samples)
    if args.order != "auto":
        try:
            int(args.order)
        except ValueError:
            raise _UsageError(f"--order must be 'auto' or an integer, got {args.order!r}")
    report = {
        "estimator": name,
        "alpha0": None,
        "alpha": None,
        "order": None,
        "family_id": None,
        "loglik": None,
        "nmse_c": None,
        "nmse_icm": None,
        "iterations": None,
        "converged": None,
        "wall_ms": None,
        "cm_first_col": None,
    }
    start = time.perf_counter()
    if info.kind == "proposed":
        if args.order == "auto" and data.n < 2:
            raise _UsageError("--order auto needs at least two samples for the BIC score")
        ctx = data.context()
        fit = _fit_gs(name, ctx, args.order)
        report.update(
            alpha0=fit.alpha.alpha0,
            alpha=fit.alpha.alpha_rest.tolist(),
            order=fit.order,
            family_id=fit.family_id,
            loglik=fit.loglik,
            iterations=fit.iterations,
            converged=fit.converged,
            cm_first_col=fit.cm().first_col.tolist(),
        )
        if args.icm:
            report["icm_dense"] = fit.icm_dense().tolist()
    else:
        cm, icm, meta = bench._fit_for_benchmark(name, data)
        report["cm_first_col"] = np.asarray(cm)[:, 0].tolist()
        report["order"] = meta.get("mask_k")
        if args.icm and icm is not None:
            report["icm_dense"] = np.asarray(icm).tolist()
    report["wall_ms"] = (time.perf_counter() - start) * 1e3
    text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_benchmark(args) -> int:
    try:
        with open(args.config) as handle:
            sections = bench.parse_config(handle.read())
        config = bench.config_from_sections(sections)
    except (OSError, ValueError) as exc:
        raise _UsageError(str(exc))
    if args.runs is not None or args.seed is not None:
        from dataclasses import replace

        config = replace(
            config,
            runs=args.runs if args.runs is not None else config.runs,
            seed=args.seed if args.seed is not None else config.seed,
        )
    rows = bench.run_benchmark(config, args.out, svg=args.svg)
    sys.stdout.write(f"wrote {len(rows)} aggregate rows to {args.out}/results.csv\n")
    return 0


def _cmd_timing(args) -> int:
    dims = (64, 128, 256)
    names = ("pgd", "pls", "banding", "em")
    reps = args.runs
    n = 64
    seed = args.seed
    if args.config:
        try:
            with open(args.config) as handle:
                sections = bench.parse_config(handle.read())
        except (OSError, ValueError) as exc:
            raise _UsageError(str(exc))
        timing = sections.get("timing", {})
        dims = tuple(int(d) for d in timing.get("dims", dims))
        names = tuple(timing.get("estimators", names))
        reps = int(timing.get("reps", reps))
        n = int(timing.get("sample_count", n))
        seed = int(timing.get("seed", seed))
    for name in names:
        if name not in bench.ESTIMATORS:
            raise _UsageError(f"unknown estimator {name!r}")
    rows = bench.timing_benchmark(dims, names, n=n, reps=reps, seed=seed)
    bench.write_timing_csv(rows, args.out)
    for row in rows:
        sys.stdout.write(
            f"{row['estimator']:>12s}  P={row['dim']:<5d} {row['median_ms']:10.3f} ms   {row['complexity']}\n"
        )
    return 0


def _cmd_list() -> int:
    sys.stdout.write(f"{'name':<14s}{'kind':<10s}{'icm':<5s}complexity\n")
    for name in sorted(bench.ESTIMATORS):
        info = bench.ESTIMATORS[name]
        sys.stdout.write(
            f"{name:<14s}{info.kind:<10s}{'yes' if info.supports_icm else 'no':<5s}{info.complexity}\n"
        )
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "benchmark":
            return _cmd_benchmark(args)
        if args.command == "timing":
            return _cmd_timing(args)
        return _cmd_list()
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR
    except (NotPositiveDefiniteError, UnstableARError, np.linalg.LinAlgError, RuntimeError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return NUMERIC_ERROR
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
