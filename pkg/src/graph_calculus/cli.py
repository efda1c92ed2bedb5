"""Command-line entry point.

Thin shell over the library: every number it emits comes from graph_core,
calculus, manifolds, convergence, or verification. Exit codes: 0 success,
1 configuration/usage errors, 2 when sweep cells failed numerically.
Logging level comes from GRAPH_CALCULUS_LOG (quiet|info|debug).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calculus import divergence, gradient, laplacian_apply, laplacian_matrix
from .convergence import (
    ExperimentSpec,
    degree_check,
    fit_rate_xy,
    sweep,
)
from .csvio import (
    format_float,
    read_matrix_csv,
    read_results_csv,
    read_vector_csv,
    results_csv_text,
    write_matrix_csv,
    write_text_atomic,
    write_vector_csv,
)
from .graph_core import KernelConfig, PointCloud, build_weights, degrees
from .manifolds import manifold_names, registry_payload
from .verification import VERIFY_MAX_N, run_invariant_suite

log = logging.getLogger("graph_calculus.cli")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CELL_FAILURES = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; the exit-code taxonomy
    # reserves 2 for numerical cell failures, so usage errors exit 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _configure_logging() -> None:
    level_name = os.environ.get("GRAPH_CALCULUS_LOG", "info").lower()
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        print(
            f"warning: GRAPH_CALCULUS_LOG={level_name!r} not in (quiet|info|debug); using info",
            file=sys.stderr,
        )
        level_name = "info"
    logging.basicConfig(
        level=levels[level_name], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="graph-calculus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute an experiment spec file")
    run.add_argument("--config", required=True, help="experiment spec JSON")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--parallelism", type=int, default=1, metavar="K")
    run.add_argument("--seed", type=int, default=None, help="override master_seed")
    run.add_argument("--mode", choices=("dense", "sparse"), default=None)
    run.add_argument("--tau", type=float, default=None, help="sparse truncation threshold")
    run.add_argument(
        "--timings",
        action="store_true",
        help="write measured wall_ms into results.csv (breaks byte-reproducibility)",
    )

    verify = sub.add_parser(
        "verify", help="run the exact-algebra invariant suite"
    )
    verify.add_argument("--n", type=int, default=100)
    verify.add_argument("--seeds", type=int, default=5)

    deg = sub.add_parser(
        "degree-check", help="single-cell degree asymptotics check"
    )
    deg.add_argument("--manifold", required=True)
    deg.add_argument("--n", type=int, required=True)
    deg.add_argument("--epsilon", type=float, required=True)
    deg.add_argument("--seed", type=int, default=0)
    deg.add_argument("--sampling", choices=("random", "grid"), default="random")
    deg.add_argument("--tau", type=float, default=0.0)

    for name in ("grad", "div", "laplacian"):
        op = sub.add_parser(name, help=f"apply {name} to CSV inputs")
        op.add_argument("--cloud", required=True, help="point cloud CSV")
        op.add_argument("--epsilon", type=float, required=True)
        op.add_argument("--tau", type=float, default=0.0)
        op.add_argument("--out", required=True, help="output CSV")
        if name == "div":
            op.add_argument("--field", required=True, help="edge field CSV (N x N, row-major)")
        elif name == "grad":
            op.add_argument("--function", required=True, help="vertex function CSV (one value per line)")
        else:
            op.add_argument("--function", default=None)
            op.add_argument(
                "--matrix", action="store_true", help="export the Laplacian matrix instead"
            )

    sub.add_parser("list-manifolds", help="emit the manifold registry as JSON")
    lf = sub.add_parser("list-functions", help="emit test-function ids as JSON")
    lf.add_argument("--manifold", default=None)

    plot = sub.add_parser(
        "plot-data", help="reshape a results CSV into per-curve series"
    )
    plot.add_argument("--results", required=True)
    plot.add_argument("--x", required=True, dest="x_axis")
    plot.add_argument("--y", required=True, dest="y_column")
    plot.add_argument("--group-by", required=True, dest="group_by")
    plot.add_argument("--out", required=True, help="output directory")
    return parser


# ----------------------------------------------------------------------
# run


def _summary_rate_fits(rows, spec) -> list[dict]:
    fits = []
    responses = ["err_rel_median", f"err_abs_{spec.interior_statistic}"]
    for swept, group in (("N", "epsilon"), ("epsilon", "N")):
        key = (lambda r: r.epsilon) if group == "epsilon" else (lambda r: r.n)
        axis = (lambda r: r.n) if swept == "N" else (lambda r: r.epsilon)
        for response in dict.fromkeys(responses):
            for gval in sorted({key(r) for r in rows}):
                grp = [r for r in rows if key(r) == gval]
                xs = [axis(r) for r in grp]
                ys = [getattr(r, response) for r in grp]
                if len(set(xs)) < 3 or any(y <= 0 for y in ys):
                    continue
                fit = fit_rate_xy(xs, ys, axis=swept)
                fits.append(
                    {
                        "swept_axis": swept,
                        "group_by": group,
                        "group_value": gval,
                        "response": response,
                        "slope": fit.slope,
                        "intercept": fit.intercept,
                        "r_squared": fit.r_squared,
                    }
                )
    return fits


def _cmd_run(args) -> int:
    config = Path(args.config)
    if not config.is_file():
        print(f"error: config file not found: {config}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        spec = ExperimentSpec.from_json(config)
        spec = spec.with_overrides(master_seed=args.seed, mode=args.mode, tau=args.tau)
    except ValueError as exc:
        print(f"error: invalid experiment spec: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {out_dir} ({exc})", file=sys.stderr)
        return EXIT_CONFIG

    result = sweep(spec, parallelism=max(1, args.parallelism))
    csv_text = results_csv_text(result.rows, include_timings=args.timings)
    write_text_atomic(out_dir / "results.csv", csv_text)

    summary = {
        "spec": spec.to_dict(),
        "package_version": __version__,
        "n_cells": len(result.rows) + len(result.failures),
        "n_failed": len(result.failures),
        "failures": [
            {"N": f.n, "epsilon": f.epsilon, "trial": f.trial, "seed": f.seed, "message": f.message}
            for f in result.failures
        ],
        "cells": [
            {
                "N": r.n,
                "epsilon": r.epsilon,
                "trial": r.trial,
                "seed": r.seed,
                "regime": r.regime,
                "wall_ms": r.wall_ms,
            }
            for r in result.rows
        ],
        "rate_fits": _summary_rate_fits(result.rows, spec),
        "total_wall_ms": sum(r.wall_ms for r in result.rows),
        "results_csv_sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
    }
    write_text_atomic(out_dir / "summary.json", json.dumps(summary, indent=2) + "\n")
    log.info(
        "wrote %s (%d rows) and summary.json", out_dir / "results.csv", len(result.rows)
    )
    if result.failures:
        print(f"{len(result.failures)} cell(s) failed; see summary.json", file=sys.stderr)
        return EXIT_CELL_FAILURES
    return EXIT_OK


# ----------------------------------------------------------------------
# verify / degree-check


def _cmd_verify(args) -> int:
    if args.n > VERIFY_MAX_N:
        print(f"error: verify runs dense; --n must be <= {VERIFY_MAX_N}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        reports = run_invariant_suite(n=args.n, n_seeds=args.seeds)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    all_ok = True
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        all_ok &= rep.passed
        print(
            f"{status}  {rep.name:<26} worst residual {rep.worst_residual:.3e} "
            f"(tolerance {rep.tolerance:.0e})"
        )
    return EXIT_OK if all_ok else EXIT_CELL_FAILURES


def _cmd_degree_check(args) -> int:
    try:
        res = degree_check(
            args.manifold,
            args.n,
            args.epsilon,
            seed=args.seed,
            sampling=args.sampling,
            tau=args.tau,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    payload = {
        "manifold": res.manifold,
        "N": res.n,
        "epsilon": res.epsilon,
        "seed": res.seed,
        "sampling": res.sampling,
        "ratio_mean": res.stats.ratio_mean,
        "ratio_dev": res.stats.ratio_dev,
        "residual_mean": res.stats.residual_mean,
        "residual_dev": res.stats.residual_dev,
        "curvature_prediction_mean": res.stats.prediction_mean,
        "self_loop_share": res.stats.self_loop_share,
        "regime": res.regime,
        "low_neighbor_warning": res.low_neighbor_warning,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


# ----------------------------------------------------------------------
# operator commands


def _load_graph(args):
    cloud = PointCloud.from_csv(args.cloud)
    kernel = KernelConfig(epsilon=args.epsilon, truncation_tau=args.tau)
    w = build_weights(cloud, kernel)
    return w, degrees(w)


def _cmd_operator(args) -> int:
    try:
        w, d = _load_graph(args)
        if args.command == "grad":
            f = read_vector_csv(args.function)
            out = gradient(f, w, d)
            write_matrix_csv(args.out, out)
        elif args.command == "div":
            field = read_matrix_csv(args.field)
            write_vector_csv(args.out, divergence(field, w, d))
        else:
            if args.matrix:
                write_matrix_csv(args.out, laplacian_matrix(w, d))
            elif args.function is None:
                print(
                    "error: laplacian needs --function (or --matrix for the matrix export)",
                    file=sys.stderr,
                )
                return EXIT_CONFIG
            else:
                f = read_vector_csv(args.function)
                write_vector_csv(args.out, laplacian_apply(f, w, d))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


# ----------------------------------------------------------------------
# listings and plot data


def _cmd_list_manifolds(_args) -> int:
    print(json.dumps(registry_payload(), indent=2))
    return EXIT_OK


def _cmd_list_functions(args) -> int:
    payload = registry_payload()
    if args.manifold is not None:
        if args.manifold not in manifold_names():
            print(
                f"error: unknown manifold id {args.manifold!r}; "
                f"valid ids: {', '.join(manifold_names())}",
                file=sys.stderr,
            )
            return EXIT_CONFIG
        payload = [m for m in payload if m["id"] == args.manifold]
    print(json.dumps([{"manifold": m["id"], "functions": m["functions"]} for m in payload], indent=2))
    return EXIT_OK


def _cmd_plot_data(args) -> int:
    results = Path(args.results)
    if not results.is_file():
        print(f"error: results file not found: {results}", file=sys.stderr)
        return EXIT_CONFIG
    rows = read_results_csv(results)
    if not rows:
        print("error: results CSV has no data rows", file=sys.stderr)
        return EXIT_CONFIG
    columns = list(rows[0])
    for col in (args.x_axis, args.y_column, args.group_by):
        if col not in columns:
            print(
                f"error: unknown column {col!r}; available: {', '.join(columns)}",
                file=sys.stderr,
            )
            return EXIT_CONFIG
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: output directory not writable: {out_dir} ({exc})", file=sys.stderr)
        return EXIT_CONFIG

    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(row[args.group_by], []).append(row)

    summary_lines = []
    for gval in sorted(groups):
        grp = sorted(groups[gval], key=lambda r: float(r[args.x_axis]))
        name = f"{args.y_column}_vs_{args.x_axis}__{args.group_by}_{gval}.csv"
        lines = [f"{args.x_axis},{args.y_column}"]
        lines += [f"{r[args.x_axis]},{r[args.y_column]}" for r in grp]
        write_text_atomic(out_dir / name, "\n".join(lines) + "\n")
        xs = np.array([float(r[args.x_axis]) for r in grp])
        ys = np.array([float(r[args.y_column]) for r in grp])
        try:
            fit = fit_rate_xy(xs, ys, axis=args.x_axis)
            summary_lines.append(
                f"{args.group_by}={gval}: slope={format_float(fit.slope)} "
                f"intercept={format_float(fit.intercept)} r_squared={format_float(fit.r_squared)}"
            )
        except ValueError as exc:
            summary_lines.append(f"{args.group_by}={gval}: no rate fit ({exc})")
    write_text_atomic(out_dir / "series_summary.txt", "\n".join(summary_lines) + "\n")
    print(f"wrote {len(groups)} series file(s) to {out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    _configure_logging()
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "verify":
        return _cmd_verify(args)
    if args.command == "degree-check":
        return _cmd_degree_check(args)
    if args.command in ("grad", "div", "laplacian"):
        return _cmd_operator(args)
    if args.command == "list-manifolds":
        return _cmd_list_manifolds(args)
    if args.command == "list-functions":
        return _cmd_list_functions(args)
    if args.command == "plot-data":
        return _cmd_plot_data(args)
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
