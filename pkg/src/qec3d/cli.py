"""Command-line entry point: sweeps, threshold fits, collapse tables, fixtures.

Subcommands::

    qec3d run --config cfg.json --out DIR [--threads N] [--seed S]
    qec3d fit CSV [CSV ...] --out fit.json [--window LO HI]
    qec3d collapse --csv CSV [CSV ...] --fit fit.json --out collapse.csv
    qec3d fixtures NAME [--L N] [--out FILE]

`run` writes one curve CSV per lattice size (L<size>.csv, header p,pfail,err)
plus correlations.csv with the 8-bin logical-error histogram.  Reruns with
the same config and seed overwrite byte-identical files for any thread
count.  All probabilities are fractions, never percentages; the master seed
is a decimal 64-bit integer.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from qec3d.experiment import (
    correlation_csv_text,
    curve_csv_text,
    load_sweep_config,
    run_sweep,
)
from qec3d.fixtures import FIXTURES, fixture_error
from qec3d.geometry import build_lattice
from qec3d.scaling import (
    collapse_csv_text,
    fit_threshold,
    read_curve_csvs,
    scaling_collapse,
    write_fit_json,
)


def _default_threads() -> int:
    env = os.environ.get("QEC3D_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SystemExit(f"QEC3D_THREADS must be an integer, got {env!r}")
    return 1


def _cmd_run(args) -> int:
    sweep = load_sweep_config(args.config)
    if args.seed is not None:
        sweep = replace(sweep, seed=args.seed)
    threads = args.threads if args.threads is not None else _default_threads()
    results = run_sweep(sweep, threads=threads)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    hist_total = np.zeros(8, dtype=np.int64)
    for L in sorted({r.L for r in results}):
        per_l = [r for r in results if r.L == L]
        (outdir / f"L{L}.csv").write_text(curve_csv_text(per_l))
    for r in results:
        hist_total += np.asarray(r.histogram, dtype=np.int64)
    (outdir / "correlations.csv").write_text(correlation_csv_text(hist_total))
    print(f"wrote {len({r.L for r in results})} curve files and correlations.csv "
          f"to {outdir}")
    return 0


def _cmd_fit(args) -> int:
    data = read_curve_csvs(args.csvs)
    window = tuple(args.window) if args.window else None
    fit = fit_threshold(data, p_window=window)
    write_fit_json(fit, args.out)
    status = "converged" if fit.converged else "NOT CONVERGED"
    print(f"p_th={fit.p_th:.6g} +- {fit.p_th_err:.2g}, nu={fit.nu:.4g} "
          f"({status}); wrote {args.out}")
    return 0 if fit.converged else 1


def _cmd_collapse(args) -> int:
    import json

    data = read_curve_csvs(args.csv)
    from qec3d.scaling import FitResult

    fit = FitResult(**json.loads(Path(args.fit).read_text()))
    table = scaling_collapse(data, fit)
    Path(args.out).write_text(collapse_csv_text(table))
    print(f"wrote {args.out} ({table.shape[0]} rows)")
    return 0


def _cmd_fixtures(args) -> int:
    g = build_lattice(args.L)
    err = fixture_error(args.name, g)
    faces = np.flatnonzero(err)
    text = "\n".join(str(int(f)) for f in faces) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qec3d",
        description="3D toric code simulator: local decoders and threshold analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a Monte Carlo sweep from a JSON config")
    run_p.add_argument("--config", required=True, help="sweep config JSON path")
    run_p.add_argument("--out", required=True, help="output directory for CSVs")
    run_p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: QEC3D_THREADS or 1)")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config's master seed")
    run_p.set_defaults(func=_cmd_run)

    fit_p = sub.add_parser("fit", help="fit the finite-size-scaling ansatz")
    fit_p.add_argument("csvs", nargs="+", help="per-L curve CSVs (L<size>.csv)")
    fit_p.add_argument("--out", default="fit.json", help="output JSON path")
    fit_p.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"),
                       help="restrict the fit to this p range")
    fit_p.set_defaults(func=_cmd_fit)

    col_p = sub.add_parser("collapse", help="emit the rescaled collapse table")
    col_p.add_argument("--csv", nargs="+", required=True, help="per-L curve CSVs")
    col_p.add_argument("--fit", required=True, help="fit.json from the fit command")
    col_p.add_argument("--out", default="collapse.csv", help="output CSV path")
    col_p.set_defaults(func=_cmd_collapse)

    fix_p = sub.add_parser("fixtures", help="write a named error pattern as face ids")
    fix_p.add_argument("name", choices=sorted(FIXTURES), help="fixture name")
    fix_p.add_argument("--L", type=int, default=4, help="lattice size (default 4)")
    fix_p.add_argument("--out", default=None, help="output file (default stdout)")
    fix_p.set_defaults(func=_cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
