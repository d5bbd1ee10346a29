"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, parse_config
from .errors import FtsError, NumericalError
from .experiments import PRESETS, SWEEP_AXES, run_experiment, run_preset, run_sweep, write_artifacts
from .kernels import KernelParams, gain_row
from .pde import Grid
from .schedule import check_rapid_convergence, schedule_case1, schedule_case2, zeta

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _cmd_zeta(args) -> int:
    print(f"{zeta(args.p, args.tol):.17g}")
    return EXIT_OK


def _cmd_schedule(args) -> int:
    if args.case == "I":
        if args.p is None:
            raise argparse.ArgumentTypeError("--p is required for case I")
        sched = schedule_case1(args.p, args.lambda0, args.n_max)
    else:
        if args.T0 is None:
            raise argparse.ArgumentTypeError("--T0 is required for case II")
        sched = schedule_case2(args.T0, args.lambda0, args.n_max)
    rep = check_rapid_convergence(sched, args.gamma0)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("n", "t_n", "lambda_n", "s_n", "r_n", "q_n"))
    for n in range(sched.n_segments):
        writer.writerow((n, f"{sched.t[n]:.17g}", f"{sched.lam[n]:.17g}", f"{sched.s[n]:.17g}",
                         f"{rep.r[n]:.17g}", f"{rep.q[n]:.17g}"))
    last = sched.n_segments
    writer.writerow((last, f"{sched.t[last]:.17g}", "", f"{sched.s[last]:.17g}", "", ""))
    return EXIT_OK


def _cmd_kernel(args) -> int:
    row = gain_row(KernelParams(args.lam, args.a, args.c), Grid(args.N))
    if args.out:
        row.to_csv(args.out)
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(("y", "k1y"))
        for y, k in zip(row.grid.x, row.samples):
            writer.writerow((f"{y:.17g}", f"{k:.17g}"))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    result = run_experiment(cfg)
    out = Path(args.out or cfg.out_dir)
    paths = write_artifacts(result, out, Path(args.config).stem)
    print(paths["report_txt"].read_text(), end="")
    return EXIT_OK


def _cmd_preset(args) -> int:
    _, paths = run_preset(args.name, args.out)
    print(paths["report_txt"].read_text(), end="")
    return EXIT_OK


def _parse_values(axis: str, text: str) -> list:
    items = [v.strip() for v in text.split(",") if v.strip()]
    if axis in ("N", "n_max"):
        return [int(float(v)) for v in items]
    return [float(v) for v in items]


def _cmd_sweep(args) -> int:
    cfg: ExperimentConfig = parse_config(args.config)
    try:
        values = _parse_values(args.axis, args.values)
    except ValueError:
        print(f"error: cannot parse --values {args.values!r}", file=sys.stderr)
        return EXIT_VALIDATION
    out = args.out or str(Path(cfg.out_dir) / f"sweep_{args.axis}.csv")
    rows = run_sweep(cfg, args.axis, values, out, max_workers=args.workers)
    print(f"wrote {len(rows)} rows to {out}")
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        print(f"  {args.axis}={r['value']}: {r['status']}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parabolic-fts",
        description="Fixed-time / ISS boundary stabilization of 1-D parabolic equations.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zeta", help="evaluate the Riemann zeta function")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=_cmd_zeta)

    p = sub.add_parser("schedule", help="print a switching schedule as CSV")
    p.add_argument("--case", choices=("I", "II"), required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--T0", type=float)
    p.add_argument("--lambda0", type=float, default=3.5)
    p.add_argument("--n-max", dest="n_max", type=int, default=2)
    p.add_argument("--gamma0", type=float, default=1.0)
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("kernel", help="export the boundary gain k(1, y)")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--N", type=int, default=201)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_kernel)

    p = sub.add_parser("simulate", help="run one experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("preset", help="run a built-in experiment")
    p.add_argument("--name", required=True, help=", ".join(PRESETS))
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("sweep", help="sweep one parameter of a config")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated list")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FtsError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
