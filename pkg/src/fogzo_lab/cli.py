"""Command-line entry point.

    fogzo-lab run <experiment> --config cfg.txt [--seed S] [--out path.csv]
                  [--summary] [--plot] [--data-dir DIR]
    fogzo-lab verify kernels|oracle|all [--out path.csv] [--fresh-seed] [--plot]

Exit code is 0 only when every emitted pass flag is true.
"""

from __future__ import annotations

import argparse
import sys

from . import report
from .config import EXPERIMENTS, ExperimentConfig, load_config
from .experiments import (
    run_mlp_mnist,
    run_quadratic_oracle,
    run_sweep,
    run_toy1d,
    run_verify_kernels,
)
from .verification import (
    DEFAULT_SEED,
    check_kernels,
    check_quadratic_oracle,
    fresh_seed,
    run_all_checks,
    write_report_csv,
)

_RUNNERS = {
    "mlp-mnist": run_mlp_mnist,
    "toy1d": run_toy1d,
    "verify-kernels": run_verify_kernels,
    "quadratic-oracle": run_quadratic_oracle,
    "sweep": run_sweep,
}

_PLOTTERS = {
    "mlp-mnist": report.plot_training,
    "toy1d": report.plot_toy1d,
    "verify-kernels": report.plot_kernels,
    "quadratic-oracle": report.plot_quadratic,
    "sweep": report.plot_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogzo-lab")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment, emit CSV")
    run_p.add_argument("experiment", choices=EXPERIMENTS)
    run_p.add_argument("--config", help="flat key=value config file")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out", help="CSV output path")
    run_p.add_argument("--data-dir", help="directory with MNIST IDX files")
    run_p.add_argument("--summary", action="store_true",
                       help="print the final CSV row to stdout")
    run_p.add_argument("--plot", action="store_true",
                       help="also render a PNG figure next to the CSV")

    ver_p = sub.add_parser("verify", help="run the property-check suites")
    ver_p.add_argument("target", choices=["kernels", "oracle", "all"])
    ver_p.add_argument("--out", default="verify.csv")
    ver_p.add_argument("--fresh-seed", action="store_true",
                       help="use a time-based seed instead of the fixed CI seed")
    ver_p.add_argument("--plot", action="store_true")
    return parser


def _all_passed(rows: list[dict]) -> bool:
    return all(row["pass"] for row in rows if "pass" in row)


def _cmd_run(args) -> int:
    overrides = {"experiment": args.experiment}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_path"] = args.out
    if args.data_dir is not None:
        overrides["data_dir"] = args.data_dir
    if args.config:
        cfg = load_config(args.config, **overrides)
    else:
        cfg = ExperimentConfig(**overrides)

    rows = _RUNNERS[cfg.experiment](cfg)
    if args.plot:
        _PLOTTERS[cfg.experiment](rows, cfg.out_path)
    if args.summary and rows:
        last = rows[-1]
        print(", ".join(f"{k}={v}" for k, v in last.items() if v is not None))
    return 0 if _all_passed(rows) else 1


def _cmd_verify(args) -> int:
    seed = fresh_seed() if args.fresh_seed else DEFAULT_SEED
    if args.target == "kernels":
        reports = [check_kernels(seed=seed)]
    elif args.target == "oracle":
        reports = [check_quadratic_oracle(seed=seed)]
    else:
        reports = run_all_checks(seed=seed)
    cfg = ExperimentConfig(experiment="verify-kernels", out_path=args.out)
    write_report_csv(cfg, reports)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  "
              f"statistic={r.statistic:.6g} bound={r.bound:.6g}")
    return 0 if all(r.passed for r in reports) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
