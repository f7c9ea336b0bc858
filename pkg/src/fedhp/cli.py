"""Command-line entry point: ``fedhp run|compare|bound``."""
from __future__ import annotations

import argparse
import logging
import sys

from .bound import BoundDomainError, BoundParams, corollary1_eta, corollary1_rate, remark2_bound, tau_threshold
from .config import ConfigError, load_config
from .dataprep import PartitionSizingError
from .experiment import compare, format_summary, fmt, run_experiment
from .protocol import NumericalAbort

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg)
    except PartitionSizingError as exc:
        print(f"invalid config: p/samples_per_class: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {len(result.history)} rounds to {result.path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    try:
        summaries = compare(args.csv, target=args.target)
    except (ValueError, OSError) as exc:
        print(f"compare failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_summary(summaries))
    return EXIT_OK


def _cmd_bound(args) -> int:
    try:
        p = BoundParams(L=args.L, sigma=args.sigma, zeta=args.zeta, rho=args.rho, eta=args.eta,
                        tau=args.tau, H=args.H, N=args.N, f1=args.f1, f_star=args.f_star)
        for name, fn in (("tau_threshold", tau_threshold), ("corollary1_eta", corollary1_eta),
                         ("corollary1_rate", corollary1_rate), ("remark2_bound", remark2_bound)):
            print(f"{name:<16} {fmt(fn(p))}")
    except BoundDomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedhp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a key=value config file")
    run.add_argument("config")
    run.set_defaults(func=_cmd_run)

    cmp_ = sub.add_parser("compare", help="summarise two or more metrics CSVs")
    cmp_.add_argument("csv", nargs="+")
    cmp_.add_argument("--target", type=float, default=None, help="target accuracy for time-to-target")
    cmp_.set_defaults(func=_cmd_compare)

    b = sub.add_parser("bound", help="evaluate the convergence-bound formulas")
    for name, default in (("L", None), ("sigma", None), ("zeta", 0.0), ("rho", None), ("eta", None),
                          ("tau", None), ("H", None), ("N", None), ("f1", None), ("f_star", 0.0)):
        flag = "--f-star" if name == "f_star" else f"--{name}"
        b.add_argument(flag, dest=name, type=float, default=default, required=default is None)
    b.set_defaults(func=_cmd_bound)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
