"""Command-line entry point: ``simulate``, ``fixedpoint`` and ``fit``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from .asymptotics import SpectralDistribution, solve_v
from .datagen import load_dataset_csv
from .ensemble import draw_subsamples, fit_ensemble
from .errors import CGCVError, ConfigError, InvalidInputError
from .harness import iter_sweep, load_config, write_csv
from .risk import risk_report
from .solvers import PenaltyConfig

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cgcv", description="Risk estimation for subsample ensembles.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a Monte Carlo sweep and write a CSV table")
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, help="override the seed in the config")
    p.add_argument("--threads", type=int, help="worker threads over repetitions (default: $CGCV_THREADS or 1)")

    p = sub.add_parser("fixedpoint", help="solve the ridge fixed-point equation for v")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--spectrum", help="CSV of eigenvalue,weight rows (default: point mass at 1)")

    p = sub.add_parser("fit", help="fit one ensemble on a dataset and print its risk report")
    p.add_argument("--data", required=True, help="CSV with header x_0,...,x_(p-1),y")
    p.add_argument("--penalty", required=True, help="e.g. ridge:1, ridgeless, lasso:0.05, elastic_net:0.1,0.01")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _threads(arg) -> int:
    if arg is not None:
        threads = arg
    else:
        env = os.environ.get("CGCV_THREADS", "").strip()
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"CGCV_THREADS must be an integer, got {env!r}") from None
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _simulate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    threads = _threads(args.threads)
    n = write_csv(iter_sweep(config, threads), args.out)
    print(f"wrote {n} rows to {args.out}")
    return EXIT_OK


def _fixedpoint(args) -> int:
    H = SpectralDistribution.from_csv(args.spectrum) if args.spectrum else SpectralDistribution.point_mass()
    sol = solve_v(args.lam, args.theta, H)
    print(f"v = {sol.v!r}")
    print(f"residual = {sol.residual!r}")
    return EXIT_OK


def _fit(args) -> int:
    try:
        penalty = PenaltyConfig.parse(args.penalty)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    data = load_dataset_csv(args.data)
    subsets = draw_subsamples(data.n, args.k, args.M, args.seed)
    report = risk_report(fit_ensemble(data.X, data.y, penalty, subsets))
    out = {"penalty": penalty.to_dict(), "n": data.n, "p": data.p, "k": args.k, **report.to_dict()}
    print(json.dumps(_jsonable(out), indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    handler = {"simulate": _simulate, "fixedpoint": _fixedpoint, "fit": _fit}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"cgcv: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CGCVError, OSError, ArithmeticError) as exc:
        print(f"cgcv: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
