"""Command line entry point.

One subcommand per experiment plus ``scan``.  Flags override config
defaults; ``scan`` reads blank-line-separated config blocks from a
file.  Exit codes: 0 success, 2 validation error, 3 guard violation,
4 precision error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, experiments
from .errors import GuardError, PrecisionError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GUARD = 3
EXIT_PRECISION = 4


def _add_experiment_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--k", type=int, help="output dimension k")
    sub.add_argument("--d", type=int, help="environment / ambient dimension d")
    sub.add_argument("--m", type=int, help="subspace dimension m")
    sub.add_argument("--p", type=float, help="Renyi / Schatten exponent p")
    sub.add_argument("--depth", type=int, help="brickwork circuit depth")
    sub.add_argument("--samples", type=int, dest="n_samples",
                     help="number of Monte Carlo samples / grid points")
    sub.add_argument("--eps", type=float, help="accuracy / threshold parameter")
    sub.add_argument("--precision-bits", type=int, dest="precision_bits",
                     help="mantissa bits for polynomial arithmetic")
    sub.add_argument("--seed", type=int, help="base RNG seed")
    sub.add_argument("--stream", type=int, help="RNG stream id")
    sub.add_argument("--out", dest="out_path",
                     help="report base path (writes <out>.csv and <out>.json)")
    sub.add_argument("--config", help="flat key=value config file to start from")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holevo-lab",
        description="Seeded numerical experiments on random quantum channels, "
                    "sphere concentration and polynomial approximation.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in experiments.EXPERIMENT_NAMES:
        sub = subs.add_parser(name, help=f"run the {name} experiment")
        _add_experiment_flags(sub)
    scan = subs.add_parser("scan", help="run every config block in a file")
    scan.add_argument("--file", required=True, help="scan file of config blocks")
    scan.add_argument("--out", dest="out_path", default="scan_index",
                      help="index file base path")
    scan.add_argument("--parallel", type=int, default=1,
                      help="max concurrent configs (capped by HOLEVO_LAB_THREADS)")
    return parser


def _config_from_args(args: argparse.Namespace) -> experiments.ExperimentConfig:
    if getattr(args, "config", None):
        cfg = experiments.load_config(args.config)
        if cfg.experiment != args.command:
            raise ValidationError(
                f"config file names experiment {cfg.experiment!r} "
                f"but the command line says {args.command!r}")
    else:
        cfg = experiments.ExperimentConfig(experiment=args.command)
    overrides = {}
    for name in ("k", "d", "m", "p", "depth", "n_samples", "eps",
                 "precision_bits", "seed", "stream", "out_path"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scan":
            configs = experiments.load_scan_file(args.file)
            reports = experiments.scan(configs, index_path=args.out_path,
                                       parallel=args.parallel)
            failed = sum(1 for r in reports if r is None)
            print(f"scan: {len(reports) - failed} ok, {failed} failed; "
                  f"index at {args.out_path}.json")
            return EXIT_OK
        cfg = _config_from_args(args)
        report = experiments.run(cfg)
        print(f"{cfg.experiment}: wrote {report.csv_path} and {report.json_path} "
              f"in {report.wall_time:.2f}s")
        return EXIT_OK
    except PrecisionError as exc:
        print(f"precision error: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except GuardError as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
