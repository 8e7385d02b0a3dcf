"""Command line interface: ``consensus-detect {analyze,simulate,sweep,version}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__, kernel
from ._optim import NumericError
from .config import ConfigError, RunManifest, load_config
from .detector import ConfigError as SimConfigError
from .detector import InsufficientTrialsError, default_threads
from .exponents import DomainError
from .experiment import (SWEEP_COLUMNS, analysis_curves, prepare_output, run_analysis,
                         run_simulation, run_sweep, write_csv)
from .models import InvalidModelError
from .network import EstimationError, TopologyError

log = logging.getLogger("consensus_detect")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
FULL_SCALE_TRIALS = 30000

REPORT_COLUMNS = ["n", "log_r_abs", "log_r_method", "gamma", "b0", "b1", "bound",
                  "gamma_star", "thr", "optimal_regime", "c_total", "c_ind", "lambda_bullet"]


def _load(args):
    cfg = load_config(args.config)
    trials = FULL_SCALE_TRIALS if getattr(args, "full_scale", False) else args.trials
    cfg = cfg.with_overrides(seed=args.seed, trials=trials, output=args.out)
    prepare_output(cfg.output)
    return cfg


def _finish(cfg, manifest: RunManifest, outputs: list[str]) -> None:
    cfg_path = cfg.output + ".config.json"
    with open(cfg_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.serialize())
    outputs = outputs + [cfg_path]
    manifest.finish(outputs)
    manifest.write(cfg.output + ".manifest.json")
    for o in outputs:
        print(o)


def cmd_analyze(args) -> int:
    cfg = _load(args)
    manifest = RunManifest.start(cfg, __version__)
    report, conn = run_analysis(cfg)
    row = [report.n, report.log_r_abs, conn.method, report.gamma, report.b0, report.b1,
           report.bound, report.gamma_star, report.thr, report.optimal_regime,
           report.c_total, report.extra.get("c_ind"), report.lambda_bullet]
    outs = [write_csv(cfg.output + "_report.csv", REPORT_COLUMNS, [row]),
            write_csv(cfg.output + "_curves.csv", ["gamma", "b0", "b1", "bound"],
                      analysis_curves(cfg, conn.rate).tolist())]
    _finish(cfg, manifest, outs)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    manifest = RunManifest.start(cfg, __version__)
    threads = args.threads if args.threads is not None else default_threads()
    try:
        result, est = run_simulation(cfg, threads=threads)
    except InsufficientTrialsError as exc:
        raise InsufficientTrialsError(f"{exc} (rerun with a larger --trials)") from None
    outs = [write_csv(cfg.output + "_errors.csv", ["sensor", "k", "alpha", "beta", "pe"],
                      result.rows()),
            write_csv(cfg.output + "_slopes.csv", ["sensor", "slope"], est.rows())]
    _finish(cfg, manifest, outs)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    manifest = RunManifest.start(cfg, __version__)
    threads = args.threads if args.threads is not None else default_threads()
    rows = run_sweep(cfg, threads=threads)
    outs = [write_csv(cfg.output + "_sweep.csv", SWEEP_COLUMNS,
                      [[r[c] for c in SWEEP_COLUMNS] for r in rows])]
    _finish(cfg, manifest, outs)
    return EXIT_OK


def cmd_version(args) -> int:
    print(f"consensus-detect {__version__} (kernel: {kernel.BACKEND})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-detect",
        description="Error exponents and Monte Carlo simulation of distributed "
                    "detection over random networks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sim: bool):
        p.add_argument("--config", required=True, metavar="PATH", help="JSON config file")
        p.add_argument("--out", metavar="PREFIX", help="output path prefix (overrides config)")
        p.add_argument("--seed", type=int, metavar="U64", help="master seed (overrides config)")
        p.add_argument("--trials", type=int, metavar="N",
                       help="trials per hypothesis (overrides config)")
        p.add_argument("--threads", type=int, metavar="N",
                       help="worker threads; never changes results "
                            "(default: $CONSENSUS_DETECT_THREADS or 1)")
        if sim:
            p.add_argument("--full-scale", action="store_true",
                           help=f"use {FULL_SCALE_TRIALS} trials per hypothesis")

    common(sub.add_parser("analyze", help="exponent bounds, thresholds and B0/B1 curves"), False)
    common(sub.add_parser("simulate", help="Monte Carlo error rates and slope estimates"), True)
    common(sub.add_parser("sweep", help="theory vs. simulation over a connectivity sweep"), True)
    sub.add_parser("version", help="print the version and kernel backend")
    return parser


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "version": cmd_version}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SimConfigError, InvalidModelError, TopologyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, EstimationError, InsufficientTrialsError, DomainError,
            ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
