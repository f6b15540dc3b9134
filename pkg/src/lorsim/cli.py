"""Command-line interface: ``lorsim {run,cell,check-moments,plot}``."""

import argparse
import logging
import sys
import time
from datetime import datetime, timezone

from .config import ConfigError, format_config, parse_config_text
from .engine import run_grid
from .estimators import TAU2_METHODS, Correction
from .report import (
    MEASURES,
    check_moments,
    format_check_table,
    manifest_path,
    plot_summary,
    read_results,
    write_manifest,
    write_results,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _common(p):
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--reps", type=int, help="replications per scenario (overrides config)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tau2-plugin", choices=[m.lower() for m in TAU2_METHODS],
                   help="tau2 estimate used in the SSW interval (default mp)")
    p.add_argument("--correction", choices=[c.value for c in Correction])
    p.add_argument("--plots", metavar="DIR", help="also write SVG panels to DIR")


def build_parser():
    parser = argparse.ArgumentParser(prog="lorsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a parameter grid")
    run.add_argument("--config", help="key = value grid file (defaults: full grid)")
    _common(run)

    cell = sub.add_parser("cell", help="run a single scenario")
    cell.add_argument("--mechanism", default="FIM1")
    cell.add_argument("--size", default="uniform", help="constant, normal or uniform")
    cell.add_argument("--K", type=int, required=True)
    cell.add_argument("--n", type=int, required=True)
    cell.add_argument("--theta", type=float, default=0.0)
    cell.add_argument("--tau2", type=float, default=0.0)
    cell.add_argument("--pC", type=float, default=0.1)
    cell.add_argument("--sigma2", type=float, default=0.1)
    _common(cell)

    chk = sub.add_parser("check-moments", help="verify the sample-size generators")
    chk.add_argument("--seed", type=int, default=2020)
    chk.add_argument("--draws", type=int, default=10**6)

    plot = sub.add_parser("plot", help="SVG panels from an existing results CSV")
    plot.add_argument("csv")
    plot.add_argument("--out", required=True, help="output directory")
    plot.add_argument("--measure", choices=sorted(MEASURES), action="append",
                      help="measure to plot (repeatable; default all)")
    return parser


def _apply_overrides(config_text, args):
    extra = []
    if args.seed is not None:
        extra.append(f"seed = {args.seed}")
    if args.reps is not None:
        extra.append(f"M = {args.reps}")
    if args.tau2_plugin is not None:
        extra.append(f"tau2_plugin = {args.tau2_plugin}")
    if args.correction is not None:
        extra.append(f"correction = {args.correction}")
    config = parse_config_text(config_text)
    if extra:
        config = parse_config_text("\n".join(extra), base=config)
    return config


def _cell_text(args):
    return "\n".join([
        f"mechanisms = {args.mechanism}",
        f"sizes = {args.size}",
        f"K = {args.K}",
        f"n = {args.n}",
        f"theta = {args.theta!r}",
        f"tau2 = {args.tau2!r}",
        f"pC = {args.pC!r}",
        f"sigma2 = {args.sigma2!r}",
    ])


def _run(args, config_text):
    config = _apply_overrides(config_text, args)
    started = _now()
    t0 = time.perf_counter()
    records = run_grid(config, workers=args.workers)
    logging.getLogger("lorsim").info("%d scenarios in %.1f s", len(records), time.perf_counter() - t0)
    write_results(records, args.out)
    write_manifest(manifest_path(args.out), format_config(config), config, started, _now(), args.workers)
    if args.plots:
        for measure in MEASURES:
            plot_summary(records, args.plots, measure)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            text = ""
            if args.config:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            return _run(args, text)
        if args.command == "cell":
            return _run(args, _cell_text(args))
        if args.command == "check-moments":
            rows = check_moments(seed=args.seed, draws=args.draws)
            print(format_check_table(rows))
            return EXIT_OK
        if args.command == "plot":
            rows = read_results(args.csv)
            written = []
            for measure in args.measure or sorted(MEASURES):
                written += plot_summary(rows, args.out, measure)
            print(f"wrote {len(written)} SVG files to {args.out}")
            return EXIT_OK
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
