"""Command-line entry point: ``cellfree {run,validate,cdf,harden}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time

from .config import ConfigError, SimConfig, load_config
from .harness import (
    Scenario,
    cdf_from_raw,
    harden_curve,
    run_experiment,
    write_cdf_csv,
    write_outputs,
)
from .validation import run_validation


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _load(path) -> SimConfig:
    config = load_config(path) if path else SimConfig()
    config.validate()
    return config


def cmd_run(args) -> int:
    config = _load(args.config)
    if args.scenario:
        scenario = Scenario.from_name(args.scenario)
    else:
        scenario = Scenario(correlated=config.shadowing_correlated)
    start = time.time()

    def progress(drop):
        if args.verbose:
            print(f"drop {drop.drop_index + 1}/{config.n_drops} ({time.time() - start:.1f}s)", file=sys.stderr)

    result = run_experiment(config, scenario, workers=args.workers, progress=progress)
    out = write_outputs(result, args.out)
    summary = result.summary()
    print(f"scenario {scenario.name}: {summary['n_drops']} drops, {summary['failed_drops']} failed")
    for system, s in summary["systems"].items():
        print(f"  {system}: p5 {s['p5_bps'] / 1e6:.3f} Mbit/s, median {s['median_bps'] / 1e6:.3f} Mbit/s")
    print(f"outputs written to {out}")
    return 0


def cmd_validate(args) -> int:
    checks = run_validation()
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def cmd_cdf(args) -> int:
    cdfs = cdf_from_raw(args.inp, pool_min=args.pool_min)
    write_cdf_csv(cdfs, args.out)
    for system, c in cdfs.items():
        print(f"{system}: p5 {c.p5:.6g}, median {c.p50:.6g}")
    return 0


def cmd_harden(args) -> int:
    config = _load(args.config)
    users = args.users or [config.K]
    rows = harden_curve(args.m_values, users, n_samples=args.samples, seed=config.rng_seed)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=["M", "K", "closed_form", "genie", "genie_stderr"])
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellfree", description="Cell-free massive MIMO versus small-cell simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment")
    run.add_argument("--config", help="key = value config file (defaults when omitted)")
    run.add_argument("--scenario", help="{greedy|random}-{pc|nopc}-{uncorr|corr}, e.g. greedy-pc-uncorr")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="run the quick oracle/identity checks")
    val.set_defaults(func=cmd_validate)

    cdf = sub.add_parser("cdf", help="recompute CDFs from a raw throughput file")
    cdf.add_argument("--in", dest="inp", required=True, help="raw.csv from a run")
    cdf.add_argument("--out", required=True, help="CDF csv to write")
    cdf.add_argument("--pool-min", action="store_true", help="one sample (the minimum) per drop, as for max-min runs")
    cdf.set_defaults(func=cmd_cdf)

    harden = sub.add_parser("harden", help="statistical-CSI versus genie-aided downlink rate")
    harden.add_argument("--config", help="config file; K and rng_seed are used")
    harden.add_argument("--m-values", type=_int_list, default=[20, 50, 100, 150, 200], help="comma-separated AP counts")
    harden.add_argument("--users", type=_int_list, help="comma-separated user counts (default: config K)")
    harden.add_argument("--samples", type=int, default=10_000)
    harden.add_argument("--out", help="csv path (stdout when omitted)")
    harden.set_defaults(func=cmd_harden)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
