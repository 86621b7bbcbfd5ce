"""Operator entry point: run experiments, audit gas, render reports.

Exit codes: 0 success, 2 config errors, 3 data errors.  FEDLEDGER_LOG
selects the log level (error, info, debug).
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import load_experiment, load_gas_schedule
from .errors import ArgumentError, ConfigError, ParseError
from .ledger import decimal_str, gas_str, gas_to_eth
from .report import write_report
from .sim import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("fedledger")


def _setup_logging() -> None:
    level = os.environ.get("FEDLEDGER_LOG", "error").strip().lower()
    chosen = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        level, logging.ERROR
    )
    logging.basicConfig(level=chosen, format="%(name)s %(levelname)s %(message)s")


def cmd_run(args) -> int:
    try:
        config, out_dir = load_experiment(
            args.config, seed_override=args.seed, out_override=args.out
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(config, out_dir=out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ArgumentError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    log.info(
        "run complete: %s final accuracy %.4f, %.1f tx/node",
        config.dataset.name,
        result.final_mean_accuracy,
        result.tx_per_node,
    )
    print(f"wrote {out_dir / 'metrics.csv'} and {out_dir / 'summary.txt'}")
    return EXIT_OK


def cmd_gas_audit(args) -> int:
    try:
        schedule = load_gas_schedule(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    price = schedule.gas_price_gwei
    print(f"gas price: {decimal_str(price)} Gwei")
    print("component   gas        eth")
    for name, gas in (
        ("Security", schedule.security),
        ("Oracle", schedule.oracle),
        ("I/O", schedule.io),
    ):
        print(f"{name:<10}  {gas:<9}  {decimal_str(gas_to_eth(gas, price))}")
    dep_eth = gas_to_eth(schedule.deployment_gas, price)
    print(f"deployment  {gas_str(schedule.deployment_gas)}  {decimal_str(dep_eth)}")
    return EXIT_OK


def cmd_report(args) -> int:
    out_dir = Path(args.out) if args.out else Path("report")
    try:
        written = write_report([Path(p) for p in args.metrics], out_dir)
    except (ParseError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedledger",
        description="Blockchain-mediated federated incremental learning simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment config")
    run.add_argument("--config", required=True, help="experiment config file")
    run.add_argument("--out", default=None, help="output directory override")
    run.add_argument("--seed", type=int, default=None, help="seed override")
    run.set_defaults(func=cmd_run)

    audit = sub.add_parser("gas-audit", help="per-component gas and ETH costs")
    audit.add_argument("--config", required=True, help="config with a [ledger] section")
    audit.set_defaults(func=cmd_gas_audit)

    report = sub.add_parser("report", help="accuracy charts from metrics files")
    report.add_argument("metrics", nargs="+", help="one or more metrics.csv files")
    report.add_argument("--out", default=None, help="output directory")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
