"""Command-line entry point: ``python -m cli.prosumage run|validate|catalog``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from pydantic import ValidationError

from core.scenarios.batch import run_batch
from core.scenarios.catalog import BASELINE, builtin_catalog, find_scenario
from core.scenarios.config import ScenarioConfig, config_to_flat, load_config, validate_config, with_overrides

logger = logging.getLogger("prosumage")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prosumage", description="Prosumage household and power-sector equilibrium runs")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve scenarios and write CSV results")
    which = run.add_mutually_exclusive_group()
    which.add_argument("--scenario", action="append", metavar="NAME", help="built-in scenario name (repeatable)")
    which.add_argument("--all", action="store_true", help="the whole built-in catalog")
    which.add_argument("--config", action="append", metavar="PATH", help="scenario YAML file (repeatable)")
    data = run.add_mutually_exclusive_group()
    data.add_argument("--data-dir", metavar="PATH", help="directory with hour,value CSV profiles")
    data.add_argument("--synthetic", action="store_true", help="deterministic synthetic profiles (default)")
    run.add_argument("--subsample", type=int, metavar="N", help="keep every N-th hour")
    run.add_argument("--start-hour", type=int, metavar="H", help="first hour of the window")
    run.add_argument("--hours", type=int, metavar="H", help="window length in hours")
    run.add_argument("--out", default="results", metavar="DIR", help="output directory (default: results)")
    run.add_argument("--workers", type=int, metavar="N", help="parallel scenarios (default: PROSUMAGE_WORKERS or 4)")
    run.add_argument("--dump-lp", action="store_true", help="also write both LPs in CPLEX LP format")

    val = sub.add_parser("validate", help="check a scenario file without solving")
    val.add_argument("path")

    sub.add_parser("catalog", help="list the built-in scenarios")
    return ap


def _select(args) -> List[ScenarioConfig]:
    if args.config:
        return [load_config(p) for p in args.config]
    if args.all:
        return builtin_catalog()
    configs = []
    for name in args.scenario or [BASELINE]:
        cfg = find_scenario(name)
        if cfg is None:
            raise ValueError(f"unknown scenario {name!r}; see 'prosumage catalog'")
        configs.append(cfg)
    return configs


def _overrides(args) -> dict:
    out = {}
    if args.data_dir:
        out["data.directory"] = args.data_dir
    elif args.synthetic:
        out["data.directory"] = None
    if args.subsample is not None:
        out["resolution.subsample"] = args.subsample
    if args.start_hour is not None:
        out["horizon.start_hour"] = args.start_hour
    if args.hours is not None:
        out["horizon.hours"] = args.hours
    return out


def _cmd_run(args) -> int:
    try:
        configs = _select(args)
        overrides = _overrides(args)
        if overrides:
            configs = [with_overrides(c, overrides) for c in configs]
        problems = []
        for cfg in configs:
            problems.extend(f"{cfg.name}: {d.field}: {d.message}" for d in validate_config(config_to_flat(cfg)))
        if problems:
            for line in problems:
                logger.error(line)
            return EXIT_CONFIG
        batch = run_batch(configs, args.out, args.workers, args.dump_lp)
    except (ValidationError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG

    width = max((len(r.name) for r in batch.runs), default=8)
    for row in batch.summary():
        print(f"{row['scenario']:<{width}}  {row['status']:<13}  {row['iterations']:>3} it")
    print(f"results in {batch.output_dir} (manifest {batch.manifest_path.name})")
    return EXIT_FAILED if batch.exit_code else EXIT_OK


def _cmd_validate(args) -> int:
    diagnostics = validate_config(args.path)
    for d in diagnostics:
        print(f"{args.path}: {d.field}: {d.message}")
    if diagnostics:
        return EXIT_CONFIG
    print(f"{args.path}: ok")
    return EXIT_OK


def _cmd_catalog(args) -> int:
    for cfg in builtin_catalog():
        t = cfg.tariff
        energy = "RTP" if t.energy_rtp else f"{t.energy_charge:.2f}"
        if t.feed_in == "prohibited":
            feed_in = "none"
        elif t.feed_in == "rtp":
            feed_in = "RTP" + (f"+{t.feed_in_rate:.2f}" if t.feed_in_rate else "")
        else:
            feed_in = f"{t.feed_in_rate:.2f}"
        cap = f" cap {t.feed_in_cap_fraction:g}" if t.feed_in_cap_fraction else ""
        print(
            f"{cfg.name:<22} energy {energy:>5}  other {t.other_charge:.2f}  "
            f"fixed {t.fixed_charge:>5.0f}  feed-in {feed_in}{cap}"
        )
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    handlers = {"run": _cmd_run, "validate": _cmd_validate, "catalog": _cmd_catalog}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
