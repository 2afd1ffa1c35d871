"""Opt-in reproduction runs: ``python -m evals.harness bands|kkt``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Tuple

import yaml

from core.scenarios.batch import STATUS_NOT_CONVERGED, STATUS_OK, run_scenario
from core.scenarios.catalog import builtin_catalog, find_scenario
from core.scenarios.config import with_overrides

logger = logging.getLogger("evals")

CASES = Path(__file__).with_name("cases.yaml")
DATA_ENV = "PROSUMAGE_DATA_DIR"


def load_cases(path: Path = CASES) -> dict:
    with open(path, encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def within(value: float, band: Dict[str, float]) -> bool:
    target = float(band["target"])
    if "rel" in band:
        return abs(value - target) <= float(band["rel"]) * abs(target)
    return abs(value - target) <= float(band.get("abs", 0.0))


def run_bands(data_dir: str, cases: dict) -> List[Tuple[str, str, float, bool]]:
    rows = []
    for case in cases.get("cases", []):
        cfg = find_scenario(case["scenario"])
        if cfg is None:
            raise ValueError(f"{case['name']}: unknown scenario {case['scenario']!r}")
        cfg = with_overrides(cfg, {"data.directory": data_dir})
        scalars = run_scenario(cfg).result.metrics.scalars()
        for key, band in case["bands"].items():
            value = float(scalars[key])
            rows.append((case["name"], key, value, within(value, band)))
    return rows


def run_kkt(cases: dict) -> List[Tuple[str, str, float, bool]]:
    kkt_case = cases.get("kkt", {})
    overrides = {"resolution.subsample": int(kkt_case.get("subsample", 4)), "data.directory": None}
    tol = float(kkt_case.get("tolerance", 1e-6))
    rows = []
    for cfg in builtin_catalog():
        outcome = run_scenario(with_overrides(cfg, {**overrides, "equilibrium.kkt_tolerance": tol}))
        worst = outcome.joint_kkt.conditions.max_residual
        rows.append((cfg.name, outcome.status, worst, outcome.status in (STATUS_OK, STATUS_NOT_CONVERGED)))
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="evals.harness")
    ap.add_argument("mode", choices=("bands", "kkt"))
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    cases = load_cases()
    if args.mode == "bands":
        data_dir = os.getenv(DATA_ENV)
        if not data_dir:
            print(f"{DATA_ENV} is not set; the band reproduction needs ingested profiles")
            return 0
        rows = run_bands(data_dir, cases)
    else:
        rows = run_kkt(cases)

    for name, what, value, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<24} {what:<28} {value:.6g}")
    return 0 if all(ok for *_, ok in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
