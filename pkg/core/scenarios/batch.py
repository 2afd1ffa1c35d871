"""Run scenarios, verify them and persist their results.

Scenarios run on a bounded thread pool; each one writes only its own
files, and the shared ``metrics.csv`` and ``manifest.json`` are written
once after every scenario has finished.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from core.equilibrium.fixed_point import (
    JointKktReport,
    ScenarioResult,
    calibrate_energy_charge,
    joint_kkt_report,
    solve_scenario,
)
from core.lp.lpfile import write_lp
from core.models.dispatch import build_dispatch_lp
from core.models.household import build_household_lp
from core.scenarios.config import ScenarioConfig, config_hash
from core.scenarios.inputs import build_inputs
from core.utils.io import write_csv

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_NOT_CONVERGED = "not_converged"
STATUS_KKT_FAILED = "kkt_failed"
STATUS_FAILED = "failed"
FAILING_STATUSES = (STATUS_KKT_FAILED, STATUS_FAILED)

DEFAULT_MAX_WORKERS = 4
WORKERS_ENV = "PROSUMAGE_WORKERS"


@dataclass(frozen=True)
class ScenarioRun:
    config: ScenarioConfig
    status: str
    result: Optional[ScenarioResult] = field(default=None, repr=False)
    joint_kkt: Optional[JointKktReport] = field(default=None, repr=False)
    calibrated_energy_charge: Optional[float] = None
    error: Optional[str] = None
    files: tuple = ()

    @property
    def name(self) -> str:
        return self.config.name

    @property
    def converged(self) -> bool:
        return self.result is not None and self.result.converged


@dataclass(frozen=True)
class BatchResult:
    runs: List[ScenarioRun]
    output_dir: Path
    manifest_path: Path

    @property
    def exit_code(self) -> int:
        return 1 if any(r.status in FAILING_STATUSES for r in self.runs) else 0

    def summary(self) -> List[Dict[str, object]]:
        return [
            {"scenario": r.name, "status": r.status, "iterations": r.result.iterations if r.result else 0}
            for r in self.runs
        ]


def _status(result: ScenarioResult, joint: JointKktReport) -> str:
    if not joint.conditions.ok:
        return STATUS_KKT_FAILED
    if not result.converged or not joint.ok:
        return STATUS_NOT_CONVERGED
    return STATUS_OK


def run_scenario(cfg: ScenarioConfig) -> ScenarioRun:
    """Solve one scenario and verify its optimality conditions.

    The no-prosumage calibration run always happens so the calibrated
    energy charge can be reported; it replaces the configured constant only
    when ``tariff.calibrate_energy_charge`` is set. Solver and input errors
    propagate.
    """

    p_hh, p_disp, tariff = build_inputs(cfg)
    eq = cfg.equilibrium
    calibrated = calibrate_energy_charge(p_disp, eq.lp_tolerance)
    if cfg.tariff.calibrate_energy_charge and not tariff.energy_rtp:
        tariff = tariff.with_energy_charge(calibrated)
    result = solve_scenario(tariff, p_hh, p_disp, eq, cfg.name)
    joint = joint_kkt_report(result)
    status = _status(result, joint)
    log = logger.info if status == STATUS_OK else logger.warning
    log(
        "scenario %s: %s after %d iteration(s), KKT %.3g / %.3g",
        cfg.name, status, result.iterations, result.hh_kkt_residual, result.disp_kkt_residual,
    )
    return ScenarioRun(cfg, status, result, joint, calibrated)


def _hour(h: float):
    return int(h) if float(h).is_integer() else float(h)


def _dispatch_rows(result: ScenarioResult):
    disp = result.dispatch
    series = {}
    series.update(disp.g_con)
    series.update(disp.g_res)
    for name, out in disp.sto_out.items():
        series[name] = out - disp.sto_in[name]
    series["lost_load"] = disp.lost_load
    for i, h in enumerate(disp.hours):
        for tech, values in series.items():
            yield _hour(h), tech, float(values[i])


def write_scenario_outputs(run: ScenarioRun, output_dir, dump_lp: bool = False) -> List[str]:
    """Per-scenario CSVs (and optionally LP dumps); returns the file names."""

    res = run.result
    if res is None:
        return []
    out = Path(output_dir)
    slug = run.config.slug
    hh = res.household
    written = []

    cols = ("pv_gen", "g_pro2pro", "g_pro2m", "cu", "sto_in", "sto_out", "sto_level", "e_m2pro")
    written.append(
        write_csv(
            out / f"household_{slug}.csv",
            ("hour",) + cols,
            ([_hour(h)] + [float(getattr(hh, c)[i]) for c in cols] for i, h in enumerate(hh.hours)),
        )
    )
    written.append(
        write_csv(
            out / f"capacities_{slug}.csv",
            ("field", "value"),
            [("n_pv_kw", hh.n_pv), ("n_sto_e_kwh", hh.n_sto_e), ("n_sto_p_kw", hh.n_sto_p), ("z_pro_eur", hh.z_pro)],
        )
    )
    written.append(write_csv(out / f"dispatch_{slug}.csv", ("hour", "tech", "generation_mw"), _dispatch_rows(res)))
    written.append(
        write_csv(
            out / f"prices_{slug}.csv",
            ("hour", "price_eur_mwh"),
            ((_hour(h), float(p)) for h, p in zip(res.dispatch.hours, res.dispatch.prices)),
        )
    )
    written.append(
        write_csv(
            out / f"convergence_{slug}.csv",
            ("iteration", "max_price_change", "z_pro", "z_sys", "hh_kkt_residual", "disp_kkt_residual"),
            (
                (r.iteration, r.max_price_change, r.z_pro, r.z_sys, r.hh_kkt_residual, r.disp_kkt_residual)
                for r in res.history
            ),
        )
    )
    if res.metrics is not None:
        written.append(
            write_csv(
                out / f"rldc_{slug}.csv",
                ("rank", "kw"),
                ((i + 1, float(v)) for i, v in enumerate(res.metrics.rldc)),
            )
        )
    if dump_lp:
        written.append(
            write_lp(build_household_lp(res.household_params, res.tariff, res.household_prices), out / f"household_{slug}.lp")
        )
        written.append(write_lp(build_dispatch_lp(res.dispatch_params, res.exchange), out / f"dispatch_{slug}.lp"))
    logger.info("scenario %s: wrote %d files to %s", run.name, len(written), out)
    return [p.name for p in written]


def json_value(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def _metrics_row(run: ScenarioRun) -> Dict[str, object]:
    row: Dict[str, object] = {"scenario": run.name, "status": run.status}
    if run.result is not None:
        row["converged"] = run.result.converged
        row["iterations"] = run.result.iterations
        row["calibrated_energy_charge"] = run.calibrated_energy_charge
        if run.result.metrics is not None:
            row.update(run.result.metrics.scalars())
    return row


def write_metrics(runs: Sequence[ScenarioRun], path) -> Path:
    rows = [_metrics_row(r) for r in runs]
    header: List[str] = []
    for row in rows:
        header.extend(k for k in row if k not in header)
    if not header:
        header = ["scenario", "status"]
    return write_csv(path, header, ([row.get(k, "") for k in header] for row in rows))


def _manifest_entry(run: ScenarioRun) -> Dict[str, object]:
    eq = run.config.equilibrium
    entry: Dict[str, object] = {
        "name": run.name,
        "slug": run.config.slug,
        "config_hash": config_hash(run.config),
        "status": run.status,
        "converged": run.converged,
        "tolerances": {
            "lp": eq.lp_tolerance,
            "kkt": eq.kkt_tolerance,
            "price": eq.price_tolerance,
        },
        "files": list(run.files),
    }
    if run.error is not None:
        entry["error"] = run.error
    res = run.result
    if res is not None:
        entry.update(
            iterations=res.iterations,
            calibrated_energy_charge=json_value(run.calibrated_energy_charge),
            household_kkt_residual=json_value(res.hh_kkt_residual),
            dispatch_kkt_residual=json_value(res.disp_kkt_residual),
            worst_condition=run.joint_kkt.conditions.worst_condition if run.joint_kkt else None,
            coupling_residual=json_value(run.joint_kkt.coupling_residual) if run.joint_kkt else None,
            last_price_change=json_value(res.last_price_change),
            cycle_length=res.cycle_length,
        )
    return entry


def write_manifest(runs: Sequence[ScenarioRun], path) -> Path:
    path = Path(path)
    manifest = {
        "scenarios": [_manifest_entry(r) for r in runs],
        "exit_code": 1 if any(r.status in FAILING_STATUSES for r in runs) else 0,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is None:
        env = os.getenv(WORKERS_ENV, "").strip()
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        else:
            workers = min(DEFAULT_MAX_WORKERS, os.cpu_count() or 1)
    if workers < 1:
        raise ValueError(f"worker count must be positive, got {workers}")
    return workers


def _run_isolated(cfg: ScenarioConfig, output_dir: Path, dump_lp: bool) -> ScenarioRun:
    logger.info("scenario %s: start", cfg.name)
    try:
        run = run_scenario(cfg)
        files = write_scenario_outputs(run, output_dir, dump_lp)
    except Exception as exc:  # one failing scenario must not stop the batch
        logger.exception("scenario %s failed", cfg.name)
        return ScenarioRun(cfg, STATUS_FAILED, error=f"{type(exc).__name__}: {exc}")
    return ScenarioRun(
        run.config, run.status, run.result, run.joint_kkt, run.calibrated_energy_charge, files=tuple(files)
    )


def run_batch(
    configs: Sequence[ScenarioConfig],
    output_dir,
    workers: Optional[int] = None,
    dump_lp: bool = False,
) -> BatchResult:
    """Solve every scenario and write per-scenario CSVs, metrics and manifest.

    Raises ``ValueError`` for duplicate scenario names and ``OSError`` when
    the output directory cannot be created; scenario failures are recorded
    in the result instead.
    """

    names = [c.name for c in configs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"scenario names must be unique within a batch: {dupes}")
    slugs = [c.slug for c in configs]
    if len(set(slugs)) != len(slugs):
        raise ValueError("scenario names map to the same output file names")

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")

    n_workers = resolve_workers(workers)
    logger.info("batch: %d scenario(s) on %d worker(s) into %s", len(configs), n_workers, out)
    if configs:
        with ThreadPoolExecutor(max_workers=min(n_workers, len(configs))) as pool:
            runs = list(pool.map(lambda c: _run_isolated(c, out, dump_lp), configs))
    else:
        runs = []

    metrics_path = write_metrics(runs, out / "metrics.csv")
    manifest_path = write_manifest(runs, out / "manifest.json")
    logger.info("batch: wrote %s and %s", metrics_path.name, manifest_path.name)
    return BatchResult(runs, out, manifest_path)
