from __future__ import annotations

from typing import Any, Dict, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field, ValidationError

from core.lp.solver import LpSolveError
from core.scenarios.batch import json_value, run_scenario
from core.scenarios.catalog import BASELINE, builtin_catalog, find_scenario
from core.scenarios.config import config_to_flat, validate_config, with_overrides

router = APIRouter(prefix="/scenarios", tags=["scenarios"])


class ValidateRequest(BaseModel):
    config: Dict[str, Any] = Field(..., description="flat dotted-key scenario mapping")


class RunRequest(BaseModel):
    scenario: Optional[str] = Field(None, description="built-in scenario name")
    config: Optional[Dict[str, Any]] = Field(None, description="flat dotted-key overrides")
    start_hour: int = Field(0, ge=0, lt=8760)
    hours: int = Field(168, ge=1, le=8760, description="window length")
    subsample: int = Field(1, ge=1)


@router.get("/catalog")
def catalog():
    return {
        "scenarios": [
            {"name": cfg.name, "slug": cfg.slug, "description": cfg.description, "tariff": cfg.tariff.model_dump()}
            for cfg in builtin_catalog()
        ]
    }


@router.post("/validate")
def validate(req: ValidateRequest):
    diagnostics = validate_config(req.config)
    return {"ok": not diagnostics, "diagnostics": [d.model_dump() for d in diagnostics]}


@router.post("/run")
def run(req: RunRequest):
    base = find_scenario(req.scenario or BASELINE)
    if base is None:
        raise HTTPException(status_code=400, detail=f"unknown scenario {req.scenario!r}")

    overrides = dict(req.config or {})
    overrides.update(
        {
            "data.directory": None,
            "horizon.start_hour": req.start_hour,
            "horizon.hours": req.hours,
            "resolution.subsample": req.subsample,
            "resolution.truncate": True,
        }
    )
    try:
        cfg = with_overrides(base, overrides)
    except (ValidationError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    diagnostics = validate_config(config_to_flat(cfg))
    if diagnostics:
        raise HTTPException(status_code=400, detail=[d.model_dump() for d in diagnostics])

    try:
        outcome = run_scenario(cfg)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except LpSolveError as exc:  # pragma: no cover - surfaced via HTTP
        raise HTTPException(status_code=500, detail=str(exc)) from exc

    res = outcome.result
    hh = res.household
    joint = outcome.joint_kkt
    return {
        "scenario": cfg.name,
        "status": outcome.status,
        "converged": res.converged,
        "iterations": res.iterations,
        "calibrated_energy_charge": json_value(outcome.calibrated_energy_charge),
        "capacities": {
            "n_pv_kw": json_value(hh.n_pv),
            "n_sto_e_kwh": json_value(hh.n_sto_e),
            "n_sto_p_kw": json_value(hh.n_sto_p),
            "z_pro_eur": json_value(hh.z_pro),
        },
        "metrics": {k: json_value(v) for k, v in res.metrics.scalars().items()},
        "kkt": {
            "household": json_value(res.hh_kkt_residual),
            "dispatch": json_value(res.disp_kkt_residual),
            "coupling": json_value(joint.coupling_residual),
            "worst_condition": joint.conditions.worst_condition,
            "ok": joint.ok,
        },
    }
