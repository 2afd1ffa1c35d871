"""Scenario configuration: pydantic schema and flat-key YAML files.

A scenario file is a flat YAML mapping from dotted key paths to values::

    name: Retail_30 FIT_8
    tariff.other_charge: 0.25
    tariff.feed_in: fixed
    tariff.feed_in_rate: 0.08
    horizon.hours: 168

Unspecified keys take the defaults below. Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.equilibrium.fixed_point import EquilibriumConfig
from core.inputs.costs import PV_FULL_LOAD_HOURS, THERMAL_TECHNOLOGIES
from core.inputs.timeseries import HOURS_PER_YEAR
from core.utils.io import count_records

RENEWABLE_TECHS = ("onshore_wind", "offshore_wind", "pv", "run_of_river")

# approximate German 2030 fleet in MW
DEFAULT_CONVENTIONAL_MW = {
    "lignite": 9500.0,
    "hardcoal": 9800.0,
    "ccgt": 21000.0,
    "ocgt": 15000.0,
    "oil": 1200.0,
    "bio": 6200.0,
}
DEFAULT_RENEWABLE_MW = {
    "onshore_wind": 58500.0,
    "offshore_wind": 15000.0,
    "pv": 66300.0,
    "run_of_river": 5600.0,
}


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TariffConfig(_Block):
    energy_charge: float = Field(0.05, ge=0.0, le=10.0, description="EUR/kWh")
    energy_rtp: bool = False
    other_charge: float = Field(0.25, ge=0.0, le=10.0, description="EUR/kWh")
    fixed_charge: float = Field(0.0, ge=0.0, description="EUR/year")
    feed_in: Literal["fixed", "rtp", "prohibited"] = "fixed"
    feed_in_rate: float = Field(0.08, ge=0.0, le=10.0, description="EUR/kWh, premium in rtp mode")
    feed_in_cap_fraction: Optional[float] = Field(None, gt=0.0, le=1.0)
    calibrate_energy_charge: bool = False


class HorizonConfig(_Block):
    start_hour: int = Field(0, ge=0, lt=HOURS_PER_YEAR)
    hours: int = Field(HOURS_PER_YEAR, ge=1, le=HOURS_PER_YEAR)

    @model_validator(mode="after")
    def _inside_year(self):
        if self.start_hour + self.hours > HOURS_PER_YEAR:
            raise ValueError(f"window ends at hour {self.start_hour + self.hours}, beyond {HOURS_PER_YEAR}")
        return self


class ResolutionConfig(_Block):
    subsample: int = Field(1, ge=1)
    truncate: bool = False


class DataConfig(_Block):
    """Input files; without ``directory`` deterministic synthetic profiles are used."""

    directory: Optional[str] = None
    step_hours: float = Field(1.0, gt=0.0)
    demand: str = "demand.csv"
    pv_cf: str = "pv_cf.csv"
    system_demand: str = "system_demand.csv"
    res_cf: Dict[str, str] = Field(default_factory=lambda: {t: f"res_{t}.csv" for t in RENEWABLE_TECHS})

    def files(self) -> Dict[str, Path]:
        base = Path(self.directory or ".")
        out = {"demand": base / self.demand, "pv_cf": base / self.pv_cf, "system_demand": base / self.system_demand}
        out.update({f"res_cf.{k}": base / v for k, v in self.res_cf.items()})
        return out


class ProsumageConfig(_Block):
    n_households: int = Field(1_000_000, ge=1)
    m_pv: float = Field(10.0, gt=0.0, description="kW")
    annual_demand_mwh: float = Field(5.0, ge=0.0)
    full_load_hours: float = Field(PV_FULL_LOAD_HOURS, ge=0.0)
    pv_overnight_cost: float = Field(850.0, ge=0.0)
    pv_lifetime: int = Field(25, ge=1)
    pv_fixed_cost: float = Field(17.0, ge=0.0)
    storage_energy_overnight_cost: float = Field(205.0, ge=0.0)
    storage_power_overnight_cost: float = Field(140.0, ge=0.0)
    storage_lifetime: int = Field(15, ge=1)
    storage_fixed_cost: float = Field(10.0, ge=0.0)
    interest_rate: float = Field(0.04, ge=0.0)
    vat_rate: float = Field(0.19, ge=0.0)
    eta_storage: float = Field(0.92, gt=0.0, le=1.0)
    storage_cost_factor: float = Field(1.0, ge=0.0)


class DispatchConfig(_Block):
    voll: Optional[float] = Field(3000.0, gt=0.0, description="EUR/MWh; null disables lost load")
    co2_price: float = Field(29.4, ge=0.0)
    conventional_mw: Dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_CONVENTIONAL_MW))
    renewable_mw: Dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_RENEWABLE_MW))
    pumped_hydro_power_mw: float = Field(9800.0, ge=0.0)
    pumped_hydro_energy_mwh: float = Field(60000.0, ge=0.0)
    annual_demand_twh: float = Field(530.0, ge=0.0, description="synthetic non-prosumage demand")

    @model_validator(mode="after")
    def _known_techs(self):
        unknown = set(self.conventional_mw) - set(THERMAL_TECHNOLOGIES)
        if unknown:
            raise ValueError(f"unknown conventional technologies {sorted(unknown)}")
        if min(self.conventional_mw.values(), default=0.0) < 0 or min(self.renewable_mw.values(), default=0.0) < 0:
            raise ValueError("capacities must be non-negative")
        return self


class ScenarioConfig(_Block):
    name: str = Field(..., min_length=1)
    description: str = ""
    tariff: TariffConfig = Field(default_factory=TariffConfig)
    horizon: HorizonConfig = Field(default_factory=HorizonConfig)
    resolution: ResolutionConfig = Field(default_factory=ResolutionConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    prosumage: ProsumageConfig = Field(default_factory=ProsumageConfig)
    dispatch: DispatchConfig = Field(default_factory=DispatchConfig)
    equilibrium: EquilibriumConfig = Field(default_factory=EquilibriumConfig)

    @property
    def slug(self) -> str:
        return slugify(self.name)


class Diagnostic(BaseModel):
    field: str
    message: str


def slugify(name: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower()
    return slug or "scenario"


def flatten(tree: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping) and value:
            flat.update(flatten(value, path + "."))
        else:
            flat[path] = value
    return flat


def unflatten(flat: Mapping[str, Any]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = str(key).split(".")
        node = tree
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ValueError(f"key {key!r} nests below a plain value")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ValueError(f"key {key!r} is also used as a prefix")
        node[parts[-1]] = value
    return tree


def config_from_flat(flat: Mapping[str, Any]) -> ScenarioConfig:
    return ScenarioConfig.model_validate(unflatten(flat))


def config_to_flat(cfg: ScenarioConfig) -> Dict[str, Any]:
    return flatten(cfg.model_dump(mode="json"))


def with_overrides(cfg: ScenarioConfig, overrides: Mapping[str, Any]) -> ScenarioConfig:
    """Copy of ``cfg`` with dotted keys replaced; the result is re-validated."""
    flat = config_to_flat(cfg)
    flat.update(overrides)
    return config_from_flat(flat)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, Mapping):
        raise ValueError(f"{path}: expected a mapping of dotted keys")
    return config_from_flat(raw)


def dump_config(cfg: ScenarioConfig, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(config_to_flat(cfg), f, sort_keys=False, allow_unicode=True)
    return path


def config_hash(cfg: ScenarioConfig) -> str:
    canonical = json.dumps(config_to_flat(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _validation_diagnostics(exc: ValidationError) -> List[Diagnostic]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err.get("loc", ()) if part != "__root__")
        out.append(Diagnostic(field=loc or "<config>", message=err.get("msg", "invalid value")))
    return out


def _data_diagnostics(cfg: ScenarioConfig) -> List[Diagnostic]:
    if cfg.data.directory is None:
        return []
    out = []
    lengths: Dict[str, int] = {}
    for key, path in cfg.data.files().items():
        if not path.is_file():
            out.append(Diagnostic(field=f"data.{key}", message=f"file not found: {path}"))
            continue
        lengths[key] = count_records(path)
    if len(set(lengths.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in sorted(lengths.items()))
        out.append(Diagnostic(field="data", message=f"horizon mismatch between input series ({detail} samples)"))
    elif lengths:
        covered = next(iter(lengths.values())) * cfg.data.step_hours
        end = cfg.horizon.start_hour + cfg.horizon.hours
        if end > covered + 1e-9:
            out.append(Diagnostic(field="horizon.hours", message=f"window ends at hour {end}, data cover {covered:g} h"))
        if covered > HOURS_PER_YEAR + 1e-9:
            out.append(Diagnostic(field="data.step_hours", message=f"data cover {covered:g} h, more than a year"))
    return out


def _resolution_diagnostics(cfg: ScenarioConfig) -> List[Diagnostic]:
    step = cfg.data.step_hours if cfg.data.directory is not None else 1.0
    samples = int(cfg.horizon.hours // step)
    factor = cfg.resolution.subsample
    if samples % factor and not cfg.resolution.truncate:
        return [
            Diagnostic(
                field="resolution.subsample",
                message=f"factor {factor} does not divide {samples} samples; set resolution.truncate",
            )
        ]
    if samples // factor < 1:
        return [Diagnostic(field="resolution.subsample", message="subsampling leaves no samples")]
    return []


def validate_config(source: Union[str, Path, Mapping[str, Any]]) -> List[Diagnostic]:
    """Schema, file and horizon checks; content problems never raise."""

    if isinstance(source, Mapping):
        raw: Any = dict(source)
        origin = "<config>"
    else:
        origin = str(source)
        try:
            with open(source, encoding="utf-8") as f:
                raw = yaml.safe_load(f)
        except OSError as exc:
            return [Diagnostic(field="<file>", message=f"{origin}: {exc.strerror or exc}")]
        except yaml.YAMLError as exc:
            return [Diagnostic(field="<file>", message=f"{origin}: not valid YAML ({exc})")]
    if not isinstance(raw, Mapping):
        return [Diagnostic(field="<file>", message=f"{origin}: expected a mapping of dotted keys")]
    try:
        cfg = config_from_flat(raw)
    except ValidationError as exc:
        return _validation_diagnostics(exc)
    except ValueError as exc:
        return [Diagnostic(field="<config>", message=str(exc))]
    return _data_diagnostics(cfg) + _resolution_diagnostics(cfg)
