"""Assemble model inputs for a scenario configuration.

Profiles come from ``data.directory`` when set, otherwise from the
deterministic synthetic generator. Either way they are cut to the horizon
window first and subsampled second, so the window is always given in
hours of the year.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Dict, Tuple

from core.inputs.costs import THERMAL_TECHNOLOGIES, CostInputs, annualized_cost, marginal_cost
from core.inputs.synthetic import synthetic_profiles, synthetic_system_profiles
from core.inputs.timeseries import HOURS_PER_YEAR, TimeSeries, Unit, load_timeseries, subsample
from core.models.dispatch import ConventionalTech, DispatchParams, RenewableTech, pumped_hydro
from core.models.household import FeedInMode, ProsumageParams, Tariff
from core.scenarios.config import ScenarioConfig, TariffConfig

logger = logging.getLogger(__name__)


def tariff_from_config(tc: TariffConfig) -> Tariff:
    return Tariff(
        energy_charge=tc.energy_charge,
        other_charge=tc.other_charge,
        fixed_charge=tc.fixed_charge,
        feed_in=FeedInMode(tc.feed_in),
        feed_in_rate=tc.feed_in_rate,
        feed_in_cap_fraction=tc.feed_in_cap_fraction,
        energy_rtp=tc.energy_rtp,
    )


def _file_profiles(cfg: ScenarioConfig) -> Dict[str, TimeSeries]:
    files = cfg.data.files()
    units = {"demand": Unit.KW, "pv_cf": Unit.FRACTION, "system_demand": Unit.MW}
    out = {}
    for key, path in files.items():
        unit = units.get(key, Unit.FRACTION)
        series = load_timeseries(path, unit, cfg.data.step_hours)
        out[key] = series.window(cfg.horizon.start_hour, cfg.horizon.hours)
        logger.debug("loaded %s: %d samples from %s", key, len(series), path)
    return out


def _synthetic_profiles(cfg: ScenarioConfig) -> Dict[str, TimeSeries]:
    h = cfg.horizon
    demand, pv_cf = synthetic_profiles(
        h.hours,
        1.0,
        h.start_hour,
        cfg.prosumage.annual_demand_mwh,
        cfg.prosumage.full_load_hours,
    )
    system = synthetic_system_profiles(h.hours, 1.0, h.start_hour, cfg.dispatch.annual_demand_twh)
    out = {"demand": demand, "pv_cf": pv_cf, "system_demand": system.pop("demand")}
    out.update({f"res_cf.{k}": v for k, v in system.items()})
    return out


def load_profiles(cfg: ScenarioConfig) -> Dict[str, TimeSeries]:
    """Windowed and subsampled profiles keyed like ``DataConfig.files``."""

    raw = _file_profiles(cfg) if cfg.data.directory is not None else _synthetic_profiles(cfg)
    res = cfg.resolution
    return {k: subsample(v, res.subsample, res.truncate) for k, v in raw.items()}


def _household_params(cfg: ScenarioConfig, demand: TimeSeries, pv_cf: TimeSeries) -> ProsumageParams:
    pc = cfg.prosumage

    def costs(overnight: float, lifetime: int, fixed: float = 0.0) -> CostInputs:
        return CostInputs(overnight, lifetime, pc.interest_rate, pc.vat_rate, fixed)

    pv = costs(pc.pv_overnight_cost, pc.pv_lifetime, pc.pv_fixed_cost)
    sto_e = costs(pc.storage_energy_overnight_cost, pc.storage_lifetime)
    sto_p = costs(pc.storage_power_overnight_cost, pc.storage_lifetime, pc.storage_fixed_cost)
    params = ProsumageParams(
        demand=demand,
        pv_cf=pv_cf,
        c_inv_pv=annualized_cost(pv),
        c_fix_pv=pv.annual_fixed_cost,
        c_inv_sto_e=annualized_cost(sto_e),
        c_inv_sto_p=annualized_cost(sto_p),
        c_fix_sto=sto_p.annual_fixed_cost,
        eta_sto=pc.eta_storage,
        m_pv=pc.m_pv,
        n_households=pc.n_households,
        cost_scale=demand.horizon_hours / HOURS_PER_YEAR,
    )
    if pc.storage_cost_factor != 1.0:
        params = params.with_storage_cost_factor(pc.storage_cost_factor)
    return params


def _dispatch_params(cfg: ScenarioConfig, profiles: Dict[str, TimeSeries]) -> DispatchParams:
    dc = cfg.dispatch
    conventional = tuple(
        ConventionalTech(name, marginal_cost(replace(THERMAL_TECHNOLOGIES[name], co2_price=dc.co2_price)), cap)
        for name, cap in dc.conventional_mw.items()
    )
    renewables = []
    for name, cap in dc.renewable_mw.items():
        cf = profiles.get(f"res_cf.{name}")
        if cf is None:
            raise ValueError(f"no capacity factor profile for renewable technology {name!r}")
        renewables.append(RenewableTech(name, cap, cf))
    storage = ()
    if dc.pumped_hydro_power_mw > 0 and dc.pumped_hydro_energy_mwh > 0:
        storage = (pumped_hydro(dc.pumped_hydro_power_mw, dc.pumped_hydro_energy_mwh),)
    return DispatchParams(
        demand=profiles["system_demand"],
        conventional=conventional,
        renewables=tuple(renewables),
        storage=storage,
        voll=dc.voll,
    )


def build_inputs(cfg: ScenarioConfig) -> Tuple[ProsumageParams, DispatchParams, Tariff]:
    profiles = load_profiles(cfg)
    p_hh = _household_params(cfg, profiles["demand"], profiles["pv_cf"])
    p_disp = _dispatch_params(cfg, profiles)
    logger.info(
        "scenario %s: %d samples of %g h from hour %d (%s data)",
        cfg.name,
        p_hh.horizon,
        p_hh.step_hours,
        p_hh.demand.start_index,
        "synthetic" if cfg.data.directory is None else cfg.data.directory,
    )
    return p_hh, p_disp, tariff_from_config(cfg.tariff)
