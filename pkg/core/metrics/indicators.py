"""Household and system indicators of a solved scenario.

Per-household quantities are kW, kWh and EUR over the solved horizon.
Ratios with an empty denominator (no PV generation, no demand) are 0 and
raise a flag in :class:`MetricsReport` instead of an error.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from core.inputs.timeseries import TimeSeries
from core.models.dispatch import DispatchParams, DispatchSolution
from core.models.household import (
    HouseholdSolution,
    ProsumageParams,
    Tariff,
    classify_regime,
    lcoe_pv,
    lcos,
    prices_per_kwh,
)

# |net exchange| at or below 1 W counts as a zero-residual-load hour
ZERO_LOAD_KW = 1e-3


@dataclass(frozen=True)
class BillDecomposition:
    investment_pv: float
    investment_sto: float
    grid_cost_energy: float
    grid_cost_other: float
    grid_cost_fixed: float
    feed_in_revenue: float

    @property
    def net_total(self) -> float:
        return (
            self.investment_pv
            + self.investment_sto
            + self.grid_cost_energy
            + self.grid_cost_other
            + self.grid_cost_fixed
            - self.feed_in_revenue
        )

    def as_dict(self) -> Dict[str, float]:
        out = asdict(self)
        out["net_total"] = self.net_total
        return out


@dataclass(frozen=True)
class MetricsReport:
    sc_rate: float
    autarky_rate: float
    autarky_rate_from_grid: float
    bill: BillDecomposition
    rldc: np.ndarray = field(repr=False)
    hours_positive_share: float
    hours_zero_share: float
    hours_negative_share: float
    peak_demand: float
    peak_feed_in: float
    non_energy_contribution: float
    pv_capacity: float
    storage_energy_capacity: float
    storage_power_capacity: float
    z_pro: float
    regime: str
    lcoe: float
    lcos: float
    pure_consumer_bill: float
    pure_consumer_contribution: float
    demand_from_pv: float
    demand_from_storage: float
    demand_from_grid: float
    pv_self_consumed: float
    pv_stored: float
    pv_fed_in: float
    pv_curtailed: float
    mean_feed_in_price: float
    mean_energy_price: float
    mean_wholesale_price: float = float("nan")
    lost_load_mwh: float = 0.0
    lost_load_hours: int = 0
    res_curtailment_mwh: float = 0.0
    aggregate_pv_mw: float = 0.0
    flags: Tuple[str, ...] = ()

    def scalars(self) -> Dict[str, object]:
        """Flat record of every scalar field, bill components prefixed ``bill_``."""
        out: Dict[str, object] = {}
        for name, value in asdict(self).items():
            if name in ("rldc", "bill"):
                continue
            out[name] = ";".join(value) if name == "flags" else value
        for name, value in self.bill.as_dict().items():
            out[f"bill_{name}"] = value
        return out


def _energy(series: np.ndarray, dt: float) -> float:
    return float(np.sum(series) * dt)


def self_consumption_rate(sol: HouseholdSolution) -> float:
    generated = _energy(sol.pv_gen, sol.step_hours)
    if generated <= 0:
        return 0.0
    return (_energy(sol.g_pro2pro, sol.step_hours) + _energy(sol.sto_in, sol.step_hours)) / generated


def autarky_rate(sol: HouseholdSolution) -> float:
    demand = _energy(sol.demand, sol.step_hours)
    if demand <= 0:
        return 0.0
    return (_energy(sol.g_pro2pro, sol.step_hours) + _energy(sol.sto_out, sol.step_hours)) / demand


def autarky_rate_from_grid(sol: HouseholdSolution) -> float:
    """Autarky as one minus the grid share of demand."""
    demand = _energy(sol.demand, sol.step_hours)
    if demand <= 0:
        return 0.0
    return 1.0 - _energy(sol.e_m2pro, sol.step_hours) / demand


def bill_decomposition(
    sol: HouseholdSolution,
    t: Tariff,
    p: ProsumageParams,
    prices: Optional[TimeSeries] = None,
) -> BillDecomposition:
    """Split the household's annual expenditure into its objective terms.

    ``prices`` overrides the wholesale prices the solution was computed
    with; without it the stored hourly tariffs are used.
    """

    dt = sol.step_hours
    if prices is None:
        t_ener, t_prod = sol.energy_prices, sol.feed_in_prices
    else:
        price_kwh = prices_per_kwh(prices)
        t_ener = t.energy_prices(price_kwh, sol.e_m2pro.size)
        t_prod = t.feed_in_prices(price_kwh, sol.e_m2pro.size)
    return BillDecomposition(
        investment_pv=p.pv_capacity_cost * sol.n_pv,
        investment_sto=p.storage_energy_cost * sol.n_sto_e + p.storage_power_cost * sol.n_sto_p,
        grid_cost_energy=float(np.sum(sol.e_m2pro * t_ener) * dt),
        grid_cost_other=float(np.sum(sol.e_m2pro) * dt * t.other_charge),
        grid_cost_fixed=t.fixed_charge * p.cost_scale,
        feed_in_revenue=float(np.sum(sol.g_pro2m * t_prod) * dt),
    )


def residual_load_duration_curve(sol: HouseholdSolution) -> np.ndarray:
    """Net grid exchange per household (kW), sorted in descending order."""
    return np.sort(sol.net_exchange)[::-1]


def rldc_shares(curve: np.ndarray, zero_kw: float = ZERO_LOAD_KW) -> Tuple[float, float, float]:
    """Shares of hours with positive, zero and negative residual load."""
    n = curve.size
    if n == 0:
        return 0.0, 0.0, 0.0
    pos = float(np.count_nonzero(curve > zero_kw)) / n
    neg = float(np.count_nonzero(curve < -zero_kw)) / n
    return pos, 1.0 - pos - neg, neg


def peaks(sol: HouseholdSolution) -> Tuple[float, float]:
    """Peak grid draw and peak feed-in per household, kW."""
    peak_demand = float(sol.e_m2pro.max(initial=0.0))
    peak_feed_in = float(sol.g_pro2m.max(initial=0.0))
    return peak_demand, peak_feed_in


def non_energy_contribution(sol: HouseholdSolution, t: Tariff, cost_scale: float = 1.0) -> float:
    """Payments towards grid fees, levies and taxes: other charges plus fixed part."""
    return _energy(sol.e_m2pro, sol.step_hours) * t.other_charge + t.fixed_charge * cost_scale


def pure_consumer_bill(demand: TimeSeries, t: Tariff, prices_kwh: Optional[np.ndarray] = None, cost_scale: float = 1.0) -> float:
    """Bill of a household without PV or battery under tariff ``t``."""
    t_ener = t.energy_prices(prices_kwh, len(demand))
    return float(np.sum(demand.values * (t_ener + t.other_charge)) * demand.step_hours) + t.fixed_charge * cost_scale


def pure_consumer_contribution(demand: TimeSeries, t: Tariff, cost_scale: float = 1.0) -> float:
    return demand.energy() * t.other_charge + t.fixed_charge * cost_scale


def _weighted_mean(values: np.ndarray, weights: np.ndarray) -> float:
    total = float(np.sum(weights))
    return float(np.sum(values * weights) / total) if total > 0 else 0.0


def compute_metrics(
    hh: HouseholdSolution,
    t: Tariff,
    p_hh: ProsumageParams,
    dispatch: Optional[DispatchSolution] = None,
    p_disp: Optional[DispatchParams] = None,
) -> MetricsReport:
    dt = hh.step_hours
    flags = []
    if _energy(hh.pv_gen, dt) <= 0:
        flags.append("no_pv_generation")
    if _energy(hh.demand, dt) <= 0:
        flags.append("no_demand")

    curve = residual_load_duration_curve(hh)
    pos, zero, neg = rldc_shares(curve)
    peak_demand, peak_feed_in = peaks(hh)
    bill = bill_decomposition(hh, t, p_hh)
    mean_fit = _weighted_mean(hh.feed_in_prices, hh.g_pro2m)
    mean_energy = _weighted_mean(hh.energy_prices, hh.e_m2pro)

    # regime inputs: time-averaged tariffs, so RTP scenarios classify by their mean level
    fit_level = float(np.mean(hh.feed_in_prices)) if hh.feed_in_prices.size else 0.0
    retail_level = (float(np.mean(hh.energy_prices)) if hh.energy_prices.size else 0.0) + t.other_charge
    lcoe = lcoe_pv(p_hh)
    lcos_value = lcos(p_hh)
    regime = classify_regime(lcoe, lcos_value, retail_level, fit_level)

    system = {}
    if dispatch is not None and p_disp is not None:
        system = dict(
            mean_wholesale_price=_weighted_mean(dispatch.prices, p_disp.demand.values),
            lost_load_mwh=dispatch.lost_load_energy(),
            lost_load_hours=int(np.count_nonzero(dispatch.lost_load > 1e-6)),
            res_curtailment_mwh=float(sum(cu.sum() for cu in dispatch.cu_res.values()) * dispatch.step_hours),
        )

    return MetricsReport(
        sc_rate=self_consumption_rate(hh),
        autarky_rate=autarky_rate(hh),
        autarky_rate_from_grid=autarky_rate_from_grid(hh),
        bill=bill,
        rldc=curve,
        hours_positive_share=pos,
        hours_zero_share=zero,
        hours_negative_share=neg,
        peak_demand=peak_demand,
        peak_feed_in=peak_feed_in,
        non_energy_contribution=non_energy_contribution(hh, t, p_hh.cost_scale),
        pv_capacity=hh.n_pv,
        storage_energy_capacity=hh.n_sto_e,
        storage_power_capacity=hh.n_sto_p,
        z_pro=hh.z_pro,
        regime=regime,
        lcoe=lcoe,
        lcos=lcos_value,
        pure_consumer_bill=pure_consumer_bill(p_hh.demand, t, hh.energy_prices if t.energy_rtp else None, p_hh.cost_scale),
        pure_consumer_contribution=pure_consumer_contribution(p_hh.demand, t, p_hh.cost_scale),
        demand_from_pv=_energy(hh.g_pro2pro, dt),
        demand_from_storage=_energy(hh.sto_out, dt),
        demand_from_grid=_energy(hh.e_m2pro, dt),
        pv_self_consumed=_energy(hh.g_pro2pro, dt),
        pv_stored=_energy(hh.sto_in, dt),
        pv_fed_in=_energy(hh.g_pro2m, dt),
        pv_curtailed=_energy(hh.cu, dt),
        mean_feed_in_price=mean_fit,
        mean_energy_price=mean_energy,
        aggregate_pv_mw=hh.n_pv * hh.n_households / 1000.0,
        flags=tuple(flags),
        **system,
    )
