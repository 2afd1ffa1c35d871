"""Prosumage household: PV and battery sizing plus hourly dispatch as one LP.

One representative household is modelled in kW, kWh and EUR; tariffs are
EUR/kWh. Every hourly flow is average power over ``step_hours`` hours, so
volumetric terms are weighted by the step. Capacity costs are annual and are
only rescaled through ``ProsumageParams.cost_scale`` when the horizon covers
part of a year.

Multipliers are stored with the sign of the household Lagrangian: the
energy-balance price ``enbal`` and the PV value ``pv`` are free, all
capacity multipliers are non-negative.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from core.inputs.costs import (
    BATTERY_ROUNDTRIP_EFFICIENCY,
    PV_COSTS,
    STORAGE_ENERGY_COSTS,
    STORAGE_POWER_COSTS,
    annualized_cost,
)
from core.inputs.timeseries import TimeSeries, Unit, require_same_horizon
from core.lp.program import LinearProgram, LpBuilder
from core.lp.solver import LpSolution, require_optimal, solve_lp

logger = logging.getLogger(__name__)

DEFAULT_HOUSEHOLDS = 1_000_000
DEFAULT_PV_LIMIT_KW = 10.0
DEGENERATE_REDUCED_COST = 1e-8
_CAPACITY_ZERO = 1e-9


class FeedInMode(str, Enum):
    FIXED = "fixed"
    RTP = "rtp"
    PROHIBITED = "prohibited"


@dataclass(frozen=True)
class Tariff:
    """Retail and feed-in price structure of one scenario.

    ``feed_in_rate`` is the constant feed-in tariff in ``fixed`` mode and the
    premium on top of the wholesale price in ``rtp`` mode.
    """

    energy_charge: float = 0.05
    other_charge: float = 0.25
    fixed_charge: float = 0.0
    feed_in: FeedInMode = FeedInMode.FIXED
    feed_in_rate: float = 0.08
    feed_in_cap_fraction: Optional[float] = None
    energy_rtp: bool = False

    def __post_init__(self):
        object.__setattr__(self, "feed_in", FeedInMode(self.feed_in))
        for name in ("energy_charge", "other_charge", "fixed_charge", "feed_in_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        cap = self.feed_in_cap_fraction
        if cap is not None and not 0.0 < cap <= 1.0:
            raise ValueError(f"feed_in_cap_fraction must lie in (0, 1], got {cap}")

    @property
    def needs_prices(self) -> bool:
        return self.energy_rtp or self.feed_in is FeedInMode.RTP

    @property
    def volumetric_charge(self) -> float:
        """Constant retail price per kWh (energy plus other charges)."""
        return self.energy_charge + self.other_charge

    def energy_prices(self, prices_kwh: Optional[np.ndarray], n: int) -> np.ndarray:
        if self.energy_rtp:
            return _require_prices(prices_kwh, n, "retail energy charge")
        return np.full(n, float(self.energy_charge))

    def feed_in_prices(self, prices_kwh: Optional[np.ndarray], n: int) -> np.ndarray:
        if self.feed_in is FeedInMode.PROHIBITED:
            return np.zeros(n)
        if self.feed_in is FeedInMode.RTP:
            return _require_prices(prices_kwh, n, "feed-in tariff") + self.feed_in_rate
        return np.full(n, float(self.feed_in_rate))

    def with_energy_charge(self, value: float) -> "Tariff":
        return replace(self, energy_charge=float(value))


def _require_prices(prices_kwh: Optional[np.ndarray], n: int, what: str) -> np.ndarray:
    if prices_kwh is None:
        raise ValueError(f"real-time {what} requires a wholesale price series")
    prices_kwh = np.asarray(prices_kwh, dtype=float)
    if prices_kwh.shape != (n,):
        raise ValueError(f"price series has {prices_kwh.size} samples, household horizon {n}")
    return prices_kwh


def prices_per_kwh(prices: Optional[TimeSeries]) -> Optional[np.ndarray]:
    """Wholesale prices in EUR/kWh (dispatch duals come in EUR/MWh)."""
    if prices is None:
        return None
    if prices.unit is Unit.EUR_PER_MWH:
        return prices.values / 1000.0
    if prices.unit is Unit.EUR_PER_KWH:
        return np.asarray(prices.values, dtype=float)
    raise ValueError(f"price series must be EUR/MWh or EUR/kWh, got {prices.unit.value}")


@dataclass(frozen=True)
class ProsumageParams:
    """Cost, technology and profile inputs of the representative household.

    Costs are EUR per kW (kWh) and year. ``cost_scale`` is the share of a
    year the horizon covers; capacity costs and the fixed charge are
    multiplied by it.
    """

    demand: TimeSeries
    pv_cf: TimeSeries
    c_inv_pv: float = annualized_cost(PV_COSTS)
    c_fix_pv: float = PV_COSTS.annual_fixed_cost
    c_inv_sto_e: float = annualized_cost(STORAGE_ENERGY_COSTS)
    c_inv_sto_p: float = annualized_cost(STORAGE_POWER_COSTS)
    c_fix_sto: float = STORAGE_POWER_COSTS.annual_fixed_cost
    eta_sto: float = BATTERY_ROUNDTRIP_EFFICIENCY
    m_pv: float = DEFAULT_PV_LIMIT_KW
    n_households: int = DEFAULT_HOUSEHOLDS
    cost_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eta_sto <= 1.0:
            raise ValueError(f"eta_sto must lie in (0, 1], got {self.eta_sto}")
        if not self.m_pv > 0:
            raise ValueError("m_pv must be positive")
        if int(self.n_households) != self.n_households or self.n_households < 1:
            raise ValueError("n_households must be a positive integer")
        if not self.cost_scale > 0:
            raise ValueError("cost_scale must be positive")
        costs = (self.c_inv_pv, self.c_fix_pv, self.c_inv_sto_e, self.c_inv_sto_p, self.c_fix_sto)
        if min(costs) < 0:
            raise ValueError("capacity costs must be non-negative")
        require_same_horizon(self.demand, self.pv_cf)

    @property
    def step_hours(self) -> float:
        return self.demand.step_hours

    @property
    def horizon(self) -> int:
        return len(self.demand)

    @property
    def charge_factor(self) -> float:
        return (1.0 + self.eta_sto) / 2.0

    @property
    def discharge_factor(self) -> float:
        return 2.0 / (1.0 + self.eta_sto)

    @property
    def pv_capacity_cost(self) -> float:
        return (self.c_inv_pv + self.c_fix_pv) * self.cost_scale

    @property
    def storage_energy_cost(self) -> float:
        return (self.c_inv_sto_e + 0.5 * self.c_fix_sto) * self.cost_scale

    @property
    def storage_power_cost(self) -> float:
        return (self.c_inv_sto_p + 0.5 * self.c_fix_sto) * self.cost_scale

    def with_storage_cost_factor(self, factor: float) -> "ProsumageParams":
        return replace(
            self,
            c_inv_sto_e=self.c_inv_sto_e * factor,
            c_inv_sto_p=self.c_inv_sto_p * factor,
            c_fix_sto=self.c_fix_sto * factor,
        )


@dataclass(frozen=True)
class HouseholdSolution:
    n_pv: float
    n_sto_e: float
    n_sto_p: float
    g_pro2pro: np.ndarray
    g_pro2m: np.ndarray
    cu: np.ndarray
    sto_in: np.ndarray
    sto_out: np.ndarray
    sto_level: np.ndarray
    e_m2pro: np.ndarray
    pv_gen: np.ndarray
    demand: np.ndarray
    z_pro: float
    step_hours: float
    start_index: int
    energy_prices: np.ndarray
    feed_in_prices: np.ndarray
    multipliers: Mapping[str, np.ndarray] = field(default_factory=dict, repr=False)
    capacity_reduced_costs: Mapping[str, float] = field(default_factory=dict)
    degenerate_capacities: Tuple[str, ...] = ()
    n_households: int = DEFAULT_HOUSEHOLDS
    lp_solution: Optional[LpSolution] = field(default=None, repr=False, compare=False)

    @property
    def hours(self) -> np.ndarray:
        return self.start_index + np.arange(self.g_pro2pro.size) * self.step_hours

    @property
    def net_exchange(self) -> np.ndarray:
        """Grid draw minus feed-in per household, kW."""
        return self.e_m2pro - self.g_pro2m

    def aggregate_exchange(self) -> Tuple[np.ndarray, np.ndarray]:
        """Aggregate grid draw and feed-in of all households, MW."""
        k = self.n_households / 1000.0
        return self.e_m2pro * k, self.g_pro2m * k


def build_household_lp(p: ProsumageParams, t: Tariff, prices: Optional[TimeSeries] = None) -> LinearProgram:
    """Household cost minimisation (investment plus grid bill minus feed-in revenue).

    Raises ``ValueError`` when a real-time tariff lacks prices and
    ``HorizonMismatchError`` when the price horizon differs from the profiles.
    """

    H, dt = p.horizon, p.step_hours
    if prices is not None:
        require_same_horizon(p.demand, prices)
    price_kwh = prices_per_kwh(prices)
    t_ener = t.energy_prices(price_kwh, H)
    t_prod = t.feed_in_prices(price_kwh, H)
    d = p.demand.values
    phi = p.pv_cf.values
    hours = np.arange(H)

    b = LpBuilder("household")
    b.objective_offset = t.fixed_charge * p.cost_scale
    g2p = b.add_variables("g_pro2pro", H)
    feed_cap = 0.0 if t.feed_in is FeedInMode.PROHIBITED else np.inf
    g2m = b.add_variables("g_pro2m", H, upper=feed_cap, cost=-dt * t_prod)
    cu = b.add_variables("cu_pro", H)
    s_in = b.add_variables("sto_in", H)
    s_out = b.add_variables("sto_out", H)
    lev = b.add_variables("sto_level", H)
    e = b.add_variables("e_m2pro", H, cost=dt * (t_ener + t.other_charge))
    n_pv = b.add_variable("n_pv", cost=p.pv_capacity_cost)
    n_e = b.add_variable("n_sto_e", cost=p.storage_energy_cost)
    n_p = b.add_variable("n_sto_p", cost=p.storage_power_cost)

    b.add_constraints("enbal", H, [(g2p, dt), (s_out, dt), (e, dt)], "=", dt * d)
    b.add_constraints(
        "pv", H, [(g2p, dt), (g2m, dt), (cu, dt), (s_in, dt), (n_pv, -dt * phi)], "=", 0.0
    )
    b.add_constraints(
        "sto",
        H,
        [
            (lev, 1.0),
            (lev[:-1], -1.0, hours[1:]),
            (s_in, -dt * p.charge_factor),
            (s_out, dt * p.discharge_factor),
        ],
        "=",
        0.0,
    )
    b.add_constraints("sto_level_max", H, [(lev, 1.0), (n_e, -1.0)], "<=", 0.0)
    b.add_constraints("sto_in_max", H, [(s_in, 1.0), (n_p, -1.0)], "<=", 0.0)
    b.add_constraints("sto_out_max", H, [(s_out, 1.0), (n_p, -1.0)], "<=", 0.0)
    b.add_constraints("pv_max", 1, [(n_pv, 1.0)], "<=", p.m_pv)
    if t.feed_in_cap_fraction is not None and t.feed_in is not FeedInMode.PROHIBITED:
        b.add_constraints("feed_in_cap", H, [(g2m, 1.0), (n_pv, -t.feed_in_cap_fraction)], "<=", 0.0)
    return b.build()


def _multipliers(sol: LpSolution) -> Dict[str, np.ndarray]:
    out = {"enbal": sol.dual("enbal").copy()}
    for name in ("pv", "sto", "sto_level_max", "sto_in_max", "sto_out_max", "pv_max", "feed_in_cap"):
        if name in sol.row_blocks:
            out[name] = -sol.dual(name)
    return out


def solve_household(
    p: ProsumageParams,
    t: Tariff,
    prices: Optional[TimeSeries] = None,
    tolerance: float = 1e-7,
) -> HouseholdSolution:
    lp = build_household_lp(p, t, prices)
    sol = require_optimal(solve_lp(lp, tolerance), "household")
    return household_solution(p, t, prices, sol)


def household_solution(
    p: ProsumageParams,
    t: Tariff,
    prices: Optional[TimeSeries],
    sol: LpSolution,
) -> HouseholdSolution:
    """Wrap an optimal solution of ``build_household_lp(p, t, prices)``."""

    price_kwh = prices_per_kwh(prices)
    H = p.horizon

    caps = {"n_pv": sol.scalar("n_pv"), "n_sto_e": sol.scalar("n_sto_e"), "n_sto_p": sol.scalar("n_sto_p")}
    reduced = {k: float(sol.reduced(k)[0]) for k in caps}
    degenerate = tuple(
        k for k in caps if abs(caps[k]) <= _CAPACITY_ZERO and abs(reduced[k]) < DEGENERATE_REDUCED_COST
    )
    if degenerate:
        logger.info("household: flat objective along zero capacities %s", ", ".join(degenerate))

    level = sol.value("sto_level")
    if H and level[-1] > 1e-6:
        logger.warning("household storage ends the horizon at %.3g kWh instead of empty", level[-1])

    flows = {k: np.maximum(sol.value(k), 0.0) for k in ("g_pro2pro", "g_pro2m", "cu_pro", "sto_in", "sto_out", "sto_level", "e_m2pro")}
    result = HouseholdSolution(
        n_pv=max(caps["n_pv"], 0.0),
        n_sto_e=max(caps["n_sto_e"], 0.0),
        n_sto_p=max(caps["n_sto_p"], 0.0),
        g_pro2pro=flows["g_pro2pro"],
        g_pro2m=flows["g_pro2m"],
        cu=flows["cu_pro"],
        sto_in=flows["sto_in"],
        sto_out=flows["sto_out"],
        sto_level=flows["sto_level"],
        e_m2pro=flows["e_m2pro"],
        pv_gen=p.pv_cf.values * max(caps["n_pv"], 0.0),
        demand=np.asarray(p.demand.values, dtype=float),
        z_pro=sol.objective,
        step_hours=p.step_hours,
        start_index=p.demand.start_index,
        energy_prices=t.energy_prices(price_kwh, H),
        feed_in_prices=t.feed_in_prices(price_kwh, H),
        multipliers=_multipliers(sol),
        capacity_reduced_costs=reduced,
        degenerate_capacities=degenerate,
        n_households=int(p.n_households),
        lp_solution=sol,
    )
    logger.info(
        "household: PV %.4g kW, battery %.4g kWh / %.4g kW, Z_pro %.6g EUR",
        result.n_pv, result.n_sto_e, result.n_sto_p, result.z_pro,
    )
    return result


def lcoe_pv(p: ProsumageParams) -> float:
    """PV generation cost per kWh: annual capacity cost over full-load hours."""
    flh = p.pv_cf.energy()
    return float("inf") if flh <= 0 else p.pv_capacity_cost / flh


def lcos(p: ProsumageParams, hours_of_storage: float = 4.0) -> float:
    """Storage cost per kWh shifted, one full cycle per day.

    A kWh of energy capacity comes with ``1 / hours_of_storage`` kW of
    power capacity.
    """
    per_kwh = p.storage_energy_cost + p.storage_power_cost / hours_of_storage
    return per_kwh / (365.0 * p.cost_scale)


def classify_regime(lcoe: float, lcos_value: float, retail_volumetric: float, fit: float) -> str:
    """Investment incentive area for given levelized costs and tariffs.

    The battery areas E and F need the retail price to beat the opportunity
    cost of a stored kWh, which is the feed-in tariff or, when the tariff
    is below it, the generation cost; the spread must cover ``lcos_value``.
    """

    if min(lcoe, lcos_value, retail_volumetric, fit) < 0:
        raise ValueError("classification inputs must be non-negative")
    if lcoe >= max(fit, retail_volumetric):
        return "A"
    if fit >= retail_volumetric and fit > lcoe:
        return "B"
    if retail_volumetric - max(fit, lcoe) > lcos_value:
        return "F" if fit >= lcoe else "E"
    return "C" if fit >= lcoe else "D"
