"""Power-sector dispatch with exogenous capacities (MW, MWh, EUR/MWh).

The hourly energy-balance dual is the wholesale price. Because LP duals of
degenerate vertices are not unique, the solution also carries a canonical
price series: the merit-order price wherever no storage is active, the LP
dual otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.inputs.costs import PUMPED_HYDRO_EFFICIENCY, THERMAL_TECHNOLOGIES, marginal_cost
from core.inputs.timeseries import HorizonMismatchError, TimeSeries, Unit, require_same_horizon
from core.lp.program import LinearProgram, LpBuilder
from core.lp.solver import LpSolution, require_optimal, solve_lp

logger = logging.getLogger(__name__)

DEFAULT_VOLL = 3000.0
_ACTIVE = 1e-6


@dataclass(frozen=True)
class ConventionalTech:
    name: str
    marginal_cost: float
    capacity: float

    def __post_init__(self):
        if self.capacity < 0 or self.marginal_cost < 0:
            raise ValueError(f"{self.name}: capacity and marginal cost must be non-negative")


@dataclass(frozen=True)
class RenewableTech:
    name: str
    capacity: float
    cf: TimeSeries

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError(f"{self.name}: capacity must be non-negative")
        if self.cf.unit is not Unit.FRACTION:
            raise ValueError(f"{self.name}: availability must be a capacity factor series")

    def available(self) -> np.ndarray:
        return self.cf.values * self.capacity


@dataclass(frozen=True)
class StorageTech:
    name: str
    efficiency: float
    energy_capacity: float
    power_capacity: float

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"{self.name}: efficiency must lie in (0, 1]")
        if self.energy_capacity < 0 or self.power_capacity < 0:
            raise ValueError(f"{self.name}: capacities must be non-negative")

    @property
    def charge_factor(self) -> float:
        return (1.0 + self.efficiency) / 2.0

    @property
    def discharge_factor(self) -> float:
        return 2.0 / (1.0 + self.efficiency)


@dataclass(frozen=True)
class DispatchParams:
    """Non-prosumage demand plus the generation and storage fleet.

    ``voll`` prices the lost-load slack; ``None`` disables the slack, which
    makes the model infeasible whenever demand exceeds supply.
    """

    demand: TimeSeries
    conventional: Tuple[ConventionalTech, ...] = ()
    renewables: Tuple[RenewableTech, ...] = ()
    storage: Tuple[StorageTech, ...] = ()
    voll: Optional[float] = DEFAULT_VOLL

    def __post_init__(self):
        object.__setattr__(self, "conventional", tuple(self.conventional))
        object.__setattr__(self, "renewables", tuple(self.renewables))
        object.__setattr__(self, "storage", tuple(self.storage))
        names = [t.name for t in (*self.conventional, *self.renewables, *self.storage)]
        if len(set(names)) != len(names):
            raise ValueError("technology names must be unique")
        if self.voll is not None and self.voll <= 0:
            raise ValueError("voll must be positive")
        require_same_horizon(self.demand, *(r.cf for r in self.renewables))

    @property
    def step_hours(self) -> float:
        return self.demand.step_hours

    @property
    def horizon(self) -> int:
        return len(self.demand)

    def renewable_supply(self) -> np.ndarray:
        supply = np.zeros(self.horizon)
        for tech in self.renewables:
            supply += tech.available()
        return supply


def default_conventional(capacities_mw: Mapping[str, float]) -> Tuple[ConventionalTech, ...]:
    """Conventional fleet with marginal costs from the 2030 fuel assumptions."""
    return tuple(
        ConventionalTech(name, marginal_cost(THERMAL_TECHNOLOGIES[name]), float(cap))
        for name, cap in capacities_mw.items()
    )


def pumped_hydro(power_mw: float, energy_mwh: float) -> StorageTech:
    return StorageTech("pumped_hydro", PUMPED_HYDRO_EFFICIENCY, energy_mwh, power_mw)


@dataclass(frozen=True)
class HouseholdExchange:
    """Aggregate prosumage grid draw ``e_m2pro`` and feed-in ``g_pro2m`` in MW."""

    e_m2pro: np.ndarray
    g_pro2m: np.ndarray

    def __post_init__(self):
        e = np.array(self.e_m2pro, dtype=float)
        g = np.array(self.g_pro2m, dtype=float)
        if e.shape != g.shape:
            raise HorizonMismatchError("grid draw and feed-in series differ in length")
        e.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "e_m2pro", e)
        object.__setattr__(self, "g_pro2m", g)

    @classmethod
    def zeros(cls, n: int) -> "HouseholdExchange":
        return cls(np.zeros(n), np.zeros(n))

    @property
    def net(self) -> np.ndarray:
        return self.e_m2pro - self.g_pro2m


@dataclass(frozen=True)
class DispatchSolution:
    g_con: Mapping[str, np.ndarray]
    g_res: Mapping[str, np.ndarray]
    cu_res: Mapping[str, np.ndarray]
    sto_in: Mapping[str, np.ndarray]
    sto_out: Mapping[str, np.ndarray]
    sto_level: Mapping[str, np.ndarray]
    lost_load: np.ndarray
    prices: np.ndarray
    dual_prices: np.ndarray
    merit_prices: np.ndarray
    price_degenerate: np.ndarray
    storage_active: np.ndarray
    z_sys: float
    step_hours: float
    start_index: int
    multipliers: Mapping[str, np.ndarray] = field(default_factory=dict, repr=False)
    lp_solution: Optional[LpSolution] = field(default=None, repr=False, compare=False)

    @property
    def hours(self) -> np.ndarray:
        return self.start_index + np.arange(self.prices.size) * self.step_hours

    def price_series(self) -> TimeSeries:
        return TimeSeries(self.prices, self.step_hours, self.start_index, Unit.EUR_PER_MWH)

    def lost_load_energy(self) -> float:
        return float(self.lost_load.sum() * self.step_hours)


def _exchange_or_zero(p: DispatchParams, hh_net: Optional[HouseholdExchange]) -> HouseholdExchange:
    if hh_net is None:
        return HouseholdExchange.zeros(p.horizon)
    if hh_net.e_m2pro.size != p.horizon:
        raise HorizonMismatchError(
            f"household exchange has {hh_net.e_m2pro.size} samples, dispatch horizon {p.horizon}"
        )
    return hh_net


def build_dispatch_lp(p: DispatchParams, hh_net: Optional[HouseholdExchange] = None) -> LinearProgram:
    """Cost-minimal dispatch meeting demand plus net prosumage draw every hour."""

    hh = _exchange_or_zero(p, hh_net)
    H, dt = p.horizon, p.step_hours
    hours = np.arange(H)
    b = LpBuilder("dispatch")
    supply = []
    con_vars = {}
    for tech in p.conventional:
        g = b.add_variables(f"g_con.{tech.name}", H, cost=dt * tech.marginal_cost)
        con_vars[tech.name] = g
        supply.append((g, dt))
    res_vars = {}
    for tech in p.renewables:
        g = b.add_variables(f"g_res.{tech.name}", H)
        cu = b.add_variables(f"cu_res.{tech.name}", H)
        res_vars[tech.name] = (g, cu)
        supply.append((g, dt))
    sto_vars = {}
    for tech in p.storage:
        s_in = b.add_variables(f"sto_in.{tech.name}", H)
        s_out = b.add_variables(f"sto_out.{tech.name}", H)
        lev = b.add_variables(f"sto_level.{tech.name}", H)
        sto_vars[tech.name] = (s_in, s_out, lev)
        supply += [(s_out, dt), (s_in, -dt)]
    if p.voll is None:
        ll = b.add_variables("lost_load", H, upper=0.0)
    else:
        ll = b.add_variables("lost_load", H, cost=dt * p.voll)
    supply.append((ll, dt))

    b.add_constraints("enbal", H, supply, "=", dt * (p.demand.values + hh.net))
    for tech in p.conventional:
        b.add_constraints(f"con_max.{tech.name}", H, [(con_vars[tech.name], 1.0)], "<=", tech.capacity)
    for tech in p.renewables:
        g, cu = res_vars[tech.name]
        b.add_constraints(f"res.{tech.name}", H, [(g, dt), (cu, dt)], "=", dt * tech.available())
    for tech in p.storage:
        s_in, s_out, lev = sto_vars[tech.name]
        b.add_constraints(
            f"sto.{tech.name}",
            H,
            [
                (lev, 1.0),
                (lev[:-1], -1.0, hours[1:]),
                (s_in, -dt * tech.charge_factor),
                (s_out, dt * tech.discharge_factor),
            ],
            "=",
            0.0,
        )
        b.add_constraints(f"sto_level_max.{tech.name}", H, [(lev, 1.0)], "<=", tech.energy_capacity)
        b.add_constraints(f"sto_in_max.{tech.name}", H, [(s_in, 1.0)], "<=", tech.power_capacity)
        b.add_constraints(f"sto_out_max.{tech.name}", H, [(s_out, 1.0)], "<=", tech.power_capacity)
    return b.build()


def _merit_order(p: DispatchParams) -> Tuple[np.ndarray, np.ndarray]:
    order = sorted(p.conventional, key=lambda t: (t.marginal_cost, t.name))
    costs = np.array([t.marginal_cost for t in order], dtype=float)
    cum = np.cumsum([t.capacity for t in order]) if order else np.zeros(0)
    return costs, np.asarray(cum, dtype=float)


def merit_order_price(p: DispatchParams, residual_demand: float, hour: Optional[int] = None) -> float:
    """Marginal cost of the cheapest unit with spare capacity.

    ``residual_demand`` is MW still to be served by conventional units. When
    ``hour`` is given, the renewable supply available in that hour is
    subtracted first. Surplus hours price at 0, unserved demand at VOLL.
    """

    if hour is not None:
        residual_demand = residual_demand - float(sum(t.available()[hour] for t in p.renewables))
    return float(merit_order_prices(p, np.array([residual_demand]))[0])


def merit_order_prices(p: DispatchParams, residual: np.ndarray) -> np.ndarray:
    costs, cum = _merit_order(p)
    residual = np.asarray(residual, dtype=float)
    # first technology whose cumulative capacity exceeds the residual
    idx = np.searchsorted(cum, residual, side="right")
    scarcity = p.voll if p.voll is not None else np.inf
    padded = np.append(costs, scarcity)
    out = padded[np.minimum(idx, costs.size)]
    return np.where(residual <= 0.0, 0.0, out)


def _degenerate_hours(p: DispatchParams, residual: np.ndarray) -> np.ndarray:
    _, cum = _merit_order(p)
    bounds = np.append(0.0, cum)
    near = np.abs(residual[:, None] - bounds[None, :]) <= _ACTIVE * (1.0 + bounds[None, :])
    return near.any(axis=1)


def _multipliers(sol: LpSolution) -> Dict[str, np.ndarray]:
    out = {}
    for name in sol.row_blocks:
        y = sol.dual(name)
        out[name] = y.copy() if name == "enbal" else -y
    return out


def solve_dispatch(
    p: DispatchParams,
    hh_net: Optional[HouseholdExchange] = None,
    tolerance: float = 1e-7,
) -> DispatchSolution:
    hh = _exchange_or_zero(p, hh_net)
    lp = build_dispatch_lp(p, hh)
    sol = require_optimal(solve_lp(lp, tolerance), "dispatch")
    return dispatch_solution(p, hh, sol)


def dispatch_solution(
    p: DispatchParams,
    hh_net: Optional[HouseholdExchange],
    sol: LpSolution,
    canonical: bool = True,
) -> DispatchSolution:
    """Wrap an optimal solution of ``build_dispatch_lp(p, hh_net)``.

    With ``canonical=False`` the reported prices are the LP duals in every
    hour, which is what a household saw when it was solved jointly with
    the dispatch.
    """

    hh = _exchange_or_zero(p, hh_net)
    H = p.horizon

    def per_tech(prefix: str, techs: Sequence) -> Dict[str, np.ndarray]:
        return {t.name: np.maximum(sol.value(f"{prefix}.{t.name}"), 0.0) for t in techs}

    sto_in = per_tech("sto_in", p.storage)
    sto_out = per_tech("sto_out", p.storage)
    active = np.zeros(H, dtype=bool)
    for name in sto_in:
        active |= (sto_in[name] > _ACTIVE) | (sto_out[name] > _ACTIVE)

    residual = p.demand.values + hh.net - p.renewable_supply()
    merit = merit_order_prices(p, residual)
    dual = sol.dual("enbal").copy()
    prices = np.where(active, dual, merit) if canonical else dual.copy()
    degenerate = _degenerate_hours(p, residual) & ~active
    disagree = ~active & ~degenerate & (np.abs(dual - merit) > 1e-6 * (1.0 + np.abs(merit)))
    if disagree.any():
        logger.info("dispatch: LP dual and merit-order price differ in %d regular hours", int(disagree.sum()))
    if logger.isEnabledFor(logging.DEBUG) and np.any(np.abs(dual - prices) > 1e-9):
        logger.debug("dispatch LP duals: %s", np.array2string(dual, precision=4, threshold=H + 1))
        logger.debug("dispatch canonical prices: %s", np.array2string(prices, precision=4, threshold=H + 1))

    lost = np.maximum(sol.value("lost_load"), 0.0)
    if lost.sum() > _ACTIVE:
        logger.warning(
            "dispatch: lost load of %.6g MWh in %d hours", float(lost.sum() * p.step_hours), int((lost > _ACTIVE).sum())
        )

    result = DispatchSolution(
        g_con=per_tech("g_con", p.conventional),
        g_res=per_tech("g_res", p.renewables),
        cu_res=per_tech("cu_res", p.renewables),
        sto_in=sto_in,
        sto_out=sto_out,
        sto_level=per_tech("sto_level", p.storage),
        lost_load=lost,
        prices=prices,
        dual_prices=dual,
        merit_prices=merit,
        price_degenerate=degenerate,
        storage_active=active,
        z_sys=sol.objective,
        step_hours=p.step_hours,
        start_index=p.demand.start_index,
        multipliers=_multipliers(sol),
        lp_solution=sol,
    )
    logger.info("dispatch: Z_sys %.6g EUR, mean price %.4g EUR/MWh", result.z_sys, float(prices.mean()) if H else 0.0)
    return result
