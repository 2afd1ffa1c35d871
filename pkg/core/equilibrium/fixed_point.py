"""Household and power-sector equilibrium.

Fixed tariffs decouple the two agents: the household is solved once and
its aggregate exchange enters one dispatch run. Real-time tariffs couple
them through the wholesale price. Each iteration is one household response
to a price guess followed by one dispatch; the guess moves by a damped step
towards the new prices and the step is halved whenever the price change
stops shrinking. Best responses are vertices, so the price map is piecewise
constant and may cycle; after repeated stalls or a detected cycle the
remaining iterations solve both agents in one LP (see
``core.equilibrium.coupled``). The seeding dispatch without prosumage is not
counted as an iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.equilibrium.coupled import solve_coupled
from core.inputs.timeseries import HorizonMismatchError, TimeSeries, Unit
from core.metrics.indicators import MetricsReport, compute_metrics
from core.models.dispatch import DispatchParams, DispatchSolution, HouseholdExchange, solve_dispatch
from core.models.household import FeedInMode, HouseholdSolution, ProsumageParams, Tariff, solve_household
from core.qc.kkt import KktReport, check_dispatch_kkt, check_household_kkt

logger = logging.getLogger(__name__)

MAX_CYCLE = 10
STALL_LIMIT = 2
# scaled gap between carried-over and re-chosen fixed-tariff flows of the joint LP
CARRY_TOLERANCE = 1e-6


class EquilibriumConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    damping: float = Field(0.5, gt=0.0, le=1.0)
    price_tolerance: float = Field(1e-4, gt=0.0, description="EUR/kWh")
    max_iterations: int = Field(50, ge=1)
    kkt_tolerance: float = Field(1e-6, gt=0.0)
    lp_tolerance: float = Field(1e-7, gt=0.0)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    max_price_change: float
    z_pro: float
    z_sys: float
    hh_kkt_residual: float
    disp_kkt_residual: float


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    tariff: Tariff
    household: HouseholdSolution
    dispatch: DispatchSolution
    exchange: HouseholdExchange
    iterations: int
    converged: bool
    household_kkt: KktReport
    dispatch_kkt: KktReport
    history: Tuple[IterationRecord, ...]
    household_params: ProsumageParams = field(repr=False)
    dispatch_params: DispatchParams = field(repr=False)
    config: EquilibriumConfig = field(default_factory=EquilibriumConfig)
    household_prices: Optional[TimeSeries] = field(default=None, repr=False)
    cycle_length: Optional[int] = None
    residual_band: Optional[Tuple[float, float]] = None
    metrics: Optional[MetricsReport] = field(default=None, repr=False)

    @property
    def hh_kkt_residual(self) -> float:
        return self.household_kkt.max_residual

    @property
    def disp_kkt_residual(self) -> float:
        return self.dispatch_kkt.max_residual

    @property
    def last_price_change(self) -> float:
        return self.history[-1].max_price_change if self.history else float("nan")


@dataclass(frozen=True)
class JointKktReport:
    """Residuals of both agents plus the price-coupling identity."""

    conditions: KktReport
    coupling_residual: Optional[float]
    coupling_tolerance: float

    @property
    def coupling_applicable(self) -> bool:
        return self.coupling_residual is not None

    @property
    def ok(self) -> bool:
        coupled = not self.coupling_applicable or self.coupling_residual <= self.coupling_tolerance
        return self.conditions.ok and coupled

    def listing(self) -> Dict[str, object]:
        out: Dict[str, object] = dict(self.conditions.residuals)
        for name in self.conditions.not_applicable:
            out[name] = "not applicable"
        out["coupling.price"] = self.coupling_residual if self.coupling_applicable else "not applicable"
        return out


def _demand_weighted_price(p: DispatchParams, prices: np.ndarray) -> float:
    weights = p.demand.values
    total = float(weights.sum())
    return float((weights * prices).sum() / total) if total > 0 else 0.0


def calibrate_energy_charge(p: DispatchParams, tolerance: float = 1e-7) -> float:
    """Mean wholesale price (EUR/kWh) of a dispatch run without prosumage."""

    disp = solve_dispatch(p, HouseholdExchange.zeros(p.horizon), tolerance)
    value = _demand_weighted_price(p, disp.prices) / 1000.0
    logger.info("calibrated energy charge %.5f EUR/kWh", value)
    return value


def _exchange(hh: HouseholdSolution) -> HouseholdExchange:
    e, g = hh.aggregate_exchange()
    return HouseholdExchange(e, g)


def _record(k, change, hh, disp, hk, dk) -> IterationRecord:
    return IterationRecord(k, change, hh.z_pro, disp.z_sys, hk.max_residual, dk.max_residual)


def _cycle_length(history: List[np.ndarray], tol: float) -> Optional[int]:
    last = history[-1]
    for lag in range(2, min(MAX_CYCLE, len(history) - 1) + 1):
        if np.max(np.abs(last - history[-1 - lag]), initial=0.0) <= tol:
            return lag
    return None


def solve_scenario(
    tariff: Tariff,
    p_hh: ProsumageParams,
    p_disp: DispatchParams,
    cfg: EquilibriumConfig = EquilibriumConfig(),
    name: str = "scenario",
) -> ScenarioResult:
    """Equilibrium of one scenario; never raises for non-convergence."""

    if len(p_hh.demand) != p_disp.horizon or p_hh.step_hours != p_disp.step_hours:
        raise HorizonMismatchError("household and power-sector profiles cover different horizons")
    if not tariff.needs_prices:
        return _solve_fixed(tariff, p_hh, p_disp, cfg, name)
    return _solve_rtp(tariff, p_hh, p_disp, cfg, name)


def _solve_fixed(tariff, p_hh, p_disp, cfg, name) -> ScenarioResult:
    logger.info("scenario %s: fixed tariff, single pass", name)
    hh = solve_household(p_hh, tariff, None, cfg.lp_tolerance)
    exch = _exchange(hh)
    disp = solve_dispatch(p_disp, exch, cfg.lp_tolerance)
    hk = check_household_kkt(p_hh, tariff, None, hh, cfg.kkt_tolerance)
    dk = check_dispatch_kkt(p_disp, exch, disp, cfg.kkt_tolerance)
    converged = hk.ok and dk.ok
    return ScenarioResult(
        name=name,
        tariff=tariff,
        household=hh,
        dispatch=disp,
        exchange=exch,
        iterations=1,
        converged=converged,
        household_kkt=hk,
        dispatch_kkt=dk,
        history=(_record(1, 0.0, hh, disp, hk, dk),),
        household_params=p_hh,
        dispatch_params=p_disp,
        config=cfg,
        metrics=compute_metrics(hh, tariff, p_hh, disp, p_disp),
    )


def _solve_rtp(tariff, p_hh, p_disp, cfg, name) -> ScenarioResult:
    step, start = p_disp.step_hours, p_disp.demand.start_index

    def as_series(values: np.ndarray) -> TimeSeries:
        return TimeSeries(values, step, start, Unit.EUR_PER_MWH)

    # prices of a run without prosumage seed the first household response
    guess = solve_dispatch(p_disp, HouseholdExchange.zeros(p_disp.horizon), cfg.lp_tolerance).prices.copy()
    damping = cfg.damping
    previous_change = np.inf
    stalls = 0
    joint = False
    carry: Optional[HouseholdExchange] = None
    carry_step, previous_gap = 1.0, np.inf
    history: List[IterationRecord] = []
    price_history: List[np.ndarray] = []
    best = None
    converged = False

    for k in range(1, cfg.max_iterations + 1):
        if joint:
            cp = solve_coupled(tariff, p_hh, p_disp, carry, cfg.lp_tolerance)
            hh, disp, exch, prices_ts = cp.household, cp.dispatch, cp.exchange, cp.prices
            new = prices_ts.values.copy()
            consistent = cp.carried_gap <= CARRY_TOLERANCE
        else:
            prices_ts = as_series(guess)
            hh = solve_household(p_hh, tariff, prices_ts, cfg.lp_tolerance)
            exch = _exchange(hh)
            disp = solve_dispatch(p_disp, exch, cfg.lp_tolerance)
            new = disp.prices.copy()
            consistent = True
        change = float(np.max(np.abs(new - guess), initial=0.0)) / 1000.0
        price_history.append(new / 1000.0)
        hk = check_household_kkt(p_hh, tariff, prices_ts, hh, cfg.kkt_tolerance)
        dk = check_dispatch_kkt(p_disp, exch, disp, cfg.kkt_tolerance)
        history.append(_record(k, change, hh, disp, hk, dk))
        logger.info("scenario %s: iteration %d, max price change %.3g EUR/kWh", name, k, change)
        if best is None or (not consistent, change) < best[0]:
            best = ((not consistent, change), hh, disp, exch, prices_ts, hk, dk)
        if consistent and change <= cfg.price_tolerance:
            converged = hk.ok and dk.ok
            break

        if joint:
            if cp.carried_gap >= previous_gap:
                carry_step *= 0.5
            previous_gap = cp.carried_gap
            carry = _blend(carry, _exchange(hh), carry_step)
            guess = new
            continue
        if change >= previous_change:
            damping *= 0.5
            stalls += 1
        previous_change = change
        cycling = len(price_history) > 2 and _cycle_length(price_history, cfg.price_tolerance) is not None
        if stalls >= STALL_LIMIT or cycling:
            # best responses jump between price vertices; solve both agents in one LP instead
            logger.info("scenario %s: price iteration stalls, switching to the joint household and dispatch LP", name)
            joint = True
            carry = _exchange(hh)
        else:
            guess = damping * new + (1.0 - damping) * guess

    (_, change), hh, disp, exch, prices_ts, hk, dk = best
    cycle = band = None
    if not converged:
        cycle = _cycle_length(price_history, cfg.price_tolerance) if len(price_history) > 2 else None
        recent = [r.max_price_change for r in history[-MAX_CYCLE:]]
        band = (float(min(recent)), float(max(recent)))
        logger.warning(
            "scenario %s: real-time price iteration not converged after %d iterations "
            "(best change %.3g EUR/kWh, cycle length %s, recent band %.3g..%.3g)",
            name, len(history), change, cycle, band[0], band[1],
        )
    return ScenarioResult(
        name=name,
        tariff=tariff,
        household=hh,
        dispatch=disp,
        exchange=exch,
        iterations=len(history),
        converged=converged,
        household_kkt=hk,
        dispatch_kkt=dk,
        history=tuple(history),
        household_params=p_hh,
        dispatch_params=p_disp,
        config=cfg,
        household_prices=prices_ts,
        cycle_length=cycle,
        residual_band=band,
        metrics=compute_metrics(hh, tariff, p_hh, disp, p_disp),
    )


def _blend(old: HouseholdExchange, new: HouseholdExchange, weight: float) -> HouseholdExchange:
    return HouseholdExchange(
        old.e_m2pro + weight * (new.e_m2pro - old.e_m2pro),
        old.g_pro2m + weight * (new.g_pro2m - old.g_pro2m),
    )


def joint_kkt_report(result: ScenarioResult) -> JointKktReport:
    """Both agents' optimality conditions plus, for real-time tariffs, price coupling.

    The coupling residual is the largest hourly gap (EUR/kWh) between the
    tariff the household faced and the tariff implied by the dispatch
    prices, premium included.
    """

    cfg = result.config
    t = result.tariff
    hk = check_household_kkt(result.household_params, t, result.household_prices, result.household, cfg.kkt_tolerance)
    dk = check_dispatch_kkt(result.dispatch_params, result.exchange, result.dispatch, cfg.kkt_tolerance)
    conditions = KktReport.merge([hk.prefixed("household"), dk.prefixed("dispatch")], cfg.kkt_tolerance)
    coupling = None
    if t.needs_prices:
        n = result.dispatch.prices.size
        faced = result.household_prices.values / 1000.0
        market = result.dispatch.prices / 1000.0
        gaps = []
        if t.energy_rtp:
            gaps.append(t.energy_prices(faced, n) - t.energy_prices(market, n))
        if t.feed_in is FeedInMode.RTP:
            gaps.append(t.feed_in_prices(faced, n) - t.feed_in_prices(market, n))
        coupling = float(max(np.max(np.abs(g), initial=0.0) for g in gaps))
    return JointKktReport(conditions, coupling, cfg.price_tolerance)
