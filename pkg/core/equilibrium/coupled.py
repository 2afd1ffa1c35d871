"""One joint LP for the household and the power sector under real-time tariffs.

The household problem is rescaled to the aggregate of all households
(MW, EUR) and stacked next to the dispatch problem. Flows priced at the
wholesale price enter the market energy balance as variables, so the
balance dual is the price both agents see. Flows under a fixed tariff stay
outside the market row and are carried over from earlier passes; a pass
is consistent once the household reproduces them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from core.inputs.timeseries import TimeSeries, Unit
from core.lp.program import rescale, stack, with_entries
from core.lp.solver import require_optimal, restrict_solution, solve_lp
from core.models.dispatch import (
    DispatchParams,
    DispatchSolution,
    HouseholdExchange,
    build_dispatch_lp,
    dispatch_solution,
)
from core.models.household import (
    FeedInMode,
    HouseholdSolution,
    ProsumageParams,
    Tariff,
    build_household_lp,
    household_solution,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoupledPass:
    household: HouseholdSolution
    dispatch: DispatchSolution
    exchange: HouseholdExchange
    prices: TimeSeries
    carried_gap: float


def _gap(new: np.ndarray, old: np.ndarray) -> float:
    scale = 1.0 + float(np.max(np.abs(old), initial=0.0))
    return float(np.max(np.abs(new - old), initial=0.0)) / scale


def solve_coupled(
    tariff: Tariff,
    p_hh: ProsumageParams,
    p_disp: DispatchParams,
    carried: HouseholdExchange,
    tolerance: float = 1e-7,
) -> CoupledPass:
    """Solve both agents at once; fixed-tariff flows are taken from ``carried``.

    The household part is returned per household in kW and EUR with the
    market balance duals as its price series, the dispatch part with those
    duals as prices. ``carried_gap`` is the largest scaled difference between
    the carried-over flows and the ones the household now chooses.
    """

    H, dt, start = p_disp.horizon, p_disp.step_hours, p_disp.demand.start_index
    n = float(p_hh.n_households)
    k = n / 1000.0
    coupled_draw = tariff.energy_rtp
    coupled_feed_in = tariff.feed_in is FeedInMode.RTP
    e_carried, g_carried = carried.e_m2pro, carried.g_pro2m
    fixed = HouseholdExchange(
        np.zeros(H) if coupled_draw else e_carried,
        np.zeros(H) if coupled_feed_in else g_carried,
    )

    # market-priced parts of the household costs move into the market row
    zero = TimeSeries(np.zeros(H), dt, start, Unit.EUR_PER_MWH)
    hh_lp = rescale(build_household_lp(p_hh, tariff, zero), k, n)
    joint, parts = stack([("household", hh_lp), ("dispatch", build_dispatch_lp(p_disp, fixed))], "coupled")
    market = joint.rows("dispatch.enbal")
    rows, cols, vals = [], [], []
    if coupled_draw:
        rows.append(market)
        cols.append(joint.block("household.e_m2pro"))
        vals.append(np.full(H, -dt))
    if coupled_feed_in:
        rows.append(market)
        cols.append(joint.block("household.g_pro2m"))
        vals.append(np.full(H, dt))
    joint = with_entries(joint, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    sol = require_optimal(solve_lp(joint, tolerance), "coupled household and dispatch")

    prices = TimeSeries(sol.duals[market].copy(), dt, start, Unit.EUR_PER_MWH)
    hh_cols, hh_rows = parts["household"]
    hh_sub = restrict_solution(sol, build_household_lp(p_hh, tariff, prices), hh_cols, hh_rows, k, k / n)
    household = household_solution(p_hh, tariff, prices, hh_sub)

    e_new, g_new = household.aggregate_exchange()
    exchange = HouseholdExchange(
        e_new if coupled_draw else e_carried,
        g_new if coupled_feed_in else g_carried,
    )
    d_cols, d_rows = parts["dispatch"]
    disp_sub = restrict_solution(sol, build_dispatch_lp(p_disp, exchange), d_cols, d_rows)
    dispatch = dispatch_solution(p_disp, exchange, disp_sub, canonical=False)

    gaps = [0.0]
    if not coupled_draw:
        gaps.append(_gap(e_new, e_carried))
    if not coupled_feed_in:
        gaps.append(_gap(g_new, g_carried))
    carried_gap = max(gaps)
    logger.info(
        "coupled pass: Z_pro %.6g EUR, Z_sys %.6g EUR, carried-over flow gap %.3g",
        household.z_pro, dispatch.z_sys, carried_gap,
    )
    return CoupledPass(household, dispatch, exchange, prices, carried_gap)
