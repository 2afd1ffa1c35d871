"""First-order optimality checks for the household and dispatch problems.

Every condition is evaluated from the primal values and the stored
multipliers alone, independent of the LP matrices, and reported as a
scaled residual:

* stationarity of a non-negative variable ``z`` with gradient ``F``:
  ``|min(F / sF, z / sz)|`` where ``sF`` is ``1 +`` the largest sum of
  absolute gradient terms and ``sz`` is ``1 +`` the largest ``|z|``;
* complementarity of an inequality slack with its multiplier, same form;
* balance rows: ``|lhs - rhs| / (1 + |rhs|)``.

Negative variables, slacks or multipliers show up as residuals too.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.inputs.timeseries import TimeSeries
from core.models.dispatch import DispatchParams, DispatchSolution, HouseholdExchange
from core.models.household import FeedInMode, HouseholdSolution, ProsumageParams, Tariff, prices_per_kwh

logger = logging.getLogger(__name__)

DEFAULT_KKT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class KktReport:
    residuals: Mapping[str, float]
    tolerance: float = DEFAULT_KKT_TOLERANCE
    not_applicable: Tuple[str, ...] = ()

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def worst_condition(self) -> Optional[str]:
        if not self.residuals:
            return None
        return max(self.residuals, key=lambda k: (self.residuals[k], k))

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tolerance

    def top(self, n: int = 5) -> List[Tuple[str, float]]:
        return sorted(self.residuals.items(), key=lambda kv: (-kv[1], kv[0]))[:n]

    def prefixed(self, prefix: str) -> "KktReport":
        return KktReport(
            {f"{prefix}.{k}": v for k, v in self.residuals.items()},
            self.tolerance,
            tuple(f"{prefix}.{k}" for k in self.not_applicable),
        )

    @staticmethod
    def merge(reports: Iterable["KktReport"], tolerance: float | None = None) -> "KktReport":
        residuals: Dict[str, float] = {}
        na: List[str] = []
        tols = []
        for r in reports:
            residuals.update(r.residuals)
            na.extend(r.not_applicable)
            tols.append(r.tolerance)
        tol = tolerance if tolerance is not None else min(tols, default=DEFAULT_KKT_TOLERANCE)
        return KktReport(residuals, tol, tuple(na))


def _natural(terms: Sequence, z) -> float:
    terms = [np.atleast_1d(np.asarray(t, dtype=float)) for t in terms]
    z = np.atleast_1d(np.asarray(z, dtype=float))
    F = np.zeros(np.broadcast(*terms, z).shape)
    mag = np.zeros_like(F)
    for t in terms:
        F = F + t
        mag = mag + np.abs(t)
    sF = 1.0 + float(mag.max(initial=0.0))
    sz = 1.0 + float(np.abs(z).max(initial=0.0))
    return float(np.abs(np.minimum(F / sF, z / sz)).max(initial=0.0))


def _complementary(slack, multiplier, scale: float) -> float:
    slack = np.atleast_1d(np.asarray(slack, dtype=float))
    multiplier = np.atleast_1d(np.asarray(multiplier, dtype=float))
    s_l = 1.0 + float(np.abs(multiplier).max(initial=0.0))
    return float(np.abs(np.minimum(slack / (1.0 + abs(scale)), multiplier / s_l)).max(initial=0.0))


def _balance(lhs, rhs) -> float:
    lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
    rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
    return float((np.abs(lhs - rhs) / (1.0 + np.abs(rhs))).max(initial=0.0))


def _storage_balance(level, s_in, s_out, dt, fin, fout) -> float:
    prev = np.concatenate(([0.0], level[:-1]))
    return _balance(level - prev - dt * fin * s_in + dt * fout * s_out, np.zeros_like(level)) if level.size else 0.0


def _successor(lam: np.ndarray) -> np.ndarray:
    # the last hour has no successor level
    return np.append(lam[1:], 0.0) if lam.size else lam


def check_household_kkt(
    p: ProsumageParams,
    t: Tariff,
    prices: Optional[TimeSeries],
    sol: HouseholdSolution,
    tolerance: float = DEFAULT_KKT_TOLERANCE,
) -> KktReport:
    """Stationarity, complementarity and balance residuals of a household solution."""

    H, dt = p.horizon, p.step_hours
    price_kwh = prices_per_kwh(prices)
    t_ener = t.energy_prices(price_kwh, H)
    t_prod = t.feed_in_prices(price_kwh, H)
    m = sol.multipliers
    lam_en, lam_pv, lam_sto = m["enbal"], m["pv"], m["sto"]
    lam_stol, lam_in, lam_out = m["sto_level_max"], m["sto_in_max"], m["sto_out_max"]
    lam_pvmax = float(np.asarray(m["pv_max"])[0])
    phi = p.pv_cf.values
    fin, fout = p.charge_factor, p.discharge_factor
    prohibited = t.feed_in is FeedInMode.PROHIBITED
    has_cap = t.feed_in_cap_fraction is not None and not prohibited
    cap = t.feed_in_cap_fraction if has_cap else 0.0
    lam_cap = m["feed_in_cap"] if has_cap else np.zeros(H)

    r: Dict[str, float] = {}
    na: List[str] = []
    if prohibited:
        na.append("stationarity.g_pro2m")
    else:
        r["stationarity.g_pro2m"] = _natural([-dt * t_prod, dt * lam_pv, lam_cap], sol.g_pro2m)
    r["stationarity.g_pro2pro"] = _natural([dt * lam_pv, -dt * lam_en], sol.g_pro2pro)
    r["stationarity.e_m2pro"] = _natural([dt * (t_ener + t.other_charge), -dt * lam_en], sol.e_m2pro)
    r["stationarity.cu_pro"] = _natural([dt * lam_pv], sol.cu)
    r["stationarity.sto_in"] = _natural([dt * lam_pv, -dt * fin * lam_sto, lam_in], sol.sto_in)
    r["stationarity.sto_out"] = _natural([-dt * lam_en, dt * fout * lam_sto, lam_out], sol.sto_out)
    r["stationarity.sto_level"] = _natural([lam_stol, lam_sto, -_successor(lam_sto)], sol.sto_level)
    r["stationarity.n_sto_e"] = _natural([p.storage_energy_cost, -lam_stol.sum()], sol.n_sto_e)
    r["stationarity.n_sto_p"] = _natural([p.storage_power_cost, -lam_in.sum(), -lam_out.sum()], sol.n_sto_p)
    r["stationarity.n_pv"] = _natural(
        [p.pv_capacity_cost, -(dt * phi * lam_pv).sum(), lam_pvmax, -cap * lam_cap.sum()], sol.n_pv
    )

    r["complementarity.sto_level_max"] = _complementary(sol.n_sto_e - sol.sto_level, lam_stol, sol.n_sto_e)
    r["complementarity.sto_in_max"] = _complementary(sol.n_sto_p - sol.sto_in, lam_in, sol.n_sto_p)
    r["complementarity.sto_out_max"] = _complementary(sol.n_sto_p - sol.sto_out, lam_out, sol.n_sto_p)
    r["complementarity.pv_max"] = _complementary(p.m_pv - sol.n_pv, lam_pvmax, p.m_pv)
    if has_cap:
        r["complementarity.feed_in_cap"] = _complementary(cap * sol.n_pv - sol.g_pro2m, lam_cap, cap * sol.n_pv)
    else:
        na.append("complementarity.feed_in_cap")
    if prohibited and np.any(sol.g_pro2m != 0.0):
        r["balance.no_feed_in"] = float(np.abs(sol.g_pro2m).max())

    r["balance.enbal"] = _balance(sol.g_pro2pro + sol.sto_out + sol.e_m2pro, p.demand.values)
    r["balance.pv"] = _balance(sol.g_pro2pro + sol.g_pro2m + sol.cu + sol.sto_in, phi * sol.n_pv)
    r["balance.sto"] = _storage_balance(sol.sto_level, sol.sto_in, sol.sto_out, dt, fin, fout)

    report = KktReport(r, tolerance, tuple(na))
    _log(report, "household")
    return report


def check_dispatch_kkt(
    p: DispatchParams,
    hh_net: Optional[HouseholdExchange],
    sol: DispatchSolution,
    tolerance: float = DEFAULT_KKT_TOLERANCE,
) -> KktReport:
    """Stationarity, complementarity and balance residuals of a dispatch solution."""

    H, dt = p.horizon, p.step_hours
    net = np.zeros(H) if hh_net is None else hh_net.net
    m = sol.multipliers
    lam_en = m["enbal"]
    r: Dict[str, float] = {}
    na: List[str] = []

    supply = np.zeros(H)
    for tech in p.conventional:
        g = sol.g_con[tech.name]
        lam_con = m[f"con_max.{tech.name}"]
        supply += g
        r[f"stationarity.g_con.{tech.name}"] = _natural([dt * tech.marginal_cost, -dt * lam_en, lam_con], g)
        r[f"complementarity.con_max.{tech.name}"] = _complementary(tech.capacity - g, lam_con, tech.capacity)
    for tech in p.renewables:
        g, cu = sol.g_res[tech.name], sol.cu_res[tech.name]
        lam_res = m[f"res.{tech.name}"]
        supply += g
        r[f"stationarity.g_res.{tech.name}"] = _natural([-dt * lam_en, dt * lam_res], g)
        r[f"stationarity.cu_res.{tech.name}"] = _natural([dt * lam_res], cu)
        r[f"balance.res.{tech.name}"] = _balance(g + cu, tech.available())
    for tech in p.storage:
        s_in, s_out, lev = sol.sto_in[tech.name], sol.sto_out[tech.name], sol.sto_level[tech.name]
        lam_sto = m[f"sto.{tech.name}"]
        lam_stol = m[f"sto_level_max.{tech.name}"]
        lam_in, lam_out = m[f"sto_in_max.{tech.name}"], m[f"sto_out_max.{tech.name}"]
        fin, fout = tech.charge_factor, tech.discharge_factor
        supply += s_out - s_in
        r[f"stationarity.sto_in.{tech.name}"] = _natural([dt * lam_en, -dt * fin * lam_sto, lam_in], s_in)
        r[f"stationarity.sto_out.{tech.name}"] = _natural([-dt * lam_en, dt * fout * lam_sto, lam_out], s_out)
        r[f"stationarity.sto_level.{tech.name}"] = _natural([lam_stol, lam_sto, -_successor(lam_sto)], lev)
        r[f"complementarity.sto_level_max.{tech.name}"] = _complementary(
            tech.energy_capacity - lev, lam_stol, tech.energy_capacity
        )
        r[f"complementarity.sto_in_max.{tech.name}"] = _complementary(
            tech.power_capacity - s_in, lam_in, tech.power_capacity
        )
        r[f"complementarity.sto_out_max.{tech.name}"] = _complementary(
            tech.power_capacity - s_out, lam_out, tech.power_capacity
        )
        r[f"balance.sto.{tech.name}"] = _storage_balance(lev, s_in, s_out, dt, fin, fout)
    if p.voll is None:
        na.append("stationarity.lost_load")
        if np.any(sol.lost_load != 0.0):
            r["balance.no_lost_load"] = float(np.abs(sol.lost_load).max())
    else:
        r["stationarity.lost_load"] = _natural([dt * p.voll, -dt * lam_en], sol.lost_load)
    supply += sol.lost_load
    r["balance.enbal"] = _balance(supply, p.demand.values + net)

    report = KktReport(r, tolerance, tuple(na))
    _log(report, "dispatch")
    return report


def _log(report: KktReport, what: str) -> None:
    if report.ok:
        logger.debug("%s KKT max residual %.3g (%s)", what, report.max_residual, report.worst_condition)
    else:
        logger.warning(
            "%s KKT check failed: max residual %.3g at %s (tolerance %.3g)",
            what, report.max_residual, report.worst_condition, report.tolerance,
        )
