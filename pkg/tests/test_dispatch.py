import numpy as np
import pytest

from core.inputs.timeseries import HorizonMismatchError, TimeSeries, Unit
from core.lp.solver import LpSolveError, LpStatus
from core.models.dispatch import (
    ConventionalTech,
    DispatchParams,
    HouseholdExchange,
    RenewableTech,
    StorageTech,
    merit_order_price,
    pumped_hydro,
    solve_dispatch,
)
from core.qc.kkt import check_dispatch_kkt


def _mw(values):
    return TimeSeries(values, 1.0, 0, Unit.MW)


def _cf(values):
    return TimeSeries(values, 1.0, 0, Unit.FRACTION)


def _merit_oracle(techs, residual, voll):
    """Hour-by-hour cost and price filling the cheapest units first."""

    order = sorted(techs, key=lambda t: t.marginal_cost)
    cost = np.zeros(residual.size)
    price = np.zeros(residual.size)
    for h, r in enumerate(residual):
        if r <= 0:
            continue
        left = r
        price[h] = voll
        for tech in order:
            take = min(left, tech.capacity)
            cost[h] += take * tech.marginal_cost
            left -= take
            if left <= 0 and take < tech.capacity:
                price[h] = tech.marginal_cost
                break
        cost[h] += max(left, 0.0) * voll
    return cost.sum(), price


def test_single_technology_sets_the_price():
    p = DispatchParams(_mw([10.0]), (ConventionalTech("lignite", 38.8, 20.0),))
    sol = solve_dispatch(p)
    assert sol.g_con["lignite"][0] == pytest.approx(10.0)
    assert sol.prices[0] == pytest.approx(38.8)
    assert sol.dual_prices[0] == pytest.approx(38.8)
    assert sol.z_sys == pytest.approx(388.0)
    assert check_dispatch_kkt(p, None, sol).ok


def test_marginal_unit_sets_the_price():
    techs = (ConventionalTech("lignite", 38.8, 5.0), ConventionalTech("ocgt", 77.39, 10.0))
    p = DispatchParams(_mw([8.0]), techs)
    sol = solve_dispatch(p)
    assert sol.g_con["lignite"][0] == pytest.approx(5.0)
    assert sol.g_con["ocgt"][0] == pytest.approx(3.0)
    assert sol.prices[0] == pytest.approx(77.39)
    assert merit_order_price(p, 8.0) == pytest.approx(77.39)


def test_storage_arbitrage_avoids_the_peaker():
    techs = (ConventionalTech("cheap", 10.0, 10.0), ConventionalTech("peaker", 100.0, 10.0))
    storage = (StorageTech("battery", 0.8, energy_capacity=10.0, power_capacity=5.0),)
    p = DispatchParams(_mw([5.0, 5.0, 15.0]), techs, storage=storage)
    sol = solve_dispatch(p)
    assert sol.sto_out["battery"][2] == pytest.approx(5.0, abs=1e-7)
    np.testing.assert_allclose(sol.g_con["peaker"], 0.0, atol=1e-7)
    assert sol.sto_in["battery"].sum() == pytest.approx(5.0 / 0.81, rel=1e-7)
    assert sol.z_sys == pytest.approx(10.0 * (25.0 - 5.0 + 5.0 / 0.81), rel=1e-9)
    assert sol.storage_active[2]
    assert check_dispatch_kkt(p, None, sol).ok


def test_renewable_surplus_is_curtailed_at_zero_price():
    p = DispatchParams(
        _mw([10.0, 30.0]),
        (ConventionalTech("ccgt", 57.12, 50.0),),
        renewables=(RenewableTech("pv", 20.0, _cf([1.0, 0.5])),),
    )
    sol = solve_dispatch(p)
    assert sol.prices[0] == 0.0
    assert sol.cu_res["pv"][0] == pytest.approx(10.0)
    assert sol.g_con["ccgt"][1] == pytest.approx(20.0)
    assert sol.prices[1] == pytest.approx(57.12)
    assert check_dispatch_kkt(p, None, sol).ok


def test_unserved_demand_prices_at_voll():
    p = DispatchParams(_mw([30.0]), (ConventionalTech("ccgt", 57.12, 20.0),))
    sol = solve_dispatch(p)
    assert sol.lost_load[0] == pytest.approx(10.0)
    assert sol.prices[0] == pytest.approx(3000.0)
    assert sol.dual_prices[0] == pytest.approx(3000.0)
    assert sol.lost_load_energy() == pytest.approx(10.0)


def test_without_lost_load_slack_shortage_is_infeasible():
    p = DispatchParams(_mw([30.0]), (ConventionalTech("ccgt", 57.12, 20.0),), voll=None)
    with pytest.raises(LpSolveError) as err:
        solve_dispatch(p)
    assert err.value.status is LpStatus.INFEASIBLE


def test_household_exchange_shifts_residual_demand():
    p = DispatchParams(_mw([10.0, 10.0]), (ConventionalTech("ccgt", 57.12, 50.0),))
    hh = HouseholdExchange(np.array([3.0, 0.0]), np.array([0.0, 4.0]))
    sol = solve_dispatch(p, hh)
    np.testing.assert_allclose(sol.g_con["ccgt"], [13.0, 6.0], atol=1e-9)
    with pytest.raises(HorizonMismatchError):
        solve_dispatch(p, HouseholdExchange.zeros(3))


def test_dispatch_matches_merit_order_on_random_instances():
    rng = np.random.default_rng(11)
    for trial in range(100):
        H = int(rng.integers(1, 9))
        n = int(rng.integers(1, 4))
        techs = tuple(
            ConventionalTech(f"t{i}", float(rng.uniform(5.0, 200.0)), float(rng.uniform(1.0, 20.0)))
            for i in range(n)
        )
        demand = rng.uniform(0.0, 50.0, H)
        renewables = ()
        supply = np.zeros(H)
        if rng.random() < 0.5:
            cf = rng.uniform(0.0, 1.0, H)
            renewables = (RenewableTech("wind", 15.0, _cf(cf)),)
            supply = 15.0 * cf
        p = DispatchParams(_mw(demand), techs, renewables=renewables)
        sol = solve_dispatch(p)
        cost, price = _merit_oracle(techs, demand - supply, 3000.0)
        assert sol.z_sys == pytest.approx(cost, rel=1e-6, abs=1e-7), trial
        np.testing.assert_allclose(sol.prices, price, rtol=1e-9, err_msg=str(trial))
        regular = ~sol.price_degenerate
        np.testing.assert_allclose(sol.dual_prices[regular], price[regular], rtol=1e-6, atol=1e-6, err_msg=str(trial))


def test_pumped_hydro_defaults():
    tech = pumped_hydro(6_000.0, 40_000.0)
    assert tech.efficiency == pytest.approx(0.8)
    assert tech.charge_factor == pytest.approx(0.9)
    assert tech.discharge_factor * tech.charge_factor == pytest.approx(1.0)


def test_invalid_fleet_rejected():
    with pytest.raises(ValueError):
        ConventionalTech("ccgt", 57.12, -1.0)
    with pytest.raises(ValueError):
        StorageTech("battery", 1.2, 1.0, 1.0)
    with pytest.raises(ValueError):
        DispatchParams(_mw([1.0]), (ConventionalTech("a", 1.0, 1.0), ConventionalTech("a", 2.0, 1.0)))
    with pytest.raises(ValueError):
        RenewableTech("pv", 1.0, _mw([0.5]))


def test_supply_matches_demand_plus_household_net_every_hour(storage_free_system):
    p = storage_free_system(hours=48)
    storage = (StorageTech("battery", 0.8, energy_capacity=20_000.0, power_capacity=5_000.0),)
    p = DispatchParams(p.demand, p.conventional, p.renewables, storage)
    rng = np.random.default_rng(11)
    hh = HouseholdExchange(rng.uniform(0.0, 3_000.0, 48), rng.uniform(0.0, 3_000.0, 48))
    sol = solve_dispatch(p, hh)
    supply = sum(sol.g_con.values()) + sum(sol.g_res.values()) + sol.lost_load
    supply = supply + sol.sto_out["battery"] - sol.sto_in["battery"]
    np.testing.assert_allclose(supply, p.demand.values + hh.net, rtol=1e-6)
    assert check_dispatch_kkt(p, hh, sol).ok
