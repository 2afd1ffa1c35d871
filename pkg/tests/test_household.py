import numpy as np
import pytest

from core.inputs.synthetic import synthetic_profiles
from core.inputs.timeseries import HorizonMismatchError, TimeSeries, Unit
from core.models.household import (
    FeedInMode,
    ProsumageParams,
    Tariff,
    build_household_lp,
    classify_regime,
    lcoe_pv,
    solve_household,
)
from core.qc.kkt import check_household_kkt

NO_FEED_IN = Tariff(feed_in=FeedInMode.PROHIBITED, feed_in_rate=0.0)


def _toy(pv_cf, demand, **overrides):
    params = dict(
        c_inv_pv=0.10,
        c_fix_pv=0.0,
        c_inv_sto_e=10.0,
        c_inv_sto_p=10.0,
        c_fix_sto=0.0,
        n_households=1,
    )
    params.update(overrides)
    return ProsumageParams(
        demand=TimeSeries(demand, 1.0, 0, Unit.KW),
        pv_cf=TimeSeries(pv_cf, 1.0, 0, Unit.FRACTION),
        **params,
    )


def _storage_toy():
    return _toy([0.5, 0.0], [1.0, 1.0], c_inv_pv=0.06, c_inv_sto_e=0.02, c_inv_sto_p=0.02, m_pv=5.0)


def _greedy_cost(n_pv, n_e, n_p, fin, fout):
    """Two-hour storage toy dispatched greedily for fixed capacities."""

    pv0 = 0.5 * n_pv
    own0 = np.minimum(pv0, 1.0)
    surplus = pv0 - own0
    s_in = np.minimum.reduce([surplus, n_p, n_e / fin, np.minimum(n_p, 1.0) * fout / fin])
    s_out = fin * s_in / fout
    feed = surplus - s_in
    grid = (1.0 - own0) + (1.0 - s_out)
    return 0.06 * n_pv + 0.02 * n_e + 0.02 * n_p + 0.30 * grid - 0.08 * feed


def _full_year(step_hours=4.0):
    demand, pv_cf = synthetic_profiles(8760, step_hours, 0)
    return ProsumageParams(demand=demand, pv_cf=pv_cf)


def test_pv_sized_to_own_consumption_without_feed_in():
    p = _toy([1.0, 0.0], [1.0, 1.0])
    sol = solve_household(p, NO_FEED_IN)
    assert sol.n_pv == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(sol.e_m2pro, [0.0, 1.0], atol=1e-9)
    assert sol.z_pro == pytest.approx(0.40, abs=1e-9)
    assert sol.n_sto_e == pytest.approx(0.0, abs=1e-9)
    assert check_household_kkt(p, NO_FEED_IN, None, sol).ok


def test_expensive_pv_leaves_a_pure_consumer():
    p = _toy([1.0, 0.0], [1.0, 1.0], c_inv_pv=0.50)
    sol = solve_household(p, NO_FEED_IN)
    assert sol.n_pv == pytest.approx(0.0, abs=1e-9)
    assert sol.z_pro == pytest.approx(0.60, abs=1e-9)


def test_pv_sizing_matches_grid_enumeration():
    p = _toy([1.0, 0.0], [1.0, 1.0])
    grid = np.arange(0.0, 2.0 + 1e-9, 0.01)
    # no storage, no feed-in: hour 0 is covered up to the PV output
    costs = 0.10 * grid + 0.30 * (1.0 - np.minimum(grid, 1.0)) + 0.30
    sol = solve_household(p, NO_FEED_IN)
    assert abs(sol.n_pv - grid[np.argmin(costs)]) <= 0.01
    assert sol.z_pro <= costs.min() + 1e-9


def test_battery_shifts_midday_surplus_to_the_evening():
    p = _storage_toy()
    t = Tariff(feed_in_rate=0.08)
    sol = solve_household(p, t)
    fin, fout = p.charge_factor, p.discharge_factor
    assert fin == pytest.approx(0.96)
    assert fin / fout == pytest.approx(0.9216)
    x = 1.0 / 0.9216
    assert sol.n_pv == pytest.approx(2.0 * (1.0 + x), rel=1e-6)
    assert sol.n_sto_e == pytest.approx(1.0 / 0.96, rel=1e-6)
    assert sol.n_sto_p == pytest.approx(x, rel=1e-6)
    assert sol.z_pro == pytest.approx(0.292743, abs=1e-6)
    np.testing.assert_allclose(sol.e_m2pro, [0.0, 0.0], atol=1e-9)
    assert check_household_kkt(p, t, None, sol).ok


def test_storage_toy_matches_capacity_grid_search():
    p = _storage_toy()
    sol = solve_household(p, Tariff(feed_in_rate=0.08))
    fin, fout = p.charge_factor, p.discharge_factor
    n_pv, n_e, n_p = np.meshgrid(
        np.arange(0.0, 5.0 + 1e-9, 0.05),
        np.arange(0.0, 2.0 + 1e-9, 0.05),
        np.arange(0.0, 2.0 + 1e-9, 0.05),
        indexing="ij",
    )
    grid_costs = _greedy_cost(n_pv, n_e, n_p, fin, fout)
    best = np.unravel_index(np.argmin(grid_costs), grid_costs.shape)
    assert sol.z_pro <= grid_costs.min() + 1e-9
    assert grid_costs.min() - sol.z_pro <= 0.02
    assert abs(sol.n_pv - n_pv[best]) <= 0.05 + 1e-9
    at_optimum = _greedy_cost(sol.n_pv, sol.n_sto_e, sol.n_sto_p, fin, fout)
    assert at_optimum == pytest.approx(sol.z_pro, abs=1e-6)


def test_summer_feed_in_above_lcoe_fills_the_pv_limit(summer_household):
    p = summer_household()
    t = Tariff(feed_in_rate=0.08)
    assert lcoe_pv(p) < 0.08
    sol = solve_household(p, t)
    assert sol.n_pv == pytest.approx(p.m_pv, abs=1e-6)
    assert check_household_kkt(p, t, None, sol).ok


def test_prohibited_feed_in_curtails_surplus(summer_household):
    p = summer_household()
    sol = solve_household(p, NO_FEED_IN)
    assert np.all(sol.g_pro2m == 0.0)
    assert sol.cu.sum() > 0.0
    assert check_household_kkt(p, NO_FEED_IN, None, sol).ok


def test_feed_in_cap_bounds_peak_feed_in(summer_household):
    p = summer_household()
    t = Tariff(feed_in_rate=0.08, feed_in_cap_fraction=0.5)
    sol = solve_household(p, t)
    assert sol.g_pro2m.max() <= 0.5 * sol.n_pv + 1e-9
    uncapped = solve_household(p, Tariff(feed_in_rate=0.08))
    assert sol.z_pro >= uncapped.z_pro - 1e-9
    assert check_household_kkt(p, t, None, sol).ok


def test_cost_is_monotone_in_tariffs(summer_household):
    p = summer_household(hours=48)
    by_fit = [solve_household(p, Tariff(feed_in_rate=f)).z_pro for f in (0.0, 0.02, 0.04, 0.06, 0.08)]
    assert all(b <= a + 1e-9 for a, b in zip(by_fit, by_fit[1:]))
    by_other = [solve_household(p, Tariff(other_charge=o)) for o in (0.10, 0.15, 0.20, 0.25)]
    z = [s.z_pro for s in by_other]
    assert all(b >= a - 1e-9 for a, b in zip(z, z[1:]))
    grid_energy = [s.e_m2pro.sum() for s in by_other]
    assert all(b <= a + 1e-6 for a, b in zip(grid_energy, grid_energy[1:]))


def test_pv_capacity_falls_with_the_feed_in_tariff():
    p = _full_year()
    sizes = [solve_household(p, Tariff(feed_in_rate=f)).n_pv for f in (0.08, 0.06, 0.04, 0.02, 0.0)]
    assert all(b <= a + 1e-6 for a, b in zip(sizes, sizes[1:]))
    assert sizes[-1] < sizes[0]


def test_battery_shrinks_with_the_volumetric_retail_price():
    p = _full_year()
    sizes = []
    for step, other in enumerate((0.25, 0.20, 0.15, 0.10)):
        t = Tariff(other_charge=other, fixed_charge=250.0 * step, feed_in_rate=0.08)
        sizes.append(solve_household(p, t).n_sto_e)
    assert all(b <= a + 1e-6 for a, b in zip(sizes, sizes[1:]))


def test_fixed_charge_shifts_cost_without_changing_decisions(summer_household):
    p = summer_household(hours=48)
    base = solve_household(p, Tariff(feed_in_rate=0.05))
    fixed = solve_household(p, Tariff(feed_in_rate=0.05, fixed_charge=200.0))
    assert fixed.z_pro - base.z_pro == pytest.approx(200.0 * p.cost_scale, rel=1e-9)
    assert fixed.n_pv == pytest.approx(base.n_pv, abs=1e-6)


def test_real_time_feed_in_needs_prices(summer_household):
    p = summer_household(hours=24)
    with pytest.raises(ValueError):
        build_household_lp(p, Tariff(feed_in=FeedInMode.RTP, feed_in_rate=0.0))
    short = TimeSeries(np.full(12, 40.0), 1.0, 4080, Unit.EUR_PER_MWH)
    with pytest.raises(HorizonMismatchError):
        build_household_lp(p, Tariff(feed_in=FeedInMode.RTP, feed_in_rate=0.0), short)


def test_real_time_prices_enter_in_eur_per_kwh(summer_household):
    p = summer_household(hours=24)
    prices = TimeSeries(np.full(24, 40.0), 1.0, 4080, Unit.EUR_PER_MWH)
    t = Tariff(feed_in=FeedInMode.RTP, feed_in_rate=0.03, energy_rtp=True)
    sol = solve_household(p, t, prices)
    np.testing.assert_allclose(sol.feed_in_prices, 0.07)
    np.testing.assert_allclose(sol.energy_prices, 0.04)
    assert check_household_kkt(p, t, prices, sol).ok


def test_tariff_validation():
    with pytest.raises(ValueError):
        Tariff(other_charge=-0.1)
    with pytest.raises(ValueError):
        Tariff(feed_in_cap_fraction=1.5)
    assert Tariff(feed_in="rtp").needs_prices
    assert not Tariff().needs_prices
    assert Tariff().volumetric_charge == pytest.approx(0.30)


def test_storage_cost_factor_scales_every_storage_cost(summer_household):
    p = summer_household(hours=24)
    cheap = p.with_storage_cost_factor(0.5)
    assert cheap.storage_energy_cost == pytest.approx(0.5 * p.storage_energy_cost)
    assert cheap.storage_power_cost == pytest.approx(0.5 * p.storage_power_cost)
    assert cheap.pv_capacity_cost == p.pv_capacity_cost


@pytest.mark.parametrize(
    "lcoe, lcos_value, retail, fit, expected",
    [
        (0.075, 0.12, 0.30, 0.08, "F"),
        (0.075, 0.12, 0.30, 0.04, "E"),
        (0.075, 0.12, 0.15, 0.08, "C"),
        (0.075, 0.12, 0.15, 0.00, "D"),
        (0.40, 0.12, 0.30, 0.08, "A"),
        (0.075, 0.12, 0.30, 0.35, "B"),
    ],
)
def test_classify_regime(lcoe, lcos_value, retail, fit, expected):
    assert classify_regime(lcoe, lcos_value, retail, fit) == expected


def test_classify_regime_rejects_negative_inputs():
    with pytest.raises(ValueError):
        classify_regime(-0.01, 0.1, 0.3, 0.08)


def test_per_household_solution_does_not_depend_on_the_population(summer_household):
    t = Tariff()
    one = solve_household(summer_household(n_households=1), t)
    many = solve_household(summer_household(n_households=1_000_000), t)
    for cap in ("n_pv", "n_sto_e", "n_sto_p"):
        assert getattr(many, cap) == pytest.approx(getattr(one, cap), rel=1e-9, abs=1e-9)
    assert many.z_pro == pytest.approx(one.z_pro, rel=1e-9)
    np.testing.assert_allclose(many.e_m2pro, one.e_m2pro, atol=1e-9)
    np.testing.assert_allclose(many.aggregate_exchange()[0], 1000.0 * one.e_m2pro, atol=1e-6)


def test_storage_level_adds_up_the_flows_and_ends_empty(summer_household):
    p = summer_household()
    sol = solve_household(p, Tariff())
    dt = p.step_hours
    level = np.cumsum(dt * (p.charge_factor * sol.sto_in - p.discharge_factor * sol.sto_out))
    np.testing.assert_allclose(sol.sto_level, level, atol=1e-6)
    assert sol.sto_level[-1] == pytest.approx(0.0, abs=1e-6)
    assert np.all(sol.sto_level <= sol.n_sto_e + 1e-9)


def test_feed_in_above_retail_leaves_out_the_battery(summer_household):
    t = Tariff(feed_in_rate=0.35)
    assert t.feed_in_rate > t.volumetric_charge
    sol = solve_household(summer_household(), t)
    assert sol.n_sto_e == pytest.approx(0.0, abs=1e-9)
    assert sol.n_sto_p == pytest.approx(0.0, abs=1e-9)


def test_no_demand_and_no_feed_in_revenue_costs_only_the_fixed_charge():
    p = _toy([1.0, 0.5], [0.0, 0.0])
    t = Tariff(fixed_charge=100.0, feed_in_rate=0.0)
    sol = solve_household(p, t)
    assert (sol.n_pv, sol.n_sto_e, sol.n_sto_p) == (
        pytest.approx(0.0, abs=1e-9),
        pytest.approx(0.0, abs=1e-9),
        pytest.approx(0.0, abs=1e-9),
    )
    assert sol.z_pro == pytest.approx(100.0)
