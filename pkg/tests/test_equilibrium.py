from dataclasses import replace

import numpy as np
import pytest

from core.equilibrium.coupled import solve_coupled
from core.equilibrium.fixed_point import (
    EquilibriumConfig,
    calibrate_energy_charge,
    joint_kkt_report,
    solve_scenario,
)
from core.inputs.timeseries import HorizonMismatchError, TimeSeries, Unit
from core.models.dispatch import ConventionalTech, DispatchParams, HouseholdExchange, solve_dispatch
from core.models.household import FeedInMode, Tariff, solve_household
from core.qc.kkt import check_dispatch_kkt, check_household_kkt

RTP_FEED_IN = Tariff(feed_in=FeedInMode.RTP, feed_in_rate=0.03)


def _two_level_system(hours=96, start=4080):
    """Flat 45 GW demand just above the 44 GW cheap fleet."""

    demand = TimeSeries(np.full(hours, 45_000.0), 1.0, start, Unit.MW)
    fleet = (ConventionalTech("lignite", 38.8, 44_000.0), ConventionalTech("ocgt", 77.39, 100_000.0))
    return DispatchParams(demand, fleet)


def test_fixed_tariff_is_a_single_pass(summer_household, storage_free_system):
    result = solve_scenario(Tariff(), summer_household(), storage_free_system(), name="fixed")
    assert result.iterations == 1
    assert result.converged
    assert result.household_prices is None
    assert result.metrics is not None
    joint = joint_kkt_report(result)
    assert joint.ok
    assert not joint.coupling_applicable
    assert joint.listing()["coupling.price"] == "not applicable"


def test_single_household_leaves_prices_unchanged(summer_household, storage_free_system):
    p_hh = summer_household(n_households=1)
    result = solve_scenario(RTP_FEED_IN, p_hh, storage_free_system())
    assert result.converged
    assert result.iterations == 1
    assert result.last_price_change <= 1e-12
    np.testing.assert_allclose(result.dispatch.prices, result.dispatch.merit_prices)
    joint = joint_kkt_report(result)
    assert joint.ok
    assert joint.coupling_residual <= 1e-12


def test_feed_in_premium_on_top_of_the_wholesale_price(summer_household, storage_free_system):
    result = solve_scenario(RTP_FEED_IN, summer_household(n_households=1), storage_free_system())
    premium = result.household.feed_in_prices - result.household_prices.values / 1000.0
    np.testing.assert_allclose(premium, 0.03, atol=1e-12)


def test_real_time_energy_charge(summer_household, storage_free_system):
    t = Tariff(energy_rtp=True, feed_in_rate=0.05)
    result = solve_scenario(t, summer_household(n_households=1), storage_free_system())
    assert result.converged
    np.testing.assert_allclose(result.household.energy_prices, result.dispatch.prices / 1000.0)
    np.testing.assert_allclose(result.household.feed_in_prices, 0.05)


def test_price_coupling_mismatch_is_reported(summer_household, storage_free_system):
    result = solve_scenario(RTP_FEED_IN, summer_household(n_households=1), storage_free_system())
    shifted = result.household_prices.with_values(result.household_prices.values + 50.0)
    joint = joint_kkt_report(replace(result, household_prices=shifted))
    assert joint.coupling_residual == pytest.approx(0.05)
    assert not joint.ok


def test_price_iteration_reports_undamped_change_and_stops(summer_household):
    cfg = EquilibriumConfig(max_iterations=2)
    result = solve_scenario(RTP_FEED_IN, summer_household(), _two_level_system(), cfg)
    assert not result.converged
    assert result.iterations == cfg.max_iterations
    assert [r.iteration for r in result.history] == [1, 2]
    first, second = (r.max_price_change for r in result.history)
    assert first == pytest.approx((77.39 - 38.8) / 1000.0)
    # midday guesses sit halfway after one damped step; shoulder hours may flip outright
    assert second == pytest.approx(0.5 * first) or second == pytest.approx(first)
    assert result.residual_band == (pytest.approx(min(first, second)), pytest.approx(max(first, second)))


def test_many_households_reach_a_price_equilibrium(summer_household):
    p_hh, p_disp = summer_household(), _two_level_system()
    result = solve_scenario(RTP_FEED_IN, p_hh, p_disp)
    assert result.converged
    assert result.iterations == len(result.history) <= result.config.max_iterations
    assert result.last_price_change <= result.config.price_tolerance
    joint = joint_kkt_report(result)
    assert joint.ok
    assert joint.coupling_residual <= result.config.price_tolerance

    # neither agent gains from deviating at the final prices
    again = solve_household(p_hh, RTP_FEED_IN, result.household_prices)
    assert again.z_pro == pytest.approx(result.household.z_pro, rel=1e-6, abs=1e-6)
    redispatch = solve_dispatch(p_disp, result.exchange)
    assert redispatch.z_sys == pytest.approx(result.dispatch.z_sys, rel=1e-6)


def test_joint_solve_shares_one_price(summer_household):
    t = Tariff(energy_rtp=True, feed_in=FeedInMode.RTP, feed_in_rate=0.03)
    p_hh, p_disp = summer_household(), _two_level_system()
    cp = solve_coupled(t, p_hh, p_disp, HouseholdExchange.zeros(p_disp.horizon))
    assert cp.carried_gap == 0.0
    np.testing.assert_allclose(cp.dispatch.prices, cp.prices.values)
    np.testing.assert_allclose(cp.household.energy_prices, cp.prices.values / 1000.0)
    e, g = cp.household.aggregate_exchange()
    np.testing.assert_allclose(cp.exchange.net, e - g)
    assert check_household_kkt(p_hh, t, cp.prices, cp.household).ok
    assert check_dispatch_kkt(p_disp, cp.exchange, cp.dispatch).ok
    again = solve_household(p_hh, t, cp.prices)
    assert again.z_pro == pytest.approx(cp.household.z_pro, rel=1e-6, abs=1e-6)


def test_fixed_tariff_flows_are_carried_into_the_joint_solve(summer_household):
    p_hh, p_disp = summer_household(), _two_level_system()
    first = solve_household(p_hh, RTP_FEED_IN, solve_dispatch(p_disp).price_series())
    e, g = first.aggregate_exchange()
    cp = solve_coupled(RTP_FEED_IN, p_hh, p_disp, HouseholdExchange(e, g))
    np.testing.assert_allclose(cp.exchange.e_m2pro, e)
    e_new, _ = cp.household.aggregate_exchange()
    assert cp.carried_gap == pytest.approx(np.abs(e_new - e).max() / (1.0 + np.abs(e).max()))
    assert check_dispatch_kkt(p_disp, cp.exchange, cp.dispatch).ok


def test_single_iteration_limit_still_returns_a_result(summer_household, storage_free_system):
    cfg = EquilibriumConfig(max_iterations=1)
    result = solve_scenario(RTP_FEED_IN, summer_household(n_households=1), storage_free_system(), cfg)
    assert result.iterations == 1
    assert result.converged
    assert result.household_prices is not None


def test_horizon_mismatch_between_agents(summer_household, storage_free_system):
    with pytest.raises(HorizonMismatchError):
        solve_scenario(Tariff(), summer_household(hours=48), storage_free_system(hours=96))


def test_calibrated_energy_charge_is_the_mean_wholesale_price():
    demand = TimeSeries(np.full(24, 100.0), 1.0, 0, Unit.MW)
    p = DispatchParams(demand, (ConventionalTech("ccgt", 50.0, 500.0),))
    assert calibrate_energy_charge(p) == pytest.approx(0.05)
    idle = DispatchParams(TimeSeries(np.zeros(24), 1.0, 0, Unit.MW), (ConventionalTech("ccgt", 50.0, 500.0),))
    assert calibrate_energy_charge(idle) == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        EquilibriumConfig(damping=0.0)
    with pytest.raises(ValueError):
        EquilibriumConfig(max_iterations=0)
