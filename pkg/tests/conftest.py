import numpy as np
import pytest

from core.inputs.synthetic import synthetic_profiles, synthetic_system_profiles
from core.inputs.timeseries import HOURS_PER_YEAR, TimeSeries, Unit
from core.models.dispatch import DispatchParams, RenewableTech, default_conventional
from core.models.household import ProsumageParams
from core.scenarios.config import DEFAULT_CONVENTIONAL_MW

# late June: long days, PV clearly below the 0.08 EUR/kWh feed-in tariff
SUMMER_START = 4080


@pytest.fixture
def summer_household():
    def make(hours=96, **overrides):
        demand, pv_cf = synthetic_profiles(hours, 1.0, SUMMER_START)
        overrides.setdefault("cost_scale", hours / HOURS_PER_YEAR)
        return ProsumageParams(demand=demand, pv_cf=pv_cf, **overrides)

    return make


@pytest.fixture
def storage_free_system():
    """Flat 50 GW demand, default thermal fleet and 66 GW of PV; no storage."""

    def make(hours=96):
        pv = synthetic_system_profiles(hours, 1.0, SUMMER_START)["pv"]
        demand = TimeSeries(np.full(hours, 50_000.0), 1.0, SUMMER_START, Unit.MW)
        return DispatchParams(
            demand=demand,
            conventional=default_conventional(DEFAULT_CONVENTIONAL_MW),
            renewables=(RenewableTech("pv", 66_300.0, pv),),
        )

    return make
