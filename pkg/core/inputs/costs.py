"""Annualized investment costs and marginal generation costs."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CostInputs:
    """Raw technology cost parameters.

    ``overnight_cost`` is EUR per kW (EUR per kWh for storage energy) and
    excludes VAT; ``annual_fixed_cost`` is EUR per kW and year.
    """

    overnight_cost: float
    lifetime_years: int
    interest_rate: float = 0.04
    vat_rate: float = 0.19
    annual_fixed_cost: float = 0.0

    def __post_init__(self):
        if int(self.lifetime_years) != self.lifetime_years or self.lifetime_years < 1:
            raise ValueError(f"lifetime_years must be an integer >= 1, got {self.lifetime_years}")
        if self.interest_rate < 0 or self.vat_rate < 0:
            raise ValueError("interest and VAT rates must be non-negative")
        if self.overnight_cost < 0 or self.annual_fixed_cost < 0:
            raise ValueError("costs must be non-negative")


@dataclass(frozen=True)
class ThermalTechInputs:
    thermal_efficiency: float
    carbon_content: float
    fuel_price: float
    co2_price: float = 29.4

    def __post_init__(self):
        if not 0.0 < self.thermal_efficiency <= 1.0:
            raise ValueError(f"thermal_efficiency must lie in (0, 1], got {self.thermal_efficiency}")
        if min(self.carbon_content, self.fuel_price, self.co2_price) < 0:
            raise ValueError("carbon content and prices must be non-negative")


def annuity_factor(interest_rate: float, lifetime_years: int) -> float:
    if interest_rate == 0:
        return 1.0 / lifetime_years
    r = float(interest_rate)
    return r / (1.0 - (1.0 + r) ** (-lifetime_years))


def annualized_cost(c: CostInputs) -> float:
    """Yearly annuity of the VAT-inclusive overnight cost.

    VAT applies to the investment only; fixed costs are reported separately
    (``c.annual_fixed_cost``) and never annuitized.
    """
    return c.overnight_cost * (1.0 + c.vat_rate) * annuity_factor(c.interest_rate, c.lifetime_years)


def marginal_cost(t: ThermalTechInputs) -> float:
    """Short-run generation cost in EUR/MWh electric."""
    if t.thermal_efficiency <= 0:
        raise ValueError("thermal efficiency must be positive")
    return (t.fuel_price + t.co2_price * t.carbon_content) / t.thermal_efficiency


# Residential PV and lithium-ion battery, 2030 projection.
PV_COSTS = CostInputs(overnight_cost=850.0, lifetime_years=25, annual_fixed_cost=17.0)
STORAGE_POWER_COSTS = CostInputs(overnight_cost=140.0, lifetime_years=15, annual_fixed_cost=10.0)
STORAGE_ENERGY_COSTS = CostInputs(overnight_cost=205.0, lifetime_years=15)
PV_FULL_LOAD_HOURS = 1090.0
BATTERY_ROUNDTRIP_EFFICIENCY = 0.92

# Fuel price and efficiency assumptions for 2030 (CO2 at 29.4 EUR/t).
THERMAL_TECHNOLOGIES = {
    "lignite": ThermalTechInputs(0.38, 0.311, 5.6),
    "hardcoal": ThermalTechInputs(0.43, 0.26, 8.4),
    "ccgt": ThermalTechInputs(0.542, 0.155, 26.4),
    "ocgt": ThermalTechInputs(0.4, 0.155, 26.4),
    "oil": ThermalTechInputs(0.35, 0.216, 48.3),
    "bio": ThermalTechInputs(0.487, 0.0, 10.0),
}
PUMPED_HYDRO_EFFICIENCY = 0.8
