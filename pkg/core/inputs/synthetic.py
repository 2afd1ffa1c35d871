"""Deterministic desk-scale profiles standing in for measured input data.

All shapes are built on the full hourly year first, normalised to their
annual targets there, and only then cut to the requested window and
resolution. No random numbers are involved: the same arguments always give
bit-identical series.
"""

from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from core.inputs.timeseries import HOURS_PER_YEAR, TimeSeries, Unit

LATITUDE_DEG = 51.0
_HOURS = np.arange(HOURS_PER_YEAR, dtype=float)
_DAY = np.floor(_HOURS / 24.0)
_HOD = _HOURS % 24.0


def _solar_elevation_sine() -> np.ndarray:
    lat = np.deg2rad(LATITUDE_DEG)
    decl = np.deg2rad(23.44) * np.sin(2.0 * np.pi * (284.0 + _DAY) / 365.0)
    hour_angle = np.deg2rad(15.0 * (_HOD + 0.5 - 12.5))
    return np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(hour_angle)


def _pv_shape() -> np.ndarray:
    clearness = 0.6 + 0.25 * np.cos(2.0 * np.pi * (_DAY - 172.0) / 365.0)
    return np.clip(_solar_elevation_sine(), 0.0, None) ** 1.2 * clearness


def _household_load_shape() -> np.ndarray:
    seasonal = 1.0 + 0.15 * np.cos(2.0 * np.pi * (_DAY - 15.0) / 365.0)
    daily = (
        0.55
        + 0.35 * np.exp(-(((_HOD - 7.5) / 1.5) ** 2))
        + 0.25 * np.exp(-(((_HOD - 12.5) / 2.0) ** 2))
        + 0.75 * np.exp(-(((_HOD - 19.0) / 2.5) ** 2))
    )
    return seasonal * daily


def _system_load_shape() -> np.ndarray:
    seasonal = 1.0 + 0.1 * np.cos(2.0 * np.pi * (_DAY - 15.0) / 365.0)
    daily = 0.86 + 0.1 * np.exp(-(((_HOD - 11.0) / 3.5) ** 2)) + 0.12 * np.exp(-(((_HOD - 18.5) / 2.5) ** 2))
    weekend = np.where((_DAY % 7) >= 5, 0.92, 1.0)
    return seasonal * daily * weekend


def _wind_shape(periods: Tuple[float, ...], phase: float, winter_boost: float) -> np.ndarray:
    z = np.zeros_like(_HOURS)
    for k, period in enumerate(periods):
        z += np.sin(2.0 * np.pi * _HOURS / period + phase * (k + 1)) / (k + 1)
    z /= np.max(np.abs(z))
    return z + winter_boost * np.cos(2.0 * np.pi * (_DAY - 15.0) / 365.0)


def _normalise(shape: np.ndarray, annual_total: float) -> np.ndarray:
    return shape * (annual_total / shape.sum())


def _capacity_factor(shape: np.ndarray, full_load_hours: float) -> np.ndarray:
    """Scale to ``full_load_hours`` while keeping every hour at or below 1."""
    cf = _normalise(shape, full_load_hours)
    for _ in range(50):
        cf = np.clip(cf, 0.0, 1.0)
        short = full_load_hours - cf.sum()
        free = cf[(cf > 0.0) & (cf < 1.0)].sum()
        if short <= 1e-9 * full_load_hours or free <= 0.0:
            break
        cf = np.where(cf < 1.0, cf * (1.0 + short / free), cf)
    return np.clip(cf, 0.0, 1.0)


def _cut(values: np.ndarray, unit: Unit, hours: int, step_hours: float, start_hour: int) -> TimeSeries:
    step = int(step_hours)
    if step != step_hours or step < 1:
        raise ValueError(f"synthetic profiles need an integer step, got {step_hours}")
    if start_hour < 0 or start_hour + hours > HOURS_PER_YEAR:
        raise ValueError(f"window [{start_hour}, {start_hour + hours}) outside the year")
    window = values[start_hour : start_hour + hours]
    window = window[: len(window) - len(window) % step : step]
    return TimeSeries(window, float(step), int(start_hour), unit)


def synthetic_profiles(
    hours: int = HOURS_PER_YEAR,
    step_hours: float = 1.0,
    start_hour: int = 0,
    annual_demand_mwh: float = 5.0,
    full_load_hours: float = 1090.0,
) -> Tuple[TimeSeries, TimeSeries]:
    """Household demand (kW) and PV capacity factor for one prosumage household.

    Demand averages ``annual_demand_mwh`` over the year with morning and
    evening peaks and a winter maximum; the PV factor follows the solar
    elevation at 51 degrees north and integrates to ``full_load_hours``.
    """

    demand_kw = _normalise(_household_load_shape(), annual_demand_mwh * 1000.0)
    pv_cf = _capacity_factor(_pv_shape(), full_load_hours)
    return (
        _cut(demand_kw, Unit.KW, hours, step_hours, start_hour),
        _cut(pv_cf, Unit.FRACTION, hours, step_hours, start_hour),
    )


def synthetic_system_profiles(
    hours: int = HOURS_PER_YEAR,
    step_hours: float = 1.0,
    start_hour: int = 0,
    annual_demand_twh: float = 530.0,
) -> Dict[str, TimeSeries]:
    """Non-prosumage demand (MW) and renewable capacity factors."""

    demand_mw = _normalise(_system_load_shape(), annual_demand_twh * 1e6)
    onshore = np.clip(0.22 + 0.2 * _wind_shape((101.0, 67.0, 43.0, 24.0), 0.7, 0.35), 0.02, 0.9)
    offshore = np.clip(0.44 + 0.25 * _wind_shape((89.0, 59.0, 37.0, 24.0), 1.3, 0.25), 0.03, 0.95)
    pv = _capacity_factor(_pv_shape(), 1000.0)
    ror = 0.5 + 0.1 * np.cos(2.0 * np.pi * (_DAY - 120.0) / 365.0)
    profiles = {
        "demand": (demand_mw, Unit.MW),
        "onshore_wind": (onshore, Unit.FRACTION),
        "offshore_wind": (offshore, Unit.FRACTION),
        "pv": (pv, Unit.FRACTION),
        "run_of_river": (ror, Unit.FRACTION),
    }
    return {name: _cut(vals, unit, hours, step_hours, start_hour) for name, (vals, unit) in profiles.items()}
