"""Uniformly sampled hourly profiles (demand, capacity factors, prices)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from core.utils.io import read_csv_simple

HOURS_PER_YEAR = 8760


class Unit(str, Enum):
    MW = "MW"
    KW = "kW"
    MWH = "MWh"
    EUR_PER_MWH = "EUR/MWh"
    EUR_PER_KWH = "EUR/kWh"
    FRACTION = "fraction"


class InputDataError(ValueError):
    """Raised for unreadable or out-of-range input data."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f", line {line}"
            where += ": "
        super().__init__(where + message)


class HorizonMismatchError(ValueError):
    """Raised when profiles that must share a horizon do not."""


@dataclass(frozen=True)
class TimeSeries:
    """Hourly profile where each sample stands for ``step_hours`` hours.

    ``values`` hold average power (or a price / capacity factor) over the
    represented hours, so energy sums are weighted by ``step_hours``.
    """

    values: np.ndarray
    step_hours: float = 1.0
    start_index: int = 0
    unit: Unit = Unit.FRACTION

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "unit", Unit(self.unit))
        if not self.step_hours > 0:
            raise InputDataError(f"step_hours must be positive, got {self.step_hours}")
        if not np.all(np.isfinite(arr)):
            raise InputDataError("series contains non-finite values")
        if arr.size * self.step_hours > HOURS_PER_YEAR + 1e-9:
            raise InputDataError(
                f"{arr.size} samples x {self.step_hours} h exceed {HOURS_PER_YEAR} h"
            )
        if self.unit is Unit.FRACTION and arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise InputDataError("capacity factor outside [0, 1]")
        if self.unit in (Unit.MW, Unit.KW, Unit.MWH) and arr.size and arr.min() < 0.0:
            raise InputDataError(f"negative {self.unit.value} value in demand series")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def horizon_hours(self) -> float:
        return len(self) * self.step_hours

    def energy(self) -> float:
        """Sum of ``values`` weighted by the step (MWh for MW, kWh for kW)."""
        return float(np.sum(self.values) * self.step_hours)

    def mean(self) -> float:
        return float(np.mean(self.values)) if len(self) else 0.0

    def hours(self) -> np.ndarray:
        """Hour-of-year of every sample."""
        return self.start_index + np.arange(len(self)) * self.step_hours

    def with_values(self, values: ArrayLike, unit: Unit | None = None) -> "TimeSeries":
        return TimeSeries(values, self.step_hours, self.start_index, unit or self.unit)

    def window(self, start_hour: int, hours: int) -> "TimeSeries":
        """Samples covering ``[start_hour, start_hour + hours)`` of the year."""
        first = int(math.ceil((start_hour - self.start_index) / self.step_hours))
        count = int(hours // self.step_hours)
        if first < 0 or first + count > len(self):
            raise HorizonMismatchError(
                f"window [{start_hour}, {start_hour + hours}) not covered by series"
            )
        return TimeSeries(
            self.values[first : first + count],
            self.step_hours,
            int(self.start_index + first * self.step_hours),
            self.unit,
        )


def subsample(ts: TimeSeries, factor: int, truncate: bool = False) -> TimeSeries:
    """Keep every ``factor``-th sample and widen the step accordingly."""

    if int(factor) != factor or factor < 1:
        raise ValueError(f"subsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    n = len(ts)
    if n % factor and not truncate:
        raise ValueError(
            f"factor {factor} does not divide {n} samples; pass truncate=True to drop the tail"
        )
    usable = n - n % factor
    return TimeSeries(ts.values[:usable:factor], ts.step_hours * factor, ts.start_index, ts.unit)


def load_timeseries(path, unit: Unit | str, step_hours: float = 1.0, start_index: int = 0) -> TimeSeries:
    """Read a ``hour,value`` CSV into a :class:`TimeSeries`."""

    path = Path(path)
    if not path.is_file():
        raise InputDataError("file not found", path=path)
    unit = Unit(unit)
    values = []
    for line, raw in read_csv_simple(path):
        try:
            val = float(raw)
        except ValueError:
            raise InputDataError(f"non-numeric value {raw!r}", path=path, line=line) from None
        if not math.isfinite(val):
            raise InputDataError(f"non-finite value {raw!r}", path=path, line=line)
        if unit is Unit.FRACTION and not 0.0 <= val <= 1.0:
            raise InputDataError(f"capacity factor {val} outside [0, 1]", path=path, line=line)
        values.append(val)
    try:
        return TimeSeries(np.asarray(values), float(step_hours), int(start_index), unit)
    except InputDataError as exc:
        raise InputDataError(str(exc), path=path) from None


def require_same_horizon(*series: TimeSeries) -> None:
    shapes = {(len(s), s.step_hours, s.start_index) for s in series}
    if len(shapes) > 1:
        raise HorizonMismatchError(f"series horizons differ: {sorted(shapes)}")
