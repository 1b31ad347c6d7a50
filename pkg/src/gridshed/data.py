"""Domain types, CSV ingestion and the synthetic campus generator.

Time is an integer hour index from a naive ``start`` timestamp. Missing
readings are stored as NaN and exposed through :attr:`HourlySeries.gaps`;
nothing in this module ever imputes them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

HOUR = timedelta(hours=1)
# Monday 00:00; phase reference for weekly terms
MONDAY_EPOCH = datetime(2000, 1, 3)
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"

FEEDER_HEADER = ["timestamp", "kwh"]
INVENTORY_HEADER = ["building_id", "appliance", "rated_kw", "count"] + [f"h{i}" for i in range(24)]
CALENDAR_HEADER = ["timestamp", "is_holiday"]


def _frozen(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def format_timestamp(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)


def parse_timestamp(text: str) -> datetime:
    return datetime.fromisoformat(text.strip())


@dataclass(frozen=True, eq=False)
class HourlySeries:
    """Hourly kWh readings from ``start``; NaN entries are gaps."""

    start: datetime
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 1:
            raise ValidationError("HourlySeries needs a 1-D sequence with at least one value")
        if np.any(np.isinf(vals)):
            raise ValidationError("HourlySeries values must be finite or NaN (gap)")
        if np.any(vals[~np.isnan(vals)] < 0):
            raise ValidationError("energy readings must be non-negative")
        if self.start.minute or self.start.second or self.start.microsecond:
            raise SchemaError(f"start {self.start} is not aligned to the hour")
        object.__setattr__(self, "values", _frozen(vals))

    def __len__(self):
        return self.values.shape[0]

    @property
    def gaps(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def end(self) -> datetime:
        return self.start + (len(self) - 1) * HOUR

    def timestamps(self) -> list[datetime]:
        return [self.start + i * HOUR for i in range(len(self))]

    def hour_offset(self) -> int:
        """Hours from :data:`MONDAY_EPOCH` to ``start``."""
        return int((self.start - MONDAY_EPOCH) // HOUR)

    def hour_of_day(self) -> np.ndarray:
        return (self.start.hour + np.arange(len(self))) % 24

    def slice(self, lo: int, hi: int) -> "HourlySeries":
        return HourlySeries(self.start + lo * HOUR, self.values[lo:hi])


@dataclass(frozen=True)
class Appliance:
    name: str
    rated_power: float
    count: int
    schedule: tuple

    def __post_init__(self):
        if not (self.rated_power > 0 and math.isfinite(self.rated_power)):
            raise ValidationError(f"appliance {self.name!r}: rated power must be > 0")
        if int(self.count) != self.count or self.count < 1:
            raise ValidationError(f"appliance {self.name!r}: count must be a positive integer")
        sched = tuple(int(s) for s in self.schedule)
        if len(sched) != 24 or any(s not in (0, 1) for s in sched):
            raise ValidationError(f"appliance {self.name!r}: schedule needs 24 flags in {{0, 1}}")
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "count", int(self.count))

    @property
    def hourly_kw(self) -> np.ndarray:
        return np.asarray(self.schedule, dtype=np.float64) * self.rated_power * self.count


@dataclass(frozen=True)
class ApplianceInventory:
    building_id: str
    appliances: tuple

    def __post_init__(self):
        if len(self.appliances) < 1:
            raise ValidationError(f"building {self.building_id!r} has no appliances")
        object.__setattr__(self, "appliances", tuple(self.appliances))


@dataclass(frozen=True, eq=False)
class CampusDataset:
    """Feeder series, building inventories and the holiday calendar.

    ``building_loads`` and ``planted_labels`` are only set by the synthetic
    generator (ground truth for tests); ingested data leaves them ``None``.
    """

    feeder: HourlySeries
    buildings: tuple
    calendar: np.ndarray
    building_loads: np.ndarray | None = None
    planted_labels: np.ndarray | None = None

    def __post_init__(self):
        ids = [b.building_id for b in self.buildings]
        if len(set(ids)) != len(ids):
            raise ValidationError("building ids must be unique")
        if not ids:
            raise ValidationError("dataset has no buildings")
        cal = np.asarray(self.calendar, dtype=np.int64)
        if cal.shape != (len(self.feeder),):
            raise ValidationError("calendar length must equal feeder length")
        if np.any((cal != 0) & (cal != 1)):
            raise ValidationError("calendar flags must be 0 or 1")
        object.__setattr__(self, "buildings", tuple(self.buildings))
        object.__setattr__(self, "calendar", _frozen(cal, np.int64))
        if self.building_loads is not None:
            loads = np.asarray(self.building_loads, dtype=np.float64)
            if loads.shape != (len(self.feeder), len(ids)):
                raise ValidationError("building_loads must be hours x buildings")
            object.__setattr__(self, "building_loads", _frozen(loads))
        if self.planted_labels is not None:
            object.__setattr__(self, "planted_labels", _frozen(self.planted_labels, np.int64))

    @property
    def building_ids(self) -> list[str]:
        return [b.building_id for b in self.buildings]

    @property
    def n_hours(self) -> int:
        return len(self.feeder)


# ---------------------------------------------------------------------------
# CSV ingestion


def _read_rows(path):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    return path, [c.strip() for c in rows[0]], rows[1:]


def _load_feeder(path) -> HourlySeries:
    path, header, rows = _read_rows(path)
    if header != FEEDER_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(FEEDER_HEADER)}, got {','.join(header)}")
    stamps, readings = [], []
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(path, lineno, f"expected 2 fields, got {len(row)}")
        try:
            ts = parse_timestamp(row[0])
        except ValueError as exc:
            raise ParseError(path, lineno, f"bad timestamp {row[0]!r}") from exc
        text = row[1].strip()
        if text == "":
            val = math.nan
        else:
            try:
                val = float(text)
            except ValueError as exc:
                raise ParseError(path, lineno, f"bad kwh value {text!r}") from exc
            if not math.isfinite(val):
                raise ParseError(path, lineno, f"non-finite kwh value {text!r}")
            if val < 0:
                raise ValidationError(f"{path}:{lineno}: negative kwh {val}")
        stamps.append((lineno, ts))
        readings.append(val)
    if not stamps:
        raise SchemaError(f"{path}: no data rows")
    start = stamps[0][1]
    if start.minute or start.second or start.microsecond:
        raise SchemaError(f"{path}:{stamps[0][0]}: timestamp not on the hour")
    offsets = []
    for lineno, ts in stamps:
        delta = (ts - start) / HOUR
        if delta != int(delta):
            raise SchemaError(f"{path}:{lineno}: timestamp {ts} is not on the hourly grid")
        offsets.append(int(delta))
    offsets = np.asarray(offsets)
    if np.any(np.diff(offsets) <= 0):
        bad = int(np.flatnonzero(np.diff(offsets) <= 0)[0]) + 1
        raise SchemaError(f"{path}:{stamps[bad][0]}: timestamps must be strictly increasing")
    values = np.full(offsets[-1] + 1, np.nan)
    values[offsets] = readings
    return HourlySeries(start, values)


def _load_inventory(path) -> list[ApplianceInventory]:
    path, header, rows = _read_rows(path)
    if header != INVENTORY_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(INVENTORY_HEADER[:5])},...,h23")
    grouped: dict[str, list[Appliance]] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(INVENTORY_HEADER):
            raise ParseError(path, lineno, f"expected {len(INVENTORY_HEADER)} fields, got {len(row)}")
        bid, name = row[0].strip(), row[1].strip()
        if not bid:
            raise ParseError(path, lineno, "empty building_id")
        try:
            rated = float(row[2])
            count_f = float(row[3])
            flags = [int(c) for c in row[4:]]
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from exc
        try:
            app = Appliance(name, rated, count_f, tuple(flags))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        grouped.setdefault(bid, []).append(app)
    if not grouped:
        raise SchemaError(f"{path}: no data rows")
    return [ApplianceInventory(bid, tuple(apps)) for bid, apps in grouped.items()]


def read_calendar_flags(path, start: datetime, n_hours: int) -> np.ndarray:
    """Holiday flags for ``n_hours`` hours from ``start``.

    Rows outside that window are ignored; hours without a row are 0.
    """
    path, header, rows = _read_rows(path)
    if header != CALENDAR_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(CALENDAR_HEADER)}")
    flags = np.zeros(n_hours, dtype=np.int64)
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            ts = parse_timestamp(row[0])
            flag = int(row[1])
        except (ValueError, IndexError) as exc:
            raise ParseError(path, lineno, str(exc)) from exc
        if flag not in (0, 1):
            raise ValidationError(f"{path}:{lineno}: is_holiday must be 0 or 1")
        idx = (ts - start) / HOUR
        if idx == int(idx) and 0 <= idx < n_hours:
            flags[int(idx)] = flag
    return flags


def write_calendar_csv(start: datetime, flags, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CALENDAR_HEADER)
        for i, flag in enumerate(flags):
            w.writerow([format_timestamp(start + i * HOUR), int(flag)])


def load_campus_csv(feeder_path, inventory_path, calendar_path=None) -> CampusDataset:
    """Read and validate the three campus CSV files.

    Hours absent from the feeder file (or with an empty ``kwh`` field) become
    gaps. Hours absent from the calendar file are treated as regular days;
    calendar rows outside the feeder span (future hours) are ignored here.
    """
    feeder = _load_feeder(feeder_path)
    buildings = _load_inventory(inventory_path)
    if calendar_path is not None:
        calendar = read_calendar_flags(calendar_path, feeder.start, len(feeder))
    else:
        calendar = np.zeros(len(feeder), dtype=np.int64)
    return CampusDataset(feeder, tuple(buildings), calendar)


def write_feeder_csv(series: HourlySeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEEDER_HEADER)
        for ts, v in zip(series.timestamps(), series.values):
            if not np.isnan(v):
                w.writerow([format_timestamp(ts), f"{v:.9g}"])


def write_campus_csv(dataset: CampusDataset, feeder_path, inventory_path, calendar_path=None) -> None:
    """Inverse of :func:`load_campus_csv`; gap hours are omitted from the feeder file."""
    write_feeder_csv(dataset.feeder, feeder_path)
    with Path(inventory_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INVENTORY_HEADER)
        for inv in dataset.buildings:
            for app in inv.appliances:
                w.writerow([inv.building_id, app.name, f"{app.rated_power:.9g}", app.count, *app.schedule])
    if calendar_path is not None:
        write_calendar_csv(dataset.feeder.start, dataset.calendar, calendar_path)


# ---------------------------------------------------------------------------
# Synthetic campus

DEFAULT_START = datetime(2024, 1, 1)

# fixed public holidays plus a mid-semester break (month, day)
_HOLIDAYS = {(1, 1), (3, 29), (4, 1), (4, 10), (4, 11), (5, 1), (5, 27), (6, 12), (10, 1), (12, 25), (12, 26)}
_BREAK = {(3, d) for d in range(4, 11)}

# per-group multipliers: (weekday, saturday, sunday, holiday)
_DAY_FACTORS = {
    0: (1.0, 0.6, 0.5, 0.55),
    1: (1.0, 1.05, 1.08, 0.8),
    2: (1.0, 1.1, 1.2, 0.9),
}


def holiday_flags(start: datetime, n_hours: int) -> np.ndarray:
    flags = np.zeros(n_hours, dtype=np.int64)
    for i in range(n_hours):
        ts = start + i * HOUR
        if (ts.month, ts.day) in _HOLIDAYS or (ts.month, ts.day) in _BREAK:
            flags[i] = 1
    return flags


def day_of_week(start: datetime, n_hours: int) -> np.ndarray:
    """Weekday per hour, Monday = 0."""
    offset = int((start - MONDAY_EPOCH) // HOUR)
    return ((offset + np.arange(n_hours)) // 24) % 7


def _span(lo, hi):
    sched = [0] * 24
    for h in range(lo, hi):
        sched[h % 24] = 1
    return tuple(sched)


def _office_inventory(bid, rng) -> ApplianceInventory:
    open_h = int(rng.integers(7, 10))
    close_h = int(rng.integers(17, 20))
    return ApplianceInventory(bid, (
        Appliance("base_services", round(float(rng.uniform(5, 8)), 3), 1, _span(0, 24)),
        Appliance("hvac_chiller", round(float(rng.uniform(10, 14)), 3), 2, _span(open_h, close_h)),
        Appliance("office_equipment", round(float(rng.uniform(0.3, 0.4)), 3), int(rng.integers(40, 61)),
                  _span(open_h + 1, close_h - 1)),
        Appliance("lighting", round(float(rng.uniform(0.05, 0.07)), 3), int(rng.integers(100, 151)),
                  _span(open_h - 1, close_h + 2)),
    ))


def _hostel_inventory(bid, rng) -> ApplianceInventory:
    morning = int(rng.integers(5, 7))
    evening = int(rng.integers(17, 20))
    return ApplianceInventory(bid, (
        Appliance("refrigeration", round(float(rng.uniform(0.2, 0.3)), 3), int(rng.integers(15, 26)), _span(0, 24)),
        Appliance("water_heating", round(float(rng.uniform(1.5, 2.5)), 3), int(rng.integers(5, 9)), _span(morning, 9)),
        Appliance("rooms_evening", round(float(rng.uniform(0.15, 0.2)), 3), int(rng.integers(150, 201)),
                  _span(evening, 24)),
        Appliance("mixed_use_daytime", round(float(rng.uniform(0.5, 1.0)), 3), int(rng.integers(2, 7)),
                  _span(10, 16)),
    ))


def _irregular_inventory(bid, rng) -> ApplianceInventory:
    spike_hours = rng.choice(24, size=int(rng.integers(1, 4)), replace=False)
    spike = [0] * 24
    for h in spike_hours:
        spike[int(h)] = 1
    return ApplianceInventory(bid, (
        Appliance("base_small", round(float(rng.uniform(0.5, 1.5)), 3), int(rng.integers(1, 4)), _span(0, 24)),
        Appliance("intermittent", round(float(rng.uniform(1.5, 3.0)), 3), 1, tuple(spike)),
    ))


_TEMPLATES = (_office_inventory, _hostel_inventory, _irregular_inventory)


def generate_synthetic_campus(
    seed: int,
    n_buildings: int = 55,
    n_hours: int = 3648,
    cluster_sizes: Sequence[int] = (9, 37, 9),
    gap_rate: float = 0.0,
    start: datetime = DEFAULT_START,
    noise: float = 0.05,
) -> CampusDataset:
    """Campus with planted demand groups and a feeder consistent with them.

    Group ``g`` uses template ``g % 3``: office daytime peak, hostel double
    peak, low flat load with irregular spikes. Each building's true load is
    its appliance-inventory profile modulated by day type, a mild linear
    trend and ``noise`` relative Gaussian noise. The feeder is the building
    sum times ``1 + u`` with ``|u| <= 0.015``. ``gap_rate`` removes that
    fraction of feeder hours.
    """
    sizes = [int(s) for s in cluster_sizes]
    if any(s < 1 for s in sizes) or sum(sizes) != n_buildings:
        raise ValueError(f"cluster_sizes {sizes} must be positive and sum to n_buildings={n_buildings}")
    if n_hours < 48:
        raise ValueError("n_hours must be at least 48")
    if not 0.0 <= gap_rate < 1.0:
        raise ValueError("gap_rate must be in [0, 1)")
    rng = np.random.default_rng(seed)
    calendar = holiday_flags(start, n_hours)
    hod = (start.hour + np.arange(n_hours)) % 24
    dow = day_of_week(start, n_hours)
    tau = np.arange(n_hours) / n_hours

    buildings, loads, labels = [], [], []
    b = 0
    for g, size in enumerate(sizes):
        kind = g % 3
        weekday, sat, sun, hol = _DAY_FACTORS[kind]
        day = np.where(dow == 5, sat, np.where(dow == 6, sun, weekday))
        day = np.where(calendar == 1, hol, day)
        for _ in range(size):
            bid = f"B{b:03d}"
            inv = _TEMPLATES[kind](bid, rng)
            profile = np.sum([a.hourly_kw for a in inv.appliances], axis=0)
            trend = 1.0 + rng.uniform(-0.05, 0.15) * tau
            eps = np.clip(rng.standard_normal(n_hours), -3.0, 3.0)
            loads.append(profile[hod] * day * trend * (1.0 + noise * eps))
            buildings.append(inv)
            labels.append(g)
            b += 1
    loads = np.column_stack(loads)
    total = loads.sum(axis=1)
    feeder = total * (1.0 + rng.uniform(-0.015, 0.015, size=n_hours))
    n_gaps = int(round(gap_rate * n_hours))
    if n_gaps:
        feeder[rng.choice(n_hours, size=n_gaps, replace=False)] = np.nan
    return CampusDataset(
        HourlySeries(start, feeder),
        tuple(buildings),
        calendar,
        building_loads=loads,
        planted_labels=np.asarray(labels),
    )


def synthetic_cluster_series(
    seed: int,
    n_hours: int = 3648,
    noise: float = 0.05,
    start: datetime = DEFAULT_START,
) -> list[HourlySeries]:
    """Three cluster-level demand series with additive daily and weekly
    seasonality, a linear trend and ``noise`` relative Gaussian noise.

    Shapes follow the three campus templates: office midday peak, hostel
    morning/evening peaks, low flat demand with a small evening bump.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_hours)
    hod = (start.hour + t) % 24
    dow = day_of_week(start, n_hours)
    out = []
    specs = [
        # level, daily amplitude pattern, weekend offset (fraction of level)
        (420.0, lambda h: 1.1 * np.exp(-0.5 * ((h - 13.0) / 3.2) ** 2), (-0.30, -0.38)),
        (950.0, lambda h: 0.45 * np.exp(-0.5 * ((h - 7.0) / 1.6) ** 2)
         + 0.6 * np.exp(-0.5 * ((h - 20.5) / 2.2) ** 2), (0.04, 0.06)),
        (110.0, lambda h: 0.25 * np.exp(-0.5 * ((h - 18.0) / 3.0) ** 2), (0.08, 0.15)),
    ]
    for level, daily, (sat, sun) in specs:
        lvl = level * rng.uniform(0.9, 1.1)
        slope = rng.uniform(0.05, 0.15)
        weekly = np.where(dow == 5, sat, np.where(dow == 6, sun, 0.0))
        signal = lvl * (1.0 + slope * t / n_hours + daily(hod.astype(float)) + weekly)
        y = signal * (1.0 + noise * rng.standard_normal(n_hours))
        out.append(HourlySeries(start, np.maximum(y, 0.0)))
    return out
