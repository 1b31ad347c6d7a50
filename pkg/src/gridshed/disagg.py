"""Appliance-inventory load estimates and per-hour feeder reconciliation.

Each hour's reconciliation is the Euclidean projection of the building
estimates onto ``{v >= 0, sum(v) = feeder}``: the non-negative least-squares
problem with identity design on the hour slice and the feeder equality
constraint.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from . import kernels
from .data import HOUR, CampusDataset, HourlySeries, format_timestamp, parse_timestamp
from .errors import ParseError, SchemaError, ValidationError

FLAG_OK = 0
FLAG_GAP = 1
FLAG_UNIFORM = 2
FLAG_NAMES = {FLAG_OK: "ok", FLAG_GAP: "gap", FLAG_UNIFORM: "uniform"}

ESTIMATES_HEADER = ["timestamp", "building_id", "kwh_aim", "kwh_reconciled", "flag"]


@dataclass(frozen=True, eq=False)
class BuildingEstimates:
    """Hours x buildings kWh matrix on an hourly axis starting at ``start``."""

    building_ids: tuple
    matrix: np.ndarray
    start: datetime

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != len(self.building_ids):
            raise ValidationError("matrix must be hours x buildings")
        if np.any(m[~np.isnan(m)] < 0):
            raise ValidationError("building estimates must be non-negative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "building_ids", tuple(self.building_ids))

    @property
    def n_hours(self) -> int:
        return self.matrix.shape[0]

    def series(self, j: int) -> HourlySeries:
        return HourlySeries(self.start, self.matrix[:, j])


@dataclass(frozen=True, eq=False)
class ReconciliationResult:
    aim: BuildingEstimates
    reconciled: BuildingEstimates
    residual_norm: np.ndarray  # per hour, ||reconciled - aim||^2
    flags: np.ndarray  # per hour, FLAG_* codes

    @property
    def weights(self) -> np.ndarray:
        # with identity design the per-hour weight vector is the reconciled row
        return self.reconciled.matrix

    @property
    def gap_hours(self) -> np.ndarray:
        return self.flags == FLAG_GAP


def aim_estimate(dataset: CampusDataset) -> BuildingEstimates:
    """Sum of state x rated power x count over each building's appliances."""
    hod = dataset.feeder.hour_of_day()
    cols = []
    for inv in dataset.buildings:
        profile = np.zeros(24)
        for app in inv.appliances:
            profile += app.hourly_kw
        cols.append(profile[hod])
    return BuildingEstimates(tuple(dataset.building_ids), np.column_stack(cols), dataset.feeder.start)


def reconcile_hour(aim_row, feeder_value: float) -> tuple[np.ndarray, bool]:
    """Project one hour of estimates onto the feeder total.

    Returns ``(reconciled, uniform)`` where ``uniform`` flags an all-zero
    estimate row that was split evenly.
    """
    row = np.asarray(aim_row, dtype=np.float64).reshape(1, -1)
    if row.shape[1] < 1:
        raise ValueError("aim_row needs at least one building")
    if not np.isfinite(feeder_value) or feeder_value < 0:
        raise ValueError(f"feeder_value must be finite and >= 0, got {feeder_value}")
    out = kernels.project_simplex_rows(np.ascontiguousarray(row), np.array([float(feeder_value)]))[0]
    uniform = bool(feeder_value > 0 and not np.any(row))
    return out, uniform


def reconcile_all(estimates: BuildingEstimates, feeder: HourlySeries) -> ReconciliationResult:
    if estimates.n_hours != len(feeder) or estimates.start != feeder.start:
        raise ValueError("estimates and feeder must share the same hourly axis")
    aim = estimates.matrix
    fv = feeder.values
    gap = np.isnan(fv)
    ok = ~gap
    out = aim.copy()
    if np.any(ok):
        out[ok] = kernels.project_simplex_rows(np.ascontiguousarray(aim[ok]), np.ascontiguousarray(fv[ok]))
    flags = np.full(len(fv), FLAG_OK, dtype=np.int64)
    flags[gap] = FLAG_GAP
    flags[ok & (fv > 0) & ~np.any(aim, axis=1)] = FLAG_UNIFORM
    resid = np.sum((out - aim) ** 2, axis=1)
    return ReconciliationResult(
        estimates,
        BuildingEstimates(estimates.building_ids, out, estimates.start),
        resid,
        flags,
    )


def write_estimates_csv(result: ReconciliationResult, path) -> None:
    ids = result.aim.building_ids
    aim = result.aim.matrix
    rec = result.reconciled.matrix
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATES_HEADER)
        for t in range(aim.shape[0]):
            ts = format_timestamp(result.aim.start + t * HOUR)
            flag = FLAG_NAMES[int(result.flags[t])]
            for j, bid in enumerate(ids):
                w.writerow([ts, bid, f"{aim[t, j]:.9g}", f"{rec[t, j]:.9g}", flag])


def read_estimates_csv(path, column: str = "kwh_reconciled") -> tuple[BuildingEstimates, np.ndarray]:
    """Load an estimates file; returns the chosen column and per-hour flags."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader, [])]
        if header != ESTIMATES_HEADER:
            raise SchemaError(f"{path}: expected header {','.join(ESTIMATES_HEADER)}")
        col = ESTIMATES_HEADER.index(column)
        stamps: dict[datetime, int] = {}
        ids: dict[str, int] = {}
        cells = []
        flags: dict[datetime, str] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(ESTIMATES_HEADER):
                raise ParseError(path, lineno, f"expected {len(ESTIMATES_HEADER)} fields")
            try:
                ts = parse_timestamp(row[0])
                val = float(row[col]) if row[col].strip() else np.nan
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from exc
            stamps.setdefault(ts, len(stamps))
            ids.setdefault(row[1].strip(), len(ids))
            flags[ts] = row[4].strip()
            cells.append((ts, row[1].strip(), val))
    if not cells:
        raise SchemaError(f"{path}: no data rows")
    start = min(stamps)
    n_hours = int((max(stamps) - start) // HOUR) + 1
    m = np.full((n_hours, len(ids)), np.nan)
    for ts, bid, val in cells:
        m[int((ts - start) // HOUR), ids[bid]] = val
    names = {v: k for k, v in FLAG_NAMES.items()}
    fl = np.full(n_hours, FLAG_GAP, dtype=np.int64)
    for ts, name in flags.items():
        fl[int((ts - start) // HOUR)] = names.get(name, FLAG_OK)
    return BuildingEstimates(tuple(ids), m, start), fl
