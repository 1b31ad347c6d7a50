from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..data import HOUR, HourlySeries, format_timestamp, parse_timestamp
from ..disagg import BuildingEstimates
from ..errors import ParseError, SchemaError

SERIES_HEADER = ["timestamp", "cluster_id", "kwh"]


@dataclass(frozen=True, eq=False)
class ClusterSeries:
    cluster_id: int
    series: HourlySeries

    def __len__(self):
        return len(self.series)

    @property
    def values(self) -> np.ndarray:
        return self.series.values


def build_cluster_series(estimates: BuildingEstimates, labels, gap_hours=None) -> list[ClusterSeries]:
    """Per-hour load summed over each cluster's member buildings.

    An hour is a gap when every member is a gap there, or when ``gap_hours``
    marks it (feeder gaps whose values are unreconciled estimates). Noise
    buildings (label -1) form their own series with cluster id -1, listed last.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(estimates.building_ids),):
        raise ValueError("labels must cover every building")
    m = estimates.matrix
    ids = sorted(int(c) for c in np.unique(labels) if c >= 0)
    if np.any(labels == -1):
        ids.append(-1)
    out = []
    for c in ids:
        members = labels == c
        if not np.any(members):
            warnings.warn(f"cluster {c} is empty; skipped", stacklevel=2)
            continue
        block = m[:, members]
        all_gap = np.all(np.isnan(block), axis=1)
        total = np.nansum(block, axis=1)
        total[all_gap] = np.nan
        if gap_hours is not None:
            total[np.asarray(gap_hours, dtype=bool)] = np.nan
        out.append(ClusterSeries(c, HourlySeries(estimates.start, total)))
    return out


def write_cluster_series_csv(series: list[ClusterSeries], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for cs in series:
            for ts, v in zip(cs.series.timestamps(), cs.values):
                w.writerow([format_timestamp(ts), cs.cluster_id, "" if np.isnan(v) else f"{v:.9g}"])


def read_cluster_series_csv(path) -> list[ClusterSeries]:
    path = Path(path)
    cells: dict[int, list] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        if [c.strip() for c in next(reader, [])] != SERIES_HEADER:
            raise SchemaError(f"{path}: expected header {','.join(SERIES_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(path, lineno, "expected 3 fields")
            try:
                ts = parse_timestamp(row[0])
                cid = int(row[1])
                val = float(row[2]) if row[2].strip() else np.nan
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from exc
            cells.setdefault(cid, []).append((ts, val))
    if not cells:
        raise SchemaError(f"{path}: no data rows")
    out = []
    for cid in sorted(cells, key=lambda c: (c < 0, c)):
        rows = cells[cid]
        start = min(ts for ts, _ in rows)
        n = int((max(ts for ts, _ in rows) - start) // HOUR) + 1
        vals = np.full(n, np.nan)
        for ts, v in rows:
            vals[int((ts - start) // HOUR)] = v
        out.append(ClusterSeries(cid, HourlySeries(start, vals)))
    return out
