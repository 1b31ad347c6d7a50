"""Per-hour curtailment allocation.

Each hour solves

    min  sum_c w_c L_c   s.t.  sum_c L_c >= deficit,  0 <= L_c <= D_c

a continuous knapsack, solved exactly by shedding the cheapest clusters
first. A weight is the cost of shedding one kWh from that cluster, so the
clusters to protect carry the larger weights.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .data import HOUR, format_timestamp, parse_timestamp
from .errors import ParseError, SchemaError, ValidationError

ORACLE_MAX_CLUSTERS = 12
PLAN_HEADER = ["timestamp", "cluster_id", "demand_kwh", "shed_kwh", "feasible"]
SUPPLY_HEADER = ["timestamp", "supply_kwh"]
WEIGHTS_HEADER = ["cluster_id", "weight"]


def compute_deficit(forecast_total: float, supply: float) -> float:
    forecast_total = float(forecast_total)
    supply = float(supply)
    if not (math.isfinite(forecast_total) and math.isfinite(supply)):
        raise ValueError("forecast and supply must be finite")
    if supply < 0:
        raise ValueError(f"supply must be non-negative, got {supply}")
    return max(0.0, forecast_total - supply)


@dataclass(frozen=True, eq=False)
class SheddingProblem:
    deficit: float
    cluster_demands: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        d = np.array(self.cluster_demands, dtype=np.float64)
        w = np.array(self.weights, dtype=np.float64)
        if d.ndim != 1 or d.shape != w.shape:
            raise ValidationError("demands and weights must be equal-length 1-D sequences")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(w)) and math.isfinite(self.deficit)):
            raise ValidationError("problem data must be finite")
        if np.any(d < 0):
            raise ValidationError("cluster demands must be non-negative")
        if np.any(w <= 0):
            raise ValidationError("weights must be strictly positive")
        if self.deficit < 0:
            raise ValidationError("deficit must be non-negative")
        object.__setattr__(self, "cluster_demands", d)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "deficit", float(self.deficit))

    @property
    def n_clusters(self) -> int:
        return self.cluster_demands.shape[0]


@dataclass(frozen=True, eq=False)
class SheddingPlan:
    curtailment: np.ndarray
    total_shed: float
    objective: float
    feasible: bool
    infeasibility_gap: float = 0.0


def _plan(problem: SheddingProblem, curtailment: np.ndarray) -> SheddingPlan:
    total = math.fsum(curtailment)
    feasible = bool(total >= problem.deficit - 1e-9 * max(1.0, problem.deficit))
    gap = 0.0 if feasible else problem.deficit - total
    objective = math.fsum(problem.weights * curtailment)
    return SheddingPlan(curtailment, total, objective, feasible, gap)


def shedding_order(weights, demands) -> list[int]:
    """Cheapest first; ties go to the larger demand, then the lower index."""
    return sorted(range(len(weights)), key=lambda c: (weights[c], -demands[c], c))


def solve_shedding(problem: SheddingProblem) -> SheddingPlan:
    d, w = problem.cluster_demands, problem.weights
    out = np.zeros_like(d)
    if problem.deficit == 0:
        return _plan(problem, out)
    if math.fsum(d) < problem.deficit:
        return _plan(problem, d.copy())
    remaining = problem.deficit
    for c in shedding_order(w, d):
        if remaining <= 0:
            break
        take = min(d[c], remaining)
        out[c] = take
        remaining -= take
    return _plan(problem, out)


def lp_oracle(problem: SheddingProblem) -> SheddingPlan:
    """Brute-force over LP vertices: every coordinate at a bound except at
    most one, which closes the deficit exactly. Test-scale only."""
    n = problem.n_clusters
    if n > ORACLE_MAX_CLUSTERS:
        raise ValueError(f"oracle handles at most {ORACLE_MAX_CLUSTERS} clusters, got {n}")
    d, w = problem.cluster_demands, problem.weights
    if math.fsum(d) < problem.deficit:
        return _plan(problem, d.copy())
    best, best_obj = None, math.inf
    for mask in itertools.product((0.0, 1.0), repeat=n):
        at_bounds = np.array(mask) * d
        # all at bounds
        if math.fsum(at_bounds) >= problem.deficit:
            obj = math.fsum(w * at_bounds)
            if obj < best_obj:
                best, best_obj = at_bounds, obj
        for j in range(n):
            if mask[j]:
                continue
            cand = at_bounds.copy()
            need = problem.deficit - math.fsum(cand)
            if 0.0 <= need <= d[j]:
                cand[j] = need
                obj = math.fsum(w * cand)
                if obj < best_obj:
                    best, best_obj = cand, obj
    return _plan(problem, best)


@dataclass(frozen=True, eq=False)
class DeficitSchedule:
    """Hourly supply and per-cluster forecast demand on one time axis."""

    start: datetime
    supply: np.ndarray  # (hours,)
    demands: np.ndarray  # (hours, clusters)
    cluster_ids: tuple

    def __post_init__(self):
        s = np.array(self.supply, dtype=np.float64)
        d = np.array(self.demands, dtype=np.float64)
        if d.ndim != 2 or s.shape != (d.shape[0],):
            raise ValueError("supply and demand time axes are not aligned")
        if len(self.cluster_ids) != d.shape[1]:
            raise ValueError("one cluster id per demand column required")
        object.__setattr__(self, "supply", s)
        object.__setattr__(self, "demands", d)
        object.__setattr__(self, "cluster_ids", tuple(int(c) for c in self.cluster_ids))

    @property
    def deficits(self) -> np.ndarray:
        return np.array([compute_deficit(max(dem.sum(), 0.0), s) for dem, s in zip(self.demands, self.supply)])


@dataclass(frozen=True, eq=False)
class ShedSchedule:
    schedule: DeficitSchedule
    plans: tuple

    def __len__(self):
        return len(self.plans)

    def __iter__(self):
        return iter(self.plans)

    @property
    def totals(self) -> np.ndarray:
        """Total kWh shed per cluster over the horizon."""
        return np.sum([p.curtailment for p in self.plans], axis=0)

    @property
    def n_infeasible(self) -> int:
        return sum(not p.feasible for p in self.plans)


def schedule_shedding(schedule: DeficitSchedule, weights) -> ShedSchedule:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(schedule.cluster_ids),):
        raise ValueError("one weight per cluster required")
    plans = []
    for dem, deficit in zip(schedule.demands, schedule.deficits):
        # negative point forecasts cannot be shed
        plans.append(solve_shedding(SheddingProblem(deficit, np.maximum(dem, 0.0), w)))
    return ShedSchedule(schedule, tuple(plans))


DEFAULT_WEIGHT_HIGH, DEFAULT_WEIGHT_LOW = 3.0, 1.0


def default_weights(mean_demands) -> np.ndarray:
    """3.0 for the highest-demand cluster down to 1.0 for the lowest, evenly spaced by rank."""
    mean_demands = np.asarray(mean_demands, dtype=np.float64)
    k = mean_demands.shape[0]
    if k == 1:
        return np.array([DEFAULT_WEIGHT_HIGH])
    levels = np.linspace(DEFAULT_WEIGHT_HIGH, DEFAULT_WEIGHT_LOW, k)
    order = sorted(range(k), key=lambda c: (-mean_demands[c], c))
    out = np.empty(k)
    out[order] = levels
    return out


def _read(path, header):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        got = [c.strip() for c in next(reader, [])]
        if got[: len(header)] != header:
            raise SchemaError(f"{path}: expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if row:
                yield lineno, got, row


def read_weights_csv(path) -> dict[int, float]:
    out = {}
    for lineno, _, row in _read(path, WEIGHTS_HEADER):
        try:
            out[int(row[0])] = float(row[1])
        except (ValueError, IndexError) as exc:
            raise ParseError(path, lineno, str(exc)) from exc
    return out


def write_weights_csv(weights: dict, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WEIGHTS_HEADER)
        for cid in sorted(weights, key=lambda c: (c < 0, c)):
            w.writerow([cid, f"{weights[cid]:g}"])


def read_supply_csv(path) -> tuple[datetime, np.ndarray]:
    rows = []
    for lineno, _, row in _read(path, SUPPLY_HEADER):
        try:
            rows.append((parse_timestamp(row[0]), float(row[1])))
        except (ValueError, IndexError) as exc:
            raise ParseError(path, lineno, str(exc)) from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    rows.sort()
    start = rows[0][0]
    for i, (ts, _) in enumerate(rows):
        if ts != start + i * HOUR:
            raise SchemaError(f"{path}: supply timestamps must be contiguous hours")
    return start, np.array([v for _, v in rows])


def write_supply_csv(start: datetime, supply, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUPPLY_HEADER)
        for i, v in enumerate(supply):
            w.writerow([format_timestamp(start + i * HOUR), f"{v:.9g}"])


def write_plan_csv(result: ShedSchedule, path) -> None:
    sched = result.schedule
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLAN_HEADER)
        for i, plan in enumerate(result.plans):
            ts = format_timestamp(sched.start + i * HOUR)
            for j, cid in enumerate(sched.cluster_ids):
                w.writerow([ts, cid, f"{sched.demands[i, j]:.9g}", f"{plan.curtailment[j]:.9g}",
                            "true" if plan.feasible else "false"])
