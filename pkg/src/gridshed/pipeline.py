"""End-to-end run: disaggregate, features, cluster, forecast, allocate.

Every stage writes its CSV artefact into the output directory so any stage
can be rerun on its own. A failing stage leaves a ``FAILED`` marker naming
the stage and the cause next to whatever was already written.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import BACKEND
from .allocate import (
    DeficitSchedule,
    ShedSchedule,
    default_weights,
    read_supply_csv,
    schedule_shedding,
    write_plan_csv,
    write_supply_csv,
    write_weights_csv,
)
from .cluster import ValidityReport, fit_clusters, select_k, validity_table, write_labels_csv, write_report_csv
from .config import PipelineConfig
from .data import (
    HOUR,
    CampusDataset,
    format_timestamp,
    generate_synthetic_campus,
    holiday_flags,
    load_campus_csv,
    read_calendar_flags,
    write_calendar_csv,
    write_campus_csv,
)
from .disagg import aim_estimate, reconcile_all, write_estimates_csv
from .errors import GridshedError, ParseError, SchemaError, ValidationError
from .forecast import (
    ArimaSpec,
    GruSpec,
    ProphetSpec,
    build_cluster_series,
    forecast_arima,
    forecast_gru,
    forecast_prophet,
    fit_arima,
    fit_gru,
    fit_prophet,
    fit_sarima,
    rolling_origin_evaluate,
    write_cluster_series_csv,
)
from .forecast.metrics import ForecastResult
from .reduce import extract_features, pca_fit, pca_transform, write_features_csv, zscore_normalize

log = logging.getLogger("gridshed")

STAGES = ("disaggregate", "features", "cluster", "forecast", "allocate")
EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_STAGE = 0, 2, 3, 4
INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError, ParseError, SchemaError, ValidationError)


class StageError(GridshedError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        self.exit_code = EXIT_INPUT if isinstance(cause, INPUT_ERRORS) else EXIT_STAGE
        super().__init__(f"stage {stage} failed: {type(cause).__name__}: {cause}")


def stage_seed(root: int, label: str) -> int:
    """Derive an independent 32-bit seed for ``label`` from the root seed."""
    digest = hashlib.sha256(f"{int(root)}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def family_specs(cfg: PipelineConfig, gru_seed: int) -> dict:
    return {
        "arima": ArimaSpec(*cfg["arima.order"]),
        "sarima": ArimaSpec(*cfg["sarima.order"], seasonal=cfg["sarima.seasonal"]),
        "prophet": ProphetSpec(cfg["prophet.n_changepoints"], cfg["prophet.daily_order"],
                               cfg["prophet.weekly_order"], cfg["prophet.ridge_lambda"]),
        "gru": GruSpec(cfg["gru.hidden_size"], cfg["gru.lookback"], cfg["gru.epochs"],
                       cfg["gru.learning_rate"], gru_seed),
    }


def fit_and_forecast(family: str, spec, values, flags, future_flags, horizon: int, hour_offset: int) -> ForecastResult:
    if family == "arima":
        return forecast_arima(fit_arima(values, spec), horizon)
    if family == "sarima":
        return forecast_arima(fit_sarima(values, spec), horizon)
    if family == "prophet":
        return forecast_prophet(fit_prophet(values, flags, spec, hour_offset=hour_offset), horizon, future_flags)
    if family == "gru":
        return forecast_gru(fit_gru(values, spec), horizon)
    raise ValueError(f"unknown model family {family!r}")


@dataclass(frozen=True)
class MetricsRow:
    model: str
    cluster_id: str
    rmse: float
    mape: float
    r2: float
    crps: float | None
    n_folds: int


@dataclass(eq=False)
class RunReport:
    config: PipelineConfig
    seeds: dict
    validity: ValidityReport | None = None
    k_selection: ValidityReport | None = None
    metrics: list = field(default_factory=list)
    shedding: ShedSchedule | None = None
    weights: dict = field(default_factory=dict)
    claims: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def text(self) -> str:
        return render_report(self)


def _f(v, digits=4) -> str:
    if v is None:
        return "-"
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{digits}f}"


def render_report(r: RunReport) -> str:
    cfg = r.config
    lines = ["gridshed run report", ""]
    lines.append("[provenance]")
    lines.append(f"version = {__version__}")
    lines.append(f"backend = {BACKEND}")
    lines.append(f"config_sha256 = {cfg.digest}")
    for label, s in sorted(r.seeds.items()):
        lines.append(f"seed.{label} = {s}")
    lines.append(f"forecast.horizon = {cfg['forecast.horizon']}")
    lines.append(f"forecast.step = {cfg['forecast.step']}")
    lines.append("")
    if r.validity is not None:
        lines.append(f"[clustering evaluation (k = {cfg['cluster.k']}, space = {r.validity.space})]")
        lines.append(f"{'algorithm':<14}{'k':>3}{'silhouette':>12}{'davies_bouldin':>16}{'calinski_harabasz':>19}")
        for row in r.validity.rows:
            lines.append(f"{row.algorithm:<14}{row.k:>3}{_f(row.silhouette):>12}{_f(row.davies_bouldin):>16}"
                         f"{_f(row.calinski_harabasz, 2):>19}")
        lines.append("")
    if r.k_selection is not None:
        alg = r.k_selection.rows[0].algorithm
        lines.append(f"[k selection ({alg})]")
        lines.append(f"{'k':>3}{'silhouette':>12}{'davies_bouldin':>16}{'calinski_harabasz':>19}{'wcss':>14}")
        for row in r.k_selection.rows:
            lines.append(f"{row.k:>3}{_f(row.silhouette):>12}{_f(row.davies_bouldin):>16}"
                         f"{_f(row.calinski_harabasz, 2):>19}{_f(row.wcss, 2):>14}")
        lines.append(f"silhouette argmax k = {r.k_selection.best_silhouette_k}")
        lines.append("")
    if r.metrics:
        lines.append("[forecasting summary]")
        lines.append(f"{'model':<9}{'cluster':>8}{'rmse':>12}{'r2':>9}{'mape%':>9}{'crps':>11}{'folds':>7}")
        for m in r.metrics:
            lines.append(f"{m.model:<9}{m.cluster_id:>8}{_f(m.rmse):>12}{_f(m.r2):>9}{_f(m.mape, 2):>9}"
                         f"{_f(m.crps):>11}{m.n_folds:>7}")
        lines.append("")
    if r.shedding is not None:
        sched = r.shedding.schedule
        lines.append("[shedding summary]")
        lines.append(f"hours = {len(r.shedding)}")
        lines.append(f"deficit_hours = {int(np.sum(sched.deficits > 0))}")
        lines.append(f"total_deficit_kwh = {_f(float(sched.deficits.sum()), 3)}")
        lines.append(f"infeasible_hours = {r.shedding.n_infeasible}")
        totals = r.shedding.totals
        for j, cid in enumerate(sched.cluster_ids):
            lines.append(f"cluster {cid}: weight = {r.weights[cid]:g}, shed_kwh = {_f(float(totals[j]), 3)}")
        lines.append("")
    if r.claims:
        lines.append("[claims]")
        for name, (held, detail) in r.claims.items():
            lines.append(f"{'HOLDS' if held else 'FAILS'}: {name} ({detail})")
        lines.append("")
    for note in r.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines).rstrip("\n") + "\n"


def relabel_by_total(labels, building_means) -> np.ndarray:
    """Renumber clusters so that 0 carries the largest summed demand."""
    labels = np.asarray(labels)
    ids = sorted(int(c) for c in np.unique(labels) if c >= 0)
    totals = {c: float(np.sum(building_means[labels == c])) for c in ids}
    order = sorted(ids, key=lambda c: (-totals[c], c))
    mapping = {c: i for i, c in enumerate(order)}
    return np.array([mapping.get(int(c), -1) for c in labels], dtype=np.int64)


class _Stage:
    def __init__(self, name: str, out: Path):
        self.name, self.out = name, out

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, StageError) or not isinstance(exc, Exception):
            return False
        err = StageError(self.name, exc)
        (self.out / "FAILED").write_text(f"stage = {self.name}\nerror = {type(exc).__name__}: {exc}\n")
        raise err from exc


def run_pipeline(cfg: PipelineConfig, dataset: CampusDataset | None = None, future_calendar=None,
                 out_dir=None) -> RunReport:
    """Run every stage; ``dataset`` bypasses CSV ingestion (used by ``simulate``).

    ``future_calendar`` maps ``(start, n_hours)`` to holiday flags beyond the
    observed data; without it future flags come from ``paths.calendar`` when
    that file covers them and are 0 otherwise.
    """
    out = Path(out_dir if out_dir is not None else cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()
    root = cfg["run.seed"]
    seeds = {"root": root, "cluster": stage_seed(root, "cluster"), "gru": stage_seed(root, "gru")}
    report = RunReport(cfg, seeds)

    with _Stage("disaggregate", out):
        if dataset is None:
            feeder, inventory = cfg["paths.feeder"], cfg["paths.inventory"]
            if not feeder or not inventory:
                raise FileNotFoundError("paths.feeder and paths.inventory must be set")
            for p in (feeder, inventory):
                if not Path(p).is_file():
                    raise FileNotFoundError(f"input file not found: {p}")
            dataset = load_campus_csv(feeder, inventory, cfg["paths.calendar"] or None)
        recon = reconcile_all(aim_estimate(dataset), dataset.feeder)
        write_estimates_csv(recon, out / "estimates.csv")
        estimates = recon.reconciled
        n_gap = int(recon.gap_hours.sum())
        if n_gap:
            report.notes.append(f"{n_gap} feeder gap hours carried as gaps into the cluster series")

    with _Stage("features", out):
        raw = extract_features(estimates)
        z = zscore_normalize(raw)
        write_features_csv(raw, out / "features.csv")
        if cfg["pca.enabled"]:
            pca = pca_fit(z, cfg["pca.variance_target"])
            space_features, space = pca_transform(pca, z), "pca"
            write_features_csv(space_features, out / "features_pca.csv")
            report.notes.append(f"pca keeps {pca.k} components ({pca.explained_fraction:.4f} of variance)")
        else:
            space_features, space = z, "zscore"

    with _Stage("cluster", out):
        cseed = seeds["cluster"]
        k = cfg["cluster.k"]
        report.validity = validity_table(space_features, k=k, seed=cseed, space=space,
                                         batch_size=cfg["cluster.batch_size"],
                                         dbscan_eps=cfg["cluster.dbscan_eps"],
                                         dbscan_min_pts=cfg["cluster.dbscan_min_pts"])
        write_report_csv(report.validity, out / "validity.csv")
        alg = cfg["cluster.algorithm"]
        params = {}
        if alg == "minibatch":
            params["batch_size"] = cfg["cluster.batch_size"]
        if alg == "dbscan":
            params = {"eps": cfg["cluster.dbscan_eps"], "min_pts": cfg["cluster.dbscan_min_pts"]}
        else:
            ks = [kk for kk in cfg["cluster.k_range"] if 2 <= kk <= raw.n - 1]
            report.k_selection = select_k(space_features, alg, ks, seed=cseed, space=space, **params)
            write_report_csv(report.k_selection, out / "k_selection.csv")
        model = fit_clusters(space_features, alg, k=None if alg == "dbscan" else k, seed=cseed, **params)
        building_means = raw.features[:, raw.feature_names.index("mean")]
        labels = relabel_by_total(model.labels, building_means)
        write_labels_csv(raw.building_ids, labels, out / "labels.csv")

    with _Stage("forecast", out):
        series = build_cluster_series(estimates, labels, gap_hours=recon.gap_hours)
        write_cluster_series_csv(series, out / "cluster_series.csv")
        horizon, step = cfg["forecast.horizon"], cfg["forecast.step"]
        specs = family_specs(cfg, seeds["gru"])
        flags = np.asarray(dataset.calendar, dtype=np.float64)
        for fam in cfg["forecast.evaluate"]:
            fam_step = len(dataset.feeder) if (fam == "gru" and cfg["forecast.gru_single_fold"]) else step
            evals = []
            for cs in series:
                ev = rolling_origin_evaluate(cs, fam, specs[fam], 0.8, horizon, fam_step, flags)
                evals.append(ev)
                m = ev.metrics
                report.metrics.append(MetricsRow(fam, str(cs.cluster_id), m.rmse, m.mape, m.r2, m.crps, ev.n_folds))
            report.metrics.append(summary_row(fam, evals))
        write_metrics_csv(report.metrics, out / "metrics.csv")

        start = dataset.feeder.start
        n = len(dataset.feeder)
        f_start = start + n * HOUR
        if future_calendar is not None:
            future = np.asarray(future_calendar(f_start, horizon), dtype=np.float64)
        elif cfg["paths.calendar"]:
            future = read_calendar_flags(cfg["paths.calendar"], f_start, horizon).astype(np.float64)
        else:
            future = np.zeros(horizon)
        fam = cfg["forecast.model"]
        forecasts = []
        for cs in series:
            res = fit_and_forecast(fam, specs[fam], cs.values, flags, future, horizon, cs.series.hour_offset())
            forecasts.append((cs.cluster_id, res))
        write_forecast_csv(f_start, forecasts, out / "forecast.csv")

    with _Stage("allocate", out):
        demands = np.column_stack([res.point for _, res in forecasts])
        cluster_ids = [cid for cid, _ in forecasts]
        if cfg["allocate.supply"]:
            s_start, supply = read_supply_csv(cfg["allocate.supply"])
            if s_start != f_start or len(supply) != horizon:
                raise ValidationError("supply file must cover exactly the forecast horizon")
        else:
            hist_total = np.nansum(np.column_stack([cs.values for cs in series]), axis=1)
            supply = np.full(horizon, cfg["allocate.supply_fraction"] * float(np.mean(hist_total)))
        write_supply_csv(f_start, supply, out / "supply.csv")
        given = cfg["allocate.weights"]
        if given is None:
            means = [float(np.nanmean(cs.values)) for cs in series]
            weights = dict(zip(cluster_ids, (float(w) for w in default_weights(means))))
        else:
            missing = [c for c in cluster_ids if c not in given]
            if missing:
                raise ValidationError(f"allocate.weights has no weight for clusters {missing}")
            weights = {c: given[c] for c in cluster_ids}
        write_weights_csv(weights, out / "weights.csv")
        report.weights = weights
        sched = DeficitSchedule(f_start, supply, demands, cluster_ids)
        report.shedding = schedule_shedding(sched, [weights[c] for c in cluster_ids])
        write_plan_csv(report.shedding, out / "plan.csv")

    if report.k_selection is not None and report.k_selection.rows[0].algorithm == "kmeans":
        best = report.k_selection.best_silhouette_k
        report.claims["silhouette argmax at k = 3"] = (best == 3, f"argmax k = {best}")
    means = {m.model: m.rmse for m in report.metrics if m.cluster_id == "mean"}
    if "prophet" in means and len(means) > 1:
        best = min(means, key=lambda f: (means[f], f))
        report.claims["prophet-family lowest mean RMSE"] = (
            best == "prophet", ", ".join(f"{f} {means[f]:.4f}" for f in sorted(means, key=means.get)))
    (out / "report.txt").write_text(report.text())
    return report


def summary_row(family: str, evals) -> MetricsRow:
    """Uniform mean over clusters."""
    def mean(attr):
        return float(np.mean([getattr(e.metrics, attr) for e in evals]))

    crps = None if any(e.metrics.crps is None for e in evals) else mean("crps")
    return MetricsRow(family, "mean", mean("rmse"), mean("mape"), mean("r2"), crps, sum(e.n_folds for e in evals))


def write_metrics_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "cluster_id", "rmse", "mape", "r2", "crps"])
        for m in rows:
            w.writerow([m.model, m.cluster_id, f"{m.rmse:.10g}", f"{m.mape:.10g}", f"{m.r2:.10g}",
                        "" if m.crps is None else f"{m.crps:.10g}"])


def write_forecast_csv(start: datetime, forecasts, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "cluster_id", "point", "lower", "upper"])
        for cid, res in forecasts:
            for i, p in enumerate(res.point):
                lo = "" if res.lower is None else f"{res.lower[i]:.9g}"
                hi = "" if res.upper is None else f"{res.upper[i]:.9g}"
                w.writerow([format_timestamp(start + i * HOUR), cid, f"{p:.9g}", lo, hi])


def simulate(cfg: PipelineConfig, out_dir=None) -> RunReport:
    """Generate a synthetic campus from the root seed, then run the pipeline on it."""
    root = cfg["run.seed"]
    gseed = stage_seed(root, "generator")
    dataset = generate_synthetic_campus(
        gseed,
        n_buildings=cfg["generator.n_buildings"],
        n_hours=cfg["generator.n_hours"],
        cluster_sizes=cfg["generator.cluster_sizes"],
        gap_rate=cfg["generator.gap_rate"],
        noise=cfg["generator.noise"],
    )
    out = Path(out_dir if out_dir is not None else cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    horizon = cfg["forecast.horizon"]
    start = dataset.feeder.start
    write_campus_csv(dataset, out / "feeder.csv", out / "inventory.csv")
    write_calendar_csv(start, holiday_flags(start, dataset.n_hours + horizon), out / "calendar.csv")
    report = run_pipeline(cfg, dataset, future_calendar=holiday_flags, out_dir=out)
    report.seeds["generator"] = gseed
    (out / "report.txt").write_text(report.text())
    return report
