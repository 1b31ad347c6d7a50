"""Command-line entry point: ``gridshed <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 stage failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .allocate import (
    DeficitSchedule,
    default_weights,
    read_supply_csv,
    read_weights_csv,
    schedule_shedding,
    write_plan_csv,
)
from .cluster import (
    ALGORITHMS,
    fit_clusters,
    select_k,
    validity_table,
    write_labels_csv,
    write_report_csv,
)
from .config import load_config, parse_int_list, parse_set_options
from .data import (
    HOUR,
    generate_synthetic_campus,
    holiday_flags,
    load_campus_csv,
    parse_timestamp,
    read_calendar_flags,
    write_calendar_csv,
    write_campus_csv,
)
from .disagg import aim_estimate, read_estimates_csv, reconcile_all, write_estimates_csv
from .errors import ConfigError, GridshedError, ParseError, SchemaError, ValidationError
from .forecast import FAMILIES, read_cluster_series_csv, rolling_origin_evaluate
from .pipeline import (
    EXIT_CONFIG,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_STAGE,
    StageError,
    MetricsRow,
    family_specs,
    fit_and_forecast,
    run_pipeline,
    simulate,
    stage_seed,
    summary_row,
    write_forecast_csv,
    write_metrics_csv,
)
from .reduce import extract_features, pca_fit, pca_transform, read_features_csv, write_features_csv, zscore_normalize

log = logging.getLogger("gridshed")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridshed", description="Campus load disaggregation, clustering, "
                                "forecasting and load-shedding allocation.")
    p.add_argument("--config", metavar="PATH", help="flat 'section.key = value' config file")
    p.add_argument("--seed", type=int, help="root seed (overrides run.seed)")
    p.add_argument("--out", dest="out_dir", metavar="DIR", help="output directory (overrides paths.out)")
    p.add_argument("--quiet", action="store_true", help="only print warnings and errors")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", help="write a synthetic campus as CSV")
    s.add_argument("--gaps", type=float, help="fraction of feeder hours to drop")
    s.add_argument("--cluster-sizes", help="planted group sizes, e.g. 9,37,9")
    s.add_argument("--hours", type=int, help="series length in hours")

    s = sub.add_parser("disaggregate", help="appliance-inventory estimates reconciled to the feeder")
    s.add_argument("--feeder", required=True)
    s.add_argument("--inventory", required=True)
    s.add_argument("--calendar")
    s.add_argument("--out", dest="out_file", default="estimates.csv")

    s = sub.add_parser("features", help="per-building features, z-scored, optionally PCA-reduced")
    s.add_argument("--estimates", required=True)
    s.add_argument("--no-pca", action="store_true")
    s.add_argument("--variance-target", type=float)
    s.add_argument("--out", dest="out_file", default="features.csv")

    s = sub.add_parser("cluster", help="cluster buildings and report validity indices")
    s.add_argument("--features", required=True)
    s.add_argument("--algorithm", choices=ALGORITHMS)
    s.add_argument("--k", type=int)
    s.add_argument("--k-range", "--select-k", dest="k_range", help="select k by silhouette over e.g. 2-8 or 2..8")
    s.add_argument("--report", help="validity CSV path (all algorithms at k, or the k sweep; "
                   "the sweep goes to stdout without it)")
    s.add_argument("--out", dest="out_file", default="labels.csv")

    s = sub.add_parser("forecast", help="forecast each cluster series")
    s.add_argument("--series", required=True)
    s.add_argument("--model", choices=FAMILIES)
    s.add_argument("--horizon", type=int)
    s.add_argument("--calendar")
    s.add_argument("--out", dest="out_file", default="forecast.csv")

    s = sub.add_parser("evaluate", help="rolling-origin evaluation of forecasting models")
    s.add_argument("--series", required=True)
    s.add_argument("--model", default="all", choices=("all",) + FAMILIES)
    s.add_argument("--horizon", type=int)
    s.add_argument("--step", type=int)
    s.add_argument("--calendar")
    s.add_argument("--out", dest="out_file", default="metrics.csv")

    s = sub.add_parser("allocate", help="per-hour curtailment plan")
    s.add_argument("--forecast", required=True)
    s.add_argument("--supply", required=True)
    s.add_argument("--weights")
    s.add_argument("--out", dest="out_file", default="plan.csv")

    s = sub.add_parser("simulate", help="synthetic campus through the whole pipeline")
    s.add_argument("--gaps", type=float, help="fraction of feeder hours to drop")
    s.add_argument("--cluster-sizes", help="planted group sizes, e.g. 20,20,15")

    sub.add_parser("run", help="whole pipeline on the paths.* inputs")
    for sp in sub.choices.values():
        # also accepted after the subcommand; wins over the global flag
        sp.add_argument("--seed", dest="sub_seed", type=int, help=argparse.SUPPRESS)
    return p


def _config(args):
    overrides = parse_set_options(args.overrides)
    seed = args.sub_seed if getattr(args, "sub_seed", None) is not None else args.seed
    if seed is not None:
        overrides["run.seed"] = str(seed)
    if args.out_dir is not None:
        overrides["paths.out"] = args.out_dir
    if getattr(args, "gaps", None) is not None:
        overrides["generator.gap_rate"] = str(args.gaps)
    if getattr(args, "cluster_sizes", None):
        sizes = parse_int_list(args.cluster_sizes)
        overrides["generator.cluster_sizes"] = args.cluster_sizes
        overrides["generator.n_buildings"] = str(sum(sizes))
    if getattr(args, "hours", None) is not None:
        overrides["generator.n_hours"] = str(args.hours)
    return load_config(args.config, overrides)


def cmd_generate(args, cfg):
    out = Path(cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    seed = stage_seed(cfg["run.seed"], "generator")
    ds = generate_synthetic_campus(seed, cfg["generator.n_buildings"], cfg["generator.n_hours"],
                                   cfg["generator.cluster_sizes"], cfg["generator.gap_rate"],
                                   noise=cfg["generator.noise"])
    write_campus_csv(ds, out / "feeder.csv", out / "inventory.csv")
    horizon = cfg["forecast.horizon"]
    write_calendar_csv(ds.feeder.start, holiday_flags(ds.feeder.start, ds.n_hours + horizon), out / "calendar.csv")
    write_labels_csv(ds.building_ids, ds.planted_labels, out / "planted_labels.csv")
    log.info("wrote synthetic campus (seed %d) to %s", seed, out)


def cmd_disaggregate(args, cfg):
    ds = load_campus_csv(args.feeder, args.inventory, args.calendar)
    res = reconcile_all(aim_estimate(ds), ds.feeder)
    write_estimates_csv(res, args.out_file)
    log.info("%d hours x %d buildings; %d gap hours", res.aim.n_hours, len(res.aim.building_ids),
             int(res.gap_hours.sum()))


def cmd_features(args, cfg):
    est, _ = read_estimates_csv(args.estimates)
    z = zscore_normalize(extract_features(est))
    if args.no_pca or not cfg["pca.enabled"]:
        write_features_csv(z, args.out_file)
        return
    target = args.variance_target if args.variance_target is not None else cfg["pca.variance_target"]
    model = pca_fit(z, target)
    write_features_csv(pca_transform(model, z), args.out_file)
    log.info("pca keeps %d components (%.4f of variance)", model.k, model.explained_fraction)


def cmd_cluster(args, cfg):
    feats = read_features_csv(args.features)
    alg = args.algorithm or cfg["cluster.algorithm"]
    seed = stage_seed(cfg["run.seed"], "cluster")
    space = "pca" if feats.feature_names and feats.feature_names[0] == "pc1" else "features"
    params = {}
    if alg == "minibatch":
        params["batch_size"] = cfg["cluster.batch_size"]
    if alg == "dbscan":
        params = {"eps": cfg["cluster.dbscan_eps"], "min_pts": cfg["cluster.dbscan_min_pts"]}
        model = fit_clusters(feats, alg, seed=seed, **params)
    else:
        k = args.k if args.k is not None else cfg["cluster.k"]
        if args.k_range:
            rep = select_k(feats, alg, parse_int_list(args.k_range), seed=seed, space=space, **params)
            k = rep.best_silhouette_k
            write_report_csv(rep, args.report or sys.stdout)
            log.info("silhouette argmax k = %s", k)
        elif args.report:
            write_report_csv(validity_table(feats, k=k, seed=seed, space=space,
                                            batch_size=cfg["cluster.batch_size"],
                                            dbscan_eps=cfg["cluster.dbscan_eps"],
                                            dbscan_min_pts=cfg["cluster.dbscan_min_pts"]), args.report)
        model = fit_clusters(feats, alg, k=k, seed=seed, **params)
    write_labels_csv(feats.building_ids, model.labels, args.out_file)


def _calendar_for(path, start, n):
    if path is None:
        return np.zeros(n)
    return read_calendar_flags(path, start, n).astype(np.float64)


def cmd_forecast(args, cfg):
    series = read_cluster_series_csv(args.series)
    fam = args.model or cfg["forecast.model"]
    horizon = args.horizon if args.horizon is not None else cfg["forecast.horizon"]
    spec = family_specs(cfg, stage_seed(cfg["run.seed"], "gru"))[fam]
    start = min(cs.series.start for cs in series)
    results = []
    f_start = None
    for cs in series:
        n = len(cs)
        flags = _calendar_for(args.calendar, cs.series.start, n + horizon)
        res = fit_and_forecast(fam, spec, cs.values, flags[:n], flags[n:], horizon, cs.series.hour_offset())
        results.append((cs.cluster_id, res))
        end = cs.series.start + n * HOUR
        if f_start is not None and end != f_start:
            raise ValidationError("cluster series must end at the same hour")
        f_start = end
    write_forecast_csv(f_start or start, results, args.out_file)


def cmd_evaluate(args, cfg):
    series = read_cluster_series_csv(args.series)
    fams = FAMILIES if args.model == "all" else (args.model,)
    horizon = args.horizon if args.horizon is not None else cfg["forecast.horizon"]
    step = args.step if args.step is not None else cfg["forecast.step"]
    specs = family_specs(cfg, stage_seed(cfg["run.seed"], "gru"))
    rows = []
    for fam in fams:
        evals = []
        for cs in series:
            n = len(cs)
            fam_step = n if (fam == "gru" and cfg["forecast.gru_single_fold"]) else step
            ev = rolling_origin_evaluate(cs, fam, specs[fam], 0.8, horizon, fam_step,
                                         _calendar_for(args.calendar, cs.series.start, n))
            evals.append(ev)
            m = ev.metrics
            rows.append(MetricsRow(fam, str(cs.cluster_id), m.rmse, m.mape, m.r2, m.crps, ev.n_folds))
        rows.append(summary_row(fam, evals))
    write_metrics_csv(rows, args.out_file)
    for r in rows:
        if r.cluster_id == "mean":
            log.info("%-8s mean rmse %.4f", r.model, r.rmse)


def _read_forecast_csv(path):
    path = Path(path)
    cells: dict[int, list] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader, [])]
        if header != ["timestamp", "cluster_id", "point", "lower", "upper"]:
            raise SchemaError(f"{path}: expected header timestamp,cluster_id,point,lower,upper")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                cells.setdefault(int(row[1]), []).append((parse_timestamp(row[0]), float(row[2])))
            except (ValueError, IndexError) as exc:
                raise ParseError(path, lineno, str(exc)) from exc
    if not cells:
        raise SchemaError(f"{path}: no data rows")
    ids = sorted(cells, key=lambda c: (c < 0, c))
    stamps = [sorted(cells[c]) for c in ids]
    axis = [ts for ts, _ in stamps[0]]
    for rows in stamps[1:]:
        if [ts for ts, _ in rows] != axis:
            raise ValidationError(f"{path}: clusters do not share one time axis")
    for i, ts in enumerate(axis):
        if ts != axis[0] + i * HOUR:
            raise ValidationError(f"{path}: forecast hours must be contiguous")
    demands = np.column_stack([[v for _, v in rows] for rows in stamps])
    return axis[0], ids, demands


def cmd_allocate(args, cfg):
    start, ids, demands = _read_forecast_csv(args.forecast)
    s_start, supply = read_supply_csv(args.supply)
    if s_start != start or len(supply) != demands.shape[0]:
        raise ValidationError("supply and forecast time axes are not aligned")
    if args.weights:
        given = read_weights_csv(args.weights)
    else:
        given = cfg["allocate.weights"]
    if given is None:
        w = default_weights(demands.mean(axis=0))
    else:
        missing = [c for c in ids if c not in given]
        if missing:
            raise ValidationError(f"no weight for clusters {missing}")
        w = np.array([given[c] for c in ids])
    result = schedule_shedding(DeficitSchedule(start, supply, demands, ids), w)
    write_plan_csv(result, args.out_file)
    log.info("%d hours, %d infeasible", len(result), result.n_infeasible)


def _print_claims(report, stream):
    print("reference ranking claims on this run:", file=stream)
    if not report.claims:
        print("  (none evaluated)", file=stream)
    for name, (held, detail) in report.claims.items():
        print(f"  {'HOLDS' if held else 'FAILS'}: {name} ({detail})", file=stream)


def cmd_simulate(args, cfg):
    report = simulate(cfg)
    if not args.quiet:
        sys.stdout.write(report.text())
    _print_claims(report, sys.stdout)


def cmd_run(args, cfg):
    report = run_pipeline(cfg)
    if not args.quiet:
        sys.stdout.write(report.text())


COMMANDS = {
    "generate": cmd_generate,
    "disaggregate": cmd_disaggregate,
    "features": cmd_features,
    "cluster": cmd_cluster,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "allocate": cmd_allocate,
    "simulate": cmd_simulate,
    "run": cmd_run,
}

_INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError, ParseError, SchemaError, ValidationError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"gridshed: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"gridshed: {exc}", file=sys.stderr)
        return exc.exit_code
    except _INPUT_ERRORS as exc:
        print(f"gridshed: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GridshedError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"gridshed: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
