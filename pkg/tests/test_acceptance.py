"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary
(see ``conftest.py``), so ``pytest tests/test_acceptance.py`` ends with a
ten-line scorecard.
"""

import itertools
import math
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

from gridshed.allocate import SheddingProblem, lp_oracle, solve_shedding
from gridshed.cluster import compute_validity, fit_clusters, select_k, validity_table
from gridshed.data import DEFAULT_START, generate_synthetic_campus, holiday_flags, synthetic_cluster_series
from gridshed.disagg import aim_estimate, reconcile_all, reconcile_hour
from gridshed.forecast import (
    ArimaSpec,
    GruSpec,
    ProphetSpec,
    compute_metrics,
    crps_gaussian,
    fit_arima,
    fit_prophet,
    fit_sarima,
    forecast_sarima,
    rolling_origin_evaluate,
)
from gridshed.forecast.gru import PARAM_GROUPS, init_params, loss_and_grads
from gridshed.reduce import extract_features, pca_fit, pca_transform, zscore_normalize

RESULTS = {}


def report(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


# ---------------------------------------------------------------------------
# oracles


def simplex_oracle(a, total):
    """Best projection over every candidate support set."""
    a = np.asarray(a, dtype=np.float64)
    n = a.size
    if total == 0:
        return np.zeros(n)
    best, best_d = None, math.inf
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            idx = list(support)
            theta = (a[idx].sum() - total) / size
            v = np.zeros(n)
            v[idx] = a[idx] - theta
            if np.any(v[idx] < 0):
                continue
            d = float(np.sum((v - a) ** 2))
            if d < best_d:
                best, best_d = v, d
    return best


def naive_validity(x, labels):
    n = len(x)
    ids = sorted(set(labels.tolist()))
    dist = [[math.sqrt(sum((x[i, f] - x[j, f]) ** 2 for f in range(x.shape[1]))) for j in range(n)] for i in range(n)]
    sil = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            sil.append(0.0)
            continue
        a = sum(dist[i][j] for j in own) / len(own)
        b = min(
            sum(dist[i][j] for j in range(n) if labels[j] == c) / sum(1 for j in range(n) if labels[j] == c)
            for c in ids
            if c != labels[i]
        )
        sil.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    cents = {c: x[labels == c].mean(axis=0) for c in ids}
    spread = {c: np.mean([np.linalg.norm(p - cents[c]) for p in x[labels == c]]) for c in ids}
    db = np.mean([max((spread[c] + spread[o]) / np.linalg.norm(cents[c] - cents[o]) for o in ids if o != c)
                  for c in ids])
    grand = x.mean(axis=0)
    between = sum(np.sum(labels == c) * np.sum((cents[c] - grand) ** 2) for c in ids)
    within = sum(np.sum((p - cents[labels[i]]) ** 2) for i, p in enumerate(x))
    k = len(ids)
    ch = (between / (k - 1)) / (within / (n - k))
    return sum(sil) / n, db, ch


def best_permutation_accuracy(labels, truth):
    k = max(labels.max(), truth.max()) + 1
    return max(np.mean(np.array(perm)[labels] == truth) for perm in itertools.permutations(range(k)))


def campus_pca(seed):
    ds = generate_synthetic_campus(seed)
    recon = reconcile_all(aim_estimate(ds), ds.feeder)
    z = zscore_normalize(extract_features(recon.reconciled))
    return ds, pca_transform(pca_fit(z, 0.95), z)


# ---------------------------------------------------------------------------


def test_criterion_01_simplex_projection_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(1, 7))
        a = rng.uniform(0, 10, size=n)
        if i % 10 == 0:
            a[rng.random(n) < 0.5] = 0.0
        total = 0.0 if i % 97 == 0 else float(rng.uniform(0, 2 * a.sum() + 1))
        v, _ = reconcile_hour(a, total)
        worst = max(worst, float(np.max(np.abs(v - simplex_oracle(a, total)))))
    ds = generate_synthetic_campus(1)
    recon = reconcile_all(aim_estimate(ds), ds.feeder)
    sums = recon.reconciled.matrix.sum(axis=1)
    feeder = ds.feeder.values
    rel = float(np.max(np.abs(sums - feeder) / feeder))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and rel <= 1e-9 and elapsed < 10
    assert report(1, ok, f"max |v - oracle| = {worst:.2e}, max mass error = {rel:.2e}, {elapsed:.1f} s")


def test_criterion_02_validity_index_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(10, 201))
        k = int(rng.integers(2, 6))
        d = int(rng.integers(1, 5))
        x = rng.normal(size=(n, d)) + rng.integers(0, 4, size=(n, 1))
        labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
        rng.shuffle(labels)
        got = compute_validity(x, labels)
        want = naive_validity(x, labels)
        for g, w in zip(got[:3], want):
            worst = max(worst, abs(g - w) / max(1.0, abs(w)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 30
    assert report(2, ok, f"max relative deviation = {worst:.2e} over 50 datasets, {elapsed:.1f} s")


def test_criterion_03_k3_recovery():
    t0 = time.perf_counter()
    hits = {"kmeans": 0, "minibatch": 0}
    worst_acc = 1.0
    for seed in range(10):
        ds, x = campus_pca(seed)
        for alg in hits:
            rep = select_k(x, alg, range(2, 9), seed=seed)
            hits[alg] += rep.best_silhouette_k == 3
            acc = best_permutation_accuracy(fit_clusters(x, alg, k=3, seed=seed).labels, ds.planted_labels)
            worst_acc = min(worst_acc, acc)
    elapsed = time.perf_counter() - t0
    ok = all(h >= 9 for h in hits.values()) and worst_acc >= 0.9 and elapsed < 120
    assert report(3, ok, f"argmax k = 3 in kmeans {hits['kmeans']}/10, minibatch {hits['minibatch']}/10; "
                         f"min planted accuracy {worst_acc:.3f}, {elapsed:.1f} s")


def test_criterion_04_minibatch_fidelity():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        _, x = campus_pca(seed)
        s_km = compute_validity(x, fit_clusters(x, "kmeans", k=3, seed=seed).labels).silhouette
        s_mb = compute_validity(x, fit_clusters(x, "minibatch", k=3, seed=seed).labels).silhouette
        worst = max(worst, abs(s_km - s_mb))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.05 and elapsed < 60
    assert report(4, ok, f"max |sil(minibatch) - sil(kmeans)| = {worst:.4f} over 10 seeds, {elapsed:.1f} s")


def test_criterion_05_dbscan_degradation():
    gaps = []
    details = []
    for seed in range(10):
        _, x = campus_pca(seed)
        table = validity_table(x, k=3, seed=seed)
        km, db = table.row("kmeans").silhouette, table.row("dbscan").silhouette
        gap = km - db if math.isfinite(db) else math.inf
        gaps.append(gap)
        details.append(f"{db:.3f}/{km:.3f}")
    held = sum(g >= 0.25 for g in gaps)
    ok = held == len(gaps)
    # Known red: on the well-separated synthetic campus the density heuristic
    # finds the planted groups, so DBSCAN matches K-Means instead of trailing it.
    assert report(5, ok, f"dbscan >= 0.25 below kmeans in {held}/10 seeds; "
                         f"min gap {min(gaps):.4f} (dbscan/kmeans: {', '.join(details[:3])}, ...)")


@pytest.mark.slow
def test_criterion_06_forecast_ranking():
    t0 = time.perf_counter()
    wins = 0
    lines = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for seed in range(10):
            series = synthetic_cluster_series(seed)
            means = {}
            for fam in ("prophet", "sarima", "arima"):
                means[fam] = np.mean([
                    rolling_origin_evaluate(s, fam, calendar=holiday_flags(s.start, len(s))).metrics.rmse
                    for s in series
                ])
            wins += means["prophet"] < means["sarima"] < means["arima"]
            lines.append(means)
    gru_vs = []
    for seed in range(3):
        s = synthetic_cluster_series(seed)[seed % 3]
        cal = holiday_flags(s.start, len(s))
        n = len(s)
        gru = rolling_origin_evaluate(s, "gru", GruSpec(seed=seed), step=n, calendar=cal).metrics.rmse
        pro = rolling_origin_evaluate(s, "prophet", step=n, calendar=cal).metrics.rmse
        gru_vs.append((gru, pro))
    gru_ok = all(g >= p for g, p in gru_vs)
    elapsed = time.perf_counter() - t0
    ok = wins >= 8 and gru_ok and elapsed < 600
    m0 = lines[0]
    assert report(6, ok, f"prophet < sarima < arima in {wins}/10 seeds (seed 0: {m0['prophet']:.1f} / "
                         f"{m0['sarima']:.1f} / {m0['arima']:.1f}); gru vs prophet "
                         + ", ".join(f"{g:.1f}/{p:.1f}" for g, p in gru_vs) + f"; {elapsed:.0f} s")


def test_criterion_07_parameter_recovery():
    rng = np.random.default_rng(7)
    e = rng.normal(size=2200)
    y = np.zeros(2200)
    for t in range(1, 2200):
        y[t] = 0.8 * y[t - 1] + e[t]
    phi = float(fit_arima(y[200:], ArimaSpec(1, 0, 0)).phi[0])

    # base the model can represent, noise sd 2 kWh; the planted step is +10
    n = 3648
    t = np.arange(n)
    flags = holiday_flags(DEFAULT_START, n)
    base = 200.0 + 0.01 * t + 30.0 * np.sin(2 * np.pi * t / 24) + 15.0 * np.cos(2 * np.pi * t / 168)
    planted = base + rng.normal(0, 2.0, size=n) + 10.0 * flags
    coef = fit_prophet(planted, flags, ProphetSpec()).coefficient("holiday")

    t = np.arange(24 * 30)
    wave = 50.0 + 20.0 * np.sin(2 * np.pi * t / 24)
    train, test = wave[:-24], wave[-24:]
    fc = forecast_sarima(fit_sarima(train, ArimaSpec(0, 0, 0, seasonal=(0, 1, 0, 24))), 24)
    rmse = compute_metrics(test, fc.point).rmse

    ok = abs(phi - 0.8) <= 0.05 and abs(coef - 10.0) <= 0.5 and rmse < 1e-6
    assert report(7, ok, f"AR(1) phi = {phi:.4f}; holiday coefficient = {coef:.3f}; "
                         f"seasonal RMSE = {rmse:.1e}")


def test_criterion_08_gru_gradient_check():
    t0 = time.perf_counter()
    worst = {g: 0.0 for g in PARAM_GROUPS}
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        params = init_params(6, seed)
        for g in ("b_z", "b_r", "b_h"):
            params[g] = rng.normal(scale=0.3, size=params[g].shape)
        x = rng.uniform(0, 1, size=(4, 5))
        y = rng.uniform(0, 1, size=4)
        _, grads = loss_and_grads(params, x, y)
        for g in PARAM_GROUPS:
            num = np.zeros_like(params[g])
            for idx in np.ndindex(params[g].shape):
                old = params[g][idx]
                params[g][idx] = old + 1e-6
                up, _ = loss_and_grads(params, x, y)
                params[g][idx] = old - 1e-6
                down, _ = loss_and_grads(params, x, y)
                params[g][idx] = old
                num[idx] = (up - down) / 2e-6
            rel = np.linalg.norm(grads[g] - num) / max(np.linalg.norm(grads[g]) + np.linalg.norm(num), 1e-12)
            worst[g] = max(worst[g], float(rel))
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    ok = top < 1e-4 and elapsed < 30
    assert report(8, ok, f"max relative error {top:.2e} over {len(PARAM_GROUPS)} groups x 5 seeds, {elapsed:.1f} s")


def test_criterion_09_shedding_optimality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = 0.0
    for i in range(1000):
        c = int(rng.integers(1, 7))
        d = rng.uniform(0, 100, size=c)
        w = rng.uniform(0.5, 3.0, size=c)
        if i % 5 == 0:
            w = rng.integers(1, 3, size=c).astype(float)
        kind = i % 4
        if kind == 0:
            deficit = 0.0
        elif kind == 1:
            deficit = float(d.sum())
        elif kind == 2:
            deficit = float(d.sum() + rng.uniform(1, 50))
        else:
            deficit = float(rng.uniform(0, d.sum()))
        prob = SheddingProblem(deficit, d, w)
        got, want = solve_shedding(prob), lp_oracle(prob)
        worst = max(worst, abs(got.objective - want.objective) / max(1.0, abs(want.objective)))
        assert got.feasible == want.feasible
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5
    assert report(9, ok, f"max objective gap {worst:.2e} on 1000 instances, {elapsed:.2f} s")


MC_DRAWS = 1_000_000


@pytest.mark.slow
def test_criterion_10_determinism_and_metric_properties(tmp_path):
    reports = []
    for run in ("a", "b"):
        out = tmp_path / run
        proc = subprocess.run([sys.executable, "-m", "gridshed.cli", "--quiet", "--out", str(out), "simulate",
                               "--seed", "1"], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        reports.append((out / "report.txt").read_bytes())
    identical = reports[0] == reports[1]

    rng = np.random.default_rng(10)
    worst_mc = 0.0
    for _ in range(20):
        mu, sigma, y = rng.normal(0, 5), rng.uniform(0.2, 5), rng.normal(0, 5)
        # E|X - X'| over all pairs of one sorted sample
        x = np.sort(rng.normal(mu, sigma, size=MC_DRAWS))
        pair = 2.0 * np.sum((2.0 * np.arange(MC_DRAWS) - MC_DRAWS + 1.0) * x) / (MC_DRAWS * (MC_DRAWS - 1.0))
        mc = np.mean(np.abs(x - y)) - 0.5 * pair
        cf = float(crps_gaussian(mu, sigma, y))
        worst_mc = max(worst_mc, abs(mc - cf) / cf)

    y = rng.uniform(5, 50, size=48)
    p = y + rng.normal(0, 3, size=48)
    lo, hi = p - 4.0, p + 4.0
    base = compute_metrics(y, p, lo, hi)
    scaling_ok = True
    for c in (0.01, 3.0, 250.0):
        m = compute_metrics(c * y, c * p, c * lo, c * hi)
        scaling_ok &= math.isclose(m.rmse, c * base.rmse, rel_tol=1e-12)
        scaling_ok &= math.isclose(m.crps, c * base.crps, rel_tol=1e-12)
        scaling_ok &= math.isclose(m.mape, base.mape, rel_tol=1e-12)
        scaling_ok &= math.isclose(m.r2, base.r2, rel_tol=1e-12)

    ok = identical and worst_mc <= 0.01 and scaling_ok
    assert report(10, ok, f"report.txt identical across runs: {identical}; CRPS vs Monte Carlo max rel "
                          f"{worst_mc:.4f}; scaling invariances: {scaling_ok}")
