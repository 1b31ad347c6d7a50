import itertools
import math

import numpy as np
import pytest

from gridshed.cluster import (
    compute_validity,
    fit_clusters,
    read_labels_csv,
    select_k,
    validity_table,
    write_labels_csv,
    write_report_csv,
)
from gridshed.cluster.dbscan import fit_dbscan
from gridshed.cluster.gmm import fit_gmm
from gridshed.cluster.hierarchical import fit_hierarchical
from gridshed.cluster.kmeans import fit_kmeans, fit_minibatch_kmeans
from gridshed.cluster.spectral import fit_spectral, fit_spectral_affinity, normalized_laplacian, rbf_affinity
from gridshed.errors import IndexUndefinedError, ValidationError


def blobs(rng, sizes=(4, 4, 4), spread=0.3, sep=10.0, dim=2):
    centers = sep * np.eye(max(len(sizes), dim))[: len(sizes), :dim]
    x = np.vstack([c + spread * rng.normal(size=(s, dim)) for c, s in zip(centers, sizes)])
    y = np.repeat(np.arange(len(sizes)), sizes)
    return x, y


def agreement(labels, truth):
    k = int(max(labels.max(), truth.max())) + 1
    return max(np.mean(np.array(p)[labels] == truth) for p in itertools.permutations(range(k)))


def two_moons(rng, n=60, noise=0.05):
    half = n // 2
    t = np.linspace(0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1 - np.cos(t), 0.5 - np.sin(t)])
    x = np.vstack([upper, lower]) + noise * rng.normal(size=(n, 2))
    return x, np.repeat([0, 1], half)


def rings(rng, n=80):
    half = n // 2
    t = rng.uniform(0, 2 * np.pi, size=n)
    r = np.where(np.arange(n) < half, 1.0, 4.0) + 0.1 * rng.normal(size=n)
    return np.column_stack([r * np.cos(t), r * np.sin(t)]), (np.arange(n) >= half).astype(int)


def brute_force_wcss(x, k):
    n = x.shape[0]
    best = math.inf
    sq = float(np.sum(x**2))
    for chunk in range(k):
        # fix the first point's label to 0 to skip some relabelings; chunk the second label
        rest = np.array(list(itertools.product(range(k), repeat=n - 2)))
        labels = np.column_stack([np.zeros(len(rest), int), np.full(len(rest), chunk), rest])
        total = np.full(len(labels), sq)
        for c in range(k):
            m = labels == c
            cnt = m.sum(axis=1)
            s = m.astype(float) @ x
            with np.errstate(invalid="ignore", divide="ignore"):
                total -= np.where(cnt > 0, np.sum(s**2, axis=1) / np.maximum(cnt, 1), 0.0)
        best = min(best, float(total.min()))
    return best


# -- k-means ----------------------------------------------------------------


def test_kmeans_two_points():
    m = fit_kmeans(np.array([[0.0, 0.0], [1.0, 1.0]]), 2)
    assert m.diagnostics["wcss"] == 0.0
    assert sorted(m.labels.tolist()) == [0, 1]


def test_kmeans_one_cluster(rng):
    x = rng.normal(size=(30, 3))
    m = fit_kmeans(x, 1)
    assert np.allclose(m.centroids[0], x.mean(axis=0))
    assert np.isclose(m.diagnostics["wcss"], x.var(axis=0).sum() * 30)


def test_kmeans_matches_brute_force(rng):
    x, y = blobs(rng)
    m = fit_kmeans(x, 3, seed=1)
    assert agreement(m.labels, y) == 1.0
    assert np.isclose(m.diagnostics["wcss"], brute_force_wcss(x, 3), rtol=1e-9)


def test_kmeans_k_too_large():
    with pytest.raises(ValueError):
        fit_kmeans(np.zeros((2, 1)), 3)


def test_lloyd_monotone(rng):
    x, _ = blobs(rng, sizes=(30, 30, 30), spread=3.0, sep=4.0)
    hist = fit_kmeans(x, 4, seed=3, n_restarts=1).diagnostics["wcss_history"]
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_kmeans_scale_covariance(rng):
    x, _ = blobs(rng, sizes=(10, 10, 10), spread=1.5, sep=4.0)
    a = fit_kmeans(x, 3, seed=5).labels
    b = fit_kmeans(7.5 * x, 3, seed=5).labels
    assert np.array_equal(a, b)


# -- mini-batch ---------------------------------------------------------------


def test_minibatch_full_batch_matches_lloyd(rng):
    x, _ = blobs(rng, sizes=(10, 10, 10))
    mb = fit_minibatch_kmeans(x, 3, batch_size=30, seed=0)
    km = fit_kmeans(x, 3, seed=0)
    assert np.isclose(mb.diagnostics["wcss"], km.diagnostics["wcss"], rtol=1e-6)


def test_minibatch_close_to_kmeans(rng):
    x, _ = blobs(rng, sizes=(40, 40, 40), spread=1.0)
    mb = fit_minibatch_kmeans(x, 3, batch_size=16, seed=2)
    km = fit_kmeans(x, 3, seed=2)
    assert mb.diagnostics["wcss"] <= 1.05 * km.diagnostics["wcss"]


def test_minibatch_deterministic(rng):
    x, _ = blobs(rng, sizes=(20, 20, 20), spread=2.0, sep=3.0)
    a = fit_minibatch_kmeans(x, 3, batch_size=8, seed=9).labels
    b = fit_minibatch_kmeans(x, 3, batch_size=8, seed=9).labels
    assert np.array_equal(a, b)


# -- hierarchical ------------------------------------------------------------


def test_ward_line():
    x = np.array([[0.0], [1.0], [10.0], [11.0]])
    m = fit_hierarchical(x, 2)
    assert m.labels.tolist() == [0, 0, 1, 1]


def test_ward_singletons_and_monotone(rng):
    x = rng.normal(size=(15, 2))
    assert sorted(fit_hierarchical(x, 15).labels.tolist()) == list(range(15))
    h = fit_hierarchical(x, 1).diagnostics["heights"]
    assert np.all(np.diff(h) >= -1e-12)


# -- DBSCAN --------------------------------------------------------------------


def test_dbscan_huge_eps():
    m = fit_dbscan(np.random.default_rng(0).normal(size=(20, 2)), eps=1e6, min_pts=1)
    assert m.n_clusters == 1 and np.all(m.labels == 0)


def test_dbscan_outlier(rng):
    x = np.vstack([0.1 * rng.normal(size=(20, 2)), [[50.0, 50.0]]])
    m = fit_dbscan(x, eps=0.5, min_pts=3)
    assert m.labels[-1] == -1
    assert np.all(m.labels[:-1] == 0)


def test_dbscan_two_moons(rng):
    x, y = two_moons(rng)
    db = fit_dbscan(x, eps=0.3, min_pts=4)
    keep = db.labels >= 0
    assert db.n_clusters == 2
    assert np.mean(np.where(keep, db.labels, -1) == y) >= 0.95 or agreement(np.maximum(db.labels, 0), y) >= 0.95
    km = fit_kmeans(x, 2, seed=0)
    assert agreement(km.labels, y) < 0.95


def test_dbscan_only_algorithm_with_noise():
    with pytest.raises(ValidationError):
        from gridshed.cluster.model import ClusterModel

        ClusterModel("kmeans", [0, -1])


# -- GMM ---------------------------------------------------------------------


def test_gmm_monotone_and_stochastic(rng):
    x, _ = blobs(rng, sizes=(30, 30), spread=1.5, sep=3.0)
    m = fit_gmm(x, 2, seed=0)
    ll = m.diagnostics["log_likelihood"]
    assert all(b >= a - 1e-9 for a, b in zip(ll, ll[1:]))
    assert np.allclose(m.memberships.sum(axis=1), 1.0, atol=1e-9)


def test_gmm_one_component(rng):
    x = rng.normal(size=(50, 2)) @ np.array([[2.0, 0.3], [0.0, 0.5]])
    m = fit_gmm(x, 1)
    assert np.allclose(m.centroids[0], x.mean(axis=0))
    cov = np.cov(x, rowvar=False, bias=True) + 1e-6 * np.eye(2)
    assert np.allclose(m.diagnostics["covariances"][0], cov, atol=1e-9)


def test_gmm_separated(rng):
    x, y = blobs(rng, sizes=(40, 40), spread=0.5, sep=8.0)
    m = fit_gmm(x, 2, seed=1)
    assert agreement(m.labels, y) == 1.0
    assert np.all(m.memberships.max(axis=1) >= 0.99)


# -- spectral -------------------------------------------------------------------


def test_laplacian_nullspace(rng):
    w, _ = rbf_affinity(rng.normal(size=(12, 2)))
    lap = normalized_laplacian(w)
    vec = np.sqrt(w.sum(axis=1))
    assert np.allclose(lap @ vec, 0.0, atol=1e-10)
    assert np.linalg.eigvalsh(lap).min() > -1e-10


def test_spectral_disconnected_components():
    w = np.zeros((6, 6))
    w[:3, :3] = 1.0
    w[3:, 3:] = 1.0
    np.fill_diagonal(w, 0.0)
    m = fit_spectral_affinity(w, 2)
    assert agreement(m.labels, np.array([0, 0, 0, 1, 1, 1])) == 1.0


def test_spectral_rings_narrow_bandwidth(rng):
    x, y = rings(rng)
    _, median = rbf_affinity(x)
    m = fit_spectral(x, 2, seed=0, bandwidth=0.1 * median)
    assert agreement(m.labels, y) >= 0.95


@pytest.mark.xfail(strict=True, reason="a median-distance bandwidth spans both rings, so the affinity "
                                       "cannot separate them (recovery ~0.55-0.8)")
def test_spectral_rings_median_bandwidth(rng):
    x, y = rings(rng)
    assert agreement(fit_spectral(x, 2, seed=0).labels, y) >= 0.95


def test_spectral_identical_points():
    with pytest.raises(ValidationError):
        fit_spectral(np.ones((5, 2)), 2)


# -- validity -------------------------------------------------------------------


def test_validity_singletons():
    v = compute_validity(np.array([[0.0], [1.0]]), [0, 1])
    assert v.silhouette == 0.0 and v.davies_bouldin == 0.0


def test_validity_tight_blobs(rng):
    x, y = blobs(rng, sizes=(20, 20), spread=0.05)
    v = compute_validity(x, y)
    assert v.silhouette > 0.9 and v.davies_bouldin < 0.1


def test_validity_random_labels_near_zero():
    vals = []
    for s in range(20):
        r = np.random.default_rng(s)
        vals.append(compute_validity(r.uniform(size=(200, 2)), r.integers(0, 3, size=200)).silhouette)
    assert all(abs(v) < 0.1 for v in vals)


def test_validity_single_cluster_undefined():
    with pytest.raises(IndexUndefinedError):
        compute_validity(np.zeros((3, 1)), [0, 0, 0])


def test_validity_noise_excluded(rng):
    x, y = blobs(rng, sizes=(10, 10))
    with_noise = np.vstack([x, [[100.0, 100.0]]])
    assert compute_validity(with_noise, np.append(y, -1)) == compute_validity(x, y)


def test_validity_permutation_invariant(rng):
    x = rng.normal(size=(60, 3))
    y = rng.integers(0, 4, size=60)
    base = compute_validity(x, y)
    for perm in itertools.permutations(range(4)):
        assert compute_validity(x, np.array(perm)[y]) == base


# -- select_k / tables / io --------------------------------------------------------


def test_select_k_consistency(rng):
    x, _ = blobs(rng, sizes=(15, 15, 15), spread=0.5)
    rep = select_k(x, "kmeans", range(2, 6), seed=0)
    assert rep.best_silhouette_k == 3
    assert rep.best_calinski_harabasz_k == 3
    assert rep.best_davies_bouldin_k == 3
    for row in rep.rows:
        direct = compute_validity(x, fit_clusters(x, "kmeans", k=row.k, seed=0).labels)
        assert (row.silhouette, row.davies_bouldin, row.calinski_harabasz, row.wcss) == tuple(direct)
    assert len(select_k(x, "kmeans", [2]).rows) == 1
    with pytest.raises(ValueError):
        select_k(x, "kmeans", [1])


def test_validity_table_all_algorithms(rng, tmp_path):
    x, _ = blobs(rng, sizes=(10, 10, 10), spread=0.5)
    table = validity_table(x, k=3)
    assert [r.algorithm for r in table.rows] == ["kmeans", "hierarchical", "gmm", "spectral", "minibatch", "dbscan"]
    for r in table.rows:
        assert -1 <= r.silhouette <= 1 and r.davies_bouldin >= 0 and r.calinski_harabasz >= 0
    write_report_csv(table, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "# space=pca"
    assert lines[1] == "algorithm,k,silhouette,davies_bouldin,calinski_harabasz,wcss"


def test_labels_csv_round_trip(tmp_path):
    write_labels_csv(["a", "b", "c"], [0, 1, -1], tmp_path / "l.csv")
    assert read_labels_csv(tmp_path / "l.csv") == {"a": 0, "b": 1, "c": -1}
