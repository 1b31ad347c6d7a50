"""Silhouette, Davies-Bouldin, Calinski-Harabasz and WCSS; k selection.

Cross-cluster reductions use ``math.fsum`` so every index is exactly
invariant under renumbering of the clusters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .. import kernels
from ..errors import IndexUndefinedError
from .model import as_array


class Validity(NamedTuple):
    silhouette: float
    davies_bouldin: float
    calinski_harabasz: float
    wcss: float


def compute_validity(features, labels) -> Validity:
    """All four indices on the non-noise points (label -1 is dropped)."""
    x = as_array(features)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (x.shape[0],):
        raise ValueError("one label per row required")
    keep = labels >= 0
    x = x[keep]
    labels = labels[keep]
    ids = np.unique(labels)
    k = len(ids)
    if k < 2:
        raise IndexUndefinedError(f"validity indices need at least 2 clusters, got {k}")
    n = x.shape[0]
    dist = np.sqrt(kernels.sq_distances(x, x))
    members = [labels == c for c in ids]
    sizes = np.array([m.sum() for m in members], dtype=np.float64)

    # silhouette
    sums = np.column_stack([dist[:, m].sum(axis=1) for m in members])
    own = np.searchsorted(ids, labels)
    own_size = sizes[own]
    a = np.zeros(n)
    multi = own_size > 1
    a[multi] = sums[multi, own[multi]] / (own_size[multi] - 1)
    means = sums / sizes[None, :]
    means[np.arange(n), own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.zeros(n)
    ok = multi & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    silhouette = math.fsum(s) / n

    centroids = np.vstack([x[m].mean(axis=0) for m in members])
    to_own = np.sqrt(np.sum((x - centroids[own]) ** 2, axis=1))
    spread = np.array([to_own[m].mean() for m in members])
    cdist = np.sqrt(kernels.sq_distances(centroids, centroids))
    worst = []
    for i in range(k):
        ratios = []
        for j in range(k):
            if i == j:
                continue
            num = spread[i] + spread[j]
            if cdist[i, j] > 0:
                ratios.append(num / cdist[i, j])
            else:
                ratios.append(math.inf if num > 0 else 0.0)
        worst.append(max(ratios))
    dbi = math.fsum(worst) / k

    grand = x.mean(axis=0)
    between = math.fsum(sizes[i] * float(np.sum((centroids[i] - grand) ** 2)) for i in range(k))
    within = math.fsum(to_own**2)
    if within > 0 and n > k:
        ch = (between / (k - 1)) / (within / (n - k))
    else:
        ch = math.inf if between > 0 else 0.0
    return Validity(float(silhouette), float(dbi), float(ch), float(within))


@dataclass(frozen=True)
class ValidityRow:
    algorithm: str
    k: int
    silhouette: float
    davies_bouldin: float
    calinski_harabasz: float
    wcss: float
    n_noise: int = 0


@dataclass(frozen=True)
class ValidityReport:
    rows: tuple
    space: str = "pca"

    def _best(self, attr, sign):
        rows = [r for r in self.rows if math.isfinite(getattr(r, attr))]
        if not rows:
            return None
        return max(rows, key=lambda r: sign * getattr(r, attr)).k

    @property
    def best_silhouette_k(self):
        return self._best("silhouette", 1.0)

    @property
    def best_davies_bouldin_k(self):
        return self._best("davies_bouldin", -1.0)

    @property
    def best_calinski_harabasz_k(self):
        return self._best("calinski_harabasz", 1.0)

    def row(self, algorithm, k=None):
        for r in self.rows:
            if r.algorithm == algorithm and (k is None or r.k == k):
                return r
        raise KeyError((algorithm, k))


REPORT_HEADER = ["algorithm", "k", "silhouette", "davies_bouldin", "calinski_harabasz", "wcss"]


def _fmt(v):
    return f"{v:.10g}" if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))


def write_report_csv(report: ValidityReport, path) -> None:
    """CSV with one comment line naming the feature space the indices used.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_report(report, path)
        return
    with Path(path).open("w", newline="") as fh:
        _write_report(report, fh)


def _write_report(report, fh):
    fh.write(f"# space={report.space}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in report.rows:
        w.writerow([r.algorithm, r.k, _fmt(r.silhouette), _fmt(r.davies_bouldin),
                    _fmt(r.calinski_harabasz), _fmt(r.wcss)])


def row_from_labels(x, algorithm, k, labels) -> ValidityRow:
    labels = np.asarray(labels)
    n_noise = int(np.sum(labels < 0))
    try:
        v = compute_validity(x, labels)
    except IndexUndefinedError:
        v = Validity(math.nan, math.nan, math.nan, math.nan)
    return ValidityRow(algorithm, k, *v, n_noise=n_noise)


def select_k(features, algorithm: str, k_range: Sequence[int], seed: int = 0, space: str = "pca",
             **params) -> ValidityReport:
    """Fit ``algorithm`` at every k and tabulate the four indices."""
    from . import fit_clusters

    x = as_array(features)
    ks = [int(k) for k in k_range]
    if not ks:
        raise ValueError("k_range is empty")
    if algorithm == "dbscan":
        raise ValueError("dbscan does not take k; use validity_table")
    for k in ks:
        if not 2 <= k <= x.shape[0] - 1:
            raise ValueError(f"k={k} outside [2, n-1] with n={x.shape[0]}")
    rows = []
    for k in ks:
        model = fit_clusters(x, algorithm, k=k, seed=seed, **params)
        rows.append(row_from_labels(x, algorithm, k, model.labels))
    return ValidityReport(tuple(rows), space)


TABLE_ORDER = ("kmeans", "hierarchical", "gmm", "spectral", "minibatch", "dbscan")


def validity_table(features, k: int = 3, seed: int = 0, space: str = "pca", batch_size: int = 32,
                   dbscan_eps: float | None = None, dbscan_min_pts: int | None = None) -> ValidityReport:
    """Every algorithm at ``k``; DBSCAN rows carry the discovered cluster count."""
    from . import fit_clusters

    x = as_array(features)
    rows = []
    for alg in TABLE_ORDER:
        if alg == "dbscan":
            kw = {"eps": dbscan_eps}
            if dbscan_min_pts is not None:
                kw["min_pts"] = dbscan_min_pts
            model = fit_clusters(x, alg, **kw)
            rows.append(row_from_labels(x, alg, model.n_clusters, model.labels))
        else:
            kw = {"batch_size": batch_size} if alg == "minibatch" else {}
            model = fit_clusters(x, alg, k=k, seed=seed, **kw)
            rows.append(row_from_labels(x, alg, k, model.labels))
    return ValidityReport(tuple(rows), space)
