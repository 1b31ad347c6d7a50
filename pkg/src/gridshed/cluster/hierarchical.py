from __future__ import annotations

import numpy as np

from .. import kernels
from .model import ClusterModel, as_array, relabel_by_first_appearance


def ward_linkage(x: np.ndarray):
    """Ward merge sequence: ``(merges, heights)``; see :func:`kernels.ward_merges_nb`."""
    d2 = kernels.sq_distances(x, x)
    return kernels.ward_merges(np.ascontiguousarray(d2))


def cut_tree(merges: np.ndarray, n: int, k: int) -> np.ndarray:
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in merges[: n - k]:
        parent[find(b)] = find(a)
    return relabel_by_first_appearance([find(i) for i in range(n)])


def fit_hierarchical(features, k: int) -> ClusterModel:
    x = as_array(features)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must satisfy 1 <= k <= n={n}")
    if n == 1:
        merges, heights = np.empty((0, 2), dtype=np.int64), np.empty(0)
    else:
        merges, heights = ward_linkage(x)
    labels = cut_tree(merges, n, k)
    centroids = np.vstack([x[labels == c].mean(axis=0) for c in range(k)])
    return ClusterModel(
        "hierarchical",
        labels,
        centroids=centroids,
        params={"k": k, "linkage": "ward"},
        diagnostics={"merges": merges, "heights": heights},
    )
