from __future__ import annotations

from collections import deque

import numpy as np

from .. import kernels
from .model import ClusterModel, as_array

DEFAULT_MIN_PTS = 5
EPS_PERCENTILE = 90.0


def k_distances(x: np.ndarray, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest point, counting itself first."""
    d = np.sqrt(kernels.sq_distances(x, x))
    d.sort(axis=1)
    return d[:, min(k, x.shape[0]) - 1]


def default_eps(x: np.ndarray, min_pts: int, percentile: float = EPS_PERCENTILE) -> float:
    return float(np.percentile(k_distances(x, min_pts), percentile))


def fit_dbscan(features, eps: float | None = None, min_pts: int = DEFAULT_MIN_PTS) -> ClusterModel:
    """Density clustering; -1 marks noise. ``eps=None`` uses the k-distance heuristic."""
    x = as_array(features)
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    heuristic = eps is None
    if heuristic:
        eps = default_eps(x, min_pts)
        if eps <= 0.0:
            eps = np.finfo(float).tiny
    if not eps > 0:
        raise ValueError("eps must be > 0")
    n = x.shape[0]
    within = np.sqrt(kernels.sq_distances(x, x)) <= eps
    neighbours = [np.flatnonzero(within[i]) for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in neighbours])
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in neighbours[p]:
                if labels[q] == -1:
                    labels[q] = cluster
                    if core[q]:
                        queue.append(q)
        cluster += 1
    return ClusterModel(
        "dbscan",
        labels,
        params={"eps": float(eps), "min_pts": min_pts, "eps_heuristic": heuristic},
        diagnostics={"n_clusters": cluster, "n_noise": int(np.sum(labels == -1)), "core": core},
    )
