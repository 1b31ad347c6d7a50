"""Lloyd k-means with k-means++ seeding, and Sculley-style mini-batch k-means."""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from .model import ClusterModel, as_array

MAX_ITER = 300
TOL = 1e-6
N_RESTARTS = 10


def _check_k(k, n):
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must satisfy 1 <= k <= n={n}")


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = kernels.sq_distances(x, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[c] = x[idx]
        closest = np.minimum(closest, kernels.sq_distances(x, centers[c : c + 1])[:, 0])
    return centers


def lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int = MAX_ITER, tol: float = TOL):
    """Run Lloyd iterations; returns centers, labels, wcss, wcss history, iterations."""
    centers = np.array(centers, dtype=np.float64)
    k = centers.shape[0]
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels, d2 = kernels.assign_nearest(x, centers)
        history.append(float(d2.sum()))
        new = np.empty_like(centers)
        d2 = d2.copy()
        for c in range(k):
            members = labels == c
            if np.any(members):
                new[c] = x[members].mean(axis=0)
            else:
                far = int(np.argmax(d2))
                new[c] = x[far]
                d2[far] = 0.0
        shift = float(np.sqrt(np.max(np.sum((new - centers) ** 2, axis=1))))
        centers = new
        if shift < tol:
            break
    labels, d2 = kernels.assign_nearest(x, centers)
    return centers, labels, float(d2.sum()), history, n_iter


def fit_kmeans(features, k: int, seed: int = 0, n_restarts: int = N_RESTARTS) -> ClusterModel:
    x = as_array(features)
    _check_k(k, x.shape[0])
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_restarts):
        init = kmeans_plus_plus(x, k, rng)
        run = lloyd(x, init)
        if best is None or run[2] < best[2]:
            best = run
    centers, labels, wcss, history, n_iter = best
    return ClusterModel(
        "kmeans",
        labels,
        centroids=centers,
        params={"k": k, "n_restarts": n_restarts, "max_iter": MAX_ITER, "tol": TOL},
        seed=seed,
        diagnostics={"wcss": wcss, "wcss_history": history, "n_iter": n_iter},
    )


def fit_minibatch_kmeans(
    features,
    k: int,
    batch_size: int = 32,
    seed: int = 0,
    epochs: int = 100,
    n_init: int = 3,
) -> ClusterModel:
    """Mini-batch k-means with per-centre learning rate 1 / assignment count.

    Runs ``ceil(epochs * n / batch_size)`` mini-batch steps per initialisation;
    a batch covers the whole data set when ``batch_size >= n``. The best of
    ``n_init`` k-means++ initialisations (by final WCSS) is kept.
    """
    x = as_array(features)
    n = x.shape[0]
    _check_k(k, n)
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    n_steps = max(1, math.ceil(epochs * n / batch_size))
    full = batch_size >= n
    best = None
    for _ in range(n_init):
        centers = kmeans_plus_plus(x, k, rng)
        counts = np.zeros(k)
        for _ in range(n_steps):
            idx = np.arange(n) if full else np.sort(rng.choice(n, size=batch_size, replace=False))
            kernels.minibatch_step(np.ascontiguousarray(x[idx]), centers, counts)
        labels, d2 = kernels.assign_nearest(x, centers)
        wcss = float(d2.sum())
        if best is None or wcss < best[2]:
            best = (centers.copy(), labels, wcss)
    centers, labels, wcss = best
    return ClusterModel(
        "minibatch",
        labels,
        centroids=centers,
        params={"k": k, "batch_size": batch_size, "epochs": epochs, "n_init": n_init, "n_steps": n_steps},
        seed=seed,
        diagnostics={"wcss": wcss},
    )
