from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import ValidationError
from ..reduce import symmetric_eigh
from .kmeans import fit_kmeans
from .model import ClusterModel, as_array


def rbf_affinity(x: np.ndarray, bandwidth: float | None = None) -> tuple[np.ndarray, float]:
    """Gaussian affinity, zero diagonal; bandwidth defaults to the median pairwise distance."""
    d2 = kernels.sq_distances(x, x)
    if bandwidth is None:
        iu = np.triu_indices(x.shape[0], 1)
        bandwidth = float(np.median(np.sqrt(d2[iu])))
        if bandwidth <= 0.0:
            raise ValidationError("median pairwise distance is zero; spectral bandwidth undefined")
    elif not bandwidth > 0:
        raise ValueError("bandwidth must be > 0")
    w = np.exp(-d2 / (2.0 * bandwidth**2))
    np.fill_diagonal(w, 0.0)
    return w, bandwidth


def normalized_laplacian(w: np.ndarray) -> np.ndarray:
    deg = w.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    inv_sqrt[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    return np.eye(w.shape[0]) - inv_sqrt[:, None] * w * inv_sqrt[None, :]


def spectral_embedding(w: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and row-normalised eigenvectors of the k smallest."""
    lap = normalized_laplacian(np.asarray(w, dtype=np.float64))
    vals, vecs = symmetric_eigh(lap)
    vals = vals[::-1][:k]
    u = vecs[:, ::-1][:, :k]
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vals, u / norms


def fit_spectral_affinity(w: np.ndarray, k: int, seed: int = 0) -> ClusterModel:
    n = w.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must satisfy 1 <= k <= n={n}")
    vals, emb = spectral_embedding(w, k)
    km = fit_kmeans(emb, k, seed=seed)
    return ClusterModel(
        "spectral",
        km.labels,
        params={"k": k},
        seed=seed,
        diagnostics={"eigenvalues": vals, "embedding": emb},
    )


def fit_spectral(features, k: int, seed: int = 0, bandwidth: float | None = None) -> ClusterModel:
    x = as_array(features)
    if x.shape[0] < 2:
        raise ValueError("spectral clustering needs at least two points")
    w, bandwidth = rbf_affinity(x, bandwidth)
    model = fit_spectral_affinity(w, k, seed)
    labels = model.labels
    centroids = np.vstack([x[labels == c].mean(axis=0) for c in np.unique(labels)])
    model.params["bandwidth"] = bandwidth
    return ClusterModel("spectral", labels, centroids=centroids, params=model.params, seed=seed,
                        diagnostics=model.diagnostics)
