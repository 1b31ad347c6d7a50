from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..reduce import FeatureMatrix

ALGORITHMS = ("kmeans", "minibatch", "hierarchical", "dbscan", "gmm", "spectral")


def as_array(features) -> np.ndarray:
    x = features.features if isinstance(features, FeatureMatrix) else features
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D array")
    return x


@dataclass(frozen=True, eq=False)
class ClusterModel:
    algorithm: str
    labels: np.ndarray
    centroids: np.ndarray | None = None
    memberships: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        labels = np.asarray(self.labels, dtype=np.int64)
        if np.any(labels < -1):
            raise ValidationError("labels must be >= -1")
        if np.any(labels == -1) and self.algorithm != "dbscan":
            raise ValidationError("noise label -1 is reserved for dbscan")
        if self.memberships is not None:
            rows = np.asarray(self.memberships).sum(axis=1)
            if not np.allclose(rows, 1.0, atol=1e-9, rtol=0):
                raise ValidationError("membership rows must sum to 1")
        object.__setattr__(self, "labels", labels)

    @property
    def n_clusters(self) -> int:
        return int(len(np.unique(self.labels[self.labels >= 0])))


def relabel_by_first_appearance(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full_like(labels, -1)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels):
        if lab < 0:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def order_labels_by(labels, key, descending: bool = True) -> np.ndarray:
    """Renumber clusters so that cluster 0 has the largest mean ``key``."""
    labels = np.asarray(labels, dtype=np.int64)
    key = np.asarray(key, dtype=np.float64)
    ids = [c for c in np.unique(labels) if c >= 0]
    means = [key[labels == c].mean() for c in ids]
    order = sorted(range(len(ids)), key=lambda i: (-means[i] if descending else means[i], ids[i]))
    mapping = {ids[i]: r for r, i in enumerate(order)}
    return np.array([mapping.get(int(c), -1) for c in labels], dtype=np.int64)
