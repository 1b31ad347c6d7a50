"""Building feature vectors, z-score normalisation and PCA."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .disagg import BuildingEstimates
from .errors import ParseError, SchemaError, ValidationError

FEATURE_NAMES = tuple(
    [f"hour_mean_{h:02d}" for h in range(24)] + ["mean", "std", "peak", "peak_hour", "load_factor"]
)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    building_ids: tuple
    features: np.ndarray
    feature_names: tuple
    constant_features: tuple = ()

    def __post_init__(self):
        f = np.array(self.features, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] != len(self.building_ids):
            raise ValidationError("features must be buildings x d")
        if f.shape[1] != len(self.feature_names):
            raise ValidationError("feature_names length must match the feature dimension")
        if not np.all(np.isfinite(f)):
            raise ValidationError("features must be finite")
        f.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "building_ids", tuple(self.building_ids))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x d, orthonormal rows
    explained_variance: np.ndarray  # k, non-increasing
    total_variance: float
    all_eigenvalues: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def explained_fraction(self) -> float:
        if self.total_variance == 0:
            return 1.0
        return float(self.explained_variance.sum() / self.total_variance)


def extract_features(estimates: BuildingEstimates) -> FeatureMatrix:
    """24 hour-of-day means plus mean, std, peak, peak hour and load factor.

    Peak is the largest hourly reading; peak hour is the hour of day with the
    largest mean load (earliest on ties). Gap (NaN) hours are ignored.
    """
    m = estimates.matrix
    if m.shape[0] < 48:
        raise ValidationError("feature extraction needs at least 48 hours")
    hod = (estimates.start.hour + np.arange(m.shape[0])) % 24
    rows = []
    for j, bid in enumerate(estimates.building_ids):
        x = m[:, j]
        ok = ~np.isnan(x)
        if not np.any(ok):
            raise ValidationError(f"building {bid!r} has no non-gap data")
        hourly = np.empty(24)
        for h in range(24):
            sel = ok & (hod == h)
            hourly[h] = x[sel].mean() if np.any(sel) else np.nan
        if np.any(np.isnan(hourly)):
            raise ValidationError(f"building {bid!r} has an hour of day with no data")
        vals = x[ok]
        mean = vals.mean()
        peak = vals.max()
        lf = mean / peak if peak > 0 else 0.0
        rows.append(np.concatenate([hourly, [mean, vals.std(), peak, float(np.argmax(hourly)), lf]]))
    return FeatureMatrix(estimates.building_ids, np.vstack(rows), FEATURE_NAMES)


def zscore_normalize(features: FeatureMatrix) -> FeatureMatrix:
    """Per-column z-score with population std; constant columns become 0."""
    x = features.features
    if x.shape[0] < 2:
        raise ValueError("z-score normalisation needs at least two rows")
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    const = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
    out = np.zeros_like(x)
    out[:, ~const] = (x[:, ~const] - mu[~const]) / sd[~const]
    names = tuple(n for n, c in zip(features.feature_names, const) if c)
    return FeatureMatrix(features.building_ids, out, features.feature_names, names)


def symmetric_eigh(a, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigenpairs of a symmetric matrix by cyclic Jacobi, sorted descending.

    Each eigenvector's largest-magnitude entry is made positive.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    w, v, _ = kernels.jacobi_eigh(a, tol, max_sweeps)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return w, v * signs


def pca_fit(features: FeatureMatrix, variance_target: float = 0.95) -> PcaModel:
    if not 0.0 < variance_target <= 1.0:
        raise ValueError("variance_target must be in (0, 1]")
    x = features.features
    if x.shape[0] < 2:
        raise ValueError("PCA needs at least two rows")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite feature values")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (x.shape[0] - 1)
    w, v = symmetric_eigh(cov)
    w = np.maximum(w, 0.0)
    total = float(w.sum())
    if total == 0.0:
        k = 1
    else:
        frac = np.cumsum(w) / total
        k = int(np.searchsorted(frac, variance_target - 1e-12) + 1)
        k = min(k, len(w))
    return PcaModel(mean, v[:, :k].T.copy(), w[:k].copy(), total, w)


def pca_transform(model: PcaModel, features: FeatureMatrix) -> FeatureMatrix:
    if features.d != model.mean.shape[0]:
        raise ValueError(f"feature dimension {features.d} != model dimension {model.mean.shape[0]}")
    scores = (features.features - model.mean) @ model.components.T
    return FeatureMatrix(features.building_ids, scores, tuple(f"pc{i + 1}" for i in range(model.k)))


def pca_inverse(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    return np.asarray(scores) @ model.components + model.mean


def write_features_csv(features: FeatureMatrix, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["building_id", *features.feature_names])
        for bid, row in zip(features.building_ids, features.features):
            w.writerow([bid, *(f"{v:.12g}" for v in row)])


def read_features_csv(path) -> FeatureMatrix:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader, [])]
        if len(header) < 2 or header[0] != "building_id":
            raise SchemaError(f"{path}: expected header building_id,<features...>")
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields")
            try:
                rows.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from exc
            ids.append(row[0].strip())
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return FeatureMatrix(tuple(ids), np.asarray(rows), tuple(header[1:]))
