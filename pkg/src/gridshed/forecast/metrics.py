"""Point and probabilistic forecast accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.special import ndtr

INTERVAL_LEVEL = 0.80
# two-sided 80% Gaussian quantile, ~1.2816
Z80 = NormalDist().inv_cdf(0.5 + INTERVAL_LEVEL / 2)
MAPE_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class Metrics:
    rmse: float
    mape: float  # percent; NaN when every actual is below MAPE_EPS
    r2: float
    crps: float | None = None
    mape_skipped: int = 0


@dataclass(frozen=True, eq=False)
class ForecastResult:
    point: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    metrics: Metrics | None = None

    def __post_init__(self):
        point = np.asarray(self.point, dtype=np.float64)
        object.__setattr__(self, "point", point)
        if (self.lower is None) != (self.upper is None):
            raise ValueError("lower and upper must be given together")
        if self.lower is not None:
            lo = np.asarray(self.lower, dtype=np.float64)
            hi = np.asarray(self.upper, dtype=np.float64)
            if lo.shape != point.shape or hi.shape != point.shape:
                raise ValueError("interval bounds must match the point forecast")
            tol = 1e-9 * np.maximum(1.0, np.abs(point))
            if np.any(lo > point + tol) or np.any(hi < point - tol):
                raise ValueError("intervals must satisfy lower <= point <= upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    def __len__(self):
        return self.point.shape[0]

    @property
    def sigma(self) -> np.ndarray | None:
        """Gaussian scale implied by the 80% interval."""
        if self.lower is None:
            return None
        return (self.upper - self.lower) / (2.0 * Z80)


def crps_gaussian(mu, sigma, y) -> np.ndarray:
    """Closed-form CRPS of N(mu, sigma^2) at y; sigma = 0 gives |y - mu|."""
    mu, sigma, y = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (mu, sigma, y)))
    out = np.array(np.abs(y - mu))
    pos = sigma > 0
    if np.any(pos):
        z = (y[pos] - mu[pos]) / sigma[pos]
        cdf = ndtr(z)
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        out[pos] = sigma[pos] * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / math.sqrt(math.pi))
    return out


def compute_metrics(actual, predicted, lower=None, upper=None) -> Metrics:
    y = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 1 or y.size < 1:
        raise ValueError("actual and predicted must be equal-length 1-D sequences")
    err = p - y
    sse = float(np.sum(err**2))
    rmse = math.sqrt(sse / y.size)
    ok = np.abs(y) > MAPE_EPS
    skipped = int(np.sum(~ok))
    mape = float(np.mean(np.abs(err[ok]) / np.abs(y[ok])) * 100.0) if np.any(ok) else math.nan
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst > 0:
        r2 = 1.0 - sse / sst
    else:
        r2 = 1.0 if sse == 0 else math.nan
    crps = None
    if lower is not None and upper is not None:
        sigma = (np.asarray(upper, dtype=np.float64) - np.asarray(lower, dtype=np.float64)) / (2.0 * Z80)
        crps = float(np.mean(crps_gaussian(p, sigma, y)))
    return Metrics(rmse, mape, r2, crps, skipped)
