"""Additive trend + seasonality + holiday regression.

    y(t) = g(t) + s(t) + h(t) + e_t

``g`` is a continuous piecewise-linear trend with slope changes at fixed,
evenly spaced changepoints, ``s`` a sum of daily (24 h) and weekly (168 h)
Fourier pairs, ``h`` a single holiday indicator. Coefficients come from
ridge-regularised normal equations; the intercept is not penalised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..errors import FitError, ValidationError
from .metrics import Z80, ForecastResult

DAY = 24
WEEK = 168


@dataclass(frozen=True)
class ProphetSpec:
    n_changepoints: int = 10
    daily_fourier_order: int = 6
    weekly_fourier_order: int = 3
    ridge_lambda: float = 1.0

    def __post_init__(self):
        for name in ("n_changepoints", "daily_fourier_order", "weekly_fourier_order"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
        if not np.isfinite(self.ridge_lambda) or self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")

    @property
    def n_params(self) -> int:
        return 2 + self.n_changepoints + 2 * (self.daily_fourier_order + self.weekly_fourier_order) + 1

    def __str__(self):
        return (f"prophet(cp={self.n_changepoints},daily={self.daily_fourier_order},"
                f"weekly={self.weekly_fourier_order},lambda={self.ridge_lambda:g})")


def column_names(spec: ProphetSpec) -> list[str]:
    names = ["intercept", "slope"] + [f"cp{j}" for j in range(spec.n_changepoints)]
    for label, order in (("daily", spec.daily_fourier_order), ("weekly", spec.weekly_fourier_order)):
        for k in range(1, order + 1):
            names += [f"{label}_sin{k}", f"{label}_cos{k}"]
    return names + ["holiday"]


def prophet_design(t, span: float, spec: ProphetSpec, flags, hour_offset: int = 0) -> np.ndarray:
    """Design matrix at hours ``t`` counted from the first training hour.

    ``span`` (the training length) puts the trend clock on [0, 1]; seasonal
    phase uses ``t + hour_offset``, hours since the Monday epoch.
    """
    t = np.asarray(t, dtype=np.float64)
    absolute = t + hour_offset
    tau = t / span
    cols = [np.ones_like(tau), tau]
    for j in range(1, spec.n_changepoints + 1):
        cols.append(np.maximum(0.0, tau - j / (spec.n_changepoints + 1)))
    for period, order in ((DAY, spec.daily_fourier_order), (WEEK, spec.weekly_fourier_order)):
        for k in range(1, order + 1):
            ang = 2.0 * np.pi * k * (absolute % period) / period
            cols += [np.sin(ang), np.cos(ang)]
    cols.append(np.asarray(flags, dtype=np.float64))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class FittedProphet:
    spec: ProphetSpec
    coef: np.ndarray
    resid_std: float
    n_train: int  # training span in hours, gaps included
    hour_offset: int  # absolute hour index of the first training point
    n_used: int

    def coefficient(self, name: str) -> float:
        return float(self.coef[column_names(self.spec).index(name)])


def _unwrap(train):
    if hasattr(train, "series"):
        train = train.series
    if hasattr(train, "hour_offset"):
        return np.asarray(train.values, dtype=np.float64), train.hour_offset()
    return np.asarray(train, dtype=np.float64), 0


def fit_prophet(train, calendar, spec: ProphetSpec = ProphetSpec(), hour_offset: int | None = None) -> FittedProphet:
    """``calendar`` holds one holiday flag per training hour."""
    y, offset = _unwrap(train)
    if hour_offset is not None:
        offset = int(hour_offset)
    n = len(y)
    min_len = 2 * WEEK if spec.weekly_fourier_order > 0 else 2 * DAY
    if n < min_len:
        raise ValueError(f"series length {n} < {min_len} required")
    flags = np.asarray(calendar, dtype=np.float64)
    if flags.shape != (n,):
        raise ValueError("calendar flags must have one entry per training hour")
    keep = ~np.isnan(y)
    if keep.sum() < spec.n_params:
        raise ValidationError("too few observed hours for the design")
    t = np.arange(n, dtype=np.float64)
    x = prophet_design(t[keep], float(n), spec, flags[keep], offset)
    yk = y[keep]
    penalty = np.full(x.shape[1], float(spec.ridge_lambda))
    penalty[0] = 0.0
    gram = x.T @ x + np.diag(penalty)
    try:
        factor = cho_factor(gram, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise FitError(f"{spec}: normal equations are singular ({exc})") from exc
    coef = cho_solve(factor, x.T @ yk)
    if not np.all(np.isfinite(coef)):
        raise FitError(f"{spec}: non-finite coefficients")
    resid = yk - x @ coef
    dof = max(yk.size - x.shape[1], 1)
    resid_std = float(np.sqrt(resid @ resid / dof))
    return FittedProphet(spec, coef, resid_std, n, offset, int(yk.size))


def forecast_prophet(model: FittedProphet, horizon: int, future_flags) -> ForecastResult:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if future_flags is None:
        raise ValueError("future holiday flags are required")
    flags = np.asarray(future_flags, dtype=np.float64)
    if flags.shape != (horizon,):
        raise ValueError(f"expected {horizon} future flags, got {flags.size}")
    t = np.arange(model.n_train, model.n_train + horizon, dtype=np.float64)
    x = prophet_design(t, float(model.n_train), model.spec, flags, model.hour_offset)
    point = x @ model.coef
    half = Z80 * model.resid_std
    return ForecastResult(point, point - half, point + half)
