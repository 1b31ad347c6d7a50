"""Rolling-origin evaluation and time-series-aware grid search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import FitError
from .arima import ArimaSpec, fit_arima, fit_sarima, forecast_arima
from .gru import GruSpec, fit_gru, forecast_gru
from .metrics import ForecastResult, Metrics, compute_metrics
from .prophet import ProphetSpec, fit_prophet, forecast_prophet

FAMILIES = ("arima", "sarima", "prophet", "gru")

DEFAULT_SPECS = {
    "arima": ArimaSpec(2, 1, 1),
    "sarima": ArimaSpec(1, 0, 1, (0, 1, 1, 24)),
    "prophet": ProphetSpec(),
    "gru": GruSpec(),
}

# signature: (train values, train holiday flags, future holiday flags, horizon, hour offset of train[0])
Forecaster = Callable[[np.ndarray, np.ndarray, np.ndarray, int, int], ForecastResult]


def default_spec(family: str):
    try:
        return DEFAULT_SPECS[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}") from None


def make_forecaster(family: str, spec=None) -> Forecaster:
    spec = default_spec(family) if spec is None else spec
    if family == "arima":
        return lambda y, fl, ff, h, off: forecast_arima(fit_arima(y, spec), h)
    if family == "sarima":
        return lambda y, fl, ff, h, off: forecast_arima(fit_sarima(y, spec), h)
    if family == "prophet":
        return lambda y, fl, ff, h, off: forecast_prophet(fit_prophet(y, fl, spec, hour_offset=off), h, ff)
    if family == "gru":
        return lambda y, fl, ff, h, off: forecast_gru(fit_gru(y, spec), h)
    raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}")


def spec_size(spec) -> int:
    return int(getattr(spec, "n_params", 0))


@dataclass(frozen=True, eq=False)
class Fold:
    index: int
    origin: int  # first forecast hour
    forecast: ForecastResult
    metrics: Metrics
    n_scored: int  # test hours that were not gaps


@dataclass(frozen=True, eq=False)
class Evaluation:
    family: str
    spec: object
    horizon: int
    step: int
    folds: tuple
    metrics: Metrics
    skipped_folds: int = 0

    @property
    def n_folds(self) -> int:
        return len(self.folds)


def fold_origins(n: int, horizon: int, step: int, initial_train_fraction: float = 0.8) -> list[int]:
    if not 0.0 < initial_train_fraction < 1.0:
        raise ValueError("initial_train_fraction must lie in (0, 1)")
    if horizon < 1 or step < 1:
        raise ValueError("horizon and step must be >= 1")
    first = math.ceil(initial_train_fraction * n)
    return list(range(first, n - horizon + 1, step))


def _mean(values):
    vals = [v for v in values if v is not None and not math.isnan(v)]
    return math.fsum(vals) / len(vals) if vals else math.nan


def average_metrics(items: Sequence[Metrics]) -> Metrics:
    crps = [m.crps for m in items]
    return Metrics(
        rmse=_mean(m.rmse for m in items),
        mape=_mean(m.mape for m in items),
        r2=_mean(m.r2 for m in items),
        crps=None if any(c is None for c in crps) else _mean(crps),
        mape_skipped=sum(m.mape_skipped for m in items),
    )


def _unwrap(series):
    if hasattr(series, "series"):
        series = series.series
    if hasattr(series, "hour_offset"):
        return np.asarray(series.values, dtype=np.float64), series.hour_offset()
    return np.asarray(series, dtype=np.float64), 0


def rolling_origin_evaluate(series, family="prophet", spec=None, initial_train_fraction: float = 0.8,
                            horizon: int = 24, step: int = 24, calendar=None,
                            hour_offset: int | None = None) -> Evaluation:
    """Expanding-window folds from the ``initial_train_fraction`` point onward.

    ``family`` is a name from :data:`FAMILIES` or a :data:`Forecaster`.
    Test hours that are gaps are not scored; a fold whose whole test window
    is gaps is skipped.
    """
    y, offset = _unwrap(series)
    if hour_offset is not None:
        offset = int(hour_offset)
    n = len(y)
    flags = np.zeros(n) if calendar is None else np.asarray(calendar, dtype=np.float64)
    if flags.shape != (n,):
        raise ValueError("calendar flags must cover the series")
    origins = fold_origins(n, horizon, step, initial_train_fraction)
    if not origins:
        raise ValueError(f"no folds: n={n}, horizon={horizon}, initial fraction={initial_train_fraction}")
    if callable(family):
        name, forecaster = getattr(family, "__name__", "custom"), family
    else:
        spec = default_spec(family) if spec is None else spec
        name, forecaster = family, make_forecaster(family, spec)
    folds = []
    skipped = 0
    for o in origins:
        actual = y[o : o + horizon]
        ok = ~np.isnan(actual)
        if not ok.any():
            skipped += 1
            continue
        res = forecaster(y[:o], flags[:o], flags[o : o + horizon], horizon, offset)
        lo = res.lower[ok] if res.lower is not None else None
        hi = res.upper[ok] if res.upper is not None else None
        m = compute_metrics(actual[ok], res.point[ok], lo, hi)
        folds.append(Fold(len(folds), o, res, m, int(ok.sum())))
    if not folds:
        raise ValueError("every fold's test window is entirely gaps")
    return Evaluation(name, spec, horizon, step, tuple(folds), average_metrics([f.metrics for f in folds]), skipped)


def grid_search(train, family: str, grid: Sequence, horizon: int = 24, step: int = 24,
                calendar=None, validation_fraction: float = 0.8, hour_offset: int | None = None):
    """Pick the spec with the lowest mean RMSE on a validation tail of ``train``.

    Only ``train`` is seen; callers pass the training slice so the test
    region cannot leak in. Ties go to the smaller model, then grid order.
    Returns ``(best_spec, evaluations)`` with one entry per grid point
    (``None`` for specs that failed).
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    evals = []
    failures = []
    for spec in grid:
        try:
            ev = rolling_origin_evaluate(train, family, spec, validation_fraction, horizon, step,
                                         calendar, hour_offset)
        except (FitError, ValueError, np.linalg.LinAlgError) as exc:
            failures.append(f"{spec}: {exc}")
            evals.append(None)
            continue
        evals.append(ev)
    scored = [(ev.metrics.rmse, spec_size(spec), i) for i, (spec, ev) in enumerate(zip(grid, evals))
              if ev is not None and math.isfinite(ev.metrics.rmse)]
    if not scored:
        raise FitError("every spec failed: " + "; ".join(failures))
    best = min(scored)[2]
    return grid[best], evals
