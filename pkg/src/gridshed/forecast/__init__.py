"""Cluster-level load forecasting and rolling-origin evaluation."""

from .arima import ArimaSpec, FittedArima, fit_arima, fit_sarima, forecast_arima, forecast_sarima
from .evaluation import (
    DEFAULT_SPECS,
    FAMILIES,
    Evaluation,
    Fold,
    default_spec,
    fold_origins,
    grid_search,
    make_forecaster,
    rolling_origin_evaluate,
)
from .gru import FittedGru, GruSpec, fit_gru, forecast_gru
from .metrics import INTERVAL_LEVEL, Z80, ForecastResult, Metrics, compute_metrics, crps_gaussian
from .prophet import FittedProphet, ProphetSpec, fit_prophet, forecast_prophet, prophet_design
from .series import ClusterSeries, build_cluster_series, read_cluster_series_csv, write_cluster_series_csv

__all__ = [
    "DEFAULT_SPECS",
    "FAMILIES",
    "INTERVAL_LEVEL",
    "Z80",
    "ArimaSpec",
    "ClusterSeries",
    "Evaluation",
    "FittedArima",
    "FittedGru",
    "FittedProphet",
    "Fold",
    "ForecastResult",
    "GruSpec",
    "Metrics",
    "ProphetSpec",
    "build_cluster_series",
    "compute_metrics",
    "crps_gaussian",
    "default_spec",
    "fit_arima",
    "fit_gru",
    "fit_prophet",
    "fit_sarima",
    "fold_origins",
    "forecast_arima",
    "forecast_gru",
    "forecast_prophet",
    "forecast_sarima",
    "grid_search",
    "make_forecaster",
    "prophet_design",
    "read_cluster_series_csv",
    "rolling_origin_evaluate",
    "write_cluster_series_csv",
]
