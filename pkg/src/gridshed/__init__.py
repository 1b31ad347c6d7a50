"""Feeder-to-plan campus load shedding: disaggregation, clustering,
cluster-level forecasting and curtailment allocation."""

__version__ = "0.1.0"

from ._accel import BACKEND

__all__ = ["BACKEND", "__version__"]
