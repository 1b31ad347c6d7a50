"""Building clustering: six algorithms and validity-index model selection."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import ParseError, SchemaError
from .dbscan import fit_dbscan
from .gmm import fit_gmm
from .hierarchical import fit_hierarchical
from .kmeans import fit_kmeans, fit_minibatch_kmeans
from .model import ALGORITHMS, ClusterModel, order_labels_by, relabel_by_first_appearance
from .spectral import fit_spectral
from .validity import Validity, ValidityReport, ValidityRow, compute_validity, select_k, validity_table, write_report_csv


def fit_clusters(features, algorithm: str, k: int | None = None, seed: int = 0, **params) -> ClusterModel:
    if algorithm == "kmeans":
        return fit_kmeans(features, k, seed=seed, **params)
    if algorithm == "minibatch":
        return fit_minibatch_kmeans(features, k, seed=seed, **params)
    if algorithm == "hierarchical":
        return fit_hierarchical(features, k)
    if algorithm == "gmm":
        return fit_gmm(features, k, seed=seed, **params)
    if algorithm == "spectral":
        return fit_spectral(features, k, seed=seed, **params)
    if algorithm == "dbscan":
        return fit_dbscan(features, **params)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def write_labels_csv(building_ids, labels, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["building_id", "label"])
        for bid, lab in zip(building_ids, labels):
            w.writerow([bid, int(lab)])


def read_labels_csv(path) -> dict[str, int]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        if [c.strip() for c in next(reader, [])] != ["building_id", "label"]:
            raise SchemaError(f"{path}: expected header building_id,label")
        out = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out[row[0].strip()] = int(row[1])
            except (ValueError, IndexError) as exc:
                raise ParseError(path, lineno, str(exc)) from exc
    return out


__all__ = [
    "ALGORITHMS",
    "ClusterModel",
    "Validity",
    "ValidityReport",
    "ValidityRow",
    "compute_validity",
    "fit_clusters",
    "fit_dbscan",
    "fit_gmm",
    "fit_hierarchical",
    "fit_kmeans",
    "fit_minibatch_kmeans",
    "fit_spectral",
    "order_labels_by",
    "read_labels_csv",
    "relabel_by_first_appearance",
    "select_k",
    "validity_table",
    "write_labels_csv",
    "write_report_csv",
]
