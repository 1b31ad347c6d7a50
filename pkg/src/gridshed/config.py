"""Flat ``section.key = value`` configuration.

Every key has a default below; files and ``--set`` overrides may only
touch known keys. Values are kept as parsed Python objects and rendered
back canonically for the report's provenance block.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import ConfigError


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in {"1", "true", "yes", "on"}:
        return True
    if t in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_int_list(text: str) -> tuple:
    """``2,1,1`` or an inclusive range ``2-8`` / ``2..8``."""
    t = text.strip().replace("..", "-")
    if not t:
        return ()
    if "-" in t and "," not in t and not t.startswith("-"):
        lo, hi = (int(v) for v in t.split("-"))
        return tuple(range(lo, hi + 1))
    return tuple(int(v) for v in t.split(","))


def _opt_float(text: str):
    t = text.strip().lower()
    return None if t in {"", "auto", "none"} else float(t)


def _words(text: str) -> tuple:
    return tuple(w.strip() for w in text.split(",") if w.strip())


def _weights(text: str):
    """``auto`` or ``cluster:weight`` pairs, e.g. ``0:3,1:2,2:1``."""
    t = text.strip().lower()
    if t in {"", "auto"}:
        return None
    out = {}
    for pair in t.split(","):
        cid, w = pair.split(":")
        out[int(cid)] = float(w)
    return out


def _render(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, dict):
        return ",".join(f"{k}:{v:g}" for k, v in sorted(value.items()))
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable, object]] = {
    "run.seed": (int, 0),
    "paths.feeder": (str, ""),
    "paths.inventory": (str, ""),
    "paths.calendar": (str, ""),
    "paths.out": (str, "gridshed-out"),
    "cluster.algorithm": (str, "kmeans"),
    "cluster.k": (int, 3),
    "cluster.k_range": (parse_int_list, tuple(range(2, 9))),
    "cluster.batch_size": (int, 32),
    "cluster.dbscan_eps": (_opt_float, None),
    "cluster.dbscan_min_pts": (int, 5),
    "pca.enabled": (_bool, True),
    "pca.variance_target": (float, 0.95),
    "forecast.model": (str, "prophet"),
    "forecast.evaluate": (_words, ("arima", "sarima", "prophet", "gru")),
    "forecast.horizon": (int, 24),
    "forecast.step": (int, 24),
    "forecast.gru_single_fold": (_bool, True),
    "arima.order": (parse_int_list, (2, 1, 1)),
    "sarima.order": (parse_int_list, (1, 0, 1)),
    "sarima.seasonal": (parse_int_list, (0, 1, 1, 24)),
    "prophet.n_changepoints": (int, 10),
    "prophet.daily_order": (int, 6),
    "prophet.weekly_order": (int, 3),
    "prophet.ridge_lambda": (float, 1.0),
    "gru.hidden_size": (int, 32),
    "gru.lookback": (int, 24),
    "gru.epochs": (int, 200),
    "gru.learning_rate": (float, 1e-3),
    "allocate.weights": (_weights, None),
    "allocate.supply": (str, ""),
    "allocate.supply_fraction": (float, 0.9),
    "generator.n_buildings": (int, 55),
    "generator.n_hours": (int, 3648),
    "generator.cluster_sizes": (parse_int_list, (9, 37, 9)),
    "generator.gap_rate": (float, 0.0),
    "generator.noise": (float, 0.05),
}


@dataclass(frozen=True)
class PipelineConfig:
    values: tuple  # sorted (key, value) pairs

    def __getitem__(self, key):
        return dict(self.values)[key]

    def get(self, key, default=None):
        return dict(self.values).get(key, default)

    def with_overrides(self, overrides: dict) -> "PipelineConfig":
        merged = dict(self.values)
        for key, raw in overrides.items():
            merged[key] = _parse_value(key, raw)
        _validate(merged)
        return PipelineConfig(tuple(sorted(merged.items())))

    def render(self) -> str:
        return "".join(f"{k} = {_render(v)}\n" for k, v in self.values)

    @property
    def digest(self) -> str:
        # where results land does not change them
        text = "".join(f"{k} = {_render(v)}\n" for k, v in self.values if k != "paths.out")
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _parse_value(key: str, raw):
    if key not in SCHEMA:
        raise ConfigError(f"unknown configuration key {key!r}")
    parser, _ = SCHEMA[key]
    if not isinstance(raw, str):
        return raw
    try:
        return parser(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _validate(values: dict) -> None:
    if values["cluster.k"] < 2:
        raise ConfigError("cluster.k must be >= 2")
    if not 0 < values["pca.variance_target"] <= 1:
        raise ConfigError("pca.variance_target must lie in (0, 1]")
    if values["forecast.horizon"] < 1 or values["forecast.step"] < 1:
        raise ConfigError("forecast.horizon and forecast.step must be >= 1")
    if len(values["arima.order"]) != 3 or len(values["sarima.order"]) != 3:
        raise ConfigError("orders are p,d,q")
    if len(values["sarima.seasonal"]) != 4:
        raise ConfigError("sarima.seasonal is P,D,Q,s")
    if values["allocate.supply_fraction"] < 0:
        raise ConfigError("allocate.supply_fraction must be >= 0")
    if not 0 <= values["generator.gap_rate"] < 1:
        raise ConfigError("generator.gap_rate must lie in [0, 1)")


def default_config() -> PipelineConfig:
    return PipelineConfig(tuple(sorted((k, d) for k, (_, d) in SCHEMA.items())))


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown configuration key {key!r}")
        out[key] = raw
    return out


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    cfg = default_config()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        cfg = cfg.with_overrides(parse_config_text(text, str(p)))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg


def parse_set_options(items) -> dict:
    """``--set key=value`` strings to a dict."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = (part.strip() for part in item.split("=", 1))
        out[key] = raw
    return out
