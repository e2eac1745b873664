"""One versioned run configuration; its hash is stamped into every artifact."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .core import DEFAULT_TIMEZONE, Region, RegionTable, default_region_table


@dataclass
class ModelConfig:
    n_trees_classify: int = 1000
    n_trees_regress: int = 200
    max_features: str | float | int | None = "sqrt"
    min_samples_split: int = 8
    # model-selection grid
    grid_max_features: tuple = ("sqrt", 0.33)
    grid_min_samples_split: tuple = (2, 8, 32)


@dataclass
class CvConfig:
    fold_hours: int = 168
    train_folds: int = 48
    repeats: int = 10
    n_jobs: int = 1


@dataclass
class InterpretConfig:
    lags: int = 2
    proximity_trees: int = 500
    max_proximity_samples: int = 1500
    dbscan_eps: tuple = (0.2, 0.3, 0.4, 0.5)
    dbscan_min_pts: tuple = (5, 10, 20)
    rfe_step: int = 50
    rfe_target: int = 30
    rfe_trees: int = 100
    tree_max_depth: int = 5
    test_fraction: float = 0.25
    max_negatives: int | None = None


@dataclass
class NotifyConfig:
    posthoc_threshold: int = 15
    posthoc_rating_floor: int = 3
    predictive_window_hours: int = 8
    retrain: str = "Sun 23:00"
    tick: str = "hourly"


@dataclass
class RunConfig:
    data_dir: str = "data"
    timezone: str = DEFAULT_TIMEZONE
    listen: str = "127.0.0.1:8000"
    sensor_source: str | None = None
    seed: int = 0
    skew_radius_m: float = 500.0
    text_cap: int = 1024
    regions: list[dict] | None = None  # null -> built-in default table
    region_set: list[str] | None = None  # null -> every zip seen in the reports
    rating_floor: int = 2
    horizon_hours: int = 8
    score_threshold: int = 40
    lags: int = 2
    calendar: bool = True
    daytime: tuple = (5, 19)
    issue: tuple = (5, 12)
    agency_sink: dict = field(default_factory=lambda: {"kind": "spool"})
    static_dir: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    cv: CvConfig = field(default_factory=CvConfig)
    interpret: InterpretConfig = field(default_factory=InterpretConfig)
    notify: NotifyConfig = field(default_factory=NotifyConfig)

    def region_table(self) -> RegionTable:
        if self.regions is None:
            return default_region_table()
        regions = tuple(Region(**r) for r in self.regions)
        lat_min = min(r.lat_min for r in regions)
        lat_max = max(r.lat_max for r in regions)
        lon_min = min(r.lon_min for r in regions)
        lon_max = max(r.lon_max for r in regions)
        pad = 0.2
        return RegionTable(
            regions=regions,
            metro_lat_min=lat_min - pad,
            metro_lat_max=lat_max + pad,
            metro_lon_min=lon_min - pad,
            metro_lon_max=lon_max + pad,
        )

    def to_canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_canonical_json().encode()).hexdigest()[:12]


_SECTIONS = {"model": ModelConfig, "cv": CvConfig, "interpret": InterpretConfig,
             "notify": NotifyConfig}


def _build(cls, data: dict, path: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config key(s) at {path or 'top level'}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and isinstance(value, dict):
            kwargs[key] = _build(_SECTIONS[key], value, f"{path}{key}.")
        elif isinstance(value, list) and key in ("daytime", "issue", "grid_max_features",
                                                 "grid_min_samples_split", "dbscan_eps",
                                                 "dbscan_min_pts"):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def load_config(path: str) -> RunConfig:
    """Parse a JSON config file; unknown keys are rejected."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return _build(RunConfig, data, "")
