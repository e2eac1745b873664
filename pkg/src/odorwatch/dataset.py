"""Build the predictor matrix and smell-event labels from readings and reports.

The per-hour frame at hour ``h`` summarizes sensor readings observed in
``[h - 1h, h)``; the label at ``h`` aggregates high-rating reports over the
future window ``[h, h + horizon)``. Wind direction is decomposed into cosine
and sine components per reading before any averaging, so the circular mean is
well defined across the 359/1 degree seam.
"""

from __future__ import annotations

import hashlib
import json
import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .core import (
    DERIVED_CHANNELS,
    HOUR,
    DEFAULT_TIMEZONE,
    DomainError,
    HourIndex,
    SensorReading,
    SmellReport,
    hour_floor,
)

STD_GUARD = 1e-12


@dataclass(frozen=True)
class SensorFrame:
    """One hour of resampled readings: (station, derived channel) -> value."""

    hour_start: int
    values: dict[tuple[str, str], float | None]


@dataclass(frozen=True)
class ColumnSpec:
    """Descriptor of one predictor column."""

    kind: str  # "sensor" | "calendar" | "interaction"
    name: str
    station: str | None = None
    channel: str | None = None
    lag: int | None = None


@dataclass(frozen=True)
class EventLabel:
    hour: HourIndex
    score: int
    positive: bool


@dataclass(frozen=True)
class RawMatrix:
    """Assembled, un-standardized predictors; missing values are NaN."""

    hours: np.ndarray  # (n,) epoch seconds, hour-aligned, ascending
    values: np.ndarray  # (n, p) float64, NaN = missing
    columns: tuple[ColumnSpec, ...]

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


def descriptor_hash(columns: tuple[ColumnSpec, ...]) -> str:
    payload = json.dumps([c.name for c in columns]).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


class Standardizer:
    """Column-wise mean imputation followed by zero-mean unit-variance scaling.

    Centering uses the imputation mean itself, so imputed cells come out as
    exactly 0.0 after transform. Columns with std below the guard (including
    all-missing columns) standardize to all zeros and are flagged degenerate.
    """

    def __init__(self) -> None:
        self.impute_means: np.ndarray | None = None
        self.scales: np.ndarray | None = None
        self.degenerate: np.ndarray | None = None

    def fit(self, values: np.ndarray) -> "Standardizer":
        with np.errstate(invalid="ignore"):
            means = np.nanmean(values, axis=0)
        all_missing = np.isnan(means)
        means = np.where(all_missing, 0.0, means)
        centered = np.where(np.isnan(values), 0.0, values - means)
        scales = np.sqrt(np.mean(centered * centered, axis=0))
        degenerate = (scales < STD_GUARD) | all_missing
        self.impute_means = means
        self.scales = np.where(degenerate, 1.0, scales)
        self.degenerate = degenerate
        return self

    def transform(self, values: np.ndarray) -> np.ndarray:
        if self.impute_means is None:
            raise RuntimeError("Standardizer not fitted")
        out = np.where(np.isnan(values), 0.0, values - self.impute_means)
        out = out / self.scales
        out[:, self.degenerate] = 0.0
        return out

    def fit_transform(self, values: np.ndarray) -> np.ndarray:
        return self.fit(values).transform(values)


def preprocess_blob(scaler: Standardizer, columns: tuple[ColumnSpec, ...]) -> bytes:
    """Serialize fitted imputation/scaling stats plus the column vocabulary,
    so a served model transforms live rows exactly as it saw training rows."""
    payload = {
        "impute_means": scaler.impute_means.tolist(),
        "scales": scaler.scales.tolist(),
        "degenerate": scaler.degenerate.tolist(),
        "columns": [
            {"kind": c.kind, "name": c.name, "station": c.station,
             "channel": c.channel, "lag": c.lag}
            for c in columns
        ],
        "descriptor_hash": descriptor_hash(columns),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


def load_preprocess(blob: bytes) -> tuple[Standardizer, tuple[ColumnSpec, ...]]:
    payload = json.loads(blob.decode())
    scaler = Standardizer()
    scaler.impute_means = np.array(payload["impute_means"])
    scaler.scales = np.array(payload["scales"])
    scaler.degenerate = np.array(payload["degenerate"], dtype=bool)
    columns = tuple(ColumnSpec(**c) for c in payload["columns"])
    return scaler, columns


def lag0_table(columns: tuple[ColumnSpec, ...]) -> list[tuple[str, str]]:
    """Recover the (station, channel) vocabulary from column descriptors."""
    return [(c.station, c.channel) for c in columns if c.kind == "sensor" and c.lag == 0]


@dataclass(frozen=True)
class FeatureMatrix:
    """Standardized predictors plus the statistics used to produce them."""

    hours: np.ndarray
    values: np.ndarray  # standardized
    raw: np.ndarray  # pre-imputation values (NaN = missing)
    columns: tuple[ColumnSpec, ...]
    impute_means: np.ndarray
    scales: np.ndarray
    degenerate: np.ndarray

    @property
    def descriptor_hash(self) -> str:
        return descriptor_hash(self.columns)

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


def resample_hour(
    readings: list[SensorReading], hour: int
) -> SensorFrame:
    """Mean of readings in [hour-1h, hour) per (station, derived channel)."""
    if hour % HOUR != 0:
        raise DomainError("hour must be aligned to an hour boundary")
    lo, hi = hour - HOUR, hour
    acc: dict[tuple[str, str], list[float]] = {}
    for r in readings:
        if not (lo <= r.observed_at < hi) or r.value is None:
            continue
        if r.channel == "WIND_DIR_DEG":
            theta = math.radians(r.value)
            acc.setdefault((r.station_id, "WIND_COS"), []).append(math.cos(theta))
            acc.setdefault((r.station_id, "WIND_SIN"), []).append(math.sin(theta))
        else:
            acc.setdefault((r.station_id, r.channel), []).append(r.value)
    values = {key: sum(vals) / len(vals) for key, vals in acc.items()}
    return SensorFrame(hour_start=hour, values=values)


def build_frames(readings: list[SensorReading], t0: int, t1: int) -> list[SensorFrame]:
    """Contiguous hourly frames for hours in [t0, t1), t0/t1 hour-aligned."""
    by_hour: dict[int, list[SensorReading]] = {}
    for r in readings:
        h = r.observed_at - r.observed_at % HOUR + HOUR  # frame this reading feeds
        by_hour.setdefault(h, []).append(r)
    return [resample_hour(by_hour.get(h, []), h) for h in range(t0, t1, HOUR)]


def channel_table(frames: list[SensorFrame]) -> list[tuple[str, str]]:
    """Ordered (station, channel) vocabulary inferred from frames."""
    seen = {key for f in frames for key in f.values}
    order = {ch: i for i, ch in enumerate(DERIVED_CHANNELS)}
    return sorted(seen, key=lambda k: (k[0], order.get(k[1], 99)))


CALENDAR_FIELDS = ("day_of_week", "hour_of_day", "day_of_month")


def assemble_X(
    frames: list[SensorFrame],
    lags: int = 2,
    calendar: bool = True,
    tz: str = DEFAULT_TIMEZONE,
    table: list[tuple[str, str]] | None = None,
) -> RawMatrix:
    """Assemble base, lagged, and calendar predictors (no standardization).

    "Lagged" means prior hours of data: lag L at row h carries the base value
    from h - L hours. With lags=2 and a 64-column base this yields
    64 + 64*2 + 3 = 195 columns.
    """
    if not frames:
        raise DomainError("no frames to assemble")
    hours = np.array([f.hour_start for f in frames], dtype=np.int64)
    if len(hours) > 1 and not np.all(np.diff(hours) == HOUR):
        raise DomainError("frames must be contiguous hourly")
    if table is None:
        table = channel_table(frames)
    n, k = len(frames), len(table)
    base = np.full((n, k), np.nan)
    for i, f in enumerate(frames):
        for j, key in enumerate(table):
            v = f.values.get(key)
            if v is not None:
                base[i, j] = v
    blocks = [base]
    columns = [
        ColumnSpec(kind="sensor", name=f"{st}:{ch}:lag0", station=st, channel=ch, lag=0)
        for st, ch in table
    ]
    for lag in range(1, lags + 1):
        shifted = np.full_like(base, np.nan)
        shifted[lag:] = base[:-lag]
        blocks.append(shifted)
        columns.extend(
            ColumnSpec(kind="sensor", name=f"{st}:{ch}:lag{lag}", station=st, channel=ch, lag=lag)
            for st, ch in table
        )
    if calendar:
        cal = np.empty((n, 3))
        for i, h in enumerate(hours):
            hi = hour_floor(int(h), tz)
            cal[i] = (hi.local_day_of_week, hi.local_hour_of_day, hi.local_day_of_month)
        blocks.append(cal)
        columns.extend(ColumnSpec(kind="calendar", name=name) for name in CALENDAR_FIELDS)
    return RawMatrix(hours=hours, values=np.hstack(blocks), columns=tuple(columns))


def build_X(
    frames: list[SensorFrame],
    lags: int = 2,
    calendar: bool = True,
    tz: str = DEFAULT_TIMEZONE,
    table: list[tuple[str, str]] | None = None,
) -> FeatureMatrix:
    """assemble_X plus imputation and standardization fitted on all rows."""
    raw = assemble_X(frames, lags=lags, calendar=calendar, tz=tz, table=table)
    return standardize(raw)


def standardize(raw: RawMatrix, fit_rows: np.ndarray | None = None) -> FeatureMatrix:
    """Impute and standardize a RawMatrix; stats from ``fit_rows`` if given."""
    scaler = Standardizer()
    scaler.fit(raw.values if fit_rows is None else raw.values[fit_rows])
    values = scaler.transform(raw.values)
    return FeatureMatrix(
        hours=raw.hours,
        values=values,
        raw=raw.values,
        columns=raw.columns,
        impute_means=scaler.impute_means,
        scales=scaler.scales,
        degenerate=scaler.degenerate,
    )


def build_y(
    reports: list[SmellReport],
    region_set: set[str] | None,
    hours: list[int] | np.ndarray,
    horizon_hours: int = 8,
    rating_floor: int = 2,
    threshold: int = 40,
    tz: str = DEFAULT_TIMEZONE,
) -> list[EventLabel]:
    """Per-hour confidence scores and binary smell-event labels.

    score(h) sums ratings strictly above ``rating_floor`` from reports inside
    the configured regions with observed_at in [h, h + horizon); an hour is
    positive when score >= threshold.
    """
    eligible = sorted(
        (
            r
            for r in reports
            if r.rating > rating_floor and (region_set is None or r.zip_code in region_set)
        ),
        key=lambda r: r.observed_at,
    )
    times = [r.observed_at for r in eligible]
    csum = [0]
    for r in eligible:
        csum.append(csum[-1] + r.rating)
    span = horizon_hours * HOUR
    labels = []
    for h in hours:
        h = int(h)
        lo = bisect_left(times, h)
        hi = bisect_left(times, h + span)
        score = csum[hi] - csum[lo]
        labels.append(
            EventLabel(hour=hour_floor(h, tz), score=score, positive=score >= threshold)
        )
    return labels


@dataclass(frozen=True)
class Dataset:
    """Aligned predictors and labels ready for model fitting.

    Carries the raw (un-standardized) matrix so cross-validation can fit
    imputation and scaling statistics on training folds only.
    """

    hours: np.ndarray
    hour_of_day: np.ndarray
    raw: RawMatrix
    scores: np.ndarray
    positives: np.ndarray
    tz: str

    @property
    def positive_rate(self) -> float:
        return float(np.mean(self.positives)) if len(self.positives) else 0.0

    def __len__(self) -> int:
        return len(self.hours)

    def standardized(self) -> FeatureMatrix:
        return standardize(self.raw)


def align(raw: RawMatrix, labels: list[EventLabel], tz: str = DEFAULT_TIMEZONE) -> Dataset:
    """Keep rows whose hours appear in both the matrix and the label series."""
    label_by_hour = {lab.hour.hour_start: lab for lab in labels}
    keep = [i for i, h in enumerate(raw.hours) if int(h) in label_by_hour]
    if not keep:
        raise DomainError("predictor matrix and labels share no hours")
    idx = np.array(keep, dtype=np.int64)
    hours = raw.hours[idx]
    kept = RawMatrix(hours=hours, values=raw.values[idx], columns=raw.columns)
    picked = [label_by_hour[int(h)] for h in hours]
    return Dataset(
        hours=hours,
        hour_of_day=np.array([lab.hour.local_hour_of_day for lab in picked], dtype=np.int64),
        raw=kept,
        scores=np.array([lab.score for lab in picked], dtype=np.int64),
        positives=np.array([lab.positive for lab in picked], dtype=bool),
        tz=tz,
    )
