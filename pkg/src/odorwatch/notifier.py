"""Post-hoc and predictive push notifications plus the weekly retrain loop.

The post-hoc alert fires when enough poor-odor reports arrive in the trailing
hour; the predictive alert fires when the served classifier flags the next
hours, throttled to one per rolling window. Notification texts are fixed
product copy and must not drift.
"""

from __future__ import annotations

import csv
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime
from zoneinfo import ZoneInfo

import numpy as np

from .core import DEFAULT_TIMEZONE, HOUR, WEEK, Notification
from .dataset import (
    Standardizer,
    assemble_X,
    build_frames,
    build_y,
    descriptor_hash,
    lag0_table,
    load_preprocess,
    preprocess_blob,
)
from .ensemble import ForestModel, ForestParams, fit_forest
from .store import Store

log = logging.getLogger(__name__)

POSTHOC_MESSAGE = (
    "Many residents are reporting poor odors in Pittsburgh. Were you affected "
    "by this smell event? Be sure to submit a smell report!"
)
PREDICTIVE_MESSAGE = (
    "Local weather and pollution data indicates there may be a Pittsburgh "
    "smell event in the next few hours. Keep a nose out and report smells you notice."
)

DISPATCH_CSV_HEADER = "issued_at,kind,dedupe_key"


class DispatchSink:
    def dispatch(self, notification: Notification) -> None:
        raise NotImplementedError


class ListSink(DispatchSink):
    def __init__(self) -> None:
        self.sent: list[Notification] = []

    def dispatch(self, notification: Notification) -> None:
        self.sent.append(notification)


class LogFileSink(DispatchSink):
    """Appends `issued_at,kind,dedupe_key` rows to the dispatch log."""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)

    def dispatch(self, notification: Notification) -> None:
        new = not os.path.exists(self.path) or os.path.getsize(self.path) == 0
        with open(self.path, "a", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if new:
                fh.write(DISPATCH_CSV_HEADER + "\n")
            writer.writerow([notification.issued_at, notification.kind, notification.dedupe_key])

    def keys(self) -> set[str]:
        if not os.path.exists(self.path):
            return set()
        with open(self.path, newline="") as fh:
            return {row[2] for row in csv.reader(fh) if row and row[0] != "issued_at"}


class WebhookSink(DispatchSink):
    def __init__(self, url: str, session=None):
        import requests

        self.url = url
        self.session = session or requests.Session()

    def dispatch(self, notification: Notification) -> None:
        self.session.post(
            self.url,
            json={
                "kind": notification.kind,
                "message": notification.message,
                "issued_at": notification.issued_at,
                "dedupe_key": notification.dedupe_key,
            },
            timeout=10,
        )


def check_posthoc(
    reports_last_hour,
    hour_start: int,
    threshold: int = 15,
    rating_floor: int = 3,
) -> Notification | None:
    """Fire when reports rated >= rating_floor in the trailing hour reach the
    threshold; at most one per trailing-hour window via the dedupe key."""
    count = sum(1 for r in reports_last_hour if r.rating >= rating_floor)
    if count < threshold:
        return None
    return Notification(
        kind="POSTHOC",
        message=POSTHOC_MESSAGE,
        issued_at=hour_start,
        dedupe_key=f"POSTHOC:{hour_start}",
    )


def check_predictive(
    model: ForestModel,
    x_row: np.ndarray,
    matrix_descriptor: str,
    now: int,
    last_fired_at: int | None,
    window_hours: int = 8,
) -> Notification | None:
    """Fire on a positive classification, at most once per rolling window.

    A descriptor mismatch between the served model and the feature row is an
    operational alert, never a user notification.
    """
    try:
        positive = bool(model.predict(x_row.reshape(1, -1), descriptor_hash=matrix_descriptor)[0])
    except Exception:
        log.exception("predictive check failed: model/descriptor mismatch")
        return None
    if not positive:
        return None
    if last_fired_at is not None and now - last_fired_at < window_hours * HOUR:
        return None
    return Notification(
        kind="PREDICTIVE",
        message=PREDICTIVE_MESSAGE,
        issued_at=now,
        dedupe_key=f"PREDICTIVE:{now}",
    )


@dataclass
class RetrainSpec:
    """Weekly retrain settings for the served classifier."""

    train_weeks: int = 48
    n_trees: int = 1000
    max_features: int | float | str | None = "sqrt"
    min_samples_split: int = 8
    lags: int = 2
    horizon_hours: int = 8
    rating_floor: int = 2
    score_threshold: int = 40
    region_set: frozenset[str] | None = None
    tz: str = DEFAULT_TIMEZONE
    seed: int = 0
    channel_table: tuple | None = None


def build_training_dataset(store: Store, spec: RetrainSpec, now: int):
    """Assemble aligned (X, y) from the trailing training window."""
    end = now - now % HOUR
    start = end - spec.train_weeks * WEEK
    snap = store.snapshot()
    readings = [r for r in snap.readings if start - 2 * HOUR <= r.observed_at < end]
    if not readings:
        raise ValueError("no sensor readings available for training")
    first = min(r.observed_at for r in readings)
    t0 = max(start, first - first % HOUR + HOUR)
    frames = build_frames(readings, t0, end)
    raw = assemble_X(
        frames, lags=spec.lags, calendar=True, tz=spec.tz,
        table=list(spec.channel_table) if spec.channel_table else None,
    )
    reports = [r for r in snap.reports if t0 <= r.observed_at < end + spec.horizon_hours * HOUR]
    labels = build_y(
        reports,
        region_set=set(spec.region_set) if spec.region_set else None,
        hours=raw.hours,
        horizon_hours=spec.horizon_hours,
        rating_floor=spec.rating_floor,
        threshold=spec.score_threshold,
        tz=spec.tz,
    )
    return raw, labels


@dataclass(frozen=True)
class ServedBundle:
    """A model plus the preprocessing stats it was trained with."""

    model: ForestModel
    scaler: Standardizer
    columns: tuple


def weekly_retrain(store: Store, spec: RetrainSpec, now: int) -> tuple[ServedBundle, str]:
    """Fit a classification ET on the trailing window (all data when shorter),
    persist it under models/<date>/, and atomically repoint CURRENT.

    Deterministic: the same data and seed produce a byte-identical blob.
    """
    raw, labels = build_training_dataset(store, spec, now)
    scaler = Standardizer().fit(raw.values)
    X = scaler.transform(raw.values)
    y = np.array([lab.positive for lab in labels], dtype=np.int64)
    model = fit_forest(
        X,
        y,
        mode="classify",
        variant="et",
        params=ForestParams(
            n_trees=spec.n_trees,
            max_features=spec.max_features,
            min_samples_split=spec.min_samples_split,
        ),
        seed=spec.seed,
        descriptor_hash=descriptor_hash(raw.columns),
    )
    version = datetime.fromtimestamp(now, ZoneInfo(spec.tz)).date().isoformat()
    store.save_model_files(
        version,
        {"model.json": model.to_blob(), "preprocess.json": preprocess_blob(scaler, raw.columns)},
    )
    return ServedBundle(model=model, scaler=scaler, columns=raw.columns), version


@dataclass
class ServingModel:
    """Atomic reference to the bundle serving predictive checks."""

    _bundle: ServedBundle | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def get(self) -> ServedBundle | None:
        return self._bundle

    def swap(self, bundle: ServedBundle) -> None:
        with self._lock:
            self._bundle = bundle


class Scheduler:
    """Owns hourly ticks and the weekly retrain; dispatch fans out to sinks.

    Dedupe keys already present in the dispatch log are never dispatched
    again, also across restarts.
    """

    def __init__(
        self,
        store: Store,
        spec: RetrainSpec,
        sinks: list[DispatchSink],
        posthoc_threshold: int = 15,
        posthoc_rating_floor: int = 3,
        predictive_window_hours: int = 8,
        retrain_day: int = 6,  # Sunday
        retrain_hour: int = 23,
        seen_keys: set[str] | None = None,
    ):
        self.store = store
        self.spec = spec
        self.sinks = sinks
        self.posthoc_threshold = posthoc_threshold
        self.posthoc_rating_floor = posthoc_rating_floor
        self.predictive_window_hours = predictive_window_hours
        self.retrain_day = retrain_day
        self.retrain_hour = retrain_hour
        self.serving = ServingModel()
        self._seen: set[str] = set(seen_keys or ())
        self._last_predictive_at: int | None = None
        self._last_retrain_week: int | None = None

    def _dispatch(self, notification: Notification) -> bool:
        if notification.dedupe_key in self._seen:
            return False
        self._seen.add(notification.dedupe_key)
        for sink in self.sinks:
            try:
                sink.dispatch(notification)
            except Exception:
                log.exception("dispatch sink failed for %s", notification.dedupe_key)
        return True

    def load_model_if_any(self) -> None:
        try:
            model_blob = self.store.load_model_blob()
            pre_blob = self.store.load_model_blob(filename="preprocess.json")
        except FileNotFoundError:
            return
        scaler, columns = load_preprocess(pre_blob)
        self.serving.swap(
            ServedBundle(model=ForestModel.from_blob(model_blob), scaler=scaler, columns=columns)
        )

    def _current_x_row(self, bundle: ServedBundle, hour_start: int):
        """Assemble and transform the feature row for this hour using the
        served bundle's vocabulary and training-time statistics."""
        lags = self.spec.lags
        readings = self.store.query_readings(hour_start - (lags + 1) * HOUR, hour_start)
        frames = build_frames(readings, hour_start - lags * HOUR, hour_start + HOUR)
        raw = assemble_X(
            frames, lags=lags, calendar=True, tz=self.spec.tz,
            table=lag0_table(bundle.columns),
        )
        return bundle.scaler.transform(raw.values)[-1], descriptor_hash(raw.columns)

    def tick(self, now: int) -> list[Notification]:
        """One hourly tick: post-hoc check, predictive check, retrain check."""
        hour_start = now - now % HOUR
        fired: list[Notification] = []

        reports = self.store.query_reports(hour_start - HOUR, hour_start)
        note = check_posthoc(
            reports, hour_start, self.posthoc_threshold, self.posthoc_rating_floor
        )
        if note and self._dispatch(note):
            fired.append(note)

        bundle = self.serving.get()
        if bundle is not None:
            try:
                x_row, desc = self._current_x_row(bundle, hour_start)
            except Exception:
                log.exception("could not assemble current feature row")
                x_row, desc = None, None
            if x_row is not None:
                note = check_predictive(
                    bundle.model,
                    x_row,
                    desc,
                    hour_start,
                    self._last_predictive_at,
                    self.predictive_window_hours,
                )
                if note and self._dispatch(note):
                    self._last_predictive_at = hour_start
                    fired.append(note)

        local = datetime.fromtimestamp(hour_start, ZoneInfo(self.spec.tz))
        week_id = hour_start // WEEK
        if (
            local.weekday() == self.retrain_day
            and local.hour == self.retrain_hour
            and week_id != self._last_retrain_week
        ):
            try:
                bundle, version = weekly_retrain(self.store, self.spec, hour_start)
                self.serving.swap(bundle)
                self._last_retrain_week = week_id
                log.info("retrained model version %s", version)
            except Exception:
                log.exception("weekly retrain failed; previous model retained")
        return fired
