import csv
import os

import numpy as np

from odorwatch.core import HOUR, SmellReport
from odorwatch.ensemble import ForestModel, ForestParams, fit_forest
from odorwatch.notifier import (
    POSTHOC_MESSAGE,
    PREDICTIVE_MESSAGE,
    ListSink,
    LogFileSink,
    RetrainSpec,
    Scheduler,
    build_training_dataset,
    check_posthoc,
    check_predictive,
    weekly_retrain,
)
from odorwatch.store import Store
from odorwatch.synth import default_start_epoch, generate_benchmark, to_readings

TZ = "America/New_York"


def _report(t, rating=4):
    return SmellReport(report_id="x", observed_at=t, zip_code="15201", rating=rating)


class TestMessages:
    def test_posthoc_text_exact(self):
        assert POSTHOC_MESSAGE == (
            "Many residents are reporting poor odors in Pittsburgh. Were you "
            "affected by this smell event? Be sure to submit a smell report!"
        )

    def test_predictive_text_exact(self):
        assert PREDICTIVE_MESSAGE == (
            "Local weather and pollution data indicates there may be a "
            "Pittsburgh smell event in the next few hours. Keep a nose out "
            "and report smells you notice."
        )


class TestPosthoc:
    def test_no_reports_no_notification(self):
        assert check_posthoc([], hour_start=3600) is None

    def test_threshold_boundary_fires(self):
        reports = [_report(100 + i, rating=4) for i in range(15)]
        note = check_posthoc(reports, hour_start=3600, threshold=15)
        assert note is not None
        assert note.kind == "POSTHOC"
        assert note.message == POSTHOC_MESSAGE
        assert note.dedupe_key == "POSTHOC:3600"

    def test_rating_floor_filters(self):
        reports = [_report(100 + i, rating=2) for i in range(20)]
        assert check_posthoc(reports, hour_start=3600, threshold=15) is None

    def test_fourteen_is_below_threshold(self):
        reports = [_report(100 + i, rating=5) for i in range(14)]
        assert check_posthoc(reports, hour_start=3600, threshold=15) is None


class _StubModel:
    """Stands in for a ForestModel: classifies by a fixed answer."""

    def __init__(self, positive):
        self.positive = positive

    def predict(self, X, descriptor_hash=None):
        return np.array([1 if self.positive else 0])


class TestPredictive:
    def test_negative_model_never_fires(self):
        note = check_predictive(_StubModel(False), np.zeros(3), "d", now=0, last_fired_at=None)
        assert note is None

    def test_dedupe_within_rolling_window(self):
        six_am = 6 * HOUR
        nine_am = 9 * HOUR
        first = check_predictive(_StubModel(True), np.zeros(3), "d", six_am, None)
        assert first is not None and first.message == PREDICTIVE_MESSAGE
        second = check_predictive(_StubModel(True), np.zeros(3), "d", nine_am, six_am)
        assert second is None  # 3 h later, inside the 8 h window

    def test_disjoint_windows_fire_again(self):
        six_am = 6 * HOUR
        next_day = six_am + 24 * HOUR
        note = check_predictive(_StubModel(True), np.zeros(3), "d", next_day, six_am)
        assert note is not None

    def test_descriptor_mismatch_is_alert_not_notification(self):
        rng = np.random.default_rng(0)
        model = fit_forest(rng.normal(size=(20, 2)), (rng.random(20) < 0.5).astype(int),
                           params=ForestParams(n_trees=2), seed=0, descriptor_hash="right")
        note = check_predictive(model, np.zeros(2), "wrong", now=0, last_fired_at=None)
        assert note is None


def _seed_store(tmp_path, weeks, seed=0):
    """A store holding `weeks` of synthetic readings and matching reports."""
    data = generate_benchmark(seed=seed, n_hours=weeks * 168)
    store = Store(str(tmp_path))
    store.append_readings(to_readings(data.frames))
    rng = np.random.default_rng(seed)
    for lab in data.labels:
        if lab.positive and rng.random() < 0.6:
            store.append_report(
                SmellReport(
                    report_id="x",
                    observed_at=int(lab.hour.hour_start + rng.integers(0, HOUR)),
                    zip_code="15201",
                    rating=4,
                )
            )
    return store, data


SPEC = RetrainSpec(
    train_weeks=48, n_trees=3, min_samples_split=32, lags=2, tz=TZ, seed=7,
    region_set=frozenset({"15201"}),
)


class TestRetrain:
    def test_short_history_clamps(self, tmp_path):
        store, data = _seed_store(tmp_path, weeks=2)
        now = int(data.labels[-1].hour.hour_start) + HOUR
        raw, labels = build_training_dataset(store, SPEC, now)
        assert len(raw.hours) <= 2 * 168
        assert len(raw.hours) > 160

    def test_long_history_uses_trailing_48_weeks(self, tmp_path):
        store, data = _seed_store(tmp_path, weeks=60)
        now = int(data.labels[-1].hour.hour_start) + HOUR
        raw, labels = build_training_dataset(store, SPEC, now)
        assert len(raw.hours) == 48 * 168
        assert int(raw.hours[-1]) == now - HOUR

    def test_retrain_deterministic_blob(self, tmp_path):
        store, data = _seed_store(tmp_path, weeks=3)
        now = int(data.labels[-1].hour.hour_start) + HOUR
        bundle_a, version_a = weekly_retrain(store, SPEC, now)
        blob_a = store.load_model_blob(version_a)
        bundle_b, version_b = weekly_retrain(store, SPEC, now)
        blob_b = store.load_model_blob(version_b)
        assert version_a == version_b
        assert blob_a == blob_b

    def test_model_round_trips_through_store(self, tmp_path):
        store, data = _seed_store(tmp_path, weeks=3)
        now = int(data.labels[-1].hour.hour_start) + HOUR
        bundle, version = weekly_retrain(store, SPEC, now)
        clone = ForestModel.from_blob(store.load_model_blob(version))
        assert clone.n_trees == SPEC.n_trees
        assert clone.descriptor_hash == bundle.model.descriptor_hash


class TestScheduler:
    def _scheduler(self, store, sinks):
        return Scheduler(
            store, SPEC, sinks=sinks, posthoc_threshold=15, posthoc_rating_floor=3,
        )

    def test_posthoc_fires_once_per_window(self, tmp_path):
        store = Store(str(tmp_path))
        base = default_start_epoch(TZ)
        for i in range(15):
            store.append_report(_report(base + 10 + i, rating=4))
        sink = ListSink()
        sched = self._scheduler(store, [sink])
        fired = sched.tick(base + HOUR)
        assert len(fired) == 1
        assert fired[0].message == POSTHOC_MESSAGE
        again = sched.tick(base + HOUR + 120)  # same trailing-hour window
        assert again == []
        assert len(sink.sent) == 1

    def test_dedupe_survives_restart_via_log(self, tmp_path):
        store = Store(str(tmp_path))
        base = default_start_epoch(TZ)
        for i in range(15):
            store.append_report(_report(base + 10 + i, rating=4))
        log_path = os.path.join(str(tmp_path), "notifications", "dispatch.csv")
        log_sink = LogFileSink(log_path)
        sched = self._scheduler(store, [log_sink])
        assert len(sched.tick(base + HOUR)) == 1
        # Restart: seen keys reloaded from the dispatch log.
        sched2 = Scheduler(store, SPEC, sinks=[log_sink], seen_keys=log_sink.keys())
        assert sched2.tick(base + HOUR) == []
        with open(log_path, newline="") as fh:
            rows = [r for r in csv.reader(fh)][1:]
        keys = [r[2] for r in rows]
        assert len(keys) == len(set(keys)) == 1

    def test_dispatch_log_schema(self, tmp_path):
        log_path = os.path.join(str(tmp_path), "dispatch.csv")
        sink = LogFileSink(log_path)
        from odorwatch.core import Notification

        sink.dispatch(Notification(kind="POSTHOC", message="m", issued_at=5, dedupe_key="k"))
        with open(log_path) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == "issued_at,kind,dedupe_key"
        assert lines[1] == "5,POSTHOC,k"

    def test_retrain_failure_keeps_previous_model(self, tmp_path):
        # An empty store cannot fit; the tick must survive and keep serving.
        store = Store(str(tmp_path))
        sched = self._scheduler(store, [ListSink()])
        from datetime import datetime, timedelta
        from zoneinfo import ZoneInfo

        start_local = datetime.fromtimestamp(default_start_epoch(TZ), ZoneInfo(TZ))
        sunday = start_local + timedelta(days=6)
        retrain_at = int(sunday.replace(hour=23, minute=0).timestamp())
        fired = sched.tick(retrain_at)
        assert fired == []
        assert sched.serving.get() is None
        assert store.current_model_version() is None

    def test_sunday_retrain_swaps_model(self, tmp_path):
        store, data = _seed_store(tmp_path, weeks=3, seed=1)
        sched = self._scheduler(store, [ListSink()])
        assert sched.serving.get() is None
        # First Sunday 23:00 local after the data start.
        from datetime import datetime, timedelta
        from zoneinfo import ZoneInfo

        start_local = datetime.fromtimestamp(default_start_epoch(TZ), ZoneInfo(TZ))
        sunday = start_local + timedelta(days=6)
        retrain_at = int(sunday.replace(hour=23, minute=0).timestamp())
        sched.tick(retrain_at)
        assert sched.serving.get() is not None
        assert store.current_model_version() is not None
