import numpy as np
import pytest

from odorwatch.core import HOUR, DomainError, SensorReading, SmellReport, hour_floor
from odorwatch.dataset import (
    ColumnSpec,
    RawMatrix,
    SensorFrame,
    align,
    assemble_X,
    build_X,
    build_frames,
    build_y,
    resample_hour,
    standardize,
)

TZ = "America/New_York"


def _reading(t, value, station="a", channel="H2S"):
    return SensorReading(station_id=station, channel=channel, observed_at=t, value=value)


class TestResample:
    def test_arithmetic_mean(self):
        frame = resample_hour([_reading(100, 2.0), _reading(200, 4.0)], 3600)
        assert frame.values[("a", "H2S")] == 3.0

    def test_no_values_is_missing(self):
        frame = resample_hour([], 3600)
        assert ("a", "H2S") not in frame.values

    def test_wind_decomposition(self):
        frame = resample_hour([_reading(0, 90.0, channel="WIND_DIR_DEG")], 3600)
        assert frame.values[("a", "WIND_COS")] == pytest.approx(0.0, abs=1e-12)
        assert frame.values[("a", "WIND_SIN")] == pytest.approx(1.0)

    def test_wind_identity_before_averaging(self):
        # cos^2 + sin^2 = 1 for every decomposition prior to averaging.
        for deg in np.linspace(0, 359.9, 37):
            frame = resample_hour([_reading(0, float(deg), channel="WIND_DIR_DEG")], 3600)
            c = frame.values[("a", "WIND_COS")]
            s = frame.values[("a", "WIND_SIN")]
            assert c * c + s * s == pytest.approx(1.0, abs=1e-12)

    def test_circular_mean_crosses_seam(self):
        # 350 deg and 10 deg average to a northerly direction, not 180.
        frame = resample_hour(
            [_reading(0, 350.0, channel="WIND_DIR_DEG"), _reading(1, 10.0, channel="WIND_DIR_DEG")],
            3600,
        )
        assert frame.values[("a", "WIND_COS")] > 0.9
        assert frame.values[("a", "WIND_SIN")] == pytest.approx(0.0, abs=1e-12)

    def test_window_is_prior_hour(self):
        readings = [_reading(3599, 5.0), _reading(3600, 100.0)]
        frame = resample_hour(readings, 3600)
        assert frame.values[("a", "H2S")] == 5.0

    def test_rejects_unaligned_hour(self):
        with pytest.raises(DomainError):
            resample_hour([], 3601)


def _frames(n_hours, stations=("a",), channels=("H2S",), value=lambda i, s, c: float(i)):
    frames = []
    for i in range(n_hours):
        values = {(s, c): value(i, s, c) for s in stations for c in channels}
        frames.append(SensorFrame(hour_start=(i + 1) * HOUR, values=values))
    return frames


class TestBuildX:
    def test_195_columns_from_64_base(self):
        # 8 stations x 8 non-wind channels = 64 base; paper-match: 64*3 + 3.
        stations = [f"s{i}" for i in range(8)]
        channels = ["PM", "SO2", "CO", "NOX", "O3", "H2S", "WIND_SPEED", "WIND_DIR_STD"]
        frames = _frames(10, stations, channels, value=lambda i, s, c: float(i + hash((s, c)) % 7))
        fm = build_X(frames, lags=2, calendar=True, tz=TZ)
        assert fm.values.shape[1] == 195

    def test_constant_column_standardizes_to_zero(self):
        frames = _frames(20, value=lambda i, s, c: 3.14)
        fm = build_X(frames, lags=0, calendar=False, tz=TZ)
        assert np.all(fm.values[:, 0] == 0.0)
        assert fm.degenerate[0]

    def test_random_matrix_zero_mean_unit_variance(self):
        rng = np.random.default_rng(0)
        values = rng.normal(3, 7, size=(100, 5))
        raw = RawMatrix(
            hours=np.arange(100, dtype=np.int64) * HOUR,
            values=values,
            columns=tuple(ColumnSpec(kind="sensor", name=f"c{j}") for j in range(5)),
        )
        fm = standardize(raw)
        assert np.all(np.abs(fm.values.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(fm.values.var(axis=0) - 1.0) < 1e-6)

    def test_imputed_cells_become_exactly_zero(self):
        frames = _frames(30, value=lambda i, s, c: float(i % 13))
        for i in (5, 17):
            frames[i] = SensorFrame(hour_start=frames[i].hour_start, values={})
        fm = build_X(frames, lags=0, calendar=False, tz=TZ)
        assert fm.values[5, 0] == 0.0
        assert fm.values[17, 0] == 0.0

    def test_lagged_columns_equal_shifted_base(self):
        # Brute-force shift equivalence on a 50-hour toy.
        rng = np.random.default_rng(1)
        vals = rng.normal(size=50)
        frames = _frames(50, value=lambda i, s, c: float(vals[i]))
        raw = assemble_X(frames, lags=2, calendar=False, tz=TZ)
        base = raw.values[:, 0]
        lag1 = raw.values[:, 1]
        lag2 = raw.values[:, 2]
        assert np.isnan(lag1[0]) and np.isnan(lag2[0]) and np.isnan(lag2[1])
        np.testing.assert_allclose(lag1[1:], base[:-1])
        np.testing.assert_allclose(lag2[2:], base[:-2])

    def test_requires_contiguous_frames(self):
        frames = _frames(5)
        del frames[2]
        with pytest.raises(DomainError):
            assemble_X(frames, lags=1, tz=TZ)

    def test_train_only_statistics_apply_to_test(self):
        rng = np.random.default_rng(2)
        values = rng.normal(10, 2, size=(40, 3))
        values[35, 1] = np.nan  # a missing cell in the "test" block
        raw = RawMatrix(
            hours=np.arange(40, dtype=np.int64) * HOUR,
            values=values,
            columns=tuple(ColumnSpec(kind="sensor", name=f"c{j}") for j in range(3)),
        )
        fm = standardize(raw, fit_rows=np.arange(30))
        # Train block is standardized; the test block reuses train statistics,
        # so its missing cell imputes to exactly 0.
        assert np.all(np.abs(fm.values[:30].mean(axis=0)) < 1e-9)
        assert fm.values[35, 1] == 0.0


def _report(t, rating=3, zip_code="15201"):
    return SmellReport(
        report_id="x", observed_at=t, zip_code=zip_code, rating=rating
    )


class TestBuildY:
    def test_no_reports(self):
        labels = build_y([], region_set={"15201"}, hours=[0, HOUR], tz=TZ)
        assert all(lab.score == 0 and not lab.positive for lab in labels)

    def test_fourteen_rating_three_reports_hit_threshold(self):
        # 14 * 3 = 42 >= 40.
        reports = [_report(100 + i, rating=3) for i in range(14)]
        labels = build_y(reports, region_set={"15201"}, hours=[0], tz=TZ)
        assert labels[0].score == 42
        assert labels[0].positive

    def test_region_filter(self):
        reports = [_report(100 + i, rating=5, zip_code="99999") for i in range(10)]
        labels = build_y(reports, region_set={"15201"}, hours=[0], tz=TZ)
        assert labels[0].score == 0

    def test_rating_floor_strictly_above_two(self):
        reports = [_report(10, rating=2) for _ in range(40)]
        labels = build_y(reports, region_set={"15201"}, hours=[0], tz=TZ)
        assert labels[0].score == 0

    def test_window_is_future_eight_hours(self):
        inside = _report(8 * HOUR - 1, rating=3)
        outside = _report(8 * HOUR, rating=3)
        labels = build_y([inside, outside], region_set={"15201"}, hours=[0], tz=TZ)
        assert labels[0].score == 3

    def test_threshold_boundary_inclusive(self):
        reports = [_report(5, rating=4) for _ in range(10)]
        labels = build_y(reports, region_set={"15201"}, hours=[0], threshold=40, tz=TZ)
        assert labels[0].score == 40
        assert labels[0].positive

    def test_adding_high_rating_report_never_decreases_score(self):
        rng = np.random.default_rng(3)
        reports = [
            _report(int(rng.integers(0, 20 * HOUR)), rating=int(rng.integers(1, 6)))
            for _ in range(200)
        ]
        hours = [i * HOUR for i in range(12)]
        before = [lab.score for lab in build_y(reports, {"15201"}, hours, tz=TZ)]
        reports.append(_report(int(3.5 * HOUR), rating=5))
        after = [lab.score for lab in build_y(reports, {"15201"}, hours, tz=TZ)]
        assert all(a >= b for a, b in zip(after, before))
        assert after[3] == before[3] + 5  # the window [3h, 11h) gains the report


class TestAlign:
    def test_disjoint_ranges_error(self):
        frames = _frames(5)
        raw = assemble_X(frames, lags=0, calendar=False, tz=TZ)
        labels = build_y([], {"15201"}, hours=[100 * HOUR], tz=TZ)
        with pytest.raises(DomainError):
            align(raw, labels, tz=TZ)

    def test_identical_ranges_keep_all_rows(self):
        frames = _frames(100)
        raw = assemble_X(frames, lags=0, calendar=False, tz=TZ)
        labels = build_y([], {"15201"}, hours=raw.hours, tz=TZ)
        ds = align(raw, labels, tz=TZ)
        assert len(ds) == 100
        assert ds.positive_rate == 0.0

    def test_hour_of_day_matches_hours(self):
        frames = _frames(30)
        raw = assemble_X(frames, lags=0, calendar=False, tz=TZ)
        labels = build_y([], {"15201"}, hours=raw.hours, tz=TZ)
        ds = align(raw, labels, tz=TZ)
        for h, hod in zip(ds.hours, ds.hour_of_day):
            assert hour_floor(int(h), TZ).local_hour_of_day == hod


class TestBuildFrames:
    def test_reading_feeds_next_hour_frame(self):
        readings = [_reading(3600, 7.0), _reading(3725, 9.0)]
        frames = build_frames(readings, 7200, 7200 + HOUR)
        assert frames[0].values[("a", "H2S")] == 8.0

    def test_counting(self):
        rng = np.random.default_rng(4)
        readings = [
            _reading(int(rng.integers(0, 50 * HOUR)), float(rng.normal()))
            for _ in range(500)
        ]
        frames = build_frames(readings, HOUR, 51 * HOUR)
        assert len(frames) == 50
