from datetime import datetime
from zoneinfo import ZoneInfo

import pytest
from hypothesis import given, strategies as st

from odorwatch.core import (
    DomainError,
    Region,
    RegionTable,
    SensorReading,
    SmellReport,
    default_region_table,
    hour_floor,
)


def test_hour_floor_exact_boundary():
    assert hour_floor(3600).hour_start == 3600


def test_hour_floor_within_hour():
    assert hour_floor(3725).hour_start == 3600


def test_hour_floor_local_calendar_fields():
    # Computed with the standard library calendar as the oracle.
    tz = "America/New_York"
    t = int(datetime(2017, 12, 3, 10, 30, tzinfo=ZoneInfo(tz)).timestamp())
    hi = hour_floor(t, tz)
    assert hi.local_hour_of_day == 10
    assert hi.local_day_of_month == 3
    assert hi.local_day_of_week == 6  # a Sunday


@given(st.integers(min_value=0, max_value=2**34))
def test_hour_floor_idempotent(t):
    first = hour_floor(t)
    again = hour_floor(first.hour_start)
    assert again == first


def test_hour_floor_rejects_negative():
    with pytest.raises(DomainError):
        hour_floor(-1)


@pytest.mark.parametrize("rating", [0, 6, -1])
def test_report_rating_range(rating):
    with pytest.raises(DomainError):
        SmellReport(report_id="x", observed_at=0, zip_code="15201", rating=rating)


def test_report_zip_must_be_five_digits():
    with pytest.raises(DomainError):
        SmellReport(report_id="x", observed_at=0, zip_code="1520", rating=3)


def test_wind_direction_domain():
    SensorReading(station_id="a", channel="WIND_DIR_DEG", observed_at=0, value=359.9)
    with pytest.raises(DomainError):
        SensorReading(station_id="a", channel="WIND_DIR_DEG", observed_at=0, value=360.0)


def test_missing_sensor_value_is_allowed():
    r = SensorReading(station_id="a", channel="H2S", observed_at=0, value=None)
    assert r.value is None


def test_unknown_channel_rejected():
    with pytest.raises(DomainError):
        SensorReading(station_id="a", channel="CH4", observed_at=0, value=1.0)


class TestRegionTable:
    def test_point_in_box(self):
        table = default_region_table()
        region = table.regions[0]
        lat = (region.lat_min + region.lat_max) / 2
        lon = (region.lon_min + region.lon_max) / 2
        assert table.zip_for(lat, lon) == region.zip_code

    def test_nearest_with_lowest_zip_tiebreak(self):
        table = RegionTable(
            regions=(
                Region("22222", 0.0, 1.0, 0.0, 1.0),
                Region("11111", 0.0, 1.0, 2.0, 3.0),
            ),
            metro_lat_min=-5, metro_lat_max=5, metro_lon_min=-5, metro_lon_max=5,
        )
        # Equidistant from both region centers.
        assert table.zip_for(0.5, 1.5) == "11111"

    def test_outside_metro_rejected(self):
        table = default_region_table()
        with pytest.raises(DomainError):
            table.zip_for(0.0, 0.0)
