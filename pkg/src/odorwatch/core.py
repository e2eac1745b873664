"""Shared domain types, time conventions, and the station/channel vocabulary."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from zoneinfo import ZoneInfo

DEFAULT_TIMEZONE = "America/New_York"

HOUR = 3600
DAY = 24 * HOUR
WEEK = 7 * DAY

#: Sensor channels as ingested. WIND_DIR_DEG is replaced by the derived
#: WIND_COS / WIND_SIN pair during hourly resampling.
CHANNELS = (
    "PM",
    "SO2",
    "CO",
    "NOX",
    "O3",
    "H2S",
    "WIND_DIR_DEG",
    "WIND_SPEED",
    "WIND_DIR_STD",
)

#: Channels appearing in resampled frames (wind direction decomposed).
DERIVED_CHANNELS = (
    "PM",
    "SO2",
    "CO",
    "NOX",
    "O3",
    "H2S",
    "WIND_COS",
    "WIND_SIN",
    "WIND_SPEED",
    "WIND_DIR_STD",
)

INTERACTION_KINDS = ("MAP_CLICK", "PLAYBACK", "TIMELINE_SELECT", "REPORT_SUBMIT", "OTHER")

#: Interaction kinds that view archived data (carry a meaningful data_at).
DATA_VIEW_KINDS = ("MAP_CLICK", "PLAYBACK", "TIMELINE_SELECT")

#: Explicit missing-value sentinel for sensor readings. Distinct from zero:
#: an absent measurement must never be confused with a measured 0.0.
MISSING = None


class DomainError(ValueError):
    """A record or argument violates a domain invariant."""


@dataclass(frozen=True)
class SmellReport:
    """One citizen odor observation, as persisted in the analytic store.

    Raw submission coordinates are ingest-only: they are consumed to derive
    ``zip_code`` and the privacy-skewed display location, and are never part
    of this record. Text fields are newline-normalized (CR and CRLF become
    LF) so records round-trip bit-exactly through the CSV store.
    """

    report_id: str
    observed_at: int
    zip_code: str
    rating: int
    smell_description: str = ""
    symptoms: str = ""
    notes: str = ""
    display_latitude: float | None = None
    display_longitude: float | None = None

    def __post_init__(self) -> None:
        if self.rating not in (1, 2, 3, 4, 5):
            raise DomainError(f"rating must be 1..5, got {self.rating!r}")
        if not (len(self.zip_code) == 5 and self.zip_code.isdigit()):
            raise DomainError(f"zip_code must be 5 digits, got {self.zip_code!r}")
        if self.observed_at < 0:
            raise DomainError("observed_at must be >= 0")
        for field in ("smell_description", "symptoms", "notes"):
            value = getattr(self, field)
            cleaned = value.replace("\r\n", "\n").replace("\r", "\n")
            cleaned = "".join(c for c in cleaned if c in "\n\t" or ord(c) >= 32)
            if cleaned != value:
                object.__setattr__(self, field, cleaned)


@dataclass(frozen=True)
class SensorReading:
    """One (station, channel) measurement at hour granularity."""

    station_id: str
    channel: str
    observed_at: int
    value: float | None

    def __post_init__(self) -> None:
        if self.channel not in CHANNELS:
            raise DomainError(f"unknown channel {self.channel!r}")
        if self.channel == "WIND_DIR_DEG" and self.value is not None:
            if not (0.0 <= self.value < 360.0):
                raise DomainError(f"wind direction out of [0, 360): {self.value}")
        if self.value is not None and not math.isfinite(self.value):
            raise DomainError("sensor value must be finite or MISSING")


@dataclass(frozen=True)
class HourIndex:
    """An hour boundary plus its calendar coordinates in the local timezone."""

    hour_start: int
    local_hour_of_day: int
    local_day_of_week: int
    local_day_of_month: int


@dataclass(frozen=True)
class InteractionEvent:
    """One logged UI interaction.

    ``hit_at`` is when the user acted; ``data_at`` is the timestamp of the
    data being viewed. ``hit_at >= data_at`` is not required: users may view
    future-dated predictions.
    """

    anon_user_id: str
    hit_at: int
    data_at: int
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in INTERACTION_KINDS:
            raise DomainError(f"unknown interaction kind {self.kind!r}")


@dataclass(frozen=True)
class Notification:
    kind: str  # POSTHOC | PREDICTIVE
    message: str
    issued_at: int
    dedupe_key: str


def hour_floor(t: int | float, tz: str = DEFAULT_TIMEZONE) -> HourIndex:
    """Floor an epoch timestamp to its hour and derive local calendar fields."""
    if t < 0:
        raise DomainError("timestamp must be >= 0")
    hour_start = int(t) - int(t) % HOUR
    local = datetime.fromtimestamp(hour_start, ZoneInfo(tz))
    return HourIndex(
        hour_start=hour_start,
        local_hour_of_day=local.hour,
        local_day_of_week=local.weekday(),
        local_day_of_month=local.day,
    )


def hour_range(t0: int, t1: int) -> list[int]:
    """Hour starts covering [t0, t1), both floored to hour boundaries."""
    start = t0 - t0 % HOUR
    return list(range(start, t1, HOUR))


@dataclass(frozen=True)
class Region:
    """A zip-code region approximated by a lat/lon bounding box."""

    zip_code: str
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    def center(self) -> tuple[float, float]:
        return (self.lat_min + self.lat_max) / 2.0, (self.lon_min + self.lon_max) / 2.0


@dataclass(frozen=True)
class RegionTable:
    """Configured zip regions plus the metro bounding box for ingest validation."""

    regions: tuple[Region, ...]
    metro_lat_min: float
    metro_lat_max: float
    metro_lon_min: float
    metro_lon_max: float

    def in_metro(self, lat: float, lon: float) -> bool:
        return (
            self.metro_lat_min <= lat <= self.metro_lat_max
            and self.metro_lon_min <= lon <= self.metro_lon_max
        )

    def zip_for(self, lat: float, lon: float) -> str:
        """Assign the zip region for a raw coordinate.

        Point-in-box wins; otherwise nearest region center, ties broken by
        lowest zip code. Raises for coordinates outside the metro box.
        """
        if not self.in_metro(lat, lon):
            raise DomainError(f"coordinates ({lat}, {lon}) outside configured metro area")
        hits = [r for r in self.regions if r.contains(lat, lon)]
        if hits:
            return min(r.zip_code for r in hits)
        best = min(
            self.regions,
            key=lambda r: (
                (r.center()[0] - lat) ** 2 + (r.center()[1] - lon) ** 2,
                r.zip_code,
            ),
        )
        return best.zip_code

    def zip_codes(self) -> list[str]:
        return sorted(r.zip_code for r in self.regions)


def default_region_table() -> RegionTable:
    """A small Pittsburgh-like default grid; real deployments supply their own."""
    base_lat, base_lon = 40.35, -80.05
    step = 0.05
    zips = ["15201", "15206", "15213", "15217", "15218", "15221"]
    regions = []
    for i, z in enumerate(zips):
        row, col = divmod(i, 3)
        regions.append(
            Region(
                zip_code=z,
                lat_min=base_lat + row * step,
                lat_max=base_lat + (row + 1) * step,
                lon_min=base_lon + col * step,
                lon_max=base_lon + (col + 1) * step,
            )
        )
    return RegionTable(
        regions=tuple(regions),
        metro_lat_min=base_lat - 0.3,
        metro_lat_max=base_lat + 0.4,
        metro_lon_min=base_lon - 0.3,
        metro_lon_max=base_lon + 0.45,
    )


# Canonical CSV schemas (bit-exact column order).
REPORT_CSV_HEADER = "epoch,zipcode,rating,smell_description,symptoms,notes"
SENSOR_CSV_HEADER = "epoch,station_id,channel,value"
INTERACTION_CSV_HEADER = "epoch_hit,epoch_data,anon_user_id,kind"
