"""Append-only persistence for reports, readings, interactions, and models.

Storage is newline-delimited CSV in the canonical schemas, one directory per
stream. Records are never mutated after commit; a single writer lock funnels
all appends while readers work from immutable snapshots. The on-disk files
are pure append logs; the queryable in-memory streams stay time-ordered via
stable insertion, so late-arriving records (sensor backfill) are fine.

Display coordinates are not part of the canonical report schema (the analytic
store carries zip codes only). They live in a sidecar file under ``reports/``
keyed by report id, so the map API can serve skewed positions without raw
locations ever touching disk.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import os
import threading
from dataclasses import dataclass

import numpy as np

from .core import (
    INTERACTION_CSV_HEADER,
    REPORT_CSV_HEADER,
    SENSOR_CSV_HEADER,
    DomainError,
    InteractionEvent,
    SensorReading,
    SmellReport,
)

EARTH_RADIUS_M = 6371000.0

REPORTS_FILE = os.path.join("reports", "reports.csv")
GEO_FILE = os.path.join("reports", "display_geo.csv")
SENSORS_FILE = os.path.join("sensors", "sensors.csv")
INTERACTIONS_FILE = os.path.join("interactions", "interactions.csv")
MODELS_DIR = "models"


def skew_location(
    lat: float, lon: float, seed: int, radius_m: float = 500.0
) -> tuple[float, float]:
    """Deterministic privacy skew: a per-report offset drawn uniformly from a
    disk of the configured radius around the raw point.

    The same (lat, lon, seed) always yields the same output, and the haversine
    displacement never exceeds ``radius_m``.
    """
    if radius_m < 0:
        raise DomainError("skew radius must be >= 0")
    if radius_m == 0:
        return lat, lon
    key = np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(round(lat * 1e7) & 0xFFFFFFFF, round(lon * 1e7) & 0xFFFFFFFF),
    )
    rng = np.random.default_rng(key)
    u, v = rng.random(2)
    dist = radius_m * math.sqrt(u)  # uniform over the disk, not the circumference
    bearing = 2.0 * math.pi * v
    # Great-circle destination so displacement equals dist on the sphere.
    delta = dist / EARTH_RADIUS_M
    phi1 = math.radians(lat)
    lam1 = math.radians(lon)
    phi2 = math.asin(
        math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(bearing)
    )
    lam2 = lam1 + math.atan2(
        math.sin(bearing) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * math.sin(phi2),
    )
    return math.degrees(phi2), math.degrees(lam2)


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def _csv_row(fields: list[str]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(fields)
    return buf.getvalue()


def _report_row(r: SmellReport) -> str:
    return _csv_row(
        [str(r.observed_at), r.zip_code, str(r.rating), r.smell_description, r.symptoms, r.notes]
    )


def _sensor_row(s: SensorReading) -> str:
    value = "" if s.value is None else repr(float(s.value))
    return _csv_row([str(s.observed_at), s.station_id, s.channel, value])


def _interaction_row(e: InteractionEvent) -> str:
    return _csv_row([str(e.hit_at), str(e.data_at), e.anon_user_id, e.kind])


@dataclass(frozen=True)
class StoreSnapshot:
    """Immutable view of the committed streams, each in time order."""

    reports: tuple[SmellReport, ...]
    readings: tuple[SensorReading, ...]
    interactions: tuple[InteractionEvent, ...]


class _Stream:
    """A time-ordered record list with a parallel timestamp index.

    Insertion is a stable insort: records with equal timestamps keep arrival
    order, which reproduces the order a reload (stable sort of the append
    log) would give.
    """

    def __init__(self) -> None:
        self.records: list = []
        self.times: list[int] = []

    def insert(self, t: int, record) -> None:
        pos = bisect.bisect_right(self.times, t)
        self.times.insert(pos, t)
        self.records.insert(pos, record)

    def range(self, t0: int, t1: int) -> list:
        lo = bisect.bisect_left(self.times, t0)
        hi = bisect.bisect_left(self.times, t1)
        return self.records[lo:hi]


class Store:
    """Single-writer, multi-reader store over a data directory."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        self._lock = threading.Lock()
        self._reports = _Stream()
        self._readings = _Stream()
        self._interactions: list[InteractionEvent] = []
        self._arrivals = 0  # report ids are assigned by arrival order
        for sub in ("reports", "sensors", "interactions", MODELS_DIR):
            os.makedirs(os.path.join(data_dir, sub), exist_ok=True)
        self._load()

    # -- loading ---------------------------------------------------------

    def _load(self) -> None:
        geo: dict[str, tuple[float, float]] = {}
        geo_path = os.path.join(self.data_dir, GEO_FILE)
        if os.path.exists(geo_path):
            with open(geo_path, newline="") as fh:
                for row in csv.reader(fh):
                    if not row or row[0] == "report_id":
                        continue
                    geo[row[0]] = (float(row[1]), float(row[2]))
        rpath = os.path.join(self.data_dir, REPORTS_FILE)
        if os.path.exists(rpath):
            with open(rpath, newline="") as fh:
                for row in csv.reader(fh):
                    if not row or row[0] == "epoch":
                        continue
                    rid = f"r{self._arrivals:06d}"
                    self._arrivals += 1
                    lat, lon = geo.get(rid, (None, None))
                    rec = SmellReport(
                        report_id=rid,
                        observed_at=int(row[0]),
                        zip_code=row[1],
                        rating=int(row[2]),
                        smell_description=row[3],
                        symptoms=row[4],
                        notes=row[5],
                        display_latitude=lat,
                        display_longitude=lon,
                    )
                    self._reports.insert(rec.observed_at, rec)
        spath = os.path.join(self.data_dir, SENSORS_FILE)
        if os.path.exists(spath):
            with open(spath, newline="") as fh:
                for row in csv.reader(fh):
                    if not row or row[0] == "epoch":
                        continue
                    rec = SensorReading(
                        station_id=row[1],
                        channel=row[2],
                        observed_at=int(row[0]),
                        value=None if row[3] == "" else float(row[3]),
                    )
                    self._readings.insert(rec.observed_at, rec)
        ipath = os.path.join(self.data_dir, INTERACTIONS_FILE)
        if os.path.exists(ipath):
            with open(ipath, newline="") as fh:
                for row in csv.reader(fh):
                    if not row or row[0] == "epoch_hit":
                        continue
                    self._interactions.append(
                        InteractionEvent(
                            anon_user_id=row[2],
                            hit_at=int(row[0]),
                            data_at=int(row[1]),
                            kind=row[3],
                        )
                    )

    # -- appends ---------------------------------------------------------

    def _append_line(self, rel_path: str, header: str, line: str) -> None:
        path = os.path.join(self.data_dir, rel_path)
        write_header = not os.path.exists(path) or os.path.getsize(path) == 0
        with open(path, "a", newline="") as fh:
            if write_header:
                fh.write(header + "\n")
            fh.write(line)

    def append_report(self, report: SmellReport) -> str:
        """Commit a report; returns the assigned id."""
        with self._lock:
            rid = f"r{self._arrivals:06d}"
            self._arrivals += 1
            rec = SmellReport(
                report_id=rid,
                observed_at=report.observed_at,
                zip_code=report.zip_code,
                rating=report.rating,
                smell_description=report.smell_description,
                symptoms=report.symptoms,
                notes=report.notes,
                display_latitude=report.display_latitude,
                display_longitude=report.display_longitude,
            )
            self._append_line(REPORTS_FILE, REPORT_CSV_HEADER, _report_row(rec))
            if rec.display_latitude is not None and rec.display_longitude is not None:
                self._append_line(
                    GEO_FILE,
                    "report_id,display_latitude,display_longitude",
                    _csv_row([rid, repr(rec.display_latitude), repr(rec.display_longitude)]),
                )
            self._reports.insert(rec.observed_at, rec)
            return rid

    def append_reading(self, reading: SensorReading) -> None:
        with self._lock:
            self._append_line(SENSORS_FILE, SENSOR_CSV_HEADER, _sensor_row(reading))
            self._readings.insert(reading.observed_at, reading)

    def append_readings(self, readings: list[SensorReading]) -> int:
        """Batched commit: one file write for the whole batch."""
        if not readings:
            return 0
        with self._lock:
            path = os.path.join(self.data_dir, SENSORS_FILE)
            write_header = not os.path.exists(path) or os.path.getsize(path) == 0
            with open(path, "a", newline="") as fh:
                if write_header:
                    fh.write(SENSOR_CSV_HEADER + "\n")
                for r in readings:
                    fh.write(_sensor_row(r))
            for r in readings:
                self._readings.insert(r.observed_at, r)
        return len(readings)

    def append_interaction(self, event: InteractionEvent) -> None:
        with self._lock:
            self._append_line(INTERACTIONS_FILE, INTERACTION_CSV_HEADER, _interaction_row(event))
            self._interactions.append(event)

    # -- queries ---------------------------------------------------------

    def snapshot(self) -> StoreSnapshot:
        with self._lock:
            return StoreSnapshot(
                reports=tuple(self._reports.records),
                readings=tuple(self._readings.records),
                interactions=tuple(self._interactions),
            )

    def query_reports(self, t0: int, t1: int, zip_code: str | None = None) -> list[SmellReport]:
        """Reports with observed_at in [t0, t1), in time order."""
        with self._lock:
            out = self._reports.range(t0, t1)
        if zip_code is not None:
            out = [r for r in out if r.zip_code == zip_code]
        return list(out)

    def query_readings(self, t0: int, t1: int) -> list[SensorReading]:
        with self._lock:
            return list(self._readings.range(t0, t1))

    def export_reports_csv(self) -> bytes:
        """The canonical report stream as bytes, in time order; byte-stable
        for a fixed store (export, re-import, export is a fixed point)."""
        with self._lock:
            reports = list(self._reports.records)
        lines = [REPORT_CSV_HEADER + "\n"]
        lines.extend(_report_row(r) for r in reports)
        return "".join(lines).encode("utf-8")

    # -- models ----------------------------------------------------------

    def model_dir(self) -> str:
        return os.path.join(self.data_dir, MODELS_DIR)

    def save_model(self, version: str, blob: bytes, filename: str = "model.json") -> str:
        """Write a model blob under models/<version>/ and atomically repoint
        the CURRENT marker at it."""
        self.save_model_files(version, {filename: blob})
        return os.path.join(self.model_dir(), version, filename)

    def save_model_files(self, version: str, files: dict[str, bytes]) -> str:
        """Write a complete model version directory, then atomically repoint
        CURRENT; readers resolving through CURRENT never see a partial set."""
        vdir = os.path.join(self.model_dir(), version)
        os.makedirs(vdir, exist_ok=True)
        for filename, blob in files.items():
            tmp = os.path.join(vdir, filename + ".tmp")
            with open(tmp, "wb") as fh:
                fh.write(blob)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, os.path.join(vdir, filename))
        marker_tmp = os.path.join(self.model_dir(), "CURRENT.tmp")
        with open(marker_tmp, "w") as fh:
            fh.write(version + "\n")
        os.replace(marker_tmp, os.path.join(self.model_dir(), "CURRENT"))
        return vdir

    def current_model_version(self) -> str | None:
        marker = os.path.join(self.model_dir(), "CURRENT")
        if not os.path.exists(marker):
            return None
        with open(marker) as fh:
            return fh.read().strip() or None

    def load_model_blob(self, version: str | None = None, filename: str = "model.json") -> bytes:
        version = version or self.current_model_version()
        if version is None:
            raise FileNotFoundError("no model versions recorded")
        with open(os.path.join(self.model_dir(), version, filename), "rb") as fh:
            return fh.read()
