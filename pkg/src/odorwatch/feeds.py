"""Sensor feed ingestion and the outbound agency sink.

Feeds arrive either as CSV files (the published-dataset path) or over HTTP
from an hourly source. Rows are normalized to hour boundaries and canonical
channels; malformed rows are skipped and counted, unknown channels dropped
with a logged warning.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field

from .core import CHANNELS, HOUR, SensorReading

log = logging.getLogger(__name__)


@dataclass
class IngestStats:
    accepted: int = 0
    malformed: int = 0
    dropped_channels: dict[str, int] = field(default_factory=dict)


def parse_sensor_csv(text: str) -> tuple[list[SensorReading], IngestStats]:
    """Parse canonical `epoch,station_id,channel,value` rows.

    Timestamps are floored to the hour; wind directions are wrapped into
    [0, 360). An empty value field is an explicit missing measurement.
    """
    stats = IngestStats()
    readings: list[SensorReading] = []
    for row in csv.reader(io.StringIO(text)):
        if not row or row[0] == "epoch":
            continue
        try:
            if len(row) != 4:
                raise ValueError("wrong column count")
            epoch = int(row[0])
            station, channel = row[1], row[2]
            value = None if row[3] == "" else float(row[3])
        except ValueError:
            stats.malformed += 1
            continue
        if channel not in CHANNELS:
            stats.dropped_channels[channel] = stats.dropped_channels.get(channel, 0) + 1
            continue
        if channel == "WIND_DIR_DEG" and value is not None:
            value = value % 360.0
        try:
            readings.append(
                SensorReading(
                    station_id=station,
                    channel=channel,
                    observed_at=epoch - epoch % HOUR,
                    value=value,
                )
            )
            stats.accepted += 1
        except ValueError:
            stats.malformed += 1
    for channel, count in stats.dropped_channels.items():
        log.warning("dropped %d readings with unknown channel %r", count, channel)
    return readings, stats


def pull_sensor_feed(
    source: str,
    retries: int = 3,
    backoff_s: float = 1.0,
    session=None,
) -> tuple[list[SensorReading], IngestStats]:
    """Fetch one batch of readings from a CSV file path or an HTTP source.

    Network failures retry with exponential backoff before giving up.
    """
    if source.startswith("http://") or source.startswith("https://"):
        import requests

        session = session or requests.Session()
        last_err: Exception | None = None
        for attempt in range(retries):
            try:
                resp = session.get(source, timeout=30)
                resp.raise_for_status()
                return parse_sensor_csv(resp.text)
            except Exception as err:  # noqa: BLE001 - retry any transport failure
                last_err = err
                if attempt < retries - 1:
                    time.sleep(backoff_s * (2**attempt))
        raise ConnectionError(f"sensor feed unreachable after {retries} attempts") from last_err
    with open(source) as fh:
        return parse_sensor_csv(fh.read())


class AgencySink:
    """Outbound channel forwarding every report to the health agency."""

    def submit(self, payload: dict) -> None:
        raise NotImplementedError


class FileSpoolSink(AgencySink):
    """Writes one JSON line per forwarded report into a spool directory."""

    def __init__(self, spool_dir: str):
        self.spool_dir = spool_dir
        os.makedirs(spool_dir, exist_ok=True)
        self.path = os.path.join(spool_dir, "agency_spool.jsonl")

    def submit(self, payload: dict) -> None:
        with open(self.path, "a") as fh:
            fh.write(json.dumps(payload, sort_keys=True) + "\n")


class HttpAgencySink(AgencySink):
    def __init__(self, url: str, session=None):
        import requests

        self.url = url
        self.session = session or requests.Session()

    def submit(self, payload: dict) -> None:
        resp = self.session.post(self.url, json=payload, timeout=10)
        resp.raise_for_status()


class RetryingSink(AgencySink):
    """Wraps a sink with a retry queue: a failing agency submission never
    fails the report submission; queued payloads are retried later."""

    def __init__(self, inner: AgencySink):
        self.inner = inner
        self.queue: list[dict] = []

    def submit(self, payload: dict) -> None:
        self.flush()
        try:
            self.inner.submit(payload)
        except Exception:
            log.exception("agency sink failed; queueing for retry")
            self.queue.append(payload)

    def flush(self) -> int:
        """Retry queued payloads; returns how many cleared."""
        cleared = 0
        still: list[dict] = []
        for payload in self.queue:
            try:
                self.inner.submit(payload)
                cleared += 1
            except Exception:
                still.append(payload)
        self.queue = still
        return cleared
