"""HTTP+JSON service: report submission, data query, CSV export, interaction
logging, and static hosting for the web console.

Reports are anonymous. The server assigns the authoritative timestamp at
receipt, derives the zip region from the raw coordinates, skews the location
for display, and forwards every report to the agency sink regardless of
rating. Raw coordinates and contact flags never reach the store or any
response.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .core import (
    DATA_VIEW_KINDS,
    INTERACTION_KINDS,
    DomainError,
    InteractionEvent,
    RegionTable,
    SmellReport,
)
from .feeds import AgencySink, RetryingSink
from .store import Store, skew_location

log = logging.getLogger(__name__)

TEXT_FIELDS = ("smell_description", "symptoms", "notes")


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class Api:
    """Request handling logic, kept separate from the HTTP plumbing."""

    def __init__(
        self,
        store: Store,
        regions: RegionTable,
        agency_sink: AgencySink | None = None,
        skew_seed: int = 0,
        skew_radius_m: float = 500.0,
        text_cap: int = 1024,
        clock=time.time,
    ):
        self.store = store
        self.regions = regions
        self.agency = RetryingSink(agency_sink) if agency_sink else None
        self.skew_seed = skew_seed
        self.skew_radius_m = skew_radius_m
        self.text_cap = text_cap
        self.clock = clock

    def submit_report(self, payload: dict) -> dict:
        rating = payload.get("rating")
        if not isinstance(rating, int) or isinstance(rating, bool) or not 1 <= rating <= 5:
            raise ApiError(400, "rating must be an integer 1..5")
        try:
            lat = float(payload["latitude"])
            lon = float(payload["longitude"])
        except (KeyError, TypeError, ValueError):
            raise ApiError(400, "latitude and longitude are required numbers")
        texts = {}
        for field in TEXT_FIELDS:
            value = payload.get(field) or ""
            if not isinstance(value, str):
                raise ApiError(400, f"{field} must be a string")
            if len(value) > self.text_cap:
                raise ApiError(400, f"{field} exceeds {self.text_cap} characters")
            texts[field] = value
        try:
            zip_code = self.regions.zip_for(lat, lon)
        except DomainError as err:
            raise ApiError(400, str(err))
        observed_at = int(self.clock())  # server receipt time is authoritative
        client_time = payload.get("client_time")
        notes = texts["notes"]
        if client_time is not None:
            notes = f"{notes} [client_time={int(client_time)}]".strip()
        display_lat, display_lon = skew_location(lat, lon, self.skew_seed, self.skew_radius_m)
        report = SmellReport(
            report_id="pending",
            observed_at=observed_at,
            zip_code=zip_code,
            rating=rating,
            smell_description=texts["smell_description"],
            symptoms=texts["symptoms"],
            notes=notes,
            display_latitude=display_lat,
            display_longitude=display_lon,
        )
        try:
            rid = self.store.append_report(report)
        except OSError as err:
            raise ApiError(503, f"store unavailable: {err}")
        if self.agency is not None:
            # All reports go to the agency regardless of rating; sink failure
            # must not fail the submission.
            self.agency.submit(
                {
                    "report_id": rid,
                    "observed_at": observed_at,
                    "zip_code": zip_code,
                    "rating": rating,
                    "smell_description": texts["smell_description"],
                    "symptoms": texts["symptoms"],
                    "notes": notes,
                }
            )
        return {"report_id": rid}

    @staticmethod
    def _range(params: dict) -> tuple[int, int]:
        try:
            t0 = int(params.get("from", ["0"])[0])
            t1 = int(params.get("to", [str(2**62)])[0])
        except ValueError:
            raise ApiError(400, "from/to must be epoch integers")
        if t0 > t1:
            raise ApiError(400, "from must be <= to")
        return t0, t1

    def list_reports(self, params: dict) -> list[dict]:
        t0, t1 = self._range(params)
        zip_code = params.get("zip", [None])[0]
        out = []
        for r in self.store.query_reports(t0, t1, zip_code):
            out.append(
                {
                    "report_id": r.report_id,
                    "observed_at": r.observed_at,
                    "zip_code": r.zip_code,
                    "rating": r.rating,
                    "smell_description": r.smell_description,
                    "symptoms": r.symptoms,
                    "notes": r.notes,
                    # display coordinates only; raw locations are never stored
                    "latitude": r.display_latitude,
                    "longitude": r.display_longitude,
                }
            )
        return out

    def list_sensors(self, params: dict) -> list[dict]:
        t0, t1 = self._range(params)
        return [
            {
                "station_id": s.station_id,
                "channel": s.channel,
                "observed_at": s.observed_at,
                "value": s.value,
            }
            for s in self.store.query_readings(t0, t1)
        ]

    def log_interaction(self, payload: dict) -> dict:
        kind = payload.get("kind")
        if kind not in INTERACTION_KINDS:
            raise ApiError(400, f"kind must be one of {INTERACTION_KINDS}")
        data_at = payload.get("data_at")
        if kind in DATA_VIEW_KINDS and not isinstance(data_at, int):
            raise ApiError(400, "data_at required for data-viewing interactions")
        hit_at = payload.get("hit_at")
        event = InteractionEvent(
            anon_user_id=str(payload.get("anon_user_id") or "anonymous"),
            hit_at=int(hit_at) if hit_at is not None else int(self.clock()),
            data_at=int(data_at) if data_at is not None else 0,
            kind=kind,
        )
        self.store.append_interaction(event)
        return {"ok": True}

    def export_csv(self) -> bytes:
        return self.store.export_reports_csv()


def _make_handler(api: Api, static_dir: str | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # route through logging, not stderr
            log.debug("http: " + fmt, *args)

        def _send_json(self, status: int, payload) -> None:
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b"{}"
            try:
                payload = json.loads(raw.decode() or "{}")
            except json.JSONDecodeError:
                raise ApiError(400, "request body must be JSON")
            if not isinstance(payload, dict):
                raise ApiError(400, "request body must be a JSON object")
            return payload

        def _serve_static(self, path: str) -> None:
            if static_dir is None:
                self._send_json(404, {"error": "not found"})
                return
            rel = path.lstrip("/") or "index.html"
            full = os.path.realpath(os.path.join(static_dir, rel))
            if not full.startswith(os.path.realpath(static_dir)) or not os.path.isfile(full):
                self._send_json(404, {"error": "not found"})
                return
            ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
            with open(full, "rb") as fh:
                body = fh.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            parsed = urlparse(self.path)
            params = parse_qs(parsed.query)
            try:
                if parsed.path == "/reports":
                    self._send_json(200, api.list_reports(params))
                elif parsed.path == "/sensors":
                    self._send_json(200, api.list_sensors(params))
                elif parsed.path == "/export.csv":
                    body = api.export_csv()
                    self.send_response(200)
                    self.send_header("Content-Type", "text/csv")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                elif parsed.path == "/healthz":
                    self._send_json(200, {"ok": True})
                else:
                    self._serve_static(parsed.path)
            except ApiError as err:
                self._send_json(err.status, {"error": err.message})
            except Exception:
                log.exception("GET %s failed", self.path)
                self._send_json(500, {"error": "internal error"})

        def do_POST(self):
            parsed = urlparse(self.path)
            try:
                payload = self._read_json()
                if parsed.path == "/reports":
                    self._send_json(200, api.submit_report(payload))
                elif parsed.path == "/interactions":
                    self._send_json(200, api.log_interaction(payload))
                else:
                    self._send_json(404, {"error": "not found"})
            except ApiError as err:
                self._send_json(err.status, {"error": err.message})
            except Exception:
                log.exception("POST %s failed", self.path)
                self._send_json(500, {"error": "internal error"})

    return Handler


class ApiServer:
    """Threaded HTTP server wrapper; all mutation funnels through the store's
    single-writer lock, so concurrent handlers are safe."""

    def __init__(self, api: Api, listen: str = "127.0.0.1:0", static_dir: str | None = None):
        host, _, port = listen.partition(":")
        self.httpd = ThreadingHTTPServer(
            (host or "127.0.0.1", int(port or 0)), _make_handler(api, static_dir)
        )
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)
