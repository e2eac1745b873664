"""Synthetic smell-event benchmark data.

Two stations of hourly signals: "alpha" carries the planted mechanism, "beta"
is pure nuisance. An hour is a clean event when alpha's wind-cos is positive
AND alpha's H2S exceeds a threshold chosen to hit the target positive rate.
H2S carries a pre-dawn diurnal bump so events concentrate in the morning,
matching how the evaluation windows are laid out. Label noise jitters event
edges (trim or extend by one hour) until roughly the requested fraction of
positive hours disagrees with the clean rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from zoneinfo import ZoneInfo

import numpy as np

from .core import DEFAULT_TIMEZONE, HOUR, SensorReading, SmellReport, hour_floor
from .dataset import Dataset, EventLabel, SensorFrame, align, assemble_X

PLANTED_WIND = "alpha:WIND_COS:lag0"
PLANTED_H2S = "alpha:H2S:lag0"
PLANTED_INTERACTION = f"{PLANTED_H2S} * {PLANTED_WIND}"


def _ar1(rng: np.random.Generator, n: int, rho: float, sigma: float) -> np.ndarray:
    out = np.empty(n)
    out[0] = rng.normal(0, sigma / np.sqrt(1 - rho * rho))
    noise = rng.normal(0, sigma, n)
    for i in range(1, n):
        out[i] = rho * out[i - 1] + noise[i]
    return out


def default_start_epoch(tz: str = DEFAULT_TIMEZONE) -> int:
    """A Monday 00:00 local, so week folds anchor at the first row."""
    return int(datetime(2016, 10, 31, 0, 0, tzinfo=ZoneInfo(tz)).timestamp())


@dataclass(frozen=True)
class SynthData:
    frames: list[SensorFrame]
    labels: list[EventLabel]
    rule_hours: np.ndarray  # hours where the planted mechanism itself fires
    clean_positives: np.ndarray  # noise-free horizon-forward labels
    tau: float
    noise_fraction: float  # achieved fraction of positive hours flipped
    tz: str

    def dataset(self, lags: int = 2, calendar: bool = True) -> Dataset:
        raw = assemble_X(self.frames, lags=lags, calendar=calendar, tz=self.tz)
        return align(raw, self.labels, tz=self.tz)


def generate_benchmark(
    seed: int = 0,
    n_hours: int = 17520,
    positive_rate: float = 0.08,
    label_noise: float = 0.05,
    tz: str = DEFAULT_TIMEZONE,
    start_epoch: int | None = None,
) -> SynthData:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(77,)))
    start = default_start_epoch(tz) if start_epoch is None else start_epoch
    hours = np.array([start + i * HOUR for i in range(n_hours)], dtype=np.int64)
    hod = np.array([hour_floor(int(h), tz).local_hour_of_day for h in hours])

    # Alpha station: the mechanism. The prevailing wind swings between two
    # valley-axis modes (dwell about half a day); H2S is persistent with a
    # pre-dawn bump (pollution pools overnight under the inversion), which
    # concentrates events in the morning the way the real report data does.
    mode = np.empty(n_hours)
    m = int(rng.integers(2))
    for i in range(n_hours):
        if rng.random() < 1.0 / 12.0:
            m = 1 - m
        mode[i] = m
    theta = np.where(mode == 0, 0.0, np.pi) + rng.normal(0.0, np.radians(14.0), n_hours)
    wind_cos = np.cos(theta)
    diurnal = (1.1 * np.cos((hod - 4) / 24.0 * 2 * np.pi)
               - 0.7 * np.exp(-0.5 * ((hod - 15.0) / 3.0) ** 2))
    h2s = np.maximum(0.0, 2.0 + _ar1(rng, n_hours, 0.88, 0.55) + diurnal)
    wind_speed = np.maximum(0.0, 3.0 + _ar1(rng, n_hours, 0.8, 0.8))
    wind_dir_std = np.maximum(0.0, 20.0 + _ar1(rng, n_hours, 0.7, 5.0))

    # Beta station: nuisance predictors only.
    beta_pm = np.maximum(0.0, 10.0 + _ar1(rng, n_hours, 0.9, 2.0))
    beta_so2 = np.maximum(0.0, 1.0 + _ar1(rng, n_hours, 0.85, 0.3))

    windy = wind_cos > 0
    p_windy = max(windy.mean(), 1e-9)
    q = 1.0 - min(0.999, positive_rate / p_windy)
    tau = float(np.quantile(h2s[windy], q))
    clean_rule = windy & (h2s > tau)
    clean = clean_rule

    noisy, achieved = _jitter_events(clean, label_noise, rng)

    # Stations measure the physical signals imperfectly; the frames carry
    # these noisy readings while the rule above runs on the true values.
    h2s_meas = np.maximum(0.0, h2s + rng.normal(0.0, 0.12, n_hours))
    theta_meas = theta + rng.normal(0.0, np.radians(4.0), n_hours)
    wind_cos_meas = np.cos(theta_meas)
    wind_sin_meas = np.sin(theta_meas)

    score_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(78,)))
    scores = np.where(
        noisy,
        44 + score_rng.poisson(9, n_hours),
        np.minimum(39, score_rng.poisson(3 + 10 * (h2s > tau), n_hours)),
    ).astype(np.int64)

    frames = []
    for i, h in enumerate(hours):
        frames.append(
            SensorFrame(
                hour_start=int(h),
                values={
                    ("alpha", "H2S"): float(h2s_meas[i]),
                    ("alpha", "WIND_COS"): float(wind_cos_meas[i]),
                    ("alpha", "WIND_SIN"): float(wind_sin_meas[i]),
                    ("alpha", "WIND_SPEED"): float(wind_speed[i]),
                    ("alpha", "WIND_DIR_STD"): float(wind_dir_std[i]),
                    ("beta", "PM"): float(beta_pm[i]),
                    ("beta", "SO2"): float(beta_so2[i]),
                },
            )
        )
    labels = [
        EventLabel(hour=hour_floor(int(h), tz), score=int(scores[i]), positive=bool(noisy[i]))
        for i, h in enumerate(hours)
    ]
    return SynthData(
        frames=frames,
        labels=labels,
        rule_hours=clean_rule,
        clean_positives=clean,
        tau=tau,
        noise_fraction=achieved,
        tz=tz,
    )


def _jitter_events(clean: np.ndarray, label_noise: float, rng: np.random.Generator):
    """Trim or extend event edges until about ``label_noise`` of the positive
    hours disagree with the clean rule, keeping events contiguous."""
    noisy = clean.copy()
    n = len(clean)
    pos_hours = int(clean.sum())
    if pos_hours == 0 or label_noise <= 0:
        return noisy, 0.0
    events = []
    start = None
    for i, v in enumerate(clean):
        if v and start is None:
            start = i
        elif not v and start is not None:
            events.append((start, i - 1))
            start = None
    if start is not None:
        events.append((start, n - 1))
    ops = []
    for s, e in events:
        ops.append((s, e, "start", "extend"))
        ops.append((s, e, "end", "extend"))
        if e > s:
            ops.append((s, e, "start", "trim"))
            ops.append((s, e, "end", "trim"))
    rng.shuffle(ops)
    target = int(round(label_noise * pos_hours))
    flipped = 0
    for s, e, side, op in ops:
        if flipped >= target:
            break
        if op == "extend":
            j = s - 1 if side == "start" else e + 1
            if 0 <= j < n and not noisy[j]:
                noisy[j] = True
                flipped += 1
        else:
            j = s if side == "start" else e
            if noisy[j]:
                noisy[j] = False
                flipped += 1
    return noisy, flipped / pos_hours


def to_readings(frames: list[SensorFrame]) -> list[SensorReading]:
    """Emit one reading per channel inside each frame's averaging window, so
    ingesting them reproduces the frames. The wind-cos/sin pair is re-encoded
    as a direction reading."""
    readings = []
    for f in frames:
        t = f.hour_start - HOUR
        by_station: dict[str, dict[str, float]] = {}
        for (station, channel), value in f.values.items():
            by_station.setdefault(station, {})[channel] = value
        for station, chans in sorted(by_station.items()):
            cos_v, sin_v = chans.get("WIND_COS"), chans.get("WIND_SIN")
            if cos_v is not None and sin_v is not None:
                deg = float(np.degrees(np.arctan2(sin_v, cos_v))) % 360.0
                readings.append(SensorReading(station, "WIND_DIR_DEG", t, deg))
            for channel in ("PM", "SO2", "CO", "NOX", "O3", "H2S", "WIND_SPEED", "WIND_DIR_STD"):
                if channel in chans:
                    readings.append(SensorReading(station, channel, t, float(chans[channel])))
    return readings


def demo_reports(
    labels: list[EventLabel],
    zip_codes: list[str],
    seed: int = 0,
    tz: str = DEFAULT_TIMEZONE,
) -> list[SmellReport]:
    """Citizen reports whose hourly density follows the planted events; for
    end-to-end demos where labels are rebuilt from reports."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(79,)))
    reports = []
    i = 0
    for lab in labels:
        n = rng.poisson(2.2) if lab.positive else (1 if rng.random() < 0.05 else 0)
        for _ in range(n):
            rating = int(rng.integers(3, 6)) if lab.positive else int(rng.integers(1, 4))
            reports.append(
                SmellReport(
                    report_id=f"s{i:06d}",
                    observed_at=int(lab.hour.hour_start + rng.integers(0, HOUR)),
                    zip_code=str(rng.choice(zip_codes)),
                    rating=rating,
                    smell_description="industrial rotten egg" if rating >= 4 else "",
                    symptoms="headache" if rating == 5 else "",
                )
            )
            i += 1
    reports.sort(key=lambda r: r.observed_at)
    return reports
