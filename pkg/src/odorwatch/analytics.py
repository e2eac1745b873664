"""Usage analytics: user-group segmentation, n-gram text frequencies, and the
day-of-week by hour-of-day rating grid."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core import DEFAULT_TIMEZONE, DomainError, SmellReport, hour_floor

GROUPS = ("ENTHUSIAST", "EXPLORER", "CONTRIBUTOR", "OBSERVER")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def load_stopwords() -> frozenset[str]:
    text = resources.files("odorwatch").joinpath("data/stopwords.txt").read_text()
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def siqr(values) -> float:
    """Semi-interquartile range (Q3 - Q1) / 2 with linear-interpolation quantiles."""
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75])
    return float(q3 - q1) / 2.0


@dataclass(frozen=True)
class SegmentationResult:
    assignments: dict[str, str]  # user -> group label
    report_cut: float
    event_cut: float
    summary: dict[str, dict]  # group -> stats


def segment_users(
    report_counts: dict[str, int], interaction_counts: dict[str, int]
) -> SegmentationResult:
    """Partition users into the four engagement groups.

    Cuts are median + SIQR of the per-user report and interaction counts over
    the whole population. Enthusiasts exceed both cuts; contributors reported
    but never interacted; observers interacted but never reported; explorers
    are the remainder with at least one of either.
    """
    users = sorted(set(report_counts) | set(interaction_counts))
    users = [
        u for u in users if report_counts.get(u, 0) > 0 or interaction_counts.get(u, 0) > 0
    ]
    if not users:
        raise DomainError("empty population")
    reports = np.array([report_counts.get(u, 0) for u in users], dtype=float)
    events = np.array([interaction_counts.get(u, 0) for u in users], dtype=float)
    cut_r = float(np.median(reports)) + siqr(reports)
    cut_e = float(np.median(events)) + siqr(events)
    assignments: dict[str, str] = {}
    for u, r, e in zip(users, reports, events):
        if r > cut_r and e > cut_e:
            assignments[u] = "ENTHUSIAST"
        elif r >= 1 and e == 0:
            assignments[u] = "CONTRIBUTOR"
        elif e >= 1 and r == 0:
            assignments[u] = "OBSERVER"
        else:
            assignments[u] = "EXPLORER"

    total_reports = reports.sum()
    total_events = events.sum()
    summary: dict[str, dict] = {}
    for g in GROUPS:
        members = [i for i, u in enumerate(users) if assignments[u] == g]
        r = reports[members] if members else np.array([])
        e = events[members] if members else np.array([])
        summary[g] = {
            "users": len(members),
            "user_pct": 100.0 * len(members) / len(users),
            "reports_pct": 100.0 * (r.sum() / total_reports) if total_reports else 0.0,
            "events_pct": 100.0 * (e.sum() / total_events) if total_events else 0.0,
            "reports_median": float(np.median(r)) if len(r) else 0.0,
            "reports_siqr": siqr(r) if len(r) else 0.0,
            "events_median": float(np.median(e)) if len(e) else 0.0,
            "events_siqr": siqr(e) if len(e) else 0.0,
        }
    # One-line derived statistic: within enthusiasts, correlation between
    # reports submitted and interaction events.
    enth = [i for i, u in enumerate(users) if assignments[u] == "ENTHUSIAST"]
    if len(enth) >= 3 and np.std(reports[enth]) > 0 and np.std(events[enth]) > 0:
        r_corr = float(np.corrcoef(reports[enth], events[enth])[0, 1])
    else:
        r_corr = float("nan")
    summary["ENTHUSIAST"]["reports_events_pearson_r"] = r_corr
    return SegmentationResult(
        assignments=assignments, report_cut=cut_r, event_cut=cut_e, summary=summary
    )


def tokenize(text: str, stopwords: frozenset[str]) -> list[str]:
    return [t for t in _TOKEN_RE.findall(text.lower()) if t not in stopwords]


def ngram_frequency(
    texts, n: int = 1, stopwords: frozenset[str] | None = None
) -> list[tuple[str, int]]:
    """Ranked (gram, count) pairs; count descending, then lexicographic."""
    if n not in (1, 2):
        raise DomainError("only unigrams and bigrams are supported")
    if stopwords is None:
        stopwords = load_stopwords()
    counts: Counter[str] = Counter()
    for text in texts:
        tokens = tokenize(text or "", stopwords)
        if n == 1:
            counts.update(tokens)
        else:
            counts.update(" ".join(pair) for pair in zip(tokens, tokens[1:]))
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def temporal_heatmap(reports: list[SmellReport], tz: str = DEFAULT_TIMEZONE) -> np.ndarray:
    """7 x 24 grid of mean smell ratings by (day of week, hour of day).

    Day 0 is Monday. Cells with no reports are NaN (missing, not zero).
    """
    sums = np.zeros((7, 24))
    counts = np.zeros((7, 24))
    for r in reports:
        hi = hour_floor(r.observed_at, tz)
        sums[hi.local_day_of_week, hi.local_hour_of_day] += r.rating
        counts[hi.local_day_of_week, hi.local_hour_of_day] += 1
    with np.errstate(invalid="ignore"):
        grid = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return grid
