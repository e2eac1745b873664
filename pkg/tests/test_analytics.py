import numpy as np
import pytest

from odorwatch.analytics import (
    load_stopwords,
    ngram_frequency,
    segment_users,
    siqr,
    temporal_heatmap,
)
from odorwatch.core import DomainError, SmellReport

from oracles import heatmap_oracle

TZ = "America/New_York"


def engineered_population():
    """Counts built so that median + SIQR lands exactly on (6, 31).

    Reports: median 4, Q1 2, Q3 6 -> cut 4 + 2 = 6.
    Events: median 21, Q1 11, Q3 31 -> cut 21 + 10 = 31.
    """
    reports = [1, 2, 2, 3, 4, 5, 6, 16, 20]
    events = [5, 11, 11, 16, 21, 26, 31, 117, 120]
    users = {f"u{i}": (r, e) for i, (r, e) in enumerate(zip(reports, events))}
    report_counts = {u: r for u, (r, e) in users.items()}
    event_counts = {u: e for u, (r, e) in users.items()}
    return report_counts, event_counts


class TestSegmentation:
    def test_observer(self):
        seg = segment_users({"a": 0}, {"a": 5})
        assert seg.assignments["a"] == "OBSERVER"

    def test_contributor(self):
        seg = segment_users({"a": 3}, {"a": 0})
        assert seg.assignments["a"] == "CONTRIBUTOR"

    def test_empty_population_errors(self):
        with pytest.raises(DomainError):
            segment_users({}, {})
        with pytest.raises(DomainError):
            segment_users({"a": 0}, {"a": 0})

    def test_engineered_cuts_and_enthusiast(self):
        report_counts, event_counts = engineered_population()
        seg = segment_users(report_counts, event_counts)
        assert seg.report_cut == pytest.approx(6.0)
        assert seg.event_cut == pytest.approx(31.0)
        # The (16, 117) user exceeds both cuts.
        assert seg.assignments["u7"] == "ENTHUSIAST"
        # (6, 31) sits exactly on the cuts: strictly-above is required.
        assert seg.assignments["u6"] == "EXPLORER"

    def test_partition_total_and_exclusive(self):
        rng = np.random.default_rng(0)
        report_counts = {f"u{i}": int(rng.integers(0, 30)) for i in range(200)}
        event_counts = {f"u{i}": int(rng.integers(0, 200)) for i in range(200)}
        seg = segment_users(report_counts, event_counts)
        population = [
            u for u in report_counts
            if report_counts[u] > 0 or event_counts[u] > 0
        ]
        assert set(seg.assignments) == set(population)
        pct = sum(s["user_pct"] for s in seg.summary.values() if isinstance(s, dict))
        assert pct == pytest.approx(100.0, abs=1e-9)

    def test_siqr_linear_interpolation(self):
        assert siqr([1, 2, 3, 4, 5]) == pytest.approx(1.0)
        assert siqr([0, 10]) == pytest.approx(2.5)


class TestNgrams:
    def test_bigram_hand_count(self):
        grams = ngram_frequency(["rotten egg", "rotten egg smell"], n=2)
        assert grams[0] == ("rotten egg", 2)
        assert ("egg smell", 1) in grams

    def test_all_stopwords_empty(self):
        assert ngram_frequency(["the and of"], n=1) == []

    def test_empty_corpus(self):
        assert ngram_frequency([], n=1) == []
        assert ngram_frequency([], n=2) == []

    def test_lowercase_and_punctuation(self):
        grams = ngram_frequency(["Rotten-Egg!!", "rotten egg?"], n=2)
        assert grams[0] == ("rotten egg", 2)

    def test_permutation_invariance(self):
        texts = ["sulfur smell strong", "industrial smoke", "sulfur again", "smoke"]
        a = ngram_frequency(texts, n=1)
        b = ngram_frequency(list(reversed(texts)), n=1)
        assert a == b

    def test_ranking_count_then_lexicographic(self):
        grams = ngram_frequency(["zeta zeta", "alpha alpha", "beta"], n=1)
        assert grams == [("alpha", 2), ("zeta", 2), ("beta", 1)]

    def test_stopword_file_loads(self):
        stop = load_stopwords()
        assert "the" in stop and "rotten" not in stop

    def test_rejects_other_n(self):
        with pytest.raises(DomainError):
            ngram_frequency(["x"], n=3)


def _report_at(t, rating):
    return SmellReport(report_id="x", observed_at=t, zip_code="15201", rating=rating)


class TestHeatmap:
    def _monday_9am(self):
        from datetime import datetime
        from zoneinfo import ZoneInfo

        return int(datetime(2018, 1, 1, 9, 0, tzinfo=ZoneInfo(TZ)).timestamp())  # a Monday

    def test_single_report(self):
        grid = temporal_heatmap([_report_at(self._monday_9am(), 3)], tz=TZ)
        assert grid[0, 9] == 3.0
        assert np.isnan(grid).sum() == 7 * 24 - 1

    def test_mean_of_cell(self):
        t = self._monday_9am()
        grid = temporal_heatmap([_report_at(t, 2), _report_at(t + 60, 4)], tz=TZ)
        assert grid[0, 9] == 3.0

    def test_matches_group_by_oracle(self):
        rng = np.random.default_rng(1)
        reports = [
            _report_at(int(rng.integers(1_500_000_000, 1_540_000_000)), int(rng.integers(1, 6)))
            for _ in range(10_000)
        ]
        grid = temporal_heatmap(reports, tz=TZ)
        expect = heatmap_oracle(reports, TZ)
        np.testing.assert_allclose(grid, expect, equal_nan=True)
