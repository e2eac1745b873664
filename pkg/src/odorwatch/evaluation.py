"""Event-overlap confusion metric and rolling time-series cross-validation.

Consecutive positive hours merge into events. A predicted event pairs with a
ground-truth event when they share at least one hour; tp is the size of a
maximum one-to-one pairing, fp the unpaired predicted events, fn the unpaired
truth events. This keeps both identities exact: tp + fn equals the number of
(clipped) truth events and tp + fp the number of (clipped) predicted events.

Daytime semantics: truth events are clipped to the daytime window, and
predicted events are built only from predictions issued inside the issue
window (the prediction horizon reaches the end of daytime from its last
hour).
"""

from __future__ import annotations

from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from .core import DomainError
from .dataset import Dataset, standardize
from .ensemble import ForestModel, ForestParams, fit_forest

DAYTIME = (5, 19)  # local hours [5, 19): 5 am through 7 pm
ISSUE = (5, 12)  # predictions issued [5, 12): 5 am through 11 am


@dataclass(frozen=True)
class EventInterval:
    """Inclusive index range of a maximal run of consecutive positive hours."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise DomainError("interval start must be <= end")


@dataclass(frozen=True)
class EventConfusion:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) > 0 else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) > 0 else 0.0

    @property
    def fscore(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) > 0 else 0.0

    def __add__(self, other: "EventConfusion") -> "EventConfusion":
        return EventConfusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def merge_events(series) -> list[EventInterval]:
    """Maximal runs of True in an hourly-aligned boolean series."""
    events = []
    start = None
    for i, v in enumerate(series):
        if v and start is None:
            start = i
        elif not v and start is not None:
            events.append(EventInterval(start, i - 1))
            start = None
    if start is not None:
        events.append(EventInterval(start, len(series) - 1))
    return events


def _clip_events(
    series, mask, clip_mode: str
) -> list[list[tuple[int, int]]]:
    """Events as lists of (start, end) fragments after applying the mask.

    merge_then_clip merges the raw series first and intersects each event with
    the mask, keeping a fragmented event as ONE event; mask_then_merge ANDs
    first, so fragments become separate events.
    """
    if mask is None:
        return [[(e.start, e.end)] for e in merge_events(series)]
    if clip_mode == "mask_then_merge":
        masked = [bool(s) and bool(m) for s, m in zip(series, mask)]
        return [[(e.start, e.end)] for e in merge_events(masked)]
    if clip_mode != "merge_then_clip":
        raise DomainError(f"unknown clip_mode {clip_mode!r}")
    out = []
    for e in merge_events(series):
        frags = [
            (f.start + e.start, f.end + e.start)
            for f in merge_events([bool(mask[i]) for i in range(e.start, e.end + 1)])
        ]
        if frags:
            out.append(frags)
    return out


def _fragments_overlap(a: list[tuple[int, int]], b: list[tuple[int, int]]) -> bool:
    return any(s1 <= e2 and s2 <= e1 for s1, e1 in a for s2, e2 in b)


def _max_matching(adj: list[list[int]], n_right: int) -> int:
    """Maximum bipartite matching size (Kuhn's augmenting paths)."""
    match_right = [-1] * n_right

    def try_augment(u: int, seen: list[bool]) -> bool:
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                if match_right[v] == -1 or try_augment(match_right[v], seen):
                    match_right[v] = u
                    return True
        return False

    size = 0
    for u in range(len(adj)):
        if try_augment(u, [False] * n_right):
            size += 1
    return size


def event_confusion(
    truth,
    predicted,
    hour_of_day=None,
    daytime: tuple[int, int] = DAYTIME,
    issue: tuple[int, int] = ISSUE,
    clip_mode: str = "merge_then_clip",
) -> EventConfusion:
    """Event-overlap confusion over two aligned boolean series.

    With ``hour_of_day`` given (local hour per position), truth events are
    clipped to the daytime window and predicted events to the issue window;
    with ``hour_of_day=None`` no filtering is applied.
    """
    truth = list(truth)
    predicted = list(predicted)
    if len(truth) != len(predicted):
        raise DomainError("truth and predicted series must cover the same hours")
    if hour_of_day is None:
        truth_mask = pred_mask = None
    else:
        hod = list(hour_of_day)
        if len(hod) != len(truth):
            raise DomainError("hour_of_day must align with the series")
        truth_mask = [daytime[0] <= h < daytime[1] for h in hod]
        pred_mask = [issue[0] <= h < issue[1] for h in hod]
    truth_events = _clip_events(truth, truth_mask, clip_mode)
    pred_events = _clip_events(predicted, pred_mask, clip_mode)
    adj = [
        [j for j, te in enumerate(truth_events) if _fragments_overlap(pe, te)]
        for pe in pred_events
    ]
    tp = _max_matching(adj, len(truth_events))
    return EventConfusion(tp=tp, fp=len(pred_events) - tp, fn=len(truth_events) - tp)


# -- rolling time-series cross-validation ---------------------------------


class CvModel:
    """Fit/predict adapter used by rolling_cv; predictions are boolean."""

    def fit(self, X: np.ndarray, y_scores: np.ndarray, y_pos: np.ndarray, seed: int):
        raise NotImplementedError

    def predict_positive(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ForestCvModel(CvModel):
    """The four paper variants: {classification, regression} x {ET, RF}.

    Classification fits on the binary labels; regression fits on the raw
    confidence scores and thresholds the predicted scores post hoc.
    """

    def __init__(self, variant: str, params: ForestParams, threshold: float = 40.0):
        task, algo = variant.split("-")  # e.g. "cls-et"
        if task not in ("cls", "reg") or algo not in ("et", "rf"):
            raise DomainError(f"unknown variant {variant!r}")
        self.task = task
        self.algo = algo
        self.params = params
        self.threshold = threshold
        self.model: ForestModel | None = None

    def fit(self, X, y_scores, y_pos, seed):
        if self.task == "cls":
            self.model = fit_forest(
                X, y_pos.astype(np.int64), mode="classify", variant=self.algo,
                params=self.params, seed=seed,
            )
        else:
            self.model = fit_forest(
                X, y_scores.astype(np.float64), mode="regress", variant=self.algo,
                params=self.params, seed=seed,
            )
        return self

    def predict_positive(self, X):
        out = self.model.predict(X)
        if self.task == "cls":
            return out.astype(bool)
        return out >= self.threshold


@dataclass(frozen=True)
class FoldPlan:
    fold_ids: np.ndarray  # fold index per dataset row; -1 = before the anchor
    n_folds: int
    test_folds: list[int]


def plan_folds(dataset: Dataset, fold_hours: int = 168, train_folds: int = 48) -> FoldPlan:
    """Assign rows to 168-hour blocks anchored at the first local Monday 00:00.

    Rows before the anchor and a trailing partial block are excluded. Testing
    starts once ``train_folds`` complete folds precede a fold.
    """
    from .core import hour_floor

    anchor = None
    for h in dataset.hours:
        hi = hour_floor(int(h), dataset.tz)
        if hi.local_day_of_week == 0 and hi.local_hour_of_day == 0:
            anchor = int(h)
            break
    if anchor is None:
        raise DomainError("dataset contains no local Monday 00:00 anchor")
    span = fold_hours * 3600
    rel = (dataset.hours - anchor) // span
    fold_ids = np.where(dataset.hours < anchor, -1, rel).astype(np.int64)
    end = int(dataset.hours[-1]) + 3600
    n_folds = (end - anchor) // span
    test_folds = [k for k in range(train_folds, n_folds)]
    if not test_folds:
        raise DomainError(
            f"dataset spans {n_folds} complete folds; need more than {train_folds + 1}"
        )
    return FoldPlan(fold_ids=fold_ids, n_folds=int(n_folds), test_folds=test_folds)


# Fold-evaluation context shared with fork()ed pool workers; avoids pickling
# the dataset once per task.
_FOLD_CTX: dict | None = None


def _evaluate_fold(task):
    k, seed = task
    ctx = _FOLD_CTX
    dataset = ctx["dataset"]
    fold_ids = ctx["fold_ids"]
    train_rows = np.flatnonzero((fold_ids >= k - ctx["train_folds"]) & (fold_ids < k))
    test_rows = np.flatnonzero(fold_ids == k)
    fm = standardize(dataset.raw, fit_rows=train_rows)
    model = ctx["model_factory"]()
    model.fit(fm.values[train_rows], dataset.scores[train_rows],
              dataset.positives[train_rows], seed)
    pred = model.predict_positive(fm.values[test_rows])
    conf = event_confusion(
        dataset.positives[test_rows],
        pred,
        hour_of_day=dataset.hour_of_day[test_rows],
        daytime=ctx["daytime"],
        issue=ctx["issue"],
        clip_mode=ctx["clip_mode"],
    )
    return conf.tp, conf.fp, conf.fn


@dataclass(frozen=True)
class CvResult:
    variant: str
    precisions: np.ndarray  # one entry per repeat
    recalls: np.ndarray
    fscores: np.ndarray
    n_test_folds: int

    @property
    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "precision_mean": float(np.mean(self.precisions)),
            "precision_std": float(np.std(self.precisions)),
            "recall_mean": float(np.mean(self.recalls)),
            "recall_std": float(np.std(self.recalls)),
            "f_mean": float(np.mean(self.fscores)),
            "f_std": float(np.std(self.fscores)),
        }


def rolling_cv(
    dataset: Dataset,
    model_factory,
    variant: str = "model",
    fold_hours: int = 168,
    train_folds: int = 48,
    repeats: int = 1,
    seed: int = 0,
    daytime: tuple[int, int] = DAYTIME,
    issue: tuple[int, int] = ISSUE,
    clip_mode: str = "merge_then_clip",
    n_jobs: int = 1,
) -> CvResult:
    """Rolling-origin evaluation: for each test fold, train on the previous
    ``train_folds`` folds, standardize with training statistics, and score
    with the event-overlap metric. Per-fold counts are micro-averaged (summed)
    before computing precision/recall/F; repeats vary the model seed."""
    global _FOLD_CTX
    plan = plan_folds(dataset, fold_hours=fold_hours, train_folds=train_folds)
    _FOLD_CTX = {
        "dataset": dataset,
        "model_factory": model_factory,
        "fold_ids": plan.fold_ids,
        "train_folds": train_folds,
        "daytime": daytime,
        "issue": issue,
        "clip_mode": clip_mode,
    }
    precisions, recalls, fscores = [], [], []
    try:
        for r in range(repeats):
            rep_seed = int(
                np.random.SeedSequence(entropy=seed, spawn_key=(r,)).generate_state(1)[0]
            )
            tasks = [(k, rep_seed + k) for k in plan.test_folds]
            if n_jobs > 1:
                with get_context("fork").Pool(n_jobs) as pool:
                    counts = pool.map(_evaluate_fold, tasks)
            else:
                counts = [_evaluate_fold(t) for t in tasks]
            total = EventConfusion(0, 0, 0)
            for tp, fp, fn in counts:
                total = total + EventConfusion(tp, fp, fn)
            precisions.append(total.precision)
            recalls.append(total.recall)
            fscores.append(total.fscore)
    finally:
        _FOLD_CTX = None
    return CvResult(
        variant=variant,
        precisions=np.array(precisions),
        recalls=np.array(recalls),
        fscores=np.array(fscores),
        n_test_folds=len(plan.test_folds),
    )


def select_params(
    dataset: Dataset,
    variant: str,
    n_trees: int,
    grid_max_features=("sqrt", 0.33),
    grid_min_samples_split=(2, 8, 32),
    threshold: float = 40.0,
    seed: int = 0,
    n_jobs: int = 1,
    **cv_kwargs,
) -> tuple[ForestParams, list[dict]]:
    """Grid-search max_features and min_samples_split for one variant via
    rolling cross-validation (single repeat per combination); returns the
    F-best parameters plus the scored grid."""
    scored = []
    best = None
    for mf in grid_max_features:
        for mss in grid_min_samples_split:
            params = ForestParams(n_trees=n_trees, max_features=mf, min_samples_split=mss)
            res = rolling_cv(
                dataset,
                lambda v=variant, p=params: ForestCvModel(v, p, threshold),
                variant=variant,
                repeats=1,
                seed=seed,
                n_jobs=n_jobs,
                **cv_kwargs,
            )
            row = {"max_features": mf, "min_samples_split": mss, **res.summary}
            scored.append(row)
            if best is None or row["f_mean"] > best[0]:
                best = (row["f_mean"], params)
    return best[1], scored


EVAL_CSV_HEADER = "variant,precision_mean,precision_std,recall_mean,recall_std,f_mean,f_std"


def results_csv(results: list[CvResult]) -> str:
    lines = [EVAL_CSV_HEADER]
    for r in results:
        s = r.summary
        lines.append(
            "{variant},{precision_mean:.6f},{precision_std:.6f},{recall_mean:.6f},"
            "{recall_std:.6f},{f_mean:.6f},{f_std:.6f}".format(**s)
        )
    return "\n".join(lines) + "\n"


def results_table(results: list[CvResult]) -> str:
    """Human-readable table of cross-validated performance."""
    rows = [f"{'Variant':<18}{'Precision':>14}{'Recall':>14}{'F-score':>14}"]
    for r in results:
        s = r.summary
        rows.append(
            f"{s['variant']:<18}"
            f"{s['precision_mean']:>8.2f}±{s['precision_std']:.2f}"
            f"{s['recall_mean']:>9.2f}±{s['recall_std']:.2f}"
            f"{s['f_mean']:>9.2f}±{s['f_std']:.2f}"
        )
    return "\n".join(rows) + "\n"
