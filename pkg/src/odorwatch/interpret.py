"""Interpretable pattern extraction behind the event predictor.

Pipeline: hand-picked hydrogen-sulfide/wind predictors with pairwise
interaction terms, unsupervised forest proximity over positive samples,
DBSCAN on the 1 - similarity distances, recursive feature elimination down to
a small feature set, and a depth-limited decision tree fitted to the selected
cluster, reported with per-feature point-biserial correlations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .core import DomainError
from .dataset import (
    ColumnSpec,
    Dataset,
    RawMatrix,
    SensorFrame,
    Standardizer,
    assemble_X,
)
from .ensemble import ForestModel, ForestParams, Tree, fit_forest, fit_tree
from .evaluation import DAYTIME, ISSUE, event_confusion

INTERPRETATION_CHANNELS = ("H2S", "WIND_COS", "WIND_SIN", "WIND_SPEED", "WIND_DIR_STD")


class NoClusterError(RuntimeError):
    pass


def assemble_interpretation(
    frames: list[SensorFrame],
    lags: int = 2,
    tz: str | None = None,
    table: list[tuple[str, str]] | None = None,
) -> RawMatrix:
    """Base hydrogen-sulfide and wind predictors at lags 0..lags plus all
    unordered pairwise products (cross-lag products included).

    Products are taken on raw predictor values, so e.g. wind-cos 0.5 times
    H2S 2.0 yields 1.0 before any standardization.
    """
    base = assemble_X(frames, lags=lags, calendar=False, table=table)
    keep = [
        i
        for i, c in enumerate(base.columns)
        if c.kind == "sensor" and c.channel in INTERPRETATION_CHANNELS
    ]
    if not keep:
        raise DomainError("no interpretation channels present in frames")
    vals = base.values[:, keep]
    cols = [base.columns[i] for i in keep]
    k = len(cols)
    blocks = [vals]
    out_cols: list[ColumnSpec] = list(cols)
    for i in range(k):
        for j in range(i + 1, k):
            blocks.append((vals[:, i] * vals[:, j])[:, None])
            out_cols.append(
                ColumnSpec(kind="interaction", name=f"{cols[i].name} * {cols[j].name}")
            )
    return RawMatrix(hours=base.hours, values=np.hstack(blocks), columns=tuple(out_cols))


def interaction_count(k: int) -> int:
    """k base features produce k + k*(k-1)/2 columns."""
    return k + k * (k - 1) // 2


def unsupervised_proximity(
    X: np.ndarray,
    n_trees: int = 500,
    seed: int = 0,
    params: ForestParams | None = None,
) -> tuple[np.ndarray, ForestModel]:
    """Forest proximity without labels.

    A synthetic twin of X is built by resampling each column independently
    (uniformly, with replacement); a random forest learns to tell real rows
    from synthetic ones, and similarity is the fraction of trees in which two
    real rows share a leaf.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n < 2:
        raise DomainError("need at least 2 samples for proximity")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    synth = np.empty_like(X)
    for j in range(X.shape[1]):
        synth[:, j] = X[rng.integers(0, n, n), j]
    stacked = np.vstack([X, synth])
    labels = np.concatenate([np.ones(n, dtype=np.int64), np.zeros(n, dtype=np.int64)])
    params = params or ForestParams(n_trees=n_trees, max_features="sqrt", min_samples_split=2)
    if params.n_trees != n_trees:
        params = ForestParams(
            n_trees=n_trees,
            max_features=params.max_features,
            min_samples_split=params.min_samples_split,
            max_depth=params.max_depth,
        )
    forest = fit_forest(stacked, labels, mode="classify", variant="rf", params=params, seed=seed)
    sim = np.zeros((n, n))
    for tree in forest.trees:
        leaves = tree.apply(X)
        order = np.argsort(leaves, kind="stable")
        sorted_leaves = leaves[order]
        start = 0
        for i in range(1, n + 1):
            if i == n or sorted_leaves[i] != sorted_leaves[start]:
                group = order[start:i]
                sim[np.ix_(group, group)] += 1.0
                start = i
    sim /= len(forest.trees)
    return sim, forest


def similarity_to_distance(sim: np.ndarray) -> np.ndarray:
    return 1.0 - sim


def dbscan(distance: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """DBSCAN over a precomputed distance matrix; -1 marks noise.

    A point is core when its eps-neighborhood (itself included) holds at
    least min_pts points.
    """
    distance = np.asarray(distance)
    n = len(distance)
    if distance.shape != (n, n):
        raise DomainError("distance matrix must be square")
    neighbors = [np.flatnonzero(distance[i] <= eps) for i in range(n)]
    is_core = np.array([len(nb) >= min_pts for nb in neighbors])
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not is_core[i]:
            continue
        labels[i] = cluster
        queue = [i]
        while queue:
            cur = queue.pop()
            for nb in neighbors[cur]:
                if labels[nb] == -1:
                    labels[nb] = cluster
                    if is_core[nb]:
                        queue.append(int(nb))
        cluster += 1
    return labels


def largest_cluster(labels: np.ndarray) -> np.ndarray:
    """Member indices of the biggest cluster; error when everything is noise."""
    valid = labels[labels >= 0]
    if len(valid) == 0:
        raise NoClusterError("no cluster found; widen eps")
    counts = np.bincount(valid)
    return np.flatnonzero(labels == int(np.argmax(counts)))


def rfe(
    X: np.ndarray,
    y: np.ndarray,
    step: int = 50,
    target: int = 30,
    params: ForestParams | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Recursive feature elimination: iteratively drop the ``step``
    lowest-importance features (fewer on the final step) until exactly
    ``target`` remain. Returns selected column indices in original order."""
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    if p <= target:
        raise DomainError(f"feature count {p} must exceed target {target}")
    params = params or ForestParams(n_trees=100, max_features="sqrt", min_samples_split=2)
    remaining = np.arange(p)
    it = 0
    while len(remaining) > target:
        forest = fit_forest(
            X[:, remaining], y, mode="classify", variant="rf", params=params,
            seed=int(np.random.SeedSequence(entropy=seed, spawn_key=(it,)).generate_state(1)[0]),
        )
        imp = forest.gini_importance()
        drop = min(step, len(remaining) - target)
        worst = np.argsort(imp, kind="stable")[:drop]
        keep = np.ones(len(remaining), dtype=bool)
        keep[worst] = False
        remaining = remaining[keep]
        it += 1
    return remaining


def point_biserial(x: np.ndarray, y01: np.ndarray) -> tuple[float, float]:
    """Pearson correlation between a continuous feature and a binary label,
    with a two-sided t-test p-value."""
    x = np.asarray(x, dtype=np.float64)
    y01 = np.asarray(y01, dtype=np.float64)
    n = len(x)
    sx = x.std()
    sy = y01.std()
    if sx == 0 or sy == 0 or n < 3:
        return 0.0, 1.0
    r = float(np.mean((x - x.mean()) * (y01 - y01.mean())) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(sstats.t.sf(abs(t), df=n - 2))
    return r, p


def render_tree(tree: Tree, feature_names: list[str]) -> str:
    """Text rendering; each node line shows the positive/negative sample
    ratio, then the split feature and threshold."""
    lines: list[str] = []

    def walk(nid: int, depth: int) -> None:
        indent = "  " * depth
        counts = tree.value[nid]
        neg, pos = (counts[0], counts[1]) if len(counts) > 1 else (counts[0], 0.0)
        ratio = f"{int(pos)}/{int(neg)}"
        if tree.feature[nid] < 0:
            lines.append(f"{indent}[{ratio}] leaf")
            return
        name = feature_names[tree.feature[nid]]
        lines.append(f"{indent}[{ratio}] {name} <= {tree.threshold[nid]:.4f}")
        walk(int(tree.left[nid]), depth + 1)
        walk(int(tree.right[nid]), depth + 1)

    walk(0, 0)
    return "\n".join(lines) + "\n"


@dataclass
class InterpretParams:
    lags: int = 2
    proximity_trees: int = 500
    max_proximity_samples: int = 1500
    dbscan_eps: tuple[float, ...] = (0.2, 0.3, 0.4, 0.5)
    dbscan_min_pts: tuple[int, ...] = (5, 10, 20)
    rfe_step: int = 50
    rfe_target: int = 30
    rfe_trees: int = 100
    tree_max_depth: int = 5
    test_fraction: float = 0.25
    max_negatives: int | None = None
    min_samples_split: int = 2


@dataclass
class InterpretationReport:
    cluster_rows: list[int]  # dataset row indices of the clustered positives
    cluster_fraction_of_positives: float
    selected_features: list[str]
    selected_indices: list[int]
    tree_text: str
    importances: dict[str, float]
    top_feature: str
    correlations: dict[str, tuple[float, float]]  # name -> (r, p)
    n_samples: int
    train_confusion: dict
    test_confusion: dict
    grid_choice: dict
    feature_count: int
    tree: Tree = field(repr=False, default=None)

    def to_json(self) -> str:
        payload = {
            "cluster_rows": self.cluster_rows,
            "cluster_fraction_of_positives": self.cluster_fraction_of_positives,
            "selected_features": self.selected_features,
            "top_feature": self.top_feature,
            "importances": self.importances,
            "correlations": {k: {"r": v[0], "p": v[1]} for k, v in self.correlations.items()},
            "n_samples": self.n_samples,
            "train": self.train_confusion,
            "test": self.test_confusion,
            "grid_choice": self.grid_choice,
            "feature_count": self.feature_count,
            "tree": self.tree_text,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _confusion_dict(conf) -> dict:
    return {
        "tp": conf.tp,
        "fp": conf.fp,
        "fn": conf.fn,
        "precision": conf.precision,
        "recall": conf.recall,
        "fscore": conf.fscore,
    }


def _tree_f_on(tree: Tree, X: np.ndarray, y: np.ndarray, hod: np.ndarray):
    pred = tree.predict(X).astype(bool)
    return event_confusion(y, pred, hour_of_day=hod, daytime=DAYTIME, issue=ISSUE)


def run_pipeline(
    dataset: Dataset,
    interpretation: RawMatrix,
    params: InterpretParams | None = None,
    seed: int = 0,
) -> InterpretationReport:
    """Full interpretation pipeline on an aligned dataset.

    Rows are split chronologically (the trailing ``test_fraction`` held out);
    proximity, clustering, and feature elimination all run on training rows
    only. DBSCAN parameters come from the grid, scored by the downstream
    tree's F on a tail of the training rows.
    """
    params = params or InterpretParams()
    if not np.array_equal(interpretation.hours, dataset.hours):
        raise DomainError("interpretation matrix must align with the dataset hours")
    n = len(dataset)
    n_test = int(round(n * params.test_fraction))
    train_rows = np.arange(n - n_test)
    test_rows = np.arange(n - n_test, n)
    scaler = Standardizer().fit(interpretation.values[train_rows])
    Xs = scaler.transform(interpretation.values)
    y = dataset.positives
    hod = dataset.hour_of_day

    pos_train = train_rows[y[train_rows]]
    if len(pos_train) < 2:
        raise DomainError("not enough positive samples to interpret")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(9,)))
    prox_rows = pos_train
    if len(prox_rows) > params.max_proximity_samples:
        prox_rows = np.sort(rng.choice(prox_rows, params.max_proximity_samples, replace=False))
    sim, _forest = unsupervised_proximity(
        Xs[prox_rows],
        n_trees=params.proximity_trees,
        seed=seed,
        params=ForestParams(
            n_trees=params.proximity_trees,
            max_features="sqrt",
            min_samples_split=params.min_samples_split,
        ),
    )
    dist = similarity_to_distance(sim)

    neg_train = train_rows[~y[train_rows]]
    if params.max_negatives is not None and len(neg_train) > params.max_negatives:
        neg_train = np.sort(rng.choice(neg_train, params.max_negatives, replace=False))

    # Inner chronological split of the training rows scores each DBSCAN
    # parameter pair by the downstream tree's event F.
    inner_cut = int(len(train_rows) * 0.75)
    best = None
    for eps in params.dbscan_eps:
        for min_pts in params.dbscan_min_pts:
            labels = dbscan(dist, eps=eps, min_pts=min_pts)
            try:
                members = largest_cluster(labels)
            except NoClusterError:
                continue
            cluster_rows = prox_rows[members]
            fit_rows = np.concatenate([cluster_rows, neg_train])
            fit_rows = fit_rows[fit_rows < inner_cut]
            inner_val = np.arange(inner_cut, len(train_rows))
            if len(fit_rows) == 0 or not y[fit_rows].any() or len(inner_val) == 0:
                continue
            tree = fit_tree(
                Xs[fit_rows],
                y[fit_rows].astype(np.int64),
                params=ForestParams(
                    max_features=None,
                    min_samples_split=params.min_samples_split,
                    max_depth=params.tree_max_depth,
                ),
                rng=np.random.default_rng(seed),
                variant="rf",
                mode="classify",
            )
            conf = _tree_f_on(tree, Xs[inner_val], y[inner_val], hod[inner_val])
            score = conf.fscore
            if best is None or score > best[0]:
                best = (score, eps, min_pts, labels, members)
    if best is None:
        raise NoClusterError("no cluster found; widen eps")
    _, eps, min_pts, labels, members = best
    cluster_rows = prox_rows[members]
    cluster_fraction = len(members) / len(prox_rows)

    # Train the final tree on cluster positives vs negatives; positives
    # outside the cluster stay out so the tree explains this cluster only.
    fit_rows = np.sort(np.concatenate([cluster_rows, neg_train]))
    y_fit = y[fit_rows].astype(np.int64)
    p = Xs.shape[1]
    if p > params.rfe_target:
        selected = rfe(
            Xs[fit_rows],
            y_fit,
            step=params.rfe_step,
            target=params.rfe_target,
            params=ForestParams(
                n_trees=params.rfe_trees,
                max_features="sqrt",
                min_samples_split=params.min_samples_split,
            ),
            seed=seed,
        )
    else:
        selected = np.arange(p)
    names = [interpretation.columns[i].name for i in selected]

    tree = fit_tree(
        Xs[np.ix_(fit_rows, selected)],
        y_fit,
        params=ForestParams(
            max_features=None,
            min_samples_split=params.min_samples_split,
            max_depth=params.tree_max_depth,
        ),
        rng=np.random.default_rng(seed),
        variant="rf",
        mode="classify",
    )
    importances = tree.feature_importance(len(selected))
    total = importances.sum()
    if total > 0:
        importances = importances / total
    imp_map = {names[i]: float(importances[i]) for i in range(len(names))}
    top_feature = names[int(np.argmax(importances))]

    train_conf = _tree_f_on(tree, Xs[np.ix_(train_rows, selected)], y[train_rows], hod[train_rows])
    test_conf = _tree_f_on(tree, Xs[np.ix_(test_rows, selected)], y[test_rows], hod[test_rows])

    correlations = {}
    for i, name in zip(selected, names):
        correlations[name] = point_biserial(Xs[:, i], y.astype(float))

    return InterpretationReport(
        cluster_rows=[int(r) for r in cluster_rows],
        cluster_fraction_of_positives=float(cluster_fraction),
        selected_features=names,
        selected_indices=[int(i) for i in selected],
        tree_text=render_tree(tree, names),
        importances=imp_map,
        top_feature=top_feature,
        correlations=correlations,
        n_samples=n,
        train_confusion=_confusion_dict(train_conf),
        test_confusion=_confusion_dict(test_conf),
        grid_choice={"eps": eps, "min_pts": min_pts},
        feature_count=p,
        tree=tree,
    )
