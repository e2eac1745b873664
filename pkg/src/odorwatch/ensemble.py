"""CART decision trees and Random Forest / Extremely Randomized Trees ensembles.

Classification splits minimize weighted Gini impurity, regression splits
minimize weighted variance. The RF variant searches the best midpoint
threshold over each candidate feature's sorted values; the ET variant draws
one uniform random threshold per candidate feature and keeps the best. Trees
are grown with an explicit stack and stored as parallel arrays, which keeps
split search and prediction vectorized.

Per-tree RNG streams derive from (seed, tree index), so a forest is
deterministic for a given seed regardless of scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

BLOB_FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: int | float | str | None = "sqrt"
    min_samples_split: int = 2
    max_depth: int | None = None

    def resolve_max_features(self, p: int) -> int:
        mf = self.max_features
        if mf is None or mf == "all":
            return p
        if mf == "sqrt":
            return max(1, int(round(np.sqrt(p))))
        if isinstance(mf, float):
            return min(p, max(1, int(round(mf * p))))
        return min(p, max(1, int(mf)))


def gini(counts: np.ndarray) -> float:
    """Gini impurity of a class-count vector."""
    n = counts.sum()
    if n <= 0:
        return 0.0
    frac = counts / n
    return float(1.0 - np.dot(frac, frac))


class TreeNode:
    """Object view of one tree node, for rendering and structural tests."""

    __slots__ = ("tree", "node_id")

    def __init__(self, tree: "Tree", node_id: int):
        self.tree = tree
        self.node_id = node_id

    @property
    def is_leaf(self) -> bool:
        return self.tree.feature[self.node_id] < 0

    @property
    def feature(self) -> int:
        return int(self.tree.feature[self.node_id])

    @property
    def threshold(self) -> float:
        return float(self.tree.threshold[self.node_id])

    @property
    def left(self) -> "TreeNode":
        return TreeNode(self.tree, int(self.tree.left[self.node_id]))

    @property
    def right(self) -> "TreeNode":
        return TreeNode(self.tree, int(self.tree.right[self.node_id]))

    @property
    def n_samples(self) -> int:
        return int(self.tree.n_samples[self.node_id])

    @property
    def value(self):
        return self.tree.value[self.node_id]


class Tree:
    """A fitted CART tree stored as parallel arrays."""

    def __init__(self, feature, threshold, left, right, n_samples, impurity, value, mode):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.n_samples = n_samples
        self.impurity = impurity
        self.value = value  # (n_nodes, n_classes) counts or (n_nodes,) means
        self.mode = mode

    @property
    def root(self) -> TreeNode:
        return TreeNode(self, 0)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int32)
        for nid in range(self.n_nodes):
            if self.feature[nid] >= 0:
                depths[self.left[nid]] = depths[nid] + 1
                depths[self.right[nid]] = depths[nid] + 1
        return int(depths.max()) if self.n_nodes else 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id for each row (level-synchronous routing)."""
        n = X.shape[0]
        cur = np.zeros(n, dtype=np.int64)
        while True:
            feat = self.feature[cur]
            active = np.flatnonzero(feat >= 0)
            if len(active) == 0:
                return cur
            nodes = cur[active]
            go_left = X[active, feat[active]] <= self.threshold[nodes]
            cur[active] = np.where(go_left, self.left[nodes], self.right[nodes])

    def predict(self, X: np.ndarray) -> np.ndarray:
        leaves = self.apply(X)
        if self.mode == "regress":
            return self.value[leaves]
        counts = self.value[leaves]
        return np.argmax(counts, axis=1)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        leaves = self.apply(X)
        counts = self.value[leaves].astype(float)
        return counts / counts.sum(axis=1, keepdims=True)

    def training_loss(self) -> float:
        """Sample-weighted leaf impurity (Gini or variance), relative to root size."""
        leaf = self.feature < 0
        total = self.n_samples[0]
        return float(np.sum(self.n_samples[leaf] * self.impurity[leaf]) / total)

    def feature_importance(self, n_features: int) -> np.ndarray:
        """Total impurity decrease attributed to each feature (unnormalized)."""
        out = np.zeros(n_features)
        total = float(self.n_samples[0])
        internal = np.flatnonzero(self.feature >= 0)
        for nid in internal:
            l, r = int(self.left[nid]), int(self.right[nid])
            decrease = (
                self.n_samples[nid] * self.impurity[nid]
                - self.n_samples[l] * self.impurity[l]
                - self.n_samples[r] * self.impurity[r]
            ) / total
            out[self.feature[nid]] += decrease
        return out


def _split_rf(Xn, yn, pos, mode, n_classes):
    """Best midpoint split per candidate feature via sorted prefix sums.

    Returns (weighted child impurity, threshold) arrays over features; invalid
    features get +inf.
    """
    n, k = Xn.shape
    order = np.argsort(Xn, axis=0)
    Xs = np.take_along_axis(Xn, order, axis=0)
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    valid = Xs[1:] > Xs[:-1]
    if mode == "classify" and n_classes == 2:
        cpos = np.cumsum(pos[order], axis=0)[:-1]
        rpos = pos.sum() - cpos
        # nl*gini_l + nr*gini_r = 2*(cpos - cpos^2/nl) + 2*(rpos - rpos^2/nr)
        w = (cpos - cpos * cpos / nl + rpos - rpos * rpos / nr) * (2.0 / n)
    elif mode == "classify":
        w = np.zeros((n - 1, k))
        sq_l = np.zeros((n - 1, k))
        sq_r = np.zeros((n - 1, k))
        ys = yn[order]
        for c in range(n_classes):
            cc = np.cumsum(ys == c, axis=0)[:-1]
            sq_l += cc * cc
            total_c = np.count_nonzero(yn == c)
            sq_r += (total_c - cc) * (total_c - cc)
        w = (nl * (1 - sq_l / (nl * nl)) + nr * (1 - sq_r / (nr * nr))) / n
    else:
        ys = yn[order]
        cy = np.cumsum(ys, axis=0)[:-1]
        cy2 = np.cumsum(ys * ys, axis=0)[:-1]
        ty, ty2 = yn.sum(), np.dot(yn, yn)
        sse_l = np.maximum(cy2 - cy * cy / nl, 0.0)
        sse_r = np.maximum((ty2 - cy2) - (ty - cy) ** 2 / nr, 0.0)
        w = (sse_l + sse_r) / n
    w = np.where(valid, w, np.inf)
    best_pos = np.argmin(w, axis=0)
    cols = np.arange(k)
    best_w = w[best_pos, cols]
    lo = Xs[best_pos, cols]
    hi = Xs[best_pos + 1, cols]
    thr = (lo + hi) / 2.0
    # Midpoint must strictly separate; fall back to the left value if rounding
    # collapsed it onto the right one.
    thr = np.where(thr < hi, thr, lo)
    return best_w, thr


def _split_et(Xn, yn, pos, mode, n_classes, rng):
    """One uniform random threshold per candidate feature; weighted impurity."""
    n, k = Xn.shape
    lo = Xn.min(axis=0)
    hi = Xn.max(axis=0)
    usable = hi > lo
    thr = lo + rng.random(k) * (hi - lo)
    mask = Xn <= thr
    nl = mask.sum(axis=0).astype(np.float64)
    nr = n - nl
    ok = usable & (nl > 0) & (nr > 0)
    nl_safe = np.where(nl > 0, nl, 1.0)
    nr_safe = np.where(nr > 0, nr, 1.0)
    if mode == "classify" and n_classes == 2:
        pos_l = pos @ mask
        pos_r = pos.sum() - pos_l
        w = (pos_l - pos_l * pos_l / nl_safe + pos_r - pos_r * pos_r / nr_safe) * (2.0 / n)
    elif mode == "classify":
        sq_l = np.zeros(k)
        sq_r = np.zeros(k)
        for c in range(n_classes):
            in_c = (yn == c).astype(np.float64)
            cl = in_c @ mask
            cr = in_c.sum() - cl
            sq_l += cl * cl
            sq_r += cr * cr
        w = (nl * (1 - sq_l / (nl_safe * nl_safe)) + nr * (1 - sq_r / (nr_safe * nr_safe))) / n
    else:
        sy_l = yn @ mask
        sy2_l = (yn * yn) @ mask
        ty, ty2 = yn.sum(), np.dot(yn, yn)
        sse_l = np.maximum(sy2_l - sy_l * sy_l / nl_safe, 0.0)
        sse_r = np.maximum((ty2 - sy2_l) - (ty - sy_l) ** 2 / nr_safe, 0.0)
        w = (sse_l + sse_r) / n
    w = np.where(ok, w, np.inf)
    return w, thr


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams | None = None,
    rng: np.random.Generator | None = None,
    variant: str = "rf",
    mode: str = "classify",
    n_classes: int | None = None,
) -> Tree:
    """Grow one CART tree. ``y`` must be encoded 0..n_classes-1 for
    classification. With max_features=None this is plain CART."""
    params = params or ForestParams()
    rng = rng or np.random.default_rng(0)
    if variant not in ("rf", "et"):
        raise ModelError(f"unknown variant {variant!r}")
    if mode not in ("classify", "regress"):
        raise ModelError(f"unknown mode {mode!r}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ModelError("X must be a non-empty 2-D array")
    y = np.asarray(y)
    if mode == "classify":
        y = y.astype(np.int64)
        n_classes = n_classes or int(y.max()) + 1
    else:
        y = y.astype(np.float64)
    n, p = X.shape
    mf = params.resolve_max_features(p)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    n_samples: list[int] = []
    impurity: list[float] = []
    values: list = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n_samples.append(0)
        impurity.append(0.0)
        values.append(None)
        return len(feature) - 1

    binary = mode == "classify" and n_classes == 2
    columns = [np.ascontiguousarray(X[:, j]) for j in range(p)]

    root = new_node()
    stack: list[tuple[np.ndarray, int, int]] = [(np.arange(n), root, 0)]
    while stack:
        idx, nid, depth = stack.pop()
        yn = y[idx]
        m = len(idx)
        n_samples[nid] = m
        if binary:
            pos_count = int(yn.sum())
            values[nid] = np.array([m - pos_count, pos_count], dtype=np.float64)
            node_imp = 2.0 * pos_count * (m - pos_count) / (m * m)
            pure = pos_count == 0 or pos_count == m
        elif mode == "classify":
            counts = np.bincount(yn, minlength=n_classes).astype(np.float64)
            values[nid] = counts
            node_imp = gini(counts)
            pure = counts.max() == m
        else:
            mean = float(yn.mean())
            values[nid] = mean
            node_imp = float(np.var(yn))
            pure = bool(np.all(yn == yn[0]))
        impurity[nid] = node_imp
        if (
            pure
            or m < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            continue
        cand = rng.permutation(p)[:mf] if mf < p else np.arange(p)
        Xn = np.empty((m, len(cand)))
        for t, j in enumerate(cand):
            Xn[:, t] = columns[j][idx]
        pos = yn.astype(np.float64) if binary else (
            (yn == 1).astype(np.float64) if mode == "classify" else None
        )
        if variant == "rf":
            w, thr = _split_rf(Xn, yn, pos, mode, n_classes)
        else:
            w, thr = _split_et(Xn, yn, pos, mode, n_classes, rng)
        j = int(np.argmin(w))
        if not np.isfinite(w[j]) or node_imp - w[j] <= 0.0:
            continue  # no impurity-reducing split exists among the candidates
        feature[nid] = int(cand[j])
        threshold[nid] = thr[j].item() if hasattr(thr[j], "item") else float(thr[j])
        go_left = Xn[:, j] <= thr[j]
        lid = new_node()
        rid = new_node()
        left[nid], right[nid] = lid, rid
        stack.append((idx[go_left], lid, depth + 1))
        stack.append((idx[~go_left], rid, depth + 1))

    if mode == "classify":
        value_arr = np.vstack(values)
    else:
        value_arr = np.array(values, dtype=np.float64)
    return Tree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        n_samples=np.array(n_samples, dtype=np.int64),
        impurity=np.array(impurity, dtype=np.float64),
        value=value_arr,
        mode=mode,
    )


@dataclass
class ForestModel:
    """A fitted ensemble: CART trees, RF or ET variant, classify or regress."""

    trees: list[Tree]
    mode: str
    variant: str
    params: ForestParams
    seed: int
    n_features: int
    classes: np.ndarray | None = None
    descriptor_hash: str | None = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _check(self, X: np.ndarray, descriptor_hash: str | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(
                f"feature count mismatch: model expects {self.n_features}, got {X.shape}"
            )
        if (
            descriptor_hash is not None
            and self.descriptor_hash is not None
            and descriptor_hash != self.descriptor_hash
        ):
            raise ModelError("descriptor hash mismatch between model and matrix")
        return X

    def predict(self, X: np.ndarray, descriptor_hash: str | None = None) -> np.ndarray:
        """Majority vote (mean class-probability tie-break) or mean of tree means."""
        X = self._check(X, descriptor_hash)
        if self.mode == "regress":
            acc = np.zeros(len(X))
            for t in self.trees:
                acc += t.predict(X)
            return acc / self.n_trees
        n_classes = len(self.classes)
        votes = np.zeros((len(X), n_classes))
        proba = np.zeros((len(X), n_classes))
        for t in self.trees:
            pr = t.predict_proba(X)
            proba += pr
            votes[np.arange(len(X)), np.argmax(pr, axis=1)] += 1
        top = votes.max(axis=1, keepdims=True)
        tied = votes == top
        # Tie-break by mean probability, masked to the tied classes.
        decide = np.where(tied, proba, -1.0)
        return self.classes[np.argmax(decide, axis=1)]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        if self.mode != "classify":
            raise ModelError("predict_proba requires a classification model")
        proba = np.zeros((len(X), len(self.classes)))
        for t in self.trees:
            proba += t.predict_proba(X)
        return proba / self.n_trees

    def gini_importance(self) -> np.ndarray:
        """Impurity decrease per feature, averaged over trees, normalized to sum 1.

        Regression models use the variance-reduction analogue.
        """
        acc = np.zeros(self.n_features)
        for t in self.trees:
            acc += t.feature_importance(self.n_features)
        acc /= self.n_trees
        total = acc.sum()
        return acc / total if total > 0 else acc

    # -- serialization -----------------------------------------------------

    def to_blob(self) -> bytes:
        payload = {
            "format": BLOB_FORMAT_VERSION,
            "mode": self.mode,
            "variant": self.variant,
            "params": asdict(self.params),
            "seed": self.seed,
            "n_features": self.n_features,
            "classes": None if self.classes is None else self.classes.tolist(),
            "descriptor_hash": self.descriptor_hash,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "n_samples": t.n_samples.tolist(),
                    "impurity": t.impurity.tolist(),
                    "value": t.value.tolist(),
                }
                for t in self.trees
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_blob(cls, blob: bytes) -> "ForestModel":
        payload = json.loads(blob.decode())
        if payload.get("format") != BLOB_FORMAT_VERSION:
            raise ModelError(f"unsupported model blob format {payload.get('format')!r}")
        mode = payload["mode"]
        trees = []
        for td in payload["trees"]:
            value = np.array(td["value"], dtype=np.float64)
            trees.append(
                Tree(
                    feature=np.array(td["feature"], dtype=np.int32),
                    threshold=np.array(td["threshold"], dtype=np.float64),
                    left=np.array(td["left"], dtype=np.int32),
                    right=np.array(td["right"], dtype=np.int32),
                    n_samples=np.array(td["n_samples"], dtype=np.int64),
                    impurity=np.array(td["impurity"], dtype=np.float64),
                    value=value,
                    mode=mode,
                )
            )
        classes = payload["classes"]
        return cls(
            trees=trees,
            mode=mode,
            variant=payload["variant"],
            params=ForestParams(**payload["params"]),
            seed=payload["seed"],
            n_features=payload["n_features"],
            classes=None if classes is None else np.array(classes),
            descriptor_hash=payload["descriptor_hash"],
        )


def _tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(tree_index,)))


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    mode: str = "classify",
    variant: str = "et",
    params: ForestParams | None = None,
    seed: int = 0,
    descriptor_hash: str | None = None,
    n_jobs: int = 1,
) -> ForestModel:
    """Fit an ensemble. RF draws a bootstrap sample per tree; ET uses the full
    sample. Deterministic given the seed."""
    params = params or ForestParams()
    if params.n_trees < 1:
        raise ModelError("n_trees must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ModelError("X must be a non-empty 2-D array")
    y = np.asarray(y)
    classes = None
    if mode == "classify":
        classes, y_enc = np.unique(y, return_inverse=True)
        n_classes = len(classes)
    else:
        y_enc = y.astype(np.float64)
        n_classes = None
    n = len(X)

    def build(i: int) -> Tree:
        rng = _tree_rng(seed, i)
        if variant == "rf":
            idx = rng.integers(0, n, n)
            Xi, yi = X[idx], y_enc[idx]
        else:
            Xi, yi = X, y_enc
        return fit_tree(Xi, yi, params=params, rng=rng, variant=variant, mode=mode,
                        n_classes=n_classes)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(build, range(params.n_trees)))
    else:
        trees = [build(i) for i in range(params.n_trees)]
    return ForestModel(
        trees=trees,
        mode=mode,
        variant=variant,
        params=params,
        seed=seed,
        n_features=X.shape[1],
        classes=classes,
        descriptor_hash=descriptor_hash,
    )
