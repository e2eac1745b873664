import numpy as np
import pytest

from odorwatch.ensemble import (
    ForestModel,
    ForestParams,
    ModelError,
    fit_forest,
    fit_tree,
    gini,
)

from oracles import forest_tally_oracle, stump_oracle_loss

CART = ForestParams(max_features=None, min_samples_split=2)


def _blobs(rng, n=200, spread=0.6):
    """Two linearly separable 2-D point clouds."""
    half = n // 2
    a = rng.normal((-2, -2), spread, size=(half, 2))
    b = rng.normal((2, 2), spread, size=(n - half, 2))
    X = np.vstack([a, b])
    y = np.array([0] * half + [1] * (n - half))
    perm = rng.permutation(n)
    return X[perm], y[perm]


class TestGini:
    def test_pure_node_zero(self):
        assert gini(np.array([7.0, 0.0])) == pytest.approx(0.0, abs=1e-12)

    def test_balanced_binary_half(self):
        assert gini(np.array([5.0, 5.0])) == pytest.approx(0.5, abs=1e-12)

    def test_empty_zero(self):
        assert gini(np.array([0.0, 0.0])) == 0.0


class TestFitTree:
    def test_one_dimensional_split(self):
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([0, 0, 1, 1])
        tree = fit_tree(X, y, params=CART, rng=np.random.default_rng(0))
        assert 2.0 < tree.threshold[0] < 3.0
        assert np.array_equal(tree.predict(X), y)

    def test_training_loss_beats_stump(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 3))
        y = (X[:, 0] + 0.3 * rng.normal(size=20) > 0).astype(int)
        tree = fit_tree(X, y, params=CART, rng=rng)
        assert tree.training_loss() <= stump_oracle_loss(X, y, "classify") + 1e-12

    def test_regression_split_reduces_sse(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 2))
        y = 3.0 * (X[:, 1] > 0) + 0.1 * rng.normal(size=30)
        tree = fit_tree(X, y, params=CART, rng=rng, mode="regress")
        assert tree.training_loss() <= stump_oracle_loss(X, y, "regress") + 1e-12

    def test_empty_input_errors(self):
        with pytest.raises(ModelError):
            fit_tree(np.empty((0, 2)), np.array([]), params=CART)

    def test_split_never_worsens_impurity(self):
        # Sample-weighted child impurity never exceeds the parent's.
        rng = np.random.default_rng(3)
        for variant in ("rf", "et"):
            X = rng.normal(size=(120, 4))
            y = (X[:, 0] * X[:, 1] > 0).astype(int)
            tree = fit_tree(
                X, y, params=ForestParams(max_features=2, min_samples_split=4),
                rng=rng, variant=variant,
            )
            for nid in np.flatnonzero(tree.feature >= 0):
                l, r = tree.left[nid], tree.right[nid]
                parent = tree.n_samples[nid] * tree.impurity[nid]
                children = (
                    tree.n_samples[l] * tree.impurity[l]
                    + tree.n_samples[r] * tree.impurity[r]
                )
                assert children <= parent + 1e-9

    def test_max_depth_respected(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(200, 3))
        y = (X.sum(axis=1) > 0).astype(int)
        tree = fit_tree(
            X, y, params=ForestParams(max_features=None, min_samples_split=2, max_depth=3),
            rng=rng,
        )
        assert tree.depth() <= 3

    def test_monotone_transform_keeps_shape(self):
        # Plain CART is split-equivalent under a strictly monotone transform
        # of a feature: same split features and same node sample counts.
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 3))
        y = (X[:, 1] > 0.2).astype(int)
        t1 = fit_tree(X, y, params=CART, rng=np.random.default_rng(9))
        X2 = X.copy()
        X2[:, 1] = np.exp(X2[:, 1])  # strictly monotone
        t2 = fit_tree(X2, y, params=CART, rng=np.random.default_rng(9))
        assert np.array_equal(t1.feature, t2.feature)
        assert np.array_equal(t1.n_samples, t2.n_samples)


class TestForest:
    def test_single_tree_et_equals_tree(self):
        rng = np.random.default_rng(6)
        X, y = _blobs(rng, n=80)
        model = fit_forest(X, y, variant="et", params=ForestParams(n_trees=1), seed=11)
        grid = rng.normal(size=(40, 2))
        tree_pred = model.classes[model.trees[0].predict(grid)]
        assert np.array_equal(model.predict(grid), tree_pred)

    def test_same_seed_identical(self):
        rng = np.random.default_rng(7)
        X, y = _blobs(rng, n=100)
        held = rng.normal(size=(50, 2))
        a = fit_forest(X, y, variant="rf", params=ForestParams(n_trees=20), seed=3)
        b = fit_forest(X, y, variant="rf", params=ForestParams(n_trees=20), seed=3)
        assert np.array_equal(a.predict(held), b.predict(held))
        assert a.to_blob() == b.to_blob()

    def test_seed_invariant_to_thread_count(self):
        rng = np.random.default_rng(8)
        X, y = _blobs(rng, n=100)
        a = fit_forest(X, y, variant="et", params=ForestParams(n_trees=8), seed=5, n_jobs=1)
        b = fit_forest(X, y, variant="et", params=ForestParams(n_trees=8), seed=5, n_jobs=2)
        assert a.to_blob() == b.to_blob()

    @pytest.mark.parametrize("variant", ["rf", "et"])
    def test_blobs_heldout_accuracy(self, variant):
        rng = np.random.default_rng(9)
        X, y = _blobs(rng, n=400)
        Xte, yte = _blobs(np.random.default_rng(10), n=200)
        model = fit_forest(X, y, variant=variant, params=ForestParams(n_trees=200), seed=1)
        acc = np.mean(model.predict(Xte) == yte)
        assert acc >= 0.95

    def test_all_identical_labels(self):
        X = np.random.default_rng(11).normal(size=(30, 2))
        y = np.full(30, 4)
        model = fit_forest(X, y, params=ForestParams(n_trees=5), seed=0)
        assert np.all(model.predict(X) == 4)

    def test_vote_matches_tally_oracle(self):
        rng = np.random.default_rng(12)
        X, y = _blobs(rng, n=150, spread=2.5)  # overlap forces split votes
        model = fit_forest(X, y, variant="rf", params=ForestParams(n_trees=15), seed=2)
        rows = rng.normal(size=(100, 2)) * 2
        expect = model.classes[forest_tally_oracle(model.trees, rows)]
        assert np.array_equal(model.predict(rows), expect)

    def test_feature_count_mismatch_errors(self):
        rng = np.random.default_rng(13)
        X, y = _blobs(rng, n=50)
        model = fit_forest(X, y, params=ForestParams(n_trees=2), seed=0)
        with pytest.raises(ModelError):
            model.predict(np.zeros((3, 5)))

    def test_descriptor_hash_mismatch_errors(self):
        rng = np.random.default_rng(14)
        X, y = _blobs(rng, n=50)
        model = fit_forest(X, y, params=ForestParams(n_trees=2), seed=0,
                           descriptor_hash="abc123")
        with pytest.raises(ModelError):
            model.predict(X, descriptor_hash="different")
        model.predict(X, descriptor_hash="abc123")

    def test_n_trees_validation(self):
        with pytest.raises(ModelError):
            fit_forest(np.zeros((4, 1)), np.zeros(4), params=ForestParams(n_trees=0))

    def test_regression_mean_of_tree_means(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(100, 2))
        y = 2.0 * X[:, 0] + rng.normal(0, 0.1, 100)
        model = fit_forest(X, y, mode="regress", variant="et",
                           params=ForestParams(n_trees=30), seed=0)
        rows = rng.normal(size=(20, 2))
        expect = np.mean([t.predict(rows) for t in model.trees], axis=0)
        np.testing.assert_allclose(model.predict(rows), expect)

    def test_training_accuracy_trend_in_n_trees(self):
        # Monotone trend of mean training accuracy across 20 seeds.
        rng = np.random.default_rng(16)
        X, y = _blobs(rng, n=120, spread=2.0)
        sizes = (1, 5, 25)
        means = []
        for n_trees in sizes:
            accs = [
                np.mean(
                    fit_forest(X, y, variant="rf",
                               params=ForestParams(n_trees=n_trees, min_samples_split=16),
                               seed=s).predict(X) == y
                )
                for s in range(20)
            ]
            means.append(np.mean(accs))
        assert means[0] <= means[1] + 0.002
        assert means[1] <= means[2] + 0.002


class TestImportance:
    def test_single_informative_feature_dominates(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(300, 4))
        y = (X[:, 0] > 0).astype(int)
        model = fit_forest(X, y, variant="rf", params=ForestParams(n_trees=50), seed=0)
        imp = model.gini_importance()
        assert imp[0] > 0.9

    def test_permuted_copy_scores_below_original(self):
        rng = np.random.default_rng(18)
        X = rng.normal(size=(300, 2))
        y = (X[:, 0] > 0).astype(int)
        X = np.column_stack([X, rng.permutation(X[:, 0])])
        model = fit_forest(X, y, variant="rf", params=ForestParams(n_trees=50), seed=0)
        imp = model.gini_importance()
        assert imp[2] < imp[0]

    def test_importances_sum_to_one(self):
        rng = np.random.default_rng(19)
        X, y = _blobs(rng, n=100)
        model = fit_forest(X, y, params=ForestParams(n_trees=10), seed=0)
        assert abs(model.gini_importance().sum() - 1.0) < 1e-9

    def test_regression_variance_analogue(self):
        rng = np.random.default_rng(20)
        X = rng.normal(size=(200, 3))
        y = 5.0 * X[:, 2] + rng.normal(0, 0.2, 200)
        model = fit_forest(X, y, mode="regress", variant="rf",
                           params=ForestParams(n_trees=30), seed=0)
        imp = model.gini_importance()
        assert imp[2] > 0.8


class TestSerialization:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(21)
        X, y = _blobs(rng, n=80)
        model = fit_forest(X, y, variant="et", params=ForestParams(n_trees=7), seed=4)
        blob = model.to_blob()
        clone = ForestModel.from_blob(blob)
        rows = rng.normal(size=(40, 2))
        assert np.array_equal(model.predict(rows), clone.predict(rows))
        assert clone.to_blob() == blob

    def test_regression_round_trip(self):
        rng = np.random.default_rng(22)
        X = rng.normal(size=(60, 2))
        y = X[:, 0] * 3.0
        model = fit_forest(X, y, mode="regress", params=ForestParams(n_trees=4), seed=1)
        clone = ForestModel.from_blob(model.to_blob())
        rows = rng.normal(size=(10, 2))
        np.testing.assert_array_equal(model.predict(rows), clone.predict(rows))

    def test_unknown_format_rejected(self):
        with pytest.raises(ModelError):
            ForestModel.from_blob(b'{"format": 99}')
