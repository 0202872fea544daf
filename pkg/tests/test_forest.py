import numpy as np
import pytest

from sits.forest import (
    DecisionTree,
    ForestConfig,
    RandomForest,
    load_forest,
    predict_forest,
    save_forest,
    train_forest,
    train_tree,
    weighted_gini,
)


def consistent_data(n=300, f=6, k=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, f))
    y = rng.integers(0, k, size=n)
    return X, y


def test_weighted_gini_hand_value():
    assert weighted_gini([0, 0, 1, 1], [1, 1, 3, 3], 2) == pytest.approx(0.375, abs=1e-15)
    assert weighted_gini([1, 1, 1], [1, 2, 3], 2) == 0.0


def test_separable_gives_depth_one_stump():
    X = np.array([[0.1, 5.0], [0.2, -1.0], [0.4, 3.0], [0.6, 0.0], [0.9, 2.0]])
    y = np.array([0, 0, 0, 1, 1])
    tree = train_tree(X, y, features_per_split=2)
    assert tree.depth() == 1
    assert tree.feature[0] == 0
    assert 0.4 < tree.threshold[0] < 0.6
    assert tree.threshold[0] == pytest.approx(0.5)


def test_pure_labels_single_leaf():
    X, _ = consistent_data(20)
    tree = train_tree(X, np.ones(20, dtype=int), n_classes=2)
    assert tree.n_nodes == 1 and tree.feature[0] == -1


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        train_tree(np.zeros((0, 3)), np.zeros(0, dtype=int))
    with pytest.raises(ValueError):
        train_forest(np.zeros((0, 3)), np.zeros(0, dtype=int), ForestConfig(n_trees=2))


def test_tie_break_lower_feature():
    # features 0 and 1 are identical: both give the same gain
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0, 0, 1, 1])
    for seed in range(5):
        state = np.array([seed + 1], dtype=np.uint64)
        tree = train_tree(X, y, rng_state=state, features_per_split=2)
        assert tree.feature[0] == 0


def test_fully_grown_tree_fits_training_data():
    X, y = consistent_data()
    tree = train_tree(X, y, features_per_split=2)
    assert np.array_equal(tree.predict(X), y)
    # every internal node splits into two non-empty children
    internal = tree.feature >= 0
    assert np.all(tree.value[tree.left[internal]].sum(1) > 0)
    assert np.all(tree.value[tree.right[internal]].sum(1) > 0)
    leaves = ~internal
    assert np.all((tree.value[leaves] > 0).sum(1) == 1)


def test_forest_without_bootstrap_training_accuracy():
    X, y = consistent_data()
    rf = train_forest(X, y, ForestConfig(n_trees=5, bootstrap=False, seed=2))
    assert np.array_equal(predict_forest(rf, X)[0], y)


def test_forest_with_bootstrap_training_accuracy():
    X, y = consistent_data(seed=4)
    rf = train_forest(X, y, ForestConfig(n_trees=60, seed=1))
    assert np.mean(predict_forest(rf, X)[0] == y) == 1.0


def test_single_tree_on_pure_data():
    X, _ = consistent_data(40)
    y = np.full(40, 2)
    rf = train_forest(X, y, ForestConfig(n_trees=1), n_classes=3)
    assert np.mean(predict_forest(rf, X)[0] == y) == 1.0


def test_determinism_and_thread_invariance():
    X, y = consistent_data(200, seed=3)
    cfg = ForestConfig(n_trees=8, seed=11)
    a = train_forest(X, y, cfg)
    assert a == train_forest(X, y, cfg)
    assert a == train_forest(X, y, cfg, threads=3)
    assert not a == train_forest(X, y, ForestConfig(n_trees=8, seed=12))


def test_monotone_rescaling_keeps_predictions():
    X, y = consistent_data(250, seed=5)
    cfg = ForestConfig(n_trees=10, seed=3)
    base = predict_forest(train_forest(X, y, cfg), X)[0]
    Z = X.copy()
    Z[:, 2] = np.exp(3 * Z[:, 2]) + 7.0
    scaled = train_forest(Z, y, cfg)
    # thresholds are midpoints, so compare on the training values themselves
    assert np.array_equal(predict_forest(scaled, Z)[0], base)
    ref = train_forest(X, y, cfg)
    assert all(np.array_equal(a.feature, b.feature) for a, b in zip(ref.trees, scaled.trees))


def test_vote_ties_and_shares():
    leaf = lambda c: DecisionTree(np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]),
                                  np.eye(3)[[c]])
    rf = RandomForest(ForestConfig(n_trees=2), 3, 2, [leaf(1), leaf(0)])
    labels, shares = predict_forest(rf, np.zeros((4, 2)))
    assert labels.tolist() == [0] * 4
    np.testing.assert_allclose(shares.sum(1), 1.0)
    agree = RandomForest(ForestConfig(n_trees=3), 3, 2, [leaf(2)] * 3)
    assert predict_forest(agree, np.zeros((1, 2)))[0].tolist() == [2]


def test_shape_mismatch():
    X, y = consistent_data(30)
    rf = train_forest(X, y, ForestConfig(n_trees=2))
    with pytest.raises(ValueError):
        predict_forest(rf, np.zeros((3, 5)))


def test_class_weights_shift_leaf_votes():
    # one point of class 1 duplicated inside class-0 territory; weighting flips the vote
    X = np.array([[0.0], [0.0], [0.0], [1.0]])
    y = np.array([0, 0, 1, 1])
    plain = train_forest(X, y, ForestConfig(n_trees=1, bootstrap=False, features_per_split=1))
    weighted = train_forest(X, y, ForestConfig(n_trees=1, bootstrap=False, features_per_split=1,
                                               class_weights=np.array([1.0, 3.0])))
    assert predict_forest(plain, [[0.0]])[0].tolist() == [0]
    assert predict_forest(weighted, [[0.0]])[0].tolist() == [1]


def test_checkpoint_round_trip(tmp_path):
    X, y = consistent_data(80, seed=8)
    rf = train_forest(X, y, ForestConfig(n_trees=3, seed=5))
    save_forest(rf, tmp_path / "f.txt", {"bands": 2})
    back, meta = load_forest(tmp_path / "f.txt")
    assert back == rf and meta == {"bands": "2"}
    save_forest(back, tmp_path / "g.txt", {"bands": 2})
    assert (tmp_path / "f.txt").read_bytes() == (tmp_path / "g.txt").read_bytes()
