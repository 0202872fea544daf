import numpy as np
import pytest
from oracles import adasyn_oracle_allocation, brute_force_knn, on_some_segment

from sits.imbalance import (
    SYNTHETIC_PLOT,
    ResampleConfig,
    adasyn,
    adasyn_allocation,
    compute_class_weights,
    largest_remainder,
    nearest_neighbors,
    smote,
    undersample_majority,
)


def blobs(counts, dim=2, seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(c * spread, 1.0, size=(n, dim)) for c, n in enumerate(counts)])
    y = np.repeat(np.arange(len(counts)), counts)
    return X, y


def test_class_weights():
    w = compute_class_weights([0] * 9 + [1], 2)
    np.testing.assert_allclose(w, [10 / 18, 5.0])
    assert compute_class_weights([0, 1, 2, 0, 1, 2], 3).tolist() == [1.0, 1.0, 1.0]
    rng = np.random.default_rng(0)
    for _ in range(20):
        # every class present, otherwise the sum is N times the present share
        y = np.concatenate([np.arange(6), rng.integers(0, 6, size=rng.integers(10, 200))])
        k = 6
        w = compute_class_weights(y, k)
        counts = np.bincount(y, minlength=k)
        assert abs((w * counts).sum() - len(y)) < 1e-9


def test_class_weight_absent_class_flagged():
    with pytest.warns(UserWarning, match="absent"):
        w = compute_class_weights([0, 0, 2], 3)
    assert w[1] == 0


def test_smote_balances_and_keeps_prefix():
    X, y = blobs([100, 10, 25])
    X2, y2, p2 = smote(X, y, k=5, seed=1, plot_ids=np.arange(135))
    assert np.bincount(y2).tolist() == [100, 100, 100]
    assert np.array_equal(X2[:135], X) and np.array_equal(y2[:135], y)
    assert np.all(p2[135:] == SYNTHETIC_PLOT)
    assert np.array_equal(p2[:135], np.arange(135))


def test_smote_midpoint_rule():
    # two points: every synthetic lies on the segment between them
    X = np.array([[0.0, 0.0], [1.0, 1.0], [5, 5], [5, 6], [6, 5], [6, 6]])
    y = np.array([1, 1, 0, 0, 0, 0])
    X2, y2 = smote(X, y, k=1, seed=0)
    syn = X2[6:]
    assert np.allclose(syn[:, 0], syn[:, 1])
    assert np.all((syn >= 0) & (syn <= 1))


def test_smote_segments_brute_force():
    X, y = blobs([30, 6, 9], seed=3, spread=3.0)
    X2, y2 = smote(X, y, k=3, seed=5)
    for i in range(len(X), len(X2)):
        assert on_some_segment(X2[i], X[y == y2[i]])


def test_smote_neighbour_is_among_k_nearest():
    X, y = blobs([20, 8], seed=4, spread=4.0)
    X2, y2 = smote(X, y, k=2, seed=0)
    members = np.flatnonzero(y == 1)
    pts = [tuple(r) for r in X]
    for s in X2[len(X):]:
        ok = False
        for i in members:
            for j in brute_force_knn(pts, i, 2, members):
                d = X[j] - X[i]
                u = (s - X[i]) @ d / (d @ d)
                if -1e-12 <= u <= 1 + 1e-12 and np.linalg.norm(X[i] + u * d - s) < 1e-9:
                    ok = True
        assert ok


def test_smote_singleton_class_named():
    X, y = blobs([10, 1])
    with pytest.raises(ValueError, match="class 1"):
        smote(X, y)


def test_smote_caps_k_with_warning():
    X, y = blobs([10, 3])
    with pytest.warns(UserWarning, match="capped"):
        X2, y2 = smote(X, y, k=5)
    assert np.bincount(y2).tolist() == [10, 10]


def test_smote_deterministic():
    X, y = blobs([40, 7, 12])
    a, b = smote(X, y, seed=2), smote(X, y, seed=2)
    assert np.array_equal(a[0], b[0])
    assert not np.array_equal(a[0], smote(X, y, seed=3)[0])


def test_smote_channels_shape():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 2, 5))
    y = np.array([0] * 9 + [1] * 3)
    X2, y2 = smote(X, y, k=2)
    assert X2.shape == (18, 2, 5)


def test_largest_remainder():
    assert largest_remainder(np.array([0.2, 0.8]), 10).tolist() == [2, 8]
    assert largest_remainder(np.array([1.0, 1.0, 1.0]), 10).tolist() == [4, 3, 3]
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = rng.random(7)
        t = int(rng.integers(0, 50))
        a = largest_remainder(s, t)
        assert a.sum() == t
        assert np.all(np.abs(a - t * s / s.sum()) < 1)


def test_adasyn_allocation_matches_oracle_20_points():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(20, 2))
    y = np.array([0] * 13 + [1] * 7)
    X[13:] += 0.7
    got = adasyn_allocation(X, y, k=4)
    want = adasyn_oracle_allocation(X, y, 4)
    assert got.keys() == want.keys()
    for c in want:
        assert got[c].tolist() == want[c]


def test_adasyn_balances_and_segments():
    X, y = blobs([40, 8, 12], seed=6, spread=1.5)
    X2, y2 = adasyn(X, y, k=3, seed=0)
    assert np.bincount(y2).tolist() == [40, 40, 40]
    assert np.array_equal(X2[: len(X)], X)
    for i in range(len(X), len(X2)):
        assert on_some_segment(X2[i], X[y == y2[i]])


def test_adasyn_isolated_minority_point_gets_nothing():
    X = np.array([[0.0, 0], [0.1, 0], [0.2, 0], [0, 0.1], [10, 10], [10.1, 10], [10, 10.1], [10.1, 10.1], [0.1, 0.1]])
    y = np.array([0, 0, 0, 0, 1, 1, 1, 0, 0])
    # row 7 sits in the class-1 cluster with class-0 label, so only some class-1 points are hard
    with pytest.warns(UserWarning, match="capped"):
        alloc = adasyn_allocation(X, y, k=3)[1]
    pts = [tuple(r) for r in X]
    for a, i in zip(alloc, np.flatnonzero(y == 1)):
        hard = sum(y[j] != 1 for j in brute_force_knn(pts, i, 3, range(len(y))))
        if hard == 0:
            assert a == 0


def test_adasyn_fallback_warns():
    X = np.array([[0.0], [0.1], [0.2], [0.3], [0.4], [100.0], [100.1]])
    y = np.array([0, 0, 0, 0, 0, 1, 1])
    with pytest.warns(UserWarning, match="isolated"):
        X2, y2 = adasyn(X, y, k=1)
    assert np.bincount(y2).tolist() == [5, 5]


def test_undersample():
    plots = np.repeat(np.arange(60), 3)
    labels = np.where(plots < 50, 0, 1)
    keep = undersample_majority(plots, labels, 20, seed=0)
    kept_plots = np.unique(plots[keep][labels[keep] == 0])
    assert len(kept_plots) == 20
    assert np.sum(labels[keep] == 1) == 30
    # whole plots only
    for p in kept_plots:
        assert np.sum(plots[keep] == p) == 3
    assert len(undersample_majority(plots, labels, 50)) == len(plots)
    with pytest.raises(ValueError):
        undersample_majority(plots, labels, 51)


def test_undersample_paper_scale():
    plots = np.arange(3219 + 486)
    labels = np.where(plots < 3219, 3, 8)
    keep = undersample_majority(plots, labels, 400)
    assert np.sum(labels[keep] == 3) == 400 and np.sum(labels[keep] == 8) == 486


def test_resample_config():
    assert ResampleConfig("class-weight").method == "class_weight"
    with pytest.raises(ValueError, match="allowed"):
        ResampleConfig("oversample").validate()
    with pytest.raises(ValueError):
        ResampleConfig(k_neighbors=0).validate()


def test_nearest_neighbors_ties_lower_index():
    ref = np.array([[1.0], [-1.0], [1.0], [3.0]])
    nn = nearest_neighbors(np.array([[0.0]]), ref, 3, exclude_self=False)
    assert nn.tolist() == [[0, 1, 2]]
