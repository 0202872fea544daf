import numpy as np
import pytest
from oracles import naive_confusion, naive_metrics

from sits.dataset import SynthConfig, TimeGrid, generate_synthetic
from sits.evaluation import (
    MetricsReport,
    confusion_matrix,
    dataset_folds,
    matrix_to_csv,
    mean_ci,
    metrics,
    normalize_rows,
    plot_level_recall,
    run_cv,
    stratified_group_kfold,
)
from sits.forest import ForestConfig
from sits.models import ModelConfig
from sits.training import TrainConfig


def test_kfold_exact_divisibility():
    plots = np.arange(20)
    labels = np.array([0] * 10 + [1] * 10)
    fa = stratified_group_kfold(plots, labels, 2, seed=0)
    for f in range(2):
        members = fa.plots_in(f)
        assert sum(labels[p] == 0 for p in members) == 5
        assert sum(labels[p] == 1 for p in members) == 5


def test_kfold_robinia_scale():
    plots = np.arange(20)
    fa = stratified_group_kfold(plots, np.zeros(20, int), 10, seed=3)
    assert [len(fa.plots_in(f)) for f in range(10)] == [2] * 10


def test_kfold_partition_and_balance():
    rng = np.random.default_rng(0)
    plots = np.arange(500) * 7 + 3
    labels = rng.integers(0, 6, size=500)
    fa = stratified_group_kfold(plots, labels, 10, seed=1)
    union = set()
    for f in range(10):
        part = set(fa.plots_in(f))
        assert not (union & part)
        union |= part
    assert union == set(plots.tolist())
    for c in range(6):
        per = [sum(1 for p in fa.plots_in(f) if labels[(p - 3) // 7] == c) for f in range(10)]
        assert max(per) - min(per) <= 1


def test_kfold_small_classes_spread():
    plots = np.arange(9)
    labels = np.array([0, 0, 0, 1, 2, 3, 4, 5, 6])
    fa = stratified_group_kfold(plots, labels, 3, seed=0)
    sizes = [len(fa.plots_in(f)) for f in range(3)]
    assert sizes == [3, 3, 3]


def test_kfold_errors_and_determinism():
    with pytest.raises(ValueError):
        stratified_group_kfold(np.arange(3), np.zeros(3, int), 4)
    with pytest.raises(ValueError):
        stratified_group_kfold(np.arange(3), np.zeros(3, int), 1)
    a = stratified_group_kfold(np.arange(50), np.arange(50) % 3, 5, seed=9)
    b = stratified_group_kfold(np.arange(50), np.arange(50) % 3, 5, seed=9)
    assert a.folds == b.folds


def test_confusion_examples():
    assert np.array_equal(confusion_matrix([0, 1, 2], [0, 1, 2], 3), np.eye(3, dtype=int))
    cm = confusion_matrix([0, 1, 2, 2], [0, 0, 0, 0], 3)
    assert np.count_nonzero(cm.sum(axis=0)) == 1
    with pytest.raises(ValueError):
        confusion_matrix([0, 1], [0], 2)


def test_metrics_match_counting_oracle():
    rng = np.random.default_rng(42)
    yt = rng.integers(0, 10, size=1000)
    yp = np.where(rng.random(1000) < 0.6, yt, rng.integers(0, 10, size=1000))
    cm = confusion_matrix(yt, yp, 10)
    assert cm.tolist() == naive_confusion(yt, yp, 10)
    f1, oa, ba = naive_metrics(yt.tolist(), yp.tolist(), 10)
    m = metrics(cm)
    assert abs(m.f1_macro - f1) < 1e-12 and abs(m.oa - oa) < 1e-12 and abs(m.ba - ba) < 1e-12


def test_binary_hand_example():
    m = metrics(np.array([[5, 0], [5, 0]]))
    np.testing.assert_allclose(m.f1, [2 / 3, 0.0])
    assert m.f1_macro == pytest.approx(1 / 3)
    assert m.oa == 0.5 and m.ba == 0.5
    d = metrics(np.diag([3, 4, 5]))
    assert d.f1_macro == d.oa == d.ba == 1.0


def test_absent_class_flag():
    cm = np.array([[3, 1, 0], [0, 2, 0], [0, 0, 0]])
    m = metrics(cm)
    assert m.present.tolist() == [True, True, False]
    assert m.ba == pytest.approx((0.75 + 1.0 + 0.0) / 3)
    assert metrics(cm, exclude_absent=True).ba == pytest.approx((0.75 + 1.0) / 2)


def test_oa_is_pixel_weighted_recall_and_balanced_equality():
    rng = np.random.default_rng(1)
    yt = np.repeat(np.arange(4), 50)
    yp = np.where(rng.random(200) < 0.7, yt, rng.integers(0, 4, size=200))
    m = metrics(confusion_matrix(yt, yp, 4))
    assert abs(m.oa - m.ba) < 1e-12
    yt2 = np.repeat(np.arange(3), [10, 50, 140])
    yp2 = np.where(rng.random(200) < 0.7, yt2, 0)
    m2 = metrics(confusion_matrix(yt2, yp2, 3))
    assert abs(m2.oa - np.sum(m2.recall * np.array([10, 50, 140]) / 200)) < 1e-12


def test_normalize_rows():
    n = normalize_rows(np.array([[1, 3], [0, 0]]))
    assert n.tolist() == [[0.25, 0.75], [0.0, 0.0]]


def test_plot_recall_strict_threshold():
    def one_plot(n, ok):
        yt = np.zeros(n, int)
        yp = np.array([0] * ok + [1] * (n - ok))
        return plot_level_recall(np.zeros(n, int), yt, yp, 2, 0.5)[0][0]

    assert one_plot(8, 5) == 1.0
    assert one_plot(8, 4) == 0.0
    yt, yp = np.zeros(10, int), np.array([0] * 3 + [1] * 7)
    assert plot_level_recall(np.zeros(10, int), yt, yp, 2, 0.2)[0][0] == 1.0
    assert plot_level_recall(np.zeros(10, int), yt, yp, 2, 0.5)[0][0] == 0.0


def test_plot_recall_per_class_and_mean():
    plots = np.array([1, 1, 2, 2, 3, 3])
    yt = np.array([0, 0, 0, 0, 1, 1])
    yp = np.array([0, 0, 1, 1, 1, 1])
    rec, mean = plot_level_recall(plots, yt, yp, 3)
    assert rec[:2].tolist() == [0.5, 1.0] and np.isnan(rec[2])
    assert mean == 0.75


def test_mean_ci():
    mean, ci = mean_ci([0.8, 0.9, 1.0])
    assert mean == pytest.approx(0.9)
    assert ci == pytest.approx(1.96 * 0.1 / np.sqrt(3))


def separable_dataset(seed=0, plots=(8, 8, 8)):
    return generate_synthetic(SynthConfig(
        plots_per_class=list(plots),
        base=[[0.1, 0.3], [0.3, 0.1], [0.2, 0.2]],
        amp=[[0.3, 0.0], [0.0, 0.3], [0.1, 0.1]],
        sos=100, eos=280, k_up=0.1, k_down=0.1,
        pixels_per_plot=(3, 6), noise_std=0.0, gap_prob=0.2,
        grid=TimeGrid(n_steps=12, n_bands=2, step_days=30), span_days=365, revisit_days=10, seed=seed,
    ))


def test_cv_integrity_brute_force():
    ds = separable_dataset()
    res = run_cv(ds, ForestConfig(n_trees=3), k=4, seed=2)
    tested = np.zeros(ds.n_pixels, int)
    for f in range(4):
        test = set(np.flatnonzero(res.pixel_fold == f).tolist())
        train = set(range(ds.n_pixels)) - test
        test_plots = {int(ds.plot_ids[i]) for i in test}
        train_plots = {int(ds.plot_ids[i]) for i in train}
        assert not test_plots & train_plots
        for i in test:
            tested[i] += 1
    assert np.all(tested == 1)
    assert np.all(res.predictions >= 0)


def test_cv_separable_mlp():
    ds = separable_dataset(1)
    cfg = TrainConfig(lr=1e-2, batch_size=32, max_epochs=60, plateau_patience=10, early_stop_patience=20)
    res = run_cv(ds, ModelConfig(n_classes=3, n_bands=2, n_steps=12, mlp_widths=(16,)), cfg, k=3, seed=0)
    assert res.report.summary("f1_macro")[0] >= 0.99
    rows = res.report.mean_cm.sum(axis=1)
    np.testing.assert_allclose(rows, 1.0)


def test_cv_deterministic_report():
    ds = separable_dataset(2)
    a = run_cv(ds, ForestConfig(n_trees=4), k=3, seed=5).report
    b = run_cv(ds, ForestConfig(n_trees=4), k=3, seed=5).report
    assert a.to_csv() == b.to_csv()
    assert matrix_to_csv(a.mean_cm, ds.class_names) == matrix_to_csv(b.mean_cm, ds.class_names)


def test_cv_one_plot_per_class_flags_absent():
    ds = separable_dataset(3, plots=(1, 1, 1))
    with pytest.warns(UserWarning, match="fewer plots"):
        res = run_cv(ds, ForestConfig(n_trees=2), k=2, seed=0)
    assert any(res.report.absent)
    csv = res.report.to_csv()
    assert "absent_classes" in csv.splitlines()[0]
    m = res.report.fold_metrics[0]
    assert m.f1_macro == pytest.approx(m.f1[m.present].mean())


def test_report_csv_layout():
    ds = separable_dataset(4)
    rep = run_cv(ds, ForestConfig(n_trees=2), k=3, seed=0).report
    assert isinstance(rep, MetricsReport)
    lines = rep.to_csv().splitlines()
    assert len(lines) == 1 + 3 + 2
    assert lines[-2].startswith("mean,") and lines[-1].startswith("ci95,")
    assert "F1" in rep.table()


def test_dataset_folds_cover_all_plots():
    ds = separable_dataset(5)
    fa = dataset_folds(ds, 4, seed=0)
    assert set(fa.folds) == set(np.unique(ds.plot_ids).tolist())
