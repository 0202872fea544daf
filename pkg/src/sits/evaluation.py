"""Plot-level stratified k-fold CV, confusion matrices and F1-macro / OA / BA."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import SitsDataset
from .forest import ForestConfig, predict_forest, train_forest
from .imbalance import ResampleConfig
from .models import ModelConfig, build
from .preprocess import FeatureMatrix, as_layout, gapfill_dataset, standardize_apply, standardize_fit
from .training import TrainConfig, prepare_training_set, train

log = logging.getLogger(__name__)

Z95 = 1.96


@dataclass
class FoldAssignment:
    k: int
    folds: dict  # plot_id -> fold index

    def pixel_folds(self, plot_ids) -> np.ndarray:
        return np.array([self.folds[int(p)] for p in np.asarray(plot_ids)], dtype=np.int64)

    def plots_in(self, fold: int) -> list:
        return sorted(p for p, f in self.folds.items() if f == fold)


def stratified_group_kfold(plot_ids, plot_labels, k: int, seed: int = 0) -> FoldAssignment:
    """Shuffle plots within each class and deal them round-robin over the folds.

    ``plot_ids``/``plot_labels`` describe unique plots. Dealing continues from
    the fold after the one the previous class ended on, so small classes do
    not all pile into fold 0.
    """
    plot_ids = np.asarray(plot_ids)
    plot_labels = np.asarray(plot_labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(np.unique(plot_ids)) != len(plot_ids):
        raise ValueError("plot ids must be unique")
    if k > len(plot_ids):
        raise ValueError(f"k={k} exceeds the number of plots ({len(plot_ids)})")
    rng = np.random.default_rng(seed)
    folds = {}
    nxt = 0
    for c in np.unique(plot_labels):
        members = np.sort(plot_ids[plot_labels == c])
        for j, p in enumerate(rng.permutation(members)):
            folds[int(p)] = (nxt + j) % k
        nxt = (nxt + len(members)) % k
    return FoldAssignment(k, folds)


def dataset_folds(ds: SitsDataset, k: int, seed: int = 0) -> FoldAssignment:
    plots, labels = ds.plot_labels()
    return stratified_group_kfold(plots, labels, k, seed)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with entry (i, j) = true class i predicted as j."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    if len(y_true) and (min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    return np.bincount(y_true * n_classes + y_pred, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def normalize_rows(cm: np.ndarray) -> np.ndarray:
    rows = cm.sum(axis=1, keepdims=True).astype(float)
    return np.divide(cm, rows, out=np.zeros(cm.shape), where=rows > 0)


@dataclass
class Metrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    present: np.ndarray  # classes with at least one true sample
    f1_macro: float
    oa: float
    ba: float


def metrics(cm, exclude_absent: bool = False) -> Metrics:
    """Per-class precision/recall/F1 and F1-macro, OA, BA from a confusion matrix.

    Classes without true samples get recall 0 and are marked absent; with
    ``exclude_absent`` they are left out of the macro averages.
    """
    cm = np.asarray(cm, dtype=float)
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm)
    rows = cm.sum(axis=1)
    cols = cm.sum(axis=0)
    precision = np.divide(tp, cols, out=np.zeros_like(tp), where=cols > 0)
    recall = np.divide(tp, rows, out=np.zeros_like(tp), where=rows > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    present = rows > 0
    sel = present if exclude_absent else np.ones_like(present)
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        present=present,
        f1_macro=float(f1[sel].mean()),
        oa=float(tp.sum() / total),
        ba=float(recall[sel].mean()),
    )


def plot_level_recall(plot_ids, y_true, y_pred, n_classes: int, threshold: float = 0.5):
    """A plot is retrieved when its share of correct pixels is strictly above ``threshold``.

    Returns (per-class recall with NaN for classes without plots, mean over
    classes that have plots).
    """
    plot_ids = np.asarray(plot_ids)
    correct = np.asarray(y_true) == np.asarray(y_pred)
    plots, inv = np.unique(plot_ids, return_inverse=True)
    n_pix = np.bincount(inv)
    n_ok = np.bincount(inv, weights=correct.astype(float))
    first = np.zeros(len(plots), dtype=np.int64)
    first[inv[::-1]] = np.arange(len(inv))[::-1]
    plot_lab = np.asarray(y_true)[first]
    retrieved = n_ok / n_pix > threshold
    hits = np.bincount(plot_lab, weights=retrieved.astype(float), minlength=n_classes)
    totals = np.bincount(plot_lab, minlength=n_classes)
    recall = np.full(n_classes, np.nan)
    has = totals > 0
    recall[has] = hits[has] / totals[has]
    return recall, float(np.nanmean(recall))


def mean_ci(values) -> tuple[float, float]:
    """Mean and 95 % half-width 1.96 * s / sqrt(k) with s the sample std."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(v.mean()), float("nan")
    return float(v.mean()), float(Z95 * v.std(ddof=1) / np.sqrt(len(v)))


# --------------------------------------------------------------------------
# cross-validation
# --------------------------------------------------------------------------


@dataclass
class MetricsReport:
    class_names: tuple
    fold_metrics: list  # Metrics per fold
    fold_cms: list
    mean_cm: np.ndarray
    pooled: Metrics
    absent: list = field(default_factory=list)  # per fold: classes missing from its test set

    def summary(self, name: str) -> tuple[float, float]:
        return mean_ci([getattr(m, name) for m in self.fold_metrics])

    def to_csv(self) -> str:
        k = len(self.class_names)
        head = ["fold", "f1_macro", "oa", "ba"] + [f"f1_{c}" for c in self.class_names] \
            + [f"recall_{c}" for c in self.class_names] + ["absent_classes"]
        lines = [",".join(head)]
        for i, m in enumerate(self.fold_metrics):
            row = [str(i), repr(m.f1_macro), repr(m.oa), repr(m.ba)]
            row += [repr(float(v)) if m.present[j] else "" for j, v in enumerate(m.f1)]
            row += [repr(float(v)) if m.present[j] else "" for j, v in enumerate(m.recall)]
            row.append(";".join(self.class_names[j] for j in range(k) if not m.present[j]))
            lines.append(",".join(row))
        for stat in ("mean", "ci95"):
            idx = 0 if stat == "mean" else 1
            row = [stat] + [repr(self.summary(n)[idx]) for n in ("f1_macro", "oa", "ba")]
            for attr in ("f1", "recall"):
                for j in range(k):
                    vals = [getattr(m, attr)[j] for m in self.fold_metrics if m.present[j]]
                    row.append(repr(mean_ci(vals)[idx]) if vals else "")
            row.append("")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        out = []
        for name, label in (("f1_macro", "F1"), ("oa", "OA"), ("ba", "BA")):
            mean, ci = self.summary(name)
            out.append(f"{label:<4}{mean:.3f} ({ci:.3f})")
        out.append("")
        out.append(f"{'class':<14}{'precision':>10}{'recall':>8}{'f1':>8}")
        p = self.pooled
        for j, c in enumerate(self.class_names):
            out.append(f"{c:<14}{p.precision[j]:>10.3f}{p.recall[j]:>8.3f}{p.f1[j]:>8.3f}")
        return "\n".join(out)


def matrix_to_csv(cm: np.ndarray, class_names) -> str:
    lines = ["true\\pred," + ",".join(class_names)]
    for name, row in zip(class_names, cm):
        lines.append(name + "," + ",".join(repr(float(v)) if cm.dtype.kind == "f" else str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def fit_predict(classifier, train_x: FeatureMatrix, test_x: FeatureMatrix, n_classes: int,
                train_cfg: TrainConfig | None, imbalance: ResampleConfig, seed: int, threads: int = 1):
    """Train ``classifier`` (ModelConfig or ForestConfig) on standardized features, predict the test rows."""
    if isinstance(classifier, ForestConfig):
        x, y, weights = prepare_training_set(train_x.values, train_x.labels, train_x.plot_ids, n_classes, imbalance)
        cfg = ForestConfig(**{**classifier.__dict__, "seed": seed})
        if weights is not None:
            cfg.class_weights = weights
        forest = train_forest(x, y, cfg, n_classes=n_classes, threads=threads)
        pred, proba = predict_forest(forest, test_x.values)
        return pred, proba, None
    model = build(classifier, seed)
    tx = as_layout(train_x, classifier.layout)
    report = train(model, tx.values, tx.labels, tx.plot_ids, train_cfg, imbalance)
    pred, proba = model.predict(as_layout(test_x, classifier.layout).values)
    return pred, proba, report


@dataclass
class CVResult:
    report: MetricsReport
    folds: FoldAssignment
    pixel_fold: np.ndarray
    predictions: np.ndarray  # per pixel, in dataset order
    probabilities: np.ndarray
    train_reports: list


def run_cv(ds: SitsDataset, classifier, train_cfg: TrainConfig | None = None,
           imbalance: ResampleConfig | None = None, k: int = 10, seed: int = 0,
           threads: int = 1, folds: FoldAssignment | None = None, only_folds=None) -> CVResult:
    """k-fold plot-level CV: per fold standardize on train, resample train, fit, score test pixels."""
    imbalance = imbalance or ResampleConfig()
    if train_cfg is None and isinstance(classifier, ModelConfig):
        train_cfg = TrainConfig(lr=TrainConfig.default_lr(classifier.variant))
    n_classes = ds.n_classes
    plots, plot_lab = ds.plot_labels()
    if folds is None:
        folds = stratified_group_kfold(plots, plot_lab, k, seed)
    k = folds.k
    few = np.flatnonzero(np.bincount(plot_lab, minlength=n_classes) < k)
    if len(few):
        warnings.warn(f"classes {few.tolist()} have fewer plots than folds; some folds lack them", stacklevel=2)
    feats = gapfill_dataset(ds)
    pixel_fold = folds.pixel_folds(ds.plot_ids)
    pred_all = np.full(ds.n_pixels, -1, dtype=np.int64)
    proba_all = np.zeros((ds.n_pixels, n_classes))
    fold_metrics, fold_cms, absent, reports = [], [], [], []
    fold_list = range(k) if only_folds is None else only_folds
    for f in fold_list:
        test = np.flatnonzero(pixel_fold == f)
        tr = np.flatnonzero(pixel_fold != f)
        stats = standardize_fit(feats.rows(tr))
        train_x = standardize_apply(feats.rows(tr), stats)
        test_x = standardize_apply(feats.rows(test), stats)
        fold_seed = int(np.random.SeedSequence([seed, f]).generate_state(1)[0])
        imb = ResampleConfig(imbalance.method, imbalance.k_neighbors, imbalance.undersample_plots, fold_seed)
        tcfg = None
        if train_cfg is not None:
            tcfg = TrainConfig(**{**train_cfg.__dict__, "seed": fold_seed})
        pred, proba, rep = fit_predict(classifier, train_x, test_x, n_classes, tcfg, imb, fold_seed, threads)
        pred_all[test] = pred
        proba_all[test] = proba
        cm = confusion_matrix(test_x.labels, pred, n_classes)
        m = metrics(cm, exclude_absent=True)
        if not m.present.all():
            absent.append(np.flatnonzero(~m.present).tolist())
        else:
            absent.append([])
        fold_cms.append(cm)
        fold_metrics.append(m)
        reports.append(rep)
        log.info("fold %d: F1 %.3f OA %.3f BA %.3f", f, m.f1_macro, m.oa, m.ba)
    norm = np.array([normalize_rows(cm) for cm in fold_cms])
    present = np.array([cm.sum(axis=1) > 0 for cm in fold_cms])
    n_present = present.sum(axis=0)[:, None]
    mean_cm = np.divide(norm.sum(axis=0), n_present, out=np.zeros((n_classes, n_classes)), where=n_present > 0)
    done = pred_all >= 0
    pooled = metrics(confusion_matrix(ds.labels[done], pred_all[done], n_classes), exclude_absent=True)
    report = MetricsReport(ds.class_names, fold_metrics, fold_cms, mean_cm, pooled, absent)
    return CVResult(report, folds, pixel_fold, pred_all, proba_all, reports)

