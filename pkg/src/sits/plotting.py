"""PNG figures for the CLI reports (confusion matrices, training curves, CV scores).

Figures are rendered with the Agg backend and saved without a software tag,
so identical inputs give identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 100
_META = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=DPI, format="png", metadata=_META)
    plt.close(fig)


def plot_confusion(cm: np.ndarray, class_names, path, title: str = "Normalized confusion matrix") -> None:
    """Row-normalized matrix as a heat map with the value in every cell."""
    k = len(class_names)
    size = max(4.0, 0.55 * k + 2.0)
    fig, ax = plt.subplots(figsize=(size, size))
    im = ax.imshow(cm, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(k), labels=class_names, rotation=60, ha="right")
    ax.set_yticks(range(k), labels=class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    for i in range(k):
        for j in range(k):
            v = cm[i, j]
            ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=7,
                    color="white" if v > 0.5 else "black")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    fig.tight_layout()
    _save(fig, path)


def plot_training_curve(report, path) -> None:
    """Train/validation loss per epoch, learning rate on a second axis."""
    epochs = np.arange(1, len(report.train_loss) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, report.train_loss, label="train")
    ax.plot(epochs, report.val_loss, label="validation")
    if report.best_epoch:
        ax.axvline(report.best_epoch, color="grey", ls=":", lw=1, label="best epoch")
    ax.set_xlabel("epoch")
    ax.set_ylabel("weighted cross-entropy")
    ax.legend(loc="upper right")
    lr_ax = ax.twinx()
    lr_ax.step(epochs, report.lr, where="post", color="tab:red", lw=0.8)
    lr_ax.set_yscale("log")
    lr_ax.set_ylabel("learning rate", color="tab:red")
    fig.tight_layout()
    _save(fig, path)


def plot_cv_scores(report, path) -> None:
    """Per-fold F1/OA/BA and per-class F1 (mean and 95 % interval over folds)."""
    names = list(report.class_names)
    folds = np.arange(len(report.fold_metrics))
    fig, (a, b) = plt.subplots(1, 2, figsize=(11, 4), gridspec_kw={"width_ratios": [1, 2]})
    for attr, label in (("f1_macro", "F1"), ("oa", "OA"), ("ba", "BA")):
        a.plot(folds, [getattr(m, attr) for m in report.fold_metrics], marker="o", label=label)
    a.set_xlabel("fold")
    a.set_ylim(0, 1.02)
    a.legend(loc="lower left")
    means, cis = [], []
    for j in range(len(names)):
        vals = np.array([m.f1[j] for m in report.fold_metrics if m.present[j]])
        means.append(vals.mean() if len(vals) else np.nan)
        cis.append(1.96 * vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0)
    b.bar(range(len(names)), means, yerr=cis, capsize=3, color="tab:green")
    b.set_xticks(range(len(names)), labels=names, rotation=45, ha="right")
    b.set_ylim(0, 1.05)
    b.set_ylabel("F1 per class")
    fig.tight_layout()
    _save(fig, path)
