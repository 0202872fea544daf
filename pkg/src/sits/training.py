"""Adam, plateau learning-rate halving, early stopping with best-weight restoration."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .imbalance import ResampleConfig, adasyn, compute_class_weights, smote, undersample_majority
from .models import Model

log = logging.getLogger(__name__)

IMPROVEMENT_TOL = 1e-6


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 4096
    max_epochs: int = 1000
    plateau_patience: int = 20
    plateau_factor: float = 0.5
    lr_floor: float = 1e-6
    early_stop_patience: int = 40
    val_fraction: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0 < self.plateau_factor < 1:
            raise ValueError("plateau_factor must lie in (0, 1)")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patiences must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm)")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.lr_floor < 0:
            raise ValueError("lr_floor must be >= 0")

    @staticmethod
    def default_lr(variant: str) -> float:
        return 1e-4 if variant == "mlp" else 1e-3


# --------------------------------------------------------------------------
# optimizer and schedule
# --------------------------------------------------------------------------


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> None:
    """In-place Adam update of every array in ``params`` (name -> ndarray)."""
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class PlateauScheduler:
    """Halve the rate after ``patience`` epochs without improvement; stop after ``stop_patience``.

    An improvement is a loss below ``best - 1e-6``. The LR counter restarts
    after every reduction; the stop counter only restarts on improvement.
    """

    def __init__(self, lr, patience=20, factor=0.5, floor=1e-6, stop_patience=40, tol=IMPROVEMENT_TOL):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.floor = floor
        self.stop_patience = stop_patience
        self.tol = tol
        self.best = np.inf
        self.lr_wait = 0
        self.stop_wait = 0

    def update(self, val_loss: float) -> tuple[float, bool, bool]:
        """Returns (lr, stop, improved)."""
        improved = val_loss < self.best - self.tol
        if improved:
            self.best = val_loss
            self.lr_wait = 0
            self.stop_wait = 0
        else:
            self.lr_wait += 1
            self.stop_wait += 1
            if self.lr_wait >= self.patience:
                self.lr = max(self.lr * self.factor, self.floor)
                self.lr_wait = 0
        return self.lr, self.stop_wait >= self.stop_patience, improved


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    stop_epoch: int = 0
    best_epoch: int = 0
    wall_time: float = 0.0

    def __len__(self):
        return len(self.train_loss)

    def to_csv(self) -> str:
        """Epoch log; wall time is left out so equal runs give equal bytes."""
        lines = ["epoch,train_loss,val_loss,lr,best"]
        for i, (tl, vl, lr) in enumerate(zip(self.train_loss, self.val_loss, self.lr), start=1):
            lines.append(f"{i},{tl!r},{vl!r},{lr!r},{int(i == self.best_epoch)}")
        return "\n".join(lines) + "\n"

    def __eq__(self, other):
        if not isinstance(other, TrainReport):
            return NotImplemented
        return (self.train_loss == other.train_loss and self.val_loss == other.val_loss
                and self.lr == other.lr and self.stop_epoch == other.stop_epoch
                and self.best_epoch == other.best_epoch)


def internal_split(plot_ids, labels, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Plot-level stratified split; returns (train_rows, val_rows).

    Each class contributes round(fraction * n_plots) of its plots to validation.
    """
    plot_ids = np.asarray(plot_ids)
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    plots, first = np.unique(plot_ids, return_index=True)
    plot_lab = labels[first]
    val_plots = []
    for c in np.unique(plot_lab):
        cp = plots[plot_lab == c]
        n_val = int(np.floor(fraction * len(cp) + 0.5))
        if n_val >= len(cp):
            n_val = len(cp) - 1
        if n_val > 0:
            val_plots.append(rng.permutation(cp)[:n_val])
    val_plots = np.concatenate(val_plots) if val_plots else np.empty(0, dtype=plot_ids.dtype)
    is_val = np.isin(plot_ids, val_plots)
    return np.flatnonzero(~is_val), np.flatnonzero(is_val)


def _batches(n: int, batch_size: int, rng) -> list:
    order = rng.permutation(n)
    out = [order[s:s + batch_size] for s in range(0, n, batch_size)]
    if out and len(out[-1]) < 2:
        out.pop()
    return out


def _loss(model: Model, x, y, w, training: bool) -> ad.Tensor:
    return ad.weighted_cross_entropy(model.forward(x, training=training), y, w)


def eval_loss(model: Model, x, y, weights=None, chunk: int = 4096) -> float:
    """Eval-mode weighted cross-entropy over all rows."""
    k = model.cfg.n_classes
    w = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
    num = den = 0.0
    for s in range(0, len(x), chunk):
        xb, yb = x[s:s + chunk], y[s:s + chunk]
        loss = _loss(model, xb, yb, w, training=False)
        wsum = w[yb].sum()
        num += float(loss.data) * wsum
        den += wsum
    return num / den if den > 0 else float("nan")


def prepare_training_set(x, y, plot_ids, n_classes: int, imbalance: ResampleConfig):
    """Apply the imbalance strategy to a training slice; returns (x, y, class_weights)."""
    imbalance.validate()
    weights = None
    m = imbalance.method
    if m == "class_weight":
        weights = compute_class_weights(y, n_classes)
    elif m == "undersample":
        keep = undersample_majority(plot_ids, y, imbalance.undersample_plots, imbalance.seed)
        x, y = x[keep], y[keep]
    elif m in ("smote", "adasyn"):
        fn = smote if m == "smote" else adasyn
        x, y = fn(x, y, imbalance.k_neighbors, imbalance.seed, n_classes=n_classes)
    return x, y, weights


def train(model: Model, x, y, plot_ids, cfg: TrainConfig, imbalance: ResampleConfig | None = None,
          progress=None) -> TrainReport:
    """Fit ``model`` in place and return the epoch report.

    ``x`` must already be in the model's layout. 10 % of the plots (stratified)
    are held out for the validation loss that drives the schedule; the
    imbalance strategy only touches the remaining rows. On exit the
    parameters of the best validation epoch are restored.
    """
    cfg.validate()
    imbalance = imbalance or ResampleConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    k = model.cfg.n_classes
    report = TrainReport()
    if cfg.max_epochs == 0:
        return report
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain at least 2 classes")
    t0 = time.perf_counter()
    tr, va = internal_split(plot_ids, y, cfg.val_fraction, cfg.seed)
    missing = set(range(k)) - set(np.unique(y[va]).tolist())
    if len(va) and missing:
        warnings.warn(f"classes {sorted(missing)} absent from the internal validation split", stacklevel=2)
    xt, yt, weights = prepare_training_set(x[tr], y[tr], np.asarray(plot_ids)[tr], k, imbalance)
    if len(va):
        xv, yv = x[va], y[va]
    else:
        warnings.warn("no validation plots; monitoring the training loss", stacklevel=2)
        xv, yv = xt, yt
    val_weights = weights
    if val_weights is not None and val_weights[np.unique(yv)].sum() == 0:
        val_weights = None

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    params = {name: t.data for name, t in model.params.params.items()}
    state = AdamState()
    sched = PlateauScheduler(cfg.lr, cfg.plateau_patience, cfg.plateau_factor, cfg.lr_floor, cfg.early_stop_patience)
    lr = cfg.lr
    best_snap = model.params.snapshot()
    model.train()
    for epoch in range(1, cfg.max_epochs + 1):
        total = wsum = 0.0
        wv = np.ones(k) if weights is None else weights
        for idx in _batches(len(xt), cfg.batch_size, rng):
            model.params.zero_grad()
            loss = _loss(model, xt[idx], yt[idx], weights, training=True)
            loss.backward()
            adam_step(params, {n: t.grad for n, t in model.params.params.items()}, state, lr)
            bw = wv[yt[idx]].sum()
            total += float(loss.data) * bw
            wsum += bw
        train_loss = total / wsum if wsum > 0 else float("nan")
        val_loss = eval_loss(model, xv, yv, val_weights)
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        report.lr.append(lr)
        new_lr, stop, improved = sched.update(val_loss)
        if improved:
            best_snap = model.params.snapshot()
            report.best_epoch = epoch
        if progress is not None:
            progress(epoch, train_loss, val_loss, lr)
        log.debug("epoch %d train %.5f val %.5f lr %.2e", epoch, train_loss, val_loss, lr)
        report.stop_epoch = epoch
        lr = new_lr
        if stop:
            break
    model.params.restore(best_snap)
    model.eval()
    report.wall_time = time.perf_counter() - t0
    return report
