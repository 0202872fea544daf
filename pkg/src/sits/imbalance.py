"""Class weights, SMOTE, ADASYN and majority-plot undersampling.

All functions act on a training slice only. Oversamplers return the original
rows unchanged as a prefix, followed by synthetic rows ordered by class index
and then by seed-sample index; synthetic rows carry ``SYNTHETIC_PLOT``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

METHODS = ("none", "class_weight", "smote", "adasyn", "undersample")
SYNTHETIC_PLOT = -1


@dataclass
class ResampleConfig:
    method: str = "none"
    k_neighbors: int = 5
    undersample_plots: int = 400
    seed: int = 0

    def __post_init__(self):
        self.method = self.method.replace("-", "_")

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown imbalance method {self.method!r}; allowed: {', '.join(METHODS)}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.undersample_plots < 1:
            raise ValueError("undersample_plots must be >= 1")


def compute_class_weights(labels, n_classes: int) -> np.ndarray:
    """Balanced inverse-frequency weights N / (K * N_k); absent classes get 0."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=n_classes).astype(float)
    n = counts.sum()
    w = np.zeros(n_classes)
    present = counts > 0
    w[present] = n / (n_classes * counts[present])
    if not present.all():
        warnings.warn(f"classes {np.flatnonzero(~present).tolist()} absent; weight set to 0", stacklevel=2)
    return w


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def nearest_neighbors(query: np.ndarray, ref: np.ndarray, k: int, exclude_self: bool, chunk: int = 1024) -> np.ndarray:
    """Indices into ``ref`` of the k Euclidean nearest neighbours of each query row.

    With ``exclude_self`` query row i is assumed to be ref row i and is skipped.
    Ties go to the lower reference index.
    """
    out = np.empty((len(query), k), dtype=np.int64)
    for s in range(0, len(query), chunk):
        d = _sq_dists(query[s:s + chunk], ref)
        if exclude_self:
            d[np.arange(len(d)), np.arange(s, s + len(d))] = np.inf
        part = np.argpartition(d, k - 1, axis=1)[:, :k] if k < d.shape[1] else np.tile(np.arange(d.shape[1]), (len(d), 1))
        rows = np.arange(len(d))[:, None]
        # stable order by (distance, index)
        order = np.lexsort((part, d[rows, part]), axis=1)
        out[s:s + len(d)] = part[rows, order]
    return out


def _class_k(n_c: int, k: int, name) -> int:
    if n_c < 2:
        raise ValueError(f"class {name} has a single sample; cannot oversample it")
    if k > n_c - 1:
        warnings.warn(f"k={k} capped at {n_c - 1} for class {name}", stacklevel=4)
        return n_c - 1
    return k


def _interpolate(x_class: np.ndarray, nn: np.ndarray, seeds: np.ndarray, rng) -> np.ndarray:
    """x_i + u * (x_nn - x_i) for each seed index i, a random one of its neighbours and u ~ U(0,1)."""
    pick = rng.integers(0, nn.shape[1], size=len(seeds))
    u = rng.random(len(seeds))[:, None]
    xi = x_class[seeds]
    xn = x_class[nn[seeds, pick]]
    return xi + u * (xn - xi)


def _assemble(X, y, plot_ids, new_x, new_y):
    if new_x:
        Xs = np.concatenate(new_x)
        ys = np.concatenate(new_y)
    else:
        Xs = np.empty((0,) + X.shape[1:])
        ys = np.empty(0, dtype=np.int64)
    X2 = np.concatenate([X, Xs.reshape((-1,) + X.shape[1:])])
    y2 = np.concatenate([y, ys])
    if plot_ids is None:
        return X2, y2
    p2 = np.concatenate([np.asarray(plot_ids), np.full(len(ys), SYNTHETIC_PLOT, dtype=np.int64)])
    return X2, y2, p2


def smote(X, y, k: int = 5, seed: int = 0, plot_ids=None, n_classes: int | None = None):
    """Oversample every class to the majority count.

    Returns ``(X', y')`` or ``(X', y', plot_ids')`` when ``plot_ids`` is given.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    shape = X.shape
    flat = X.reshape(len(X), -1)
    k_all = int(y.max()) + 1 if n_classes is None else n_classes
    counts = np.bincount(y, minlength=k_all)
    target = counts.max()
    rng = np.random.default_rng(seed)
    new_x, new_y = [], []
    for c in range(k_all):
        deficit = target - counts[c]
        if deficit == 0 or counts[c] == 0:
            continue
        kc = _class_k(counts[c], k, c)
        xc = flat[y == c]
        nn = nearest_neighbors(xc, xc, kc, exclude_self=True)
        seeds = np.sort(rng.integers(0, len(xc), size=deficit))
        new_x.append(_interpolate(xc, nn, seeds, rng).reshape((-1,) + shape[1:]))
        new_y.append(np.full(deficit, c, dtype=np.int64))
    return _assemble(X, y, plot_ids, new_x, new_y)


def largest_remainder(shares: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``shares`` (ties to lower index)."""
    shares = np.asarray(shares, dtype=float)
    raw = total * shares / shares.sum()
    alloc = np.floor(raw).astype(np.int64)
    rest = total - alloc.sum()
    if rest > 0:
        frac = raw - alloc
        order = np.lexsort((np.arange(len(frac)), -frac))
        alloc[order[:rest]] += 1
    return alloc


def adasyn_hardness(flat: np.ndarray, y: np.ndarray, c: int, k: int) -> np.ndarray:
    """Share of other-class points among each class-c sample's k neighbours in the full set."""
    members = np.flatnonzero(y == c)
    k_full = min(k, len(flat) - 1)
    nn = np.empty((len(members), k_full), dtype=np.int64)
    for s in range(0, len(members), 1024):
        q = members[s:s + 1024]
        d = _sq_dists(flat[q], flat)
        d[np.arange(len(q)), q] = np.inf
        part = np.argpartition(d, k_full - 1, axis=1)[:, :k_full]
        rows = np.arange(len(q))[:, None]
        order = np.lexsort((part, d[rows, part]), axis=1)
        nn[s:s + len(q)] = part[rows, order]
    return (y[nn] != c).sum(axis=1) / k_full


def adasyn_allocation(X, y, k: int = 5, n_classes: int | None = None) -> dict:
    """Synthetic count per sample of every class below the majority count.

    Maps class -> array aligned with that class's rows (in input order).
    """
    y = np.asarray(y, dtype=np.int64)
    flat = np.asarray(X, dtype=np.float64).reshape(len(y), -1)
    k_all = int(y.max()) + 1 if n_classes is None else n_classes
    counts = np.bincount(y, minlength=k_all)
    target = counts.max()
    out = {}
    for c in range(k_all):
        deficit = target - counts[c]
        if deficit == 0 or counts[c] == 0:
            continue
        _class_k(counts[c], k, c)
        r = adasyn_hardness(flat, y, c, k)
        if r.sum() == 0:
            warnings.warn(f"class {c} is isolated from other classes; uniform ADASYN allocation", stacklevel=3)
            r = np.ones_like(r)
        out[c] = largest_remainder(r, deficit)
    return out


def adasyn(X, y, k: int = 5, seed: int = 0, plot_ids=None, n_classes: int | None = None):
    """ADASYN: like :func:`smote` but the per-sample synthetic count follows neighbourhood hardness."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    shape = X.shape
    flat = X.reshape(len(X), -1)
    rng = np.random.default_rng(seed)
    new_x, new_y = [], []
    for c, alloc in adasyn_allocation(flat, y, k, n_classes).items():
        deficit = int(alloc.sum())
        xc = flat[y == c]
        kc = min(k, len(xc) - 1)  # the allocation step already warned about capping
        nn = nearest_neighbors(xc, xc, kc, exclude_self=True)
        seeds = np.repeat(np.arange(len(xc)), alloc)
        new_x.append(_interpolate(xc, nn, seeds, rng).reshape((-1,) + shape[1:]))
        new_y.append(np.full(deficit, c, dtype=np.int64))
    return _assemble(X, y, plot_ids, new_x, new_y)


def undersample_majority(plot_ids, labels, target_plots: int, seed: int = 0) -> np.ndarray:
    """Keep ``target_plots`` random plots of the class with most plots.

    Returns the sorted indices of the retained rows; whole plots are kept or
    dropped, other classes are untouched.
    """
    plot_ids = np.asarray(plot_ids)
    labels = np.asarray(labels)
    plots, first = np.unique(plot_ids, return_index=True)
    plot_lab = labels[first]
    counts = np.bincount(plot_lab)
    major = int(counts.argmax())
    major_plots = plots[plot_lab == major]
    if target_plots > len(major_plots):
        raise ValueError(f"cannot keep {target_plots} plots: majority class has only {len(major_plots)}")
    rng = np.random.default_rng(seed)
    keep = rng.choice(major_plots, size=target_plots, replace=False)
    mask = (labels != major) | np.isin(plot_ids, keep)
    return np.flatnonzero(mask)
