"""Random forest of fully grown CART trees (weighted Gini, bagging, majority vote).

Tree induction and traversal are compiled with numba; a tree is a set of flat
node arrays. Each tree draws its bootstrap sample and feature subsets from an
RNG stream derived from ``(seed, tree_index)``, so the forest does not depend
on the order in which trees are trained.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

LEAF = -1


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | None = None  # None -> floor(sqrt(F))
    class_weights: np.ndarray | None = None
    bootstrap: bool = True
    seed: int = 0

    def validate(self, n_features: int | None = None) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if n_features is not None and self.features_per_split is not None:
            if not 1 <= self.features_per_split <= n_features:
                raise ValueError(f"features_per_split must lie in [1, {n_features}]")

    def mtry(self, n_features: int) -> int:
        if self.features_per_split is None:
            return max(1, int(np.floor(np.sqrt(n_features))))
        return self.features_per_split


@dataclass(eq=False)
class DecisionTree:
    """Flat node arrays; ``feature == -1`` marks a leaf. ``value`` holds the
    weighted class histogram of the training samples reaching each node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, x: np.ndarray) -> np.ndarray:
        leaves = _apply(self.feature, self.threshold, self.left, self.right, np.ascontiguousarray(x, dtype=np.float64))
        return _leaf_class(self.value)[leaves]

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("feature", "threshold", "left", "right", "value")
        )


def _leaf_class(value: np.ndarray) -> np.ndarray:
    # argmax picks the lowest index among ties
    return value.argmax(axis=1)


@dataclass(eq=False)
class RandomForest:
    config: ForestConfig
    n_classes: int
    n_features: int
    trees: list = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, RandomForest):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.n_features == other.n_features
            and len(self.trees) == len(other.trees)
            and all(a == b for a, b in zip(self.trees, other.trees))
        )


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _xorshift(state):
    x = state[0]
    x ^= (x << np.uint64(13)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(7)
    x ^= (x << np.uint64(17)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    state[0] = x
    return x


@numba.njit(cache=True, nogil=True)
def _gini(hist, total):
    if total <= 0.0:
        return 0.0
    s = 0.0
    for k in range(hist.shape[0]):
        p = hist[k] / total
        s += p * p
    return 1.0 - s


@numba.njit(cache=True, nogil=True)
def _build(X, presort, y, w, count, n_classes, mtry, max_depth, min_split, rng_state):
    """Grow one tree on the rows of X with per-row weight ``w`` and multiplicity ``count``.

    ``presort[f]`` lists the rows in ascending order of feature f; large nodes
    filter it instead of sorting.
    """
    n_rows, n_feat = X.shape
    node_of = np.zeros(n_rows, dtype=np.int64)
    srows = np.empty(n_rows, dtype=np.int64)
    cap = 2 * n_rows + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, n_classes))
    idx = np.arange(n_rows)
    # stack of (node, start, end, depth)
    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_dep = np.empty(cap, dtype=np.int64)
    sp = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n_rows
    st_dep[0] = 0
    sp = 1
    n_nodes = 1
    feats = np.arange(n_feat)
    vals = np.empty(n_rows)
    hist_l = np.zeros(n_classes)
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        dep = st_dep[sp]
        hist = value[node]
        n_samples = 0
        for r in range(lo, hi):
            i = idx[r]
            hist[y[i]] += w[i]
            n_samples += count[i]
        total = 0.0
        n_present = 0
        for k in range(n_classes):
            total += hist[k]
            if hist[k] > 0.0:
                n_present += 1
        if n_present <= 1 or n_samples < min_split or (max_depth >= 0 and dep >= max_depth):
            continue
        parent_imp = _gini(hist, total)
        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        # partial Fisher-Yates over all features; the first mtry are the sample,
        # the rest are only examined when the sample offers no positive gain
        for j in range(n_feat):
            feats[j] = j
        tried = 0
        while tried < n_feat:
            r = tried + np.int64(_xorshift(rng_state) % np.uint64(n_feat - tried))
            tmp = feats[tried]
            feats[tried] = feats[r]
            feats[r] = tmp
            f = feats[tried]
            tried += 1
            m = hi - lo
            if m * 8 > n_rows:
                p2 = 0
                for j in range(n_rows):
                    i = presort[f, j]
                    if node_of[i] == node:
                        srows[p2] = i
                        vals[p2] = X[i, f]
                        p2 += 1
            else:
                for r2 in range(m):
                    vals[r2] = X[idx[lo + r2], f]
                order = np.argsort(vals[:m])
                for r2 in range(m):
                    srows[r2] = idx[lo + order[r2]]
                for r2 in range(m):
                    vals[r2] = X[srows[r2], f]
            s_l = 0.0
            s_r = 0.0
            for k in range(n_classes):
                hist_l[k] = 0.0
                s_r += hist[k] * hist[k]
            wl = 0.0
            for p in range(m - 1):
                i = srows[p]
                c = y[i]
                wi = w[i]
                # sums of squared class weights, updated as row i moves left
                s_l += wi * (2.0 * hist_l[c] + wi)
                s_r += wi * (wi - 2.0 * (hist[c] - hist_l[c]))
                hist_l[c] += wi
                wl += wi
                v0 = vals[p]
                v1 = vals[p + 1]
                if v1 <= v0:
                    continue
                wr = total - wl
                g_l = 1.0 - s_l / (wl * wl) if wl > 0 else 0.0
                g_r = 1.0 - s_r / (wr * wr) if wr > 0 else 0.0
                gain = total * parent_imp - wl * g_l - wr * g_r
                thr = v0 + (v1 - v0) * 0.5
                if thr >= v1:
                    thr = v0
                better = False
                if gain > best_gain:
                    better = True
                elif gain == best_gain and best_f >= 0:
                    if f < best_f or (f == best_f and thr < best_thr):
                        better = True
                if better:
                    best_gain = gain
                    best_f = f
                    best_thr = thr
            if tried >= mtry and best_f >= 0 and best_gain > 1e-12 * total:
                break
        if best_f < 0 or best_gain <= 1e-12 * total:
            continue
        # partition idx[lo:hi] in place, keeping relative order
        nl = 0
        for r in range(lo, hi):
            if X[idx[r], best_f] <= best_thr:
                nl += 1
        tmp_idx = idx[lo:hi].copy()
        a = lo
        b = lo + nl
        for r in range(hi - lo):
            i = tmp_idx[r]
            if X[i, best_f] <= best_thr:
                idx[a] = i
                node_of[i] = n_nodes
                a += 1
            else:
                idx[b] = i
                node_of[i] = n_nodes + 1
                b += 1
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode
        st_node[sp] = rnode
        st_lo[sp] = lo + nl
        st_hi[sp] = hi
        st_dep[sp] = dep + 1
        sp += 1
        st_node[sp] = lnode
        st_lo[sp] = lo
        st_hi[sp] = lo + nl
        st_dep[sp] = dep + 1
        sp += 1
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


def weighted_gini(labels, weights, n_classes: int) -> float:
    """1 - sum_k p_k^2 with p_k the weight share of class k."""
    hist = np.bincount(np.asarray(labels), weights=np.asarray(weights, dtype=float), minlength=n_classes)
    return float(_gini(hist, hist.sum()))


def _tree_seeds(seed: int, index: int):
    ss = np.random.SeedSequence([int(seed), int(index)])
    boot, feat = ss.spawn(2)
    state = feat.generate_state(1, dtype=np.uint64)
    if state[0] == 0:
        state[0] = 0x9E3779B97F4A7C15
    return np.random.default_rng(boot), state


def train_tree(X, y, weights=None, rng_state=None, n_classes: int | None = None,
               features_per_split: int | None = None, max_depth: int | None = None,
               min_samples_split: int = 2, counts=None, presort=None) -> DecisionTree:
    """Grow one CART tree.

    ``weights`` are per-row sample weights (class weight times bootstrap
    multiplicity); ``counts`` the multiplicities used for ``min_samples_split``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("train_tree needs a non-empty 2-D sample matrix")
    if len(y) != len(X):
        raise ValueError("labels must align with rows")
    n, f = X.shape
    k = int(y.max()) + 1 if n_classes is None else n_classes
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    c = np.ones(n, dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
    mtry = max(1, int(np.floor(np.sqrt(f)))) if features_per_split is None else int(features_per_split)
    if rng_state is None:
        rng_state = np.array([0x9E3779B97F4A7C15], dtype=np.uint64)
    depth = -1 if max_depth is None else int(max_depth)
    if presort is None:
        presort = _presort(X)
    # column-major so that gathering one feature over a node stays in cache
    Xf = np.asfortranarray(X)
    return DecisionTree(*_build(Xf, presort, y, w, c, k, mtry, depth, int(min_samples_split), rng_state))


def _presort(X) -> np.ndarray:
    return np.argsort(np.ascontiguousarray(X.T), axis=1)


def train_forest(X, y, cfg: ForestConfig, n_classes: int | None = None, threads: int = 1) -> RandomForest:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("train_forest needs a non-empty 2-D sample matrix")
    if len(y) != len(X):
        raise ValueError("labels must align with rows")
    cfg.validate(X.shape[1])
    k = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    cw = np.ones(k) if cfg.class_weights is None else np.asarray(cfg.class_weights, dtype=float)
    if cw.shape != (k,):
        raise ValueError("class_weights needs one entry per class")
    n = len(X)
    row_w = cw[y]
    order = _presort(X)

    def grow(t):
        boot, state = _tree_seeds(cfg.seed, t)
        if cfg.bootstrap:
            counts = np.bincount(boot.integers(0, n, size=n), minlength=n)
            rows = np.flatnonzero(counts)
            c = counts[rows]
            local = np.full(n, -1, dtype=np.int64)
            local[rows] = np.arange(len(rows))
            mapped = local[order]
            presort = mapped[mapped >= 0].reshape(order.shape[0], len(rows))
        else:
            rows = np.arange(n)
            c = np.ones(n, dtype=np.int64)
            presort = order
        return train_tree(
            X[rows], y[rows], row_w[rows] * c, state, k, cfg.mtry(X.shape[1]),
            cfg.max_depth, cfg.min_samples_split, c, presort,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(cfg.n_trees)))
    else:
        trees = [grow(t) for t in range(cfg.n_trees)]
    return RandomForest(cfg, k, X.shape[1], trees)


def predict_forest(forest: RandomForest, X) -> tuple[np.ndarray, np.ndarray]:
    """Plurality vote over trees (ties to the lower class) and the vote shares."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise ValueError(f"expected {forest.n_features} features, got shape {X.shape}")
    votes = np.zeros((len(X), forest.n_classes))
    rows = np.arange(len(X))
    for tree in forest.trees:
        votes[rows, tree.predict(X)] += 1.0
    shares = votes / len(forest.trees)
    return shares.argmax(axis=1), shares


# --------------------------------------------------------------------------
# checkpoint
# --------------------------------------------------------------------------


def save_forest(forest: RandomForest, path, extra: dict | None = None) -> None:
    """Text manifest followed by one node table row per node of every tree."""
    lines = [
        "#sits-forest 1",
        f"#n_classes={forest.n_classes}",
        f"#n_features={forest.n_features}",
        f"#n_trees={len(forest.trees)}",
    ]
    lines += [f"#meta.{k}={v}" for k, v in (extra or {}).items()]
    lines.append("tree,node,feature,threshold,left,right," + ",".join(f"h{k}" for k in range(forest.n_classes)))
    for t, tree in enumerate(forest.trees):
        for i in range(tree.n_nodes):
            row = [str(t), str(i), str(int(tree.feature[i])), repr(float(tree.threshold[i])),
                   str(int(tree.left[i])), str(int(tree.right[i]))]
            row += [repr(float(v)) for v in tree.value[i]]
            lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_forest(path) -> tuple[RandomForest, dict]:
    meta, head = {}, {}
    tables: dict[int, list] = {}
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != "#sits-forest 1":
            raise ValueError(f"{path}: not a forest checkpoint")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#meta."):
                k, _, v = line[6:].partition("=")
                meta[k] = v
            elif line.startswith("#"):
                k, _, v = line[1:].partition("=")
                head[k] = int(v)
            elif line.startswith("tree,"):
                continue
            elif line:
                parts = line.split(",")
                tables.setdefault(int(parts[0]), []).append(parts[2:])
    k = head["n_classes"]
    trees = []
    for t in range(head["n_trees"]):
        rows = tables[t]
        trees.append(DecisionTree(
            feature=np.array([int(r[0]) for r in rows], dtype=np.int64),
            threshold=np.array([float(r[1]) for r in rows]),
            left=np.array([int(r[2]) for r in rows], dtype=np.int64),
            right=np.array([int(r[3]) for r in rows], dtype=np.int64),
            value=np.array([[float(v) for v in r[4:4 + k]] for r in rows]),
        ))
    cfg = ForestConfig(n_trees=len(trees))
    return RandomForest(cfg, k, head["n_features"], trees), meta
