"""Minimal reverse-mode differentiation over numpy float64 arrays.

Only the layer primitives needed by the three networks are provided. Every op
builds an output :class:`Tensor` holding a closure that pushes the output
gradient back into its inputs.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable ``requires_grad`` tensor."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _out(data, parents, backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, req, tuple(parents) if req else (), backward if req else None)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# --------------------------------------------------------------------------
# shape ops
# --------------------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape

    def backward(g):
        _acc(x, g.reshape(old))

    return _out(x.data.reshape(shape), (x,), backward)


def transpose(x: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)

    def backward(g):
        _acc(x, np.transpose(g, inv))

    return _out(np.transpose(x.data, axes), (x,), backward)


def add_const(x: Tensor, c) -> Tensor:
    """x + c where ``c`` is a broadcastable constant carrying no gradient."""

    def backward(g):
        _acc(x, g)

    return _out(x.data + c, (x,), backward)


# --------------------------------------------------------------------------
# layers
# --------------------------------------------------------------------------


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """y = x W^T + b with x (batch, F_in), W (F_out, F_in), b (F_out,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"linear: shape mismatch x{x.shape} W{w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise ValueError(f"linear: bias shape {b.shape} != ({w.shape[0]},)")
    y = x.data @ w.data.T
    if b is not None:
        y += b.data
    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        if x.requires_grad:
            _acc(x, g @ w.data)
        if w.requires_grad:
            _acc(w, g.T @ x.data)
        if b is not None and b.requires_grad:
            _acc(b, g.sum(axis=0))

    return _out(y, parents, backward)


def conv1d(x: Tensor, k: Tensor, b: Tensor | None = None) -> Tensor:
    """Stride-1 cross-correlation with zero padding that preserves the length.

    x is (batch, C_in, T), k is (C_out, C_in, width). The left pad is
    floor((width-1)/2) and the right pad ceil((width-1)/2).
    """
    if x.data.ndim != 3 or k.data.ndim != 3 or x.shape[1] != k.shape[1]:
        raise ValueError(f"conv1d: shape mismatch x{x.shape} kernels{k.shape}")
    n, cin, t = x.shape
    cout, _, width = k.shape
    if width > t:
        raise ValueError(f"conv1d: kernel width {width} exceeds series length {t}")
    if b is not None and b.shape != (cout,):
        raise ValueError(f"conv1d: bias shape {b.shape} != ({cout},)")
    pl = (width - 1) // 2
    pr = width - 1 - pl
    xp = np.pad(x.data, ((0, 0), (0, 0), (pl, pr)))
    # cols[n, t, c, j] = xp[n, c, t + j]
    cols = np.lib.stride_tricks.sliding_window_view(xp, width, axis=2).transpose(0, 2, 1, 3)
    cols = np.ascontiguousarray(cols).reshape(n * t, cin * width)
    kmat = k.data.reshape(cout, cin * width)
    y = (cols @ kmat.T).reshape(n, t, cout)
    if b is not None:
        y += b.data
    y = np.ascontiguousarray(y.transpose(0, 2, 1))
    parents = (x, k) if b is None else (x, k, b)

    def backward(g):
        gt = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(n * t, cout)
        if k.requires_grad:
            _acc(k, (gt.T @ cols).reshape(cout, cin, width))
        if b is not None and b.requires_grad:
            _acc(b, g.sum(axis=(0, 2)))
        if x.requires_grad:
            gcols = (gt @ kmat).reshape(n, t, cin, width)
            gxp = np.zeros((n, cin, t + width - 1))
            for j in range(width):
                gxp[:, :, j : j + t] += gcols[:, :, :, j].transpose(0, 2, 1)
            _acc(x, gxp[:, :, pl : pl + t])

    return _out(y, parents, backward)


BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """Batch normalization per feature (2-D input) or per channel over batch and time (3-D).

    In training mode the running statistics are updated in place
    (running_var uses the unbiased batch variance). Eval mode only reads them.
    """
    if x.data.ndim == 2:
        axes, view = (0,), (1, -1)
    elif x.data.ndim == 3:
        axes, view = (0, 2), (1, -1, 1)
    else:
        raise ValueError("batchnorm expects 2-D or 3-D input")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError("batchnorm: scale/shift shape mismatch")
    gm = gamma.data.reshape(view)
    bt = beta.data.reshape(view)
    if training:
        if x.shape[0] < 2:
            raise ValueError("batchnorm in train mode needs a batch of at least 2")
        m = x.data.size // c
        mu = x.data.mean(axis=axes)
        xc = x.data - mu.reshape(view)
        var = (xc**2).mean(axis=axes)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv.reshape(view)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * m / (m - 1)
    else:
        inv = 1.0 / np.sqrt(running_var + eps)
        xhat = (x.data - running_mean.reshape(view)) * inv.reshape(view)
    y = xhat * gm + bt

    def backward(g):
        if gamma.requires_grad:
            _acc(gamma, (g * xhat).sum(axis=axes))
        if beta.requires_grad:
            _acc(beta, g.sum(axis=axes))
        if x.requires_grad:
            gx = g * gm
            if training:
                gx = (gx - gx.mean(axis=axes, keepdims=True)
                      - xhat * (gx * xhat).mean(axis=axes, keepdims=True))
            _acc(x, gx * inv.reshape(view))

    return _out(y, (x, gamma, beta), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        _acc(x, g * mask)

    return _out(np.where(mask, x.data, 0.0), (x,), backward)


def global_max_pool(x: Tensor) -> Tensor:
    """(batch, C, T) -> (batch, C); the gradient goes to the first argmax."""
    if x.data.ndim != 3 or x.shape[2] < 1:
        raise ValueError("global_max_pool expects (batch, C, T) with T >= 1")
    idx = x.data.argmax(axis=2)
    y = np.take_along_axis(x.data, idx[:, :, None], axis=2)[:, :, 0]

    def backward(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, idx[:, :, None], g[:, :, None], axis=2)
        _acc(x, gx)

    return _out(y, (x,), backward)


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def temporal_attention(x: Tensor, wk: Tensor, q: Tensor, return_weights: bool = False):
    """Multi-head attention with one learned master query per head.

    x is (batch, T, E), wk is (H, d_k, E/H), q is (H, d_k). Head h reads the
    h-th contiguous E/H slice of every timestep; its keys are ``wk[h] @ slice``,
    its weights are softmax over time of ``q[h] . key / sqrt(d_k)`` and its
    output is the weighted sum of the slices themselves. Heads are
    concatenated back to (batch, E).
    """
    if x.data.ndim != 3:
        raise ValueError("temporal_attention expects (batch, T, E)")
    n, t, e_all = x.shape
    h, dk, e = wk.shape
    if e_all % h != 0:
        raise ValueError(f"embedding size {e_all} is not divisible by {h} heads")
    if e * h != e_all or q.shape != (h, dk):
        raise ValueError("temporal_attention: parameter shape mismatch")
    scale = 1.0 / np.sqrt(dk)
    xs = x.data.reshape(n, t, h, e)
    keys = np.einsum("nthe,hde->nhtd", xs, wk.data, optimize=True)
    scores = np.einsum("nhtd,hd->nht", keys, q.data, optimize=True) * scale
    a = softmax(scores, axis=2)
    out = np.einsum("nht,nthe->nhe", a, xs, optimize=True).reshape(n, e_all)

    def backward(g):
        g = g.reshape(n, h, e)
        ga = np.einsum("nhe,nthe->nht", g, xs, optimize=True)
        gs = a * (ga - (a * ga).sum(axis=2, keepdims=True)) * scale
        if q.requires_grad:
            _acc(q, np.einsum("nht,nhtd->hd", gs, keys, optimize=True))
        gkeys = gs[:, :, :, None] * q.data[None, :, None, :]
        if wk.requires_grad:
            _acc(wk, np.einsum("nhtd,nthe->hde", gkeys, xs, optimize=True))
        if x.requires_grad:
            gx = np.einsum("nht,nhe->nthe", a, g, optimize=True)
            gx += np.einsum("nhtd,hde->nthe", gkeys, wk.data, optimize=True)
            _acc(x, gx.reshape(n, t, e_all))

    y = _out(out, (x, wk, q), backward)
    return (y, a) if return_weights else y


def weighted_cross_entropy(logits: Tensor, labels, class_weights=None) -> Tensor:
    """sum_i w[y_i] * -log softmax(z_i)[y_i] / sum_i w[y_i], via log-sum-exp."""
    z = logits.data
    if z.ndim != 2:
        raise ValueError("logits must be (batch, K)")
    n, k = z.shape
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (n,):
        raise ValueError("labels must have one entry per row")
    if n == 0 or y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    w = np.ones(k) if class_weights is None else np.asarray(class_weights, dtype=float)
    if w.shape != (k,) or np.any(w < 0):
        raise ValueError("class weights must be non-negative, one per class")
    wi = w[y]
    total = wi.sum()
    if total <= 0:
        raise ValueError("all sample weights are zero")
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    nll = lse - z[np.arange(n), y]
    loss = float((wi * nll).sum() / total)

    def backward(g):
        p = softmax(z, axis=1)
        p[np.arange(n), y] -= 1.0
        _acc(logits, g * p * (wi / total)[:, None])

    return _out(np.array(loss), (logits,), backward)


# --------------------------------------------------------------------------
# parameters and checkpoints
# --------------------------------------------------------------------------


class ParamSet:
    """Ordered named learnable tensors plus non-learnable buffers."""

    def __init__(self):
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.buffers: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def add(self, name: str, data) -> Tensor:
        if name in self.params or name in self.buffers:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        return t

    def add_buffer(self, name: str, data) -> np.ndarray:
        if name in self.params or name in self.buffers:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.array(data, dtype=np.float64)
        self.buffers[name] = arr
        return arr

    def __getitem__(self, name):
        return self.params[name] if name in self.params else self.buffers[name]

    def learnable_count(self) -> int:
        return int(sum(t.data.size for t in self.params.values()))

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def snapshot(self) -> dict:
        out = {k: t.data.copy() for k, t in self.params.items()}
        out.update({k: v.copy() for k, v in self.buffers.items()})
        return out

    def restore(self, snap: dict) -> None:
        for k, t in self.params.items():
            t.data[...] = snap[k]
        for k, v in self.buffers.items():
            v[...] = snap[k]

    def equals(self, other: "ParamSet") -> bool:
        a, b = self.snapshot(), other.snapshot()
        return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


MAGIC = "#sits-checkpoint 1"


def save_params(params: ParamSet, path, header: list[str] | None = None) -> None:
    """Text manifest (name, kind, shape) in fixed order, then little-endian float64 data."""
    lines = [MAGIC]
    for h in header or []:
        if "\n" in h:
            raise ValueError("header lines may not contain newlines")
        lines.append("#" + h)
    blobs = []
    for kind, items in (("param", params.params.items()), ("buffer", params.buffers.items())):
        for name, v in items:
            arr = v.data if isinstance(v, Tensor) else v
            shape = "x".join(str(s) for s in arr.shape) or "scalar"
            lines.append(f"{kind},{name},{shape}")
            blobs.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    lines.append("#data")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for blob in blobs:
            fh.write(blob)


def load_params(path) -> tuple[ParamSet, list[str]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    marker = b"\n#data\n"
    pos = raw.find(marker)
    if not raw.startswith(MAGIC.encode()) or pos < 0:
        raise ValueError(f"{path}: not a parameter checkpoint")
    head = raw[:pos].decode("utf-8").split("\n")[1:]
    data = memoryview(raw)[pos + len(marker):]
    header, ps, offset = [], ParamSet(), 0
    for line in head:
        if line.startswith("#"):
            header.append(line[1:])
            continue
        kind, name, shape = line.split(",")
        dims = () if shape == "scalar" else tuple(int(s) for s in shape.split("x"))
        size = int(np.prod(dims)) if dims else 1
        nbytes = 8 * size
        if offset + nbytes > len(data):
            raise ValueError(f"{path}: truncated parameter data")
        arr = np.frombuffer(data[offset:offset + nbytes], dtype="<f8").reshape(dims).astype(np.float64)
        offset += nbytes
        if kind == "param":
            ps.add(name, arr)
        elif kind == "buffer":
            ps.add_buffer(name, arr)
        else:
            raise ValueError(f"{path}: unknown entry kind {kind!r}")
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes after parameter data")
    return ps, header


# --------------------------------------------------------------------------
# gradient checking
# --------------------------------------------------------------------------


def finite_diff_check(closure, tensors, analytic=None, h_rel: float = 1e-5, floor: float = 1e-6) -> float:
    """Worst relative error between reverse-mode and central-difference gradients.

    ``closure()`` must rebuild the graph and return a scalar Tensor. ``analytic``
    overrides the reverse-mode gradients (used to test the harness itself).
    The step for coordinate x is ``h_rel * max(1, |x|)``; the error of one
    coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    """
    tensors = list(tensors)
    if analytic is None:
        for t in tensors:
            t.grad = None
        closure().backward()
        analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    worst = 0.0
    for t, a in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        af = np.asarray(a).reshape(-1)
        for i in range(flat.size):
            x0 = flat[i]
            h = h_rel * max(1.0, abs(x0))
            flat[i] = x0 + h
            fp = float(closure().data)
            flat[i] = x0 - h
            fm = float(closure().data)
            flat[i] = x0
            num = (fp - fm) / (2 * h)
            err = abs(af[i] - num) / max(abs(af[i]), abs(num), floor)
            worst = max(worst, err)
    return worst


def random_projection_loss(out: Tensor, weights: np.ndarray) -> Tensor:
    """sum(out * weights) as a scalar Tensor, for checking non-scalar ops."""
    w = np.asarray(weights, dtype=float)

    def backward(g):
        _acc(out, g * w)

    return _out(np.array(float((out.data * w).sum())), (out,), backward)
