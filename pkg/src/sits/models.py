"""MLP, TempCNN and LTAE classifiers assembled from the autodiff primitives."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import autodiff as ad
from .preprocess import CHANNELS, FLAT, FeatureMatrix

log = logging.getLogger(__name__)

VARIANTS = ("mlp", "tempcnn", "ltae")


@dataclass
class ModelConfig:
    variant: str = "mlp"
    n_classes: int = 10
    n_bands: int = 10
    n_steps: int = 74
    mlp_widths: tuple = (1024, 512, 256)
    cnn_filters: tuple = (128, 128, 128)
    cnn_kernels: tuple = (3, 3, 2)
    ltae_heads: int = 6
    ltae_key_dim: int = 8
    ltae_embed: int = 370
    ltae_mlp: int = 512
    batchnorm: bool = True
    positional_encoding: bool = True

    def __post_init__(self):
        self.mlp_widths = tuple(int(w) for w in self.mlp_widths)
        self.cnn_filters = tuple(int(f) for f in self.cnn_filters)
        self.cnn_kernels = tuple(int(k) for k in self.cnn_kernels)

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown model variant {self.variant!r}; allowed: {', '.join(VARIANTS)}")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.n_bands < 1 or self.n_steps < 1:
            raise ValueError("input grid dimensions must be positive")
        if self.variant == "mlp":
            if not self.mlp_widths or min(self.mlp_widths) < 1:
                raise ValueError("MLP needs at least one layer of positive width")
        elif self.variant == "tempcnn":
            if not self.cnn_filters or min(self.cnn_filters) < 1:
                raise ValueError("TempCNN needs at least one layer with positive filter count")
            if len(self.cnn_kernels) != len(self.cnn_filters):
                raise ValueError("TempCNN needs one kernel size per layer")
            if min(self.cnn_kernels) < 1 or max(self.cnn_kernels) > self.n_steps:
                raise ValueError("TempCNN kernel sizes must lie in [1, n_steps]")
        else:
            if self.ltae_heads < 1 or self.ltae_key_dim < 1:
                raise ValueError("LTAE heads and key dimension must be >= 1")
            if self.ltae_embed < 1 or self.ltae_mlp < 1:
                raise ValueError("LTAE embedding and MLP sizes must be >= 1")

    @property
    def embed_size(self) -> int:
        """LTAE embedding rounded up to a multiple of the head count."""
        h = self.ltae_heads
        return -(-self.ltae_embed // h) * h

    @property
    def layout(self) -> str:
        return FLAT if self.variant == "mlp" else CHANNELS

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _he_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def positional_encoding(n_steps: int, dim: int) -> np.ndarray:
    """Sinusoidal encoding of the grid-step index, shape (n_steps, dim)."""
    pos = np.arange(n_steps)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


class Model:
    """A built network: config, parameters and train/eval mode."""

    def __init__(self, cfg: ModelConfig, params: ad.ParamSet):
        self.cfg = cfg
        self.params = params
        self.training = False
        self._pe = None
        if cfg.variant == "ltae":
            self._pe = positional_encoding(cfg.n_steps, cfg.embed_size)

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    @property
    def layout(self) -> str:
        return self.cfg.layout

    def param_count(self) -> int:
        return self.params.learnable_count()

    def _input(self, x) -> np.ndarray:
        if isinstance(x, FeatureMatrix):
            if x.layout != self.layout:
                raise ValueError(f"layout mismatch: {self.cfg.variant} expects {self.layout}, got {x.layout}")
            x = x.values
        x = np.asarray(x, dtype=np.float64)
        c = self.cfg
        want = (c.n_bands * c.n_steps,) if self.layout == FLAT else (c.n_bands, c.n_steps)
        if x.shape[1:] != want:
            raise ValueError(f"input shape {x.shape[1:]} does not match model input {want} ({self.layout} layout)")
        return x

    def _bn(self, h, name, training):
        p = self.params
        return ad.batchnorm(
            h, p[f"{name}.gamma"], p[f"{name}.beta"],
            p[f"{name}.running_mean"], p[f"{name}.running_var"], training,
        )

    def forward(self, x, training: bool | None = None) -> ad.Tensor:
        """Logits (batch, n_classes) as a Tensor connected to the parameters."""
        training = self.training if training is None else training
        x = ad.Tensor(self._input(x))
        p = self.params
        c = self.cfg
        bn = c.batchnorm
        if c.variant == "mlp":
            h = x
            for i in range(len(c.mlp_widths)):
                h = ad.linear(h, p[f"fc{i}.weight"], p[f"fc{i}.bias"])
                if bn:
                    h = self._bn(h, f"bn{i}", training)
                h = ad.relu(h)
        elif c.variant == "tempcnn":
            h = x
            for i in range(len(c.cnn_filters)):
                h = ad.conv1d(h, p[f"conv{i}.weight"], p[f"conv{i}.bias"])
                if bn:
                    h = self._bn(h, f"bn{i}", training)
                h = ad.relu(h)
            h = ad.global_max_pool(h)
        else:
            n = x.shape[0]
            e = c.embed_size
            h = ad.transpose(x, (0, 2, 1))
            h = ad.reshape(h, (n * c.n_steps, c.n_bands))
            h = ad.linear(h, p["embed.weight"], p["embed.bias"])
            h = ad.reshape(h, (n, c.n_steps, e))
            if c.positional_encoding:
                h = ad.add_const(h, self._pe)
            h = ad.temporal_attention(h, p["attn.key"], p["attn.query"])
            h = ad.linear(h, p["mlp.weight"], p["mlp.bias"])
            if bn:
                h = self._bn(h, "bn_mlp", training)
            h = ad.relu(h)
        return ad.linear(h, p["out.weight"], p["out.bias"])

    def predict_proba(self, x, chunk: int = 4096) -> np.ndarray:
        """Eval-mode class probabilities; rows are processed independently."""
        x = self._input(x)
        out = np.empty((len(x), self.cfg.n_classes))
        for s in range(0, len(x), chunk):
            logits = self.forward(x[s:s + chunk], training=False).data
            out[s:s + chunk] = ad.softmax(logits, axis=1)
        return out

    def predict(self, x, chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
        """Class index (ties go to the lower index) and probability rows."""
        proba = self.predict_proba(x, chunk)
        return proba.argmax(axis=1), proba


def build(cfg: ModelConfig, seed: int = 0) -> Model:
    """He-uniform weights, zero biases, unit scale / zero shift; deterministic in ``seed``."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    ps = ad.ParamSet()

    def dense(name, fan_in, fan_out):
        ps.add(f"{name}.weight", _he_uniform(rng, (fan_out, fan_in), fan_in))
        ps.add(f"{name}.bias", np.zeros(fan_out))

    def norm(name, width):
        ps.add(f"{name}.gamma", np.ones(width))
        ps.add(f"{name}.beta", np.zeros(width))
        ps.add_buffer(f"{name}.running_mean", np.zeros(width))
        ps.add_buffer(f"{name}.running_var", np.ones(width))

    if cfg.variant == "mlp":
        width = cfg.n_bands * cfg.n_steps
        for i, w in enumerate(cfg.mlp_widths):
            dense(f"fc{i}", width, w)
            if cfg.batchnorm:
                norm(f"bn{i}", w)
            width = w
    elif cfg.variant == "tempcnn":
        cin = cfg.n_bands
        for i, (f, k) in enumerate(zip(cfg.cnn_filters, cfg.cnn_kernels)):
            ps.add(f"conv{i}.weight", _he_uniform(rng, (f, cin, k), cin * k))
            ps.add(f"conv{i}.bias", np.zeros(f))
            if cfg.batchnorm:
                norm(f"bn{i}", f)
            cin = f
        width = cin
    else:
        e, h, dk = cfg.embed_size, cfg.ltae_heads, cfg.ltae_key_dim
        if e != cfg.ltae_embed:
            log.info("LTAE embedding %d rounded up to %d (multiple of %d heads)", cfg.ltae_embed, e, h)
        dense("embed", cfg.n_bands, e)
        ps.add("attn.key", _he_uniform(rng, (h, dk, e // h), e // h))
        ps.add("attn.query", _he_uniform(rng, (h, dk), dk))
        dense("mlp", e, cfg.ltae_mlp)
        if cfg.batchnorm:
            norm("bn_mlp", cfg.ltae_mlp)
        width = cfg.ltae_mlp
    dense("out", width, cfg.n_classes)
    return Model(cfg, ps)


def param_count(model: Model) -> int:
    return model.param_count()


def mlp_param_formula(n_inputs: int, widths, n_classes: int, batchnorm: bool = True) -> int:
    """sum(fan_in*fan_out + fan_out) over dense layers plus 2*width per batch-norm layer."""
    total, fan_in = 0, n_inputs
    for w in widths:
        total += fan_in * w + w + (2 * w if batchnorm else 0)
        fan_in = w
    return total + fan_in * n_classes + n_classes


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------


def _encode(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ";".join(str(x) for x in v)
    return str(v)


_TUPLE_FIELDS = ("mlp_widths", "cnn_filters", "cnn_kernels")
_BOOL_FIELDS = ("batchnorm", "positional_encoding")


def save_model(model: Model, path, extra: dict | None = None) -> None:
    """Parameter checkpoint whose manifest echoes the model config and ``extra`` entries."""
    header = [f"model.{k}={_encode(v)}" for k, v in model.cfg.to_dict().items()]
    header += [f"meta.{k}={v}" for k, v in (extra or {}).items()]
    ad.save_params(model.params, path, header)


def load_model(path) -> tuple[Model, dict]:
    ps, header = ad.load_params(path)
    cfg_d, meta = {}, {}
    for line in header:
        key, _, value = line.partition("=")
        if key.startswith("model."):
            k = key[len("model."):]
            if k in _TUPLE_FIELDS:
                cfg_d[k] = tuple(int(x) for x in value.split(";") if x)
            elif k in _BOOL_FIELDS:
                cfg_d[k] = value == "true"
            elif k == "variant":
                cfg_d[k] = value
            else:
                cfg_d[k] = int(value)
        elif key.startswith("meta."):
            meta[key[len("meta."):]] = value
    if not cfg_d:
        raise ValueError(f"{path}: not a model checkpoint")
    cfg = ModelConfig(**cfg_d)
    ref = build(cfg, seed=0)
    if list(ref.params.params) != list(ps.params) or any(
        ref.params[k].shape != ps[k].shape for k in ref.params.params
    ):
        raise ValueError(f"{path}: parameters do not match the stored config")
    return Model(cfg, ps), meta
