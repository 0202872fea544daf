"""Flat ``key=value`` run configuration: defaults < config file < command-line flags."""

from __future__ import annotations

from dataclasses import dataclass, field

from .forest import ForestConfig
from .imbalance import METHODS, ResampleConfig
from .models import VARIANTS, ModelConfig
from .training import TrainConfig

COMMANDS = ("synth", "preprocess", "cv", "train", "predict", "evaluate")
CLASSIFIERS = VARIANTS + ("rf",)
AUTO = "auto"


class ConfigError(ValueError):
    """A config problem tied to one key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Key:
    type: str  # int, float, bool, str, ints, choice
    default: object
    choices: tuple = ()
    help: str = ""


def _ints(text):
    return ",".join(str(v) for v in text)


KEYS: dict[str, Key] = {
    "command": Key("choice", "cv", COMMANDS, "pipeline step"),
    "dataset": Key("str", "", help="input dataset file"),
    "checkpoint": Key("str", "", help="trained model file for predict/evaluate"),
    "out": Key("str", "out", help="output directory"),
    "seed": Key("int", 0),
    "threads": Key("int", 1, help="worker threads for folds/trees and BLAS"),
    "figures": Key("bool", True, help="render PNG figures next to the reports"),
    # classifier
    "model": Key("choice", "mlp", CLASSIFIERS),
    "mlp_widths": Key("ints", (1024, 512, 256)),
    "cnn_filters": Key("ints", (128, 128, 128)),
    "cnn_kernels": Key("ints", (3, 3, 2)),
    "ltae_heads": Key("int", 6),
    "ltae_key_dim": Key("int", 8),
    "ltae_embed": Key("int", 370),
    "ltae_mlp": Key("int", 512),
    "batchnorm": Key("bool", True),
    "positional_encoding": Key("bool", True),
    "rf_trees": Key("int", 100),
    "rf_max_depth": Key("int", 0, help="0 grows trees fully"),
    "rf_features_per_split": Key("int", 0, help="0 uses floor(sqrt(F))"),
    # training
    "lr": Key("float", AUTO, help="auto: 1e-4 for mlp, 1e-3 otherwise"),
    "batch_size": Key("int", AUTO, help="auto: 4096, or 8192 for mlp with smote"),
    "max_epochs": Key("int", 1000),
    "plateau_patience": Key("int", 20),
    "plateau_factor": Key("float", 0.5),
    "lr_floor": Key("float", 1e-6),
    "early_stop_patience": Key("int", 40),
    "val_fraction": Key("float", 0.1),
    # imbalance
    "imbalance": Key("choice", "none", tuple(m.replace("_", "-") for m in METHODS)),
    "smote_k": Key("int", 5, help="neighbours for smote/adasyn"),
    "undersample_plots": Key("int", 400),
    # evaluation
    "folds": Key("int", 10),
    # synthetic data
    "synth_scale": Key("float", 0.25, help="fraction of the reference plot counts"),
    "synth_separation": Key("float", 1.0, help="spread of the class phenologies"),
    "synth_noise": Key("float", 0.01),
    "synth_gap_prob": Key("float", 0.3),
    "synth_pixels_min": Key("int", 6),
    "synth_pixels_max": Key("int", 20),
    "synth_design_seed": Key("int", 2024),
}


def _parse(key: str, raw):
    spec = KEYS[key]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text == AUTO and spec.default == AUTO:
        return AUTO
    try:
        if spec.type == "int":
            return int(text)
        if spec.type == "float":
            return float(text)
        if spec.type == "bool":
            low = text.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError
        if spec.type == "ints":
            vals = tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())
            if not vals:
                raise ValueError
            return vals
    except ValueError:
        raise ConfigError(key, f"expected {spec.type}, got {raw!r}") from None
    if spec.type == "choice":
        norm = text.replace("_", "-") if key == "imbalance" else text
        if norm not in spec.choices:
            raise ConfigError(key, f"invalid value {raw!r}; allowed: {', '.join(spec.choices)}")
        return norm
    return text


def _format(key: str, value) -> str:
    if KEYS[key].type == "ints":
        return _ints(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_config_file(path) -> dict:
    """``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("config", f"{path} line {n}: expected key=value")
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def echo(self) -> str:
        return "".join(f"{k}={_format(k, self.values[k])}\n" for k in KEYS)

    # builders for the owning modules ------------------------------------

    def model_config(self, n_classes: int, n_bands: int, n_steps: int) -> ModelConfig:
        v = self.values
        cfg = ModelConfig(
            variant=v["model"], n_classes=n_classes, n_bands=n_bands, n_steps=n_steps,
            mlp_widths=v["mlp_widths"], cnn_filters=v["cnn_filters"], cnn_kernels=v["cnn_kernels"],
            ltae_heads=v["ltae_heads"], ltae_key_dim=v["ltae_key_dim"], ltae_embed=v["ltae_embed"],
            ltae_mlp=v["ltae_mlp"], batchnorm=v["batchnorm"], positional_encoding=v["positional_encoding"],
        )
        cfg.validate()
        return cfg

    def forest_config(self) -> ForestConfig:
        v = self.values
        cfg = ForestConfig(
            n_trees=v["rf_trees"],
            max_depth=v["rf_max_depth"] or None,
            features_per_split=v["rf_features_per_split"] or None,
            seed=v["seed"],
        )
        cfg.validate()
        return cfg

    def classifier(self, n_classes: int, n_bands: int, n_steps: int):
        if self.values["model"] == "rf":
            return self.forest_config()
        return self.model_config(n_classes, n_bands, n_steps)

    def train_config(self) -> TrainConfig:
        v = self.values
        cfg = TrainConfig(
            lr=v["lr"], batch_size=v["batch_size"], max_epochs=v["max_epochs"],
            plateau_patience=v["plateau_patience"], plateau_factor=v["plateau_factor"],
            lr_floor=v["lr_floor"], early_stop_patience=v["early_stop_patience"],
            val_fraction=v["val_fraction"], seed=v["seed"],
        )
        try:
            cfg.validate()
        except ValueError as exc:
            raise ConfigError("train", str(exc)) from None
        return cfg

    def resample_config(self) -> ResampleConfig:
        v = self.values
        cfg = ResampleConfig(v["imbalance"], v["smote_k"], v["undersample_plots"], v["seed"])
        cfg.validate()
        return cfg


def resolve(file_values: dict | None = None, flags: dict | None = None) -> RunConfig:
    """Merge defaults, file values and flags, parse types and fill the ``auto`` entries."""
    merged = {k: spec.default for k, spec in KEYS.items()}
    for source in (file_values or {}, flags or {}):
        for k, raw in source.items():
            if k not in KEYS:
                raise ConfigError(k, "unknown key")
            merged[k] = _parse(k, raw)
    if merged["lr"] == AUTO:
        merged["lr"] = TrainConfig.default_lr(merged["model"])
    if merged["batch_size"] == AUTO:
        merged["batch_size"] = 8192 if (merged["model"] == "mlp" and merged["imbalance"] == "smote") else 4096
    for k in ("threads", "folds", "rf_trees", "smote_k", "undersample_plots"):
        if merged[k] < 1:
            raise ConfigError(k, "must be >= 1")
    for k in ("rf_max_depth", "rf_features_per_split", "max_epochs"):
        if merged[k] < 0:
            raise ConfigError(k, "must be >= 0")
    if merged["synth_pixels_min"] < 1 or merged["synth_pixels_max"] < merged["synth_pixels_min"]:
        raise ConfigError("synth_pixels_min", "need 1 <= synth_pixels_min <= synth_pixels_max")
    return RunConfig(merged)


def parse_config(config_path=None, flags: dict | None = None) -> RunConfig:
    file_values = read_config_file(config_path) if config_path else {}
    return resolve(file_values, flags)
