"""Desk-scale synthetic benchmark: class weighting, network size and the RF contrast.

Each run draws a ten-species training set with the reference class
proportions, fits several classifiers on it and scores them on an independent
draw from the same species design. Training is shortened to ten epochs so
five seeds of a setting fit in a few minutes on one CPU core.

    python -m sits.benchmark            # both settings, five seeds
"""

from __future__ import annotations

import argparse
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .dataset import generate_synthetic, table1_config
from .evaluation import confusion_matrix, fit_predict, metrics
from .forest import ForestConfig
from .imbalance import ResampleConfig
from .models import ModelConfig
from .preprocess import gapfill_dataset, standardize_apply, standardize_fit
from .training import TrainConfig


@dataclass(frozen=True)
class Setting:
    name: str
    separation: float
    noise_std: float = 0.01
    scale: float = 0.25


MODERATE = Setting("moderate", separation=0.35)
HIGH = Setting("high", separation=0.2)

TEST_SEED = 10_000

DESK_TRAINING = TrainConfig(lr=1e-3, batch_size=256, max_epochs=10, plateau_patience=5, early_stop_patience=10)

CONTENDERS = {
    "mlp_cw": (ModelConfig(), ResampleConfig("class_weight")),
    "mlp": (ModelConfig(), ResampleConfig()),
    "mlp_small": (ModelConfig(mlp_widths=(128, 64, 32)), ResampleConfig()),
    "rf": (ForestConfig(n_trees=100), ResampleConfig()),
}


@dataclass(frozen=True)
class Score:
    f1: float
    oa: float
    ba: float
    minority_ba: float  # mean recall over every class but the largest
    seconds: float


def _features(setting: Setting, seed: int):
    ds = generate_synthetic(table1_config(scale=setting.scale, separation=setting.separation,
                                          noise_std=setting.noise_std, seed=seed))
    return ds, gapfill_dataset(ds)


def run_setting(setting: Setting, seed: int, names, train_cfg: TrainConfig = DESK_TRAINING) -> dict[str, Score]:
    """Train the named contenders on one synthetic draw and score them on an independent draw.

    Both draws share the species design; the test draw uses seed ``TEST_SEED + seed``
    so every class has several unseen plots.
    """
    ds, train_f = _features(setting, seed)
    _, test_f = _features(setting, TEST_SEED + seed)
    stats = standardize_fit(train_f)
    train_x, test_x = standardize_apply(train_f, stats), standardize_apply(test_f, stats)
    k = ds.n_classes
    majority = int(np.argmax(np.bincount(ds.labels, minlength=k)))
    minority = np.array([c for c in range(k) if c != majority])
    tcfg = replace(train_cfg, seed=seed)
    scores = {}
    for name in names:
        clf, imb = CONTENDERS[name]
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            # rare classes are often missing from the internal validation split
            warnings.simplefilter("ignore", UserWarning)
            pred, _, _ = fit_predict(clf, train_x, test_x, k, tcfg, replace(imb, seed=seed), seed)
        m = metrics(confusion_matrix(test_x.labels, pred, k))
        scores[name] = Score(m.f1_macro, m.oa, m.ba, float(np.mean(m.recall[minority])),
                             time.perf_counter() - t0)
    return scores


def medians(runs: list[dict[str, Score]]) -> dict[str, dict[str, float]]:
    out = {}
    for name in runs[0]:
        out[name] = {f: float(np.median([getattr(r[name], f) for r in runs]))
                     for f in ("f1", "oa", "ba", "minority_ba", "seconds")}
    return out


def run_benchmark(setting: Setting, names, seeds=range(5), train_cfg: TrainConfig = DESK_TRAINING):
    runs = [run_setting(setting, s, names, train_cfg) for s in seeds]
    return runs, medians(runs)


def format_table(setting: Setting, runs, med) -> str:
    lines = [f"{setting.name} overlap (separation {setting.separation}), {len(runs)} seeds, median",
             f"{'classifier':<12}{'F1':>8}{'OA':>8}{'BA':>8}{'minBA':>8}{'sec':>8}"]
    for name, m in med.items():
        lines.append(f"{name:<12}{m['f1']:8.3f}{m['oa']:8.3f}{m['ba']:8.3f}{m['minority_ba']:8.3f}{m['seconds']:8.1f}")
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args(argv)
    seeds = range(args.seeds)
    for setting, names in ((MODERATE, ("mlp_cw", "mlp_small")), (HIGH, ("mlp", "rf"))):
        runs, med = run_benchmark(setting, names, seeds)
        print(format_table(setting, runs, med))
        print()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
