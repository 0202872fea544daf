"""``sits`` command line: synth, preprocess, cv, train, predict, evaluate.

Every run writes ``config.txt`` (the fully resolved configuration) into the
output directory; ``sits <command> --config out/config.txt`` reproduces the
run. On failure the files written by the run are removed and the exit
status is nonzero.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import autodiff as ad
from .config import COMMANDS, KEYS, ConfigError, RunConfig, parse_config
from .dataset import TimeGrid, dataset_summary, generate_synthetic, load_dataset, table1_config, write_dataset
from .evaluation import (
    confusion_matrix,
    matrix_to_csv,
    metrics,
    normalize_rows,
    plot_level_recall,
    run_cv,
)
from .forest import ForestConfig, load_forest, predict_forest, save_forest, train_forest
from .models import build, load_model, save_model
from .preprocess import (
    BandStats,
    as_layout,
    features_to_dataset,
    gapfill_dataset,
    standardize_apply,
    standardize_fit,
)
from .training import prepare_training_set, train

log = logging.getLogger("sits")

PLOT_THRESHOLDS = (0.5, 0.2)


class Outputs:
    """Files written by one run, so a failed run can be rolled back."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.created_dir = not self.dir.exists()
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / name
        self.written.append(p)
        return p

    def text(self, name: str, content: str) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        return p

    def rollback(self) -> None:
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        if self.created_dir and self.dir.exists() and not any(self.dir.iterdir()):
            self.dir.rmdir()


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _floats(values) -> str:
    return ";".join(repr(float(v)) for v in values)


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(";") if v])


def _stats_csv(stats: BandStats) -> str:
    lines = ["band,mean,std"]
    lines += [f"{b},{float(m)!r},{float(s)!r}" for b, (m, s) in enumerate(zip(stats.mean, stats.std))]
    return "\n".join(lines) + "\n"


def _require_dataset(cfg: RunConfig):
    if not cfg.dataset:
        raise ConfigError("dataset", f"required for '{cfg.command}'")
    if not os.path.isfile(cfg.dataset):
        raise ConfigError("dataset", f"file not found: {cfg.dataset}")
    return load_dataset(cfg.dataset)


def _features(ds, stats: BandStats | None = None):
    feats = gapfill_dataset(ds)
    if stats is None:
        stats = standardize_fit(feats)
    return standardize_apply(feats, stats), stats


def _plot_recall_csv(class_names, plot_ids, y_true, y_pred) -> tuple[str, list]:
    k = len(class_names)
    cols = [plot_level_recall(plot_ids, y_true, y_pred, k, t) for t in PLOT_THRESHOLDS]
    head = "class," + ",".join(f"recall_gt_{t}" for t in PLOT_THRESHOLDS)
    lines = [head]
    for j, name in enumerate(class_names):
        lines.append(name + "," + ",".join("" if np.isnan(c[0][j]) else repr(float(c[0][j])) for c in cols))
    lines.append("mean," + ",".join(repr(c[1]) for c in cols))
    return "\n".join(lines) + "\n", cols


def _metrics_table(m, class_names) -> str:
    out = [f"F1  {m.f1_macro:.3f}", f"OA  {m.oa:.3f}", f"BA  {m.ba:.3f}", ""]
    out.append(f"{'class':<14}{'precision':>10}{'recall':>8}{'f1':>8}")
    for j, c in enumerate(class_names):
        flag = "" if m.present[j] else "  (absent)"
        out.append(f"{c:<14}{m.precision[j]:>10.3f}{m.recall[j]:>8.3f}{m.f1[j]:>8.3f}{flag}")
    return "\n".join(out) + "\n"


def _figure(cfg: RunConfig, out: Outputs, name: str, fn, *args) -> None:
    if cfg.figures:
        from . import plotting

        getattr(plotting, fn)(*args, out.path(name))


# --------------------------------------------------------------------------
# checkpoints (network or forest plus preprocessing state)
# --------------------------------------------------------------------------


def _save_checkpoint(path, clf, ds, stats: BandStats) -> None:
    g = ds.grid
    meta = {
        "classes": ";".join(ds.class_names),
        "n_bands": g.n_bands,
        "grid": f"{g.start_day};{g.step_days};{g.n_steps}",
        "stats_mean": _floats(stats.mean),
        "stats_std": _floats(stats.std),
    }
    if hasattr(clf, "trees"):
        save_forest(clf, path, meta)
    else:
        save_model(clf, path, meta)


def _load_checkpoint(path):
    if not path:
        raise ConfigError("checkpoint", "required")
    if not os.path.isfile(path):
        raise ConfigError("checkpoint", f"file not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(64)
    if head.startswith(b"#sits-forest"):
        clf, meta = load_forest(path)
    elif head.startswith(ad.MAGIC.encode()):
        clf, meta = load_model(path)
    else:
        raise ConfigError("checkpoint", f"{path} is not a model checkpoint")
    start, step, n_steps = (int(v) for v in meta["grid"].split(";"))
    grid = TimeGrid(start, step, n_steps, int(meta["n_bands"]))
    stats = BandStats(_parse_floats(meta["stats_mean"]), _parse_floats(meta["stats_std"]))
    classes = tuple(meta["classes"].split(";"))
    return clf, grid, stats, classes


def _predict_with(clf, ds, grid: TimeGrid, stats: BandStats):
    if ds.grid.n_bands != grid.n_bands:
        raise ValueError(
            f"band count mismatch: checkpoint expects {grid.n_bands} bands, dataset has {ds.grid.n_bands}"
        )
    feats, _ = _features(replace(ds, grid=grid), stats)
    if hasattr(clf, "trees"):
        return predict_forest(clf, feats.values)
    return clf.predict(as_layout(feats, clf.layout).values)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_synth(cfg: RunConfig, out: Outputs) -> None:
    sc = table1_config(
        scale=cfg.synth_scale, separation=cfg.synth_separation, noise_std=cfg.synth_noise,
        gap_prob=cfg.synth_gap_prob, pixels_per_plot=(cfg.synth_pixels_min, cfg.synth_pixels_max),
        seed=cfg.seed, design_seed=cfg.synth_design_seed,
    )
    ds = generate_synthetic(sc)
    write_dataset(ds, out.path("dataset.csv"))
    out.text("summary.txt", dataset_summary(ds).table() + "\n")


def cmd_preprocess(cfg: RunConfig, out: Outputs) -> None:
    ds = _require_dataset(cfg)
    feats, stats = _features(ds)
    write_dataset(features_to_dataset(feats, ds.grid, ds.class_names), out.path("features.csv"))
    out.text("stats.csv", _stats_csv(stats))


def cmd_cv(cfg: RunConfig, out: Outputs) -> None:
    ds = _require_dataset(cfg)
    g = ds.grid
    clf = cfg.classifier(ds.n_classes, g.n_bands, g.n_steps)
    tcfg = None if isinstance(clf, ForestConfig) else cfg.train_config()
    res = run_cv(ds, clf, tcfg, cfg.resample_config(), k=cfg.folds, seed=cfg.seed, threads=cfg.threads)
    rep = res.report
    out.text("cv_metrics.csv", rep.to_csv())
    out.text("cv_confusion_mean.csv", matrix_to_csv(rep.mean_cm, ds.class_names))
    for f, cm in enumerate(rep.fold_cms):
        out.text(f"cv_confusion_fold{f}.csv", matrix_to_csv(cm, ds.class_names))
    recall_csv, cols = _plot_recall_csv(ds.class_names, ds.plot_ids, ds.labels, res.predictions)
    out.text("cv_plot_recall.csv", recall_csv)
    lines = ["pixel_id,plot_id,fold,true,pred"]
    for i in range(ds.n_pixels):
        lines.append(f"{ds.pixel_ids[i]},{ds.plot_ids[i]},{res.pixel_fold[i]},"
                     f"{ds.class_names[ds.labels[i]]},{ds.class_names[res.predictions[i]]}")
    out.text("cv_predictions.csv", "\n".join(lines) + "\n")
    text = rep.table() + "\n\nplot-level recall (pooled over folds)\n"
    text += "".join(f"  >{t:.0%} correct pixels: {c[1]:.3f}\n" for t, c in zip(PLOT_THRESHOLDS, cols))
    out.text("cv_report.txt", text)
    _figure(cfg, out, "cv_confusion.png", "plot_confusion", rep.mean_cm, ds.class_names)
    _figure(cfg, out, "cv_scores.png", "plot_cv_scores", rep)


def cmd_train(cfg: RunConfig, out: Outputs) -> None:
    ds = _require_dataset(cfg)
    g = ds.grid
    feats, stats = _features(ds)
    clf_cfg = cfg.classifier(ds.n_classes, g.n_bands, g.n_steps)
    imb = cfg.resample_config()
    if isinstance(clf_cfg, ForestConfig):
        x, y, w = prepare_training_set(feats.values, feats.labels, feats.plot_ids, ds.n_classes, imb)
        if w is not None:
            clf_cfg.class_weights = w
        clf = train_forest(x, y, clf_cfg, n_classes=ds.n_classes, threads=cfg.threads)
    else:
        clf = build(clf_cfg, cfg.seed)
        x = as_layout(feats, clf_cfg.layout)
        report = train(clf, x.values, x.labels, x.plot_ids, cfg.train_config(), imb,
                       progress=lambda e, tl, vl, lr: log.info("epoch %d train %.4f val %.4f", e, tl, vl))
        out.text("train_report.csv", report.to_csv())
        _figure(cfg, out, "training_curve.png", "plot_training_curve", report)
    _save_checkpoint(out.path("model.ckpt"), clf, ds, stats)
    out.text("stats.csv", _stats_csv(stats))


def cmd_predict(cfg: RunConfig, out: Outputs) -> None:
    clf, grid, stats, classes = _load_checkpoint(cfg.checkpoint)
    ds = _require_dataset(cfg)
    pred, proba = _predict_with(clf, ds, grid, stats)
    lines = ["pixel_id,plot_id,label," + ",".join(f"p_{c}" for c in classes)]
    for i in range(ds.n_pixels):
        lines.append(f"{ds.pixel_ids[i]},{ds.plot_ids[i]},{classes[pred[i]]},"
                     + ",".join(repr(float(p)) for p in proba[i]))
    out.text("predictions.csv", "\n".join(lines) + "\n")


def cmd_evaluate(cfg: RunConfig, out: Outputs) -> None:
    clf, grid, stats, classes = _load_checkpoint(cfg.checkpoint)
    ds = _require_dataset(cfg)
    if ds.class_names != classes:
        raise ValueError(f"class list mismatch: checkpoint has {', '.join(classes)}; "
                         f"dataset has {', '.join(ds.class_names)}")
    pred, _ = _predict_with(clf, ds, grid, stats)
    k = len(classes)
    cm = confusion_matrix(ds.labels, pred, k)
    m = metrics(cm, exclude_absent=True)
    head = "f1_macro,oa,ba," + ",".join(f"f1_{c}" for c in classes) + "," + ",".join(f"recall_{c}" for c in classes)
    row = [repr(m.f1_macro), repr(m.oa), repr(m.ba)]
    row += ["" if not m.present[j] else repr(float(v)) for j, v in enumerate(m.f1)]
    row += ["" if not m.present[j] else repr(float(v)) for j, v in enumerate(m.recall)]
    out.text("eval_metrics.csv", head + "\n" + ",".join(row) + "\n")
    out.text("eval_confusion.csv", matrix_to_csv(cm, classes))
    out.text("eval_confusion_normalized.csv", matrix_to_csv(normalize_rows(cm), classes))
    recall_csv, cols = _plot_recall_csv(classes, ds.plot_ids, ds.labels, pred)
    out.text("eval_plot_recall.csv", recall_csv)
    text = _metrics_table(m, classes) + "\nplot-level recall\n"
    text += "".join(f"  >{t:.0%} correct pixels: {c[1]:.3f}\n" for t, c in zip(PLOT_THRESHOLDS, cols))
    out.text("eval_report.txt", text)
    _figure(cfg, out, "eval_confusion.png", "plot_confusion", normalize_rows(cm), classes)


COMMAND_FUNCS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "cv": cmd_cv,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override its entries")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    for key, spec in KEYS.items():
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        extra = f" ({', '.join(spec.choices)})" if spec.choices else ""
        common.add_argument(flag, dest=key, default=None, metavar=spec.type.upper(),
                            help=(spec.help + extra).strip() or None)
    parser = argparse.ArgumentParser(prog="sits", description="Tree-species classification from satellite time series.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "synth": "generate a synthetic labeled dataset",
        "preprocess": "gap-fill and standardize a dataset",
        "cv": "plot-level k-fold cross-validation",
        "train": "train a classifier on a whole dataset",
        "predict": "label pixels with a trained checkpoint",
        "evaluate": "score a checkpoint on a labeled dataset",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    flags = {k: v for k, v in vars(args).items() if k in KEYS and v is not None}
    flags["command"] = args.command
    out = None
    try:
        cfg = parse_config(args.config, flags)
        out = Outputs(cfg.out)
        out.text("config.txt", cfg.echo())
        with threadpool_limits(limits=cfg.threads):
            COMMAND_FUNCS[cfg.command](cfg, out)
    except Exception as exc:  # any module error: report, roll back, fail
        if out is not None:
            out.rollback()
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"sits {args.command}: error: {msg}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
