"""Labeled pixel time series: data model, columnar file format and a
synthetic double-logistic phenology generator.

The file format is plain comma-separated UTF-8 text::

    #classes=oak,pine
    #bands=2
    #days=0,5,10
    #grid=0,10,74            (optional: start_day, step_days, n_steps)
    #preprocessed=true       (optional)
    pixel_id,plot_id,class_name,v(1,1),...,v(B,T),m1,...,mT

Values are band-major. Missing acquisitions carry value 0 with m=0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    """Base class for dataset validation and parse errors."""


class ParseError(DatasetError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeaderError(ParseError):
    pass


class NonMonotoneDaysError(ParseError):
    pass


class UnknownClassError(ParseError):
    pass


class DuplicatePixelError(ParseError):
    pass


class MalformedRowError(ParseError):
    pass


class EmptyDatasetError(ParseError):
    pass


class PlotLabelError(ParseError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Regular temporal grid the irregular acquisitions are resampled onto."""

    start_day: int = 0
    step_days: int = 10
    n_steps: int = 74
    n_bands: int = 10

    def __post_init__(self):
        if self.step_days < 1:
            raise ValueError("step_days must be >= 1")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if self.n_bands < 1:
            raise ValueError("n_bands must be >= 1")

    @property
    def days(self) -> np.ndarray:
        return self.start_day + self.step_days * np.arange(self.n_steps, dtype=np.int64)

    @property
    def n_features(self) -> int:
        return self.n_bands * self.n_steps


@dataclass
class PixelSample:
    pixel_id: int
    plot_id: int
    label: int
    days: np.ndarray  # (T_raw,) int
    values: np.ndarray  # (n_bands, T_raw)
    valid: np.ndarray  # (T_raw,) bool


@dataclass(frozen=True)
class Plot:
    plot_id: int
    label: int
    pixel_ids: tuple


@dataclass(eq=False)
class SitsDataset:
    """Columnar storage of all pixels; every pixel shares the raw ``days`` axis.

    ``values`` has shape (n_pixels, n_bands, n_days) and ``valid`` has shape
    (n_pixels, n_days).
    """

    grid: TimeGrid
    class_names: tuple
    days: np.ndarray
    pixel_ids: np.ndarray
    plot_ids: np.ndarray
    labels: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    preprocessed: bool = False

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        self.days = np.asarray(self.days, dtype=np.int64)
        self.pixel_ids = np.asarray(self.pixel_ids, dtype=np.int64)
        self.plot_ids = np.asarray(self.plot_ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.validate()

    def validate(self) -> None:
        if len(self.class_names) == 0:
            raise DatasetError("dataset has no classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise DatasetError("duplicate class names")
        n = len(self.pixel_ids)
        if n == 0:
            raise DatasetError("no pixels")
        if self.days.ndim != 1 or len(self.days) == 0:
            raise DatasetError("days must be a non-empty 1-D sequence")
        if np.any(np.diff(self.days) <= 0):
            raise DatasetError("acquisition days must be strictly increasing")
        t = len(self.days)
        if self.values.shape != (n, self.grid.n_bands, t):
            raise DatasetError(
                f"values shape {self.values.shape} != {(n, self.grid.n_bands, t)}"
            )
        if self.valid.shape != (n, t):
            raise DatasetError(f"valid shape {self.valid.shape} != {(n, t)}")
        if self.plot_ids.shape != (n,) or self.labels.shape != (n,):
            raise DatasetError("plot_ids/labels must align with pixel_ids")
        if len(np.unique(self.pixel_ids)) != n:
            raise DatasetError("pixel ids are not unique")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise DatasetError("class index out of range")
        if not np.all(np.isfinite(self.values)):
            raise DatasetError("non-finite reflectance values")
        no_valid = ~self.valid.any(axis=1)
        if no_valid.any():
            raise DatasetError(
                f"pixel {int(self.pixel_ids[np.argmax(no_valid)])} has no valid acquisition"
            )
        bad = _mixed_plot(self.plot_ids, self.labels)
        if bad is not None:
            raise DatasetError(f"plot {bad} mixes several labels")

    @property
    def n_pixels(self) -> int:
        return len(self.pixel_ids)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def pixel(self, i: int) -> PixelSample:
        return PixelSample(
            pixel_id=int(self.pixel_ids[i]),
            plot_id=int(self.plot_ids[i]),
            label=int(self.labels[i]),
            days=self.days,
            values=self.values[i],
            valid=self.valid[i],
        )

    def plots(self) -> list[Plot]:
        """Plots in order of first appearance."""
        order: dict[int, list[int]] = {}
        labels: dict[int, int] = {}
        for pid, plot, lab in zip(self.pixel_ids.tolist(), self.plot_ids.tolist(), self.labels.tolist()):
            order.setdefault(plot, []).append(pid)
            labels[plot] = lab
        return [Plot(p, labels[p], tuple(ids)) for p, ids in order.items()]

    def plot_labels(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique plot ids (sorted) and their labels."""
        plots, first = np.unique(self.plot_ids, return_index=True)
        return plots, self.labels[first]

    def subset(self, index) -> "SitsDataset":
        index = np.asarray(index)
        return SitsDataset(
            grid=self.grid,
            class_names=self.class_names,
            days=self.days,
            pixel_ids=self.pixel_ids[index],
            plot_ids=self.plot_ids[index],
            labels=self.labels[index],
            values=self.values[index],
            valid=self.valid[index],
            preprocessed=self.preprocessed,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SitsDataset):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.class_names == other.class_names
            and self.preprocessed == other.preprocessed
            and np.array_equal(self.days, other.days)
            and np.array_equal(self.pixel_ids, other.pixel_ids)
            and np.array_equal(self.plot_ids, other.plot_ids)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.valid, other.valid)
        )


def _mixed_plot(plot_ids: np.ndarray, labels: np.ndarray):
    seen: dict[int, int] = {}
    for plot, lab in zip(plot_ids.tolist(), labels.tolist()):
        if seen.setdefault(plot, lab) != lab:
            return plot
    return None


# --------------------------------------------------------------------------
# file format
# --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(ds: SitsDataset, path) -> None:
    """Write ``ds`` in the columnar text format; output bytes depend only on ``ds``."""
    ds.validate()
    g = ds.grid
    lines = [
        "#classes=" + ",".join(ds.class_names),
        f"#bands={g.n_bands}",
        "#days=" + ",".join(str(int(d)) for d in ds.days),
        f"#grid={g.start_day},{g.step_days},{g.n_steps}",
    ]
    if ds.preprocessed:
        lines.append("#preprocessed=true")
    n = ds.n_pixels
    flat = ds.values.reshape(n, -1)
    mask = ds.valid.astype(np.int8)
    for i in range(n):
        row = [
            str(int(ds.pixel_ids[i])),
            str(int(ds.plot_ids[i])),
            ds.class_names[int(ds.labels[i])],
        ]
        row.extend(map(_fmt, flat[i].tolist()))
        row.extend(map(str, mask[i].tolist()))
        lines.append(",".join(row))
    data = ("\n".join(lines) + "\n").encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise DatasetError(f"cannot write dataset to {path}: {exc}") from exc


def _int(text: str, what: str, line: int, err=MalformedRowError) -> int:
    try:
        return int(text)
    except ValueError:
        raise err(f"{what} is not an integer: {text!r}", line) from None


def load_dataset(path) -> SitsDataset:
    """Parse a columnar dataset file.

    Raises:
        MalformedHeaderError, NonMonotoneDaysError, UnknownClassError,
        DuplicatePixelError, MalformedRowError, EmptyDatasetError,
        PlotLabelError: each naming the offending line.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    headers: dict[str, tuple[str, int]] = {}
    rows: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if line.startswith("#"):
                if rows:
                    raise MalformedHeaderError("header line after pixel rows", lineno)
                if "=" not in line:
                    raise MalformedHeaderError(f"expected '#key=value', got {line!r}", lineno)
                key, value = line[1:].split("=", 1)
                key = key.strip()
                if key in headers:
                    raise MalformedHeaderError(f"duplicate header {key!r}", lineno)
                headers[key] = (value.strip(), lineno)
            else:
                rows.append((lineno, line))

    for key in ("classes", "bands", "days"):
        if key not in headers:
            raise MalformedHeaderError(f"missing '#{key}=' header", 1)
    unknown = set(headers) - {"classes", "bands", "days", "grid", "preprocessed"}
    if unknown:
        key = sorted(unknown)[0]
        raise MalformedHeaderError(f"unknown header {key!r}", headers[key][1])

    text, ln = headers["classes"]
    class_names = tuple(c.strip() for c in text.split(",")) if text else ()
    if not class_names or any(not c for c in class_names):
        raise MalformedHeaderError("empty class list", ln)
    if len(set(class_names)) != len(class_names):
        raise MalformedHeaderError("duplicate class names", ln)
    class_index = {c: i for i, c in enumerate(class_names)}

    text, ln = headers["bands"]
    n_bands = _int(text, "band count", ln, MalformedHeaderError)
    if n_bands < 1:
        raise MalformedHeaderError("band count must be >= 1", ln)

    text, ln = headers["days"]
    days = np.array([_int(d, "day", ln, MalformedHeaderError) for d in text.split(",")], dtype=np.int64)
    if np.any(np.diff(days) <= 0):
        raise NonMonotoneDaysError("acquisition days are not strictly increasing", ln)
    n_days = len(days)

    if "grid" in headers:
        text, ln = headers["grid"]
        parts = text.split(",")
        if len(parts) != 3:
            raise MalformedHeaderError("grid header needs start,step,n_steps", ln)
        start, step, n_steps = (_int(p, "grid field", ln, MalformedHeaderError) for p in parts)
        try:
            grid = TimeGrid(start, step, n_steps, n_bands)
        except ValueError as exc:
            raise MalformedHeaderError(str(exc), ln) from None
    else:
        grid = TimeGrid(n_bands=n_bands)

    preprocessed = False
    if "preprocessed" in headers:
        text, ln = headers["preprocessed"]
        if text not in ("true", "false"):
            raise MalformedHeaderError("preprocessed must be true or false", ln)
        preprocessed = text == "true"

    if not rows:
        raise EmptyDatasetError("no pixels", None)

    width = 3 + n_bands * n_days + n_days
    n = len(rows)
    pixel_ids = np.empty(n, dtype=np.int64)
    plot_ids = np.empty(n, dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    values = np.empty((n, n_bands * n_days), dtype=np.float64)
    valid = np.empty((n, n_days), dtype=bool)
    seen_pixels: dict[int, int] = {}
    plot_label: dict[int, int] = {}
    for i, (lineno, line) in enumerate(rows):
        parts = line.split(",")
        if len(parts) != width:
            raise MalformedRowError(f"expected {width} fields, got {len(parts)}", lineno)
        pid = _int(parts[0], "pixel_id", lineno)
        plot = _int(parts[1], "plot_id", lineno)
        name = parts[2]
        if name not in class_index:
            raise UnknownClassError(f"unknown class name {name!r}", lineno)
        if pid in seen_pixels:
            raise DuplicatePixelError(
                f"duplicate pixel_id {pid} (first on line {seen_pixels[pid]})", lineno
            )
        seen_pixels[pid] = lineno
        lab = class_index[name]
        if plot_label.setdefault(plot, lab) != lab:
            raise PlotLabelError(f"plot {plot} mixes labels", lineno)
        try:
            values[i] = np.array(parts[3 : 3 + n_bands * n_days], dtype=np.float64)
        except ValueError:
            raise MalformedRowError("non-numeric reflectance value", lineno) from None
        if not np.all(np.isfinite(values[i])):
            raise MalformedRowError("non-finite reflectance value", lineno)
        mask = parts[3 + n_bands * n_days :]
        if any(m not in ("0", "1") for m in mask):
            raise MalformedRowError("validity flags must be 0 or 1", lineno)
        valid[i] = [m == "1" for m in mask]
        if not valid[i].any():
            raise MalformedRowError(f"pixel {pid} has no valid acquisition", lineno)
        pixel_ids[i], plot_ids[i], labels[i] = pid, plot, lab

    return SitsDataset(
        grid=grid,
        class_names=class_names,
        days=days,
        pixel_ids=pixel_ids,
        plot_ids=plot_ids,
        labels=labels,
        values=values.reshape(n, n_bands, n_days),
        valid=valid,
        preprocessed=preprocessed,
    )


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------


@dataclass
class DatasetSummary:
    class_names: tuple
    plot_counts: np.ndarray
    pixel_counts: np.ndarray
    plot_size_min: int
    plot_size_max: int
    plot_size_mean: float
    out_of_range: int  # reflectances outside [0, 1] among valid acquisitions

    @property
    def n_plots(self) -> int:
        return int(self.plot_counts.sum())

    @property
    def n_pixels(self) -> int:
        return int(self.pixel_counts.sum())

    @property
    def plot_shares(self) -> np.ndarray:
        return self.plot_counts / self.plot_counts.sum()

    @property
    def pixel_shares(self) -> np.ndarray:
        return self.pixel_counts / self.pixel_counts.sum()

    def table(self) -> str:
        out = [f"{'class':<14}{'plots':>8}{'share':>8}{'pixels':>9}"]
        for name, p, s, px in zip(self.class_names, self.plot_counts, self.plot_shares, self.pixel_counts):
            out.append(f"{name:<14}{int(p):>8}{s:>8.3f}{int(px):>9}")
        out.append(f"{'total':<14}{self.n_plots:>8}{1.0:>8.3f}{self.n_pixels:>9}")
        out.append(
            f"plot size: min {self.plot_size_min}, max {self.plot_size_max}, "
            f"mean {self.plot_size_mean:.2f}; out-of-range values: {self.out_of_range}"
        )
        return "\n".join(out)


def dataset_summary(ds: SitsDataset) -> DatasetSummary:
    k = ds.n_classes
    pixel_counts = np.bincount(ds.labels, minlength=k)
    plots, plot_lab = ds.plot_labels()
    plot_counts = np.bincount(plot_lab, minlength=k)
    _, sizes = np.unique(ds.plot_ids, return_counts=True)
    vals = ds.values[np.broadcast_to(ds.valid[:, None, :], ds.values.shape)]
    oor = int(np.count_nonzero((vals < 0.0) | (vals > 1.0)))
    return DatasetSummary(
        class_names=ds.class_names,
        plot_counts=plot_counts,
        pixel_counts=pixel_counts,
        plot_size_min=int(sizes.min()),
        plot_size_max=int(sizes.max()),
        plot_size_mean=float(sizes.mean()),
        out_of_range=oor,
    )


# --------------------------------------------------------------------------
# synthetic phenology
# --------------------------------------------------------------------------


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class SynthConfig:
    """Parameters of the synthetic double-logistic phenology generator.

    Per class ``c`` and band ``b`` the noiseless reflectance at day ``t``
    (taken modulo ``season_length``) is::

        base[c,b] + amp[c,b] * (logistic(k_up[c]*(t - sos[c])) - logistic(k_down[c]*(t - eos[c])))

    ``plot_day_jitter`` and ``plot_base_jitter`` add per-plot random offsets to
    the green-up/senescence days and to the baseline, which is what makes plots
    of one class differ; both default to 0.
    """

    plots_per_class: Sequence[int]
    base: np.ndarray
    amp: np.ndarray
    sos: np.ndarray
    eos: np.ndarray
    k_up: np.ndarray
    k_down: np.ndarray
    class_names: Sequence[str] | None = None
    n_classes: int | None = None
    pixels_per_plot: tuple = (6, 20)
    noise_std: float = 0.01
    gap_prob: float = 0.3
    plot_day_jitter: float = 0.0
    plot_base_jitter: float = 0.0
    revisit_days: int = 5
    span_days: int = 730
    season_length: int = 365
    grid: TimeGrid = field(default_factory=TimeGrid)
    seed: int = 0

    def __post_init__(self):
        self.plots_per_class = tuple(int(p) for p in self.plots_per_class)
        k = len(self.plots_per_class)
        if self.n_classes is None:
            self.n_classes = k
        if self.n_classes != k:
            raise ValueError("n_classes does not match plots_per_class")
        if k < 1:
            raise ValueError("need at least one class")
        if self.class_names is None:
            self.class_names = tuple(f"class{i}" for i in range(k))
        self.class_names = tuple(self.class_names)
        if len(self.class_names) != k:
            raise ValueError("class_names does not match plots_per_class")
        if any(p < 1 for p in self.plots_per_class):
            raise ValueError("plots_per_class entries must be >= 1")
        b = self.grid.n_bands
        self.base = np.broadcast_to(np.asarray(self.base, dtype=float), (k, b)).copy()
        self.amp = np.broadcast_to(np.asarray(self.amp, dtype=float), (k, b)).copy()
        for name in ("sos", "eos", "k_up", "k_down"):
            setattr(self, name, np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (k,)).copy())
        lo, hi = self.pixels_per_plot
        if not 1 <= lo <= hi:
            raise ValueError("pixels_per_plot must satisfy 1 <= min <= max")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not 0.0 <= self.gap_prob < 1.0:
            raise ValueError("gap_prob must be in [0, 1)")
        if self.plot_day_jitter < 0 or self.plot_base_jitter < 0:
            raise ValueError("jitter must be >= 0")
        if self.revisit_days < 1 or self.span_days < 1:
            raise ValueError("revisit_days and span_days must be >= 1")

    @property
    def acquisition_days(self) -> np.ndarray:
        return np.arange(self.grid.start_day, self.grid.start_day + self.span_days, self.revisit_days, dtype=np.int64)


def phenology_signal(cfg: SynthConfig, label: int, days, sos_shift: float = 0.0, eos_shift: float = 0.0) -> np.ndarray:
    """Noiseless (n_bands, len(days)) reflectance of class ``label``."""
    t = np.asarray(days, dtype=float) % cfg.season_length
    c = label
    ramp = _logistic(cfg.k_up[c] * (t - cfg.sos[c] - sos_shift)) - _logistic(
        cfg.k_down[c] * (t - cfg.eos[c] - eos_shift)
    )
    return cfg.base[c][:, None] + cfg.amp[c][:, None] * ramp[None, :]


def generate_synthetic(cfg: SynthConfig) -> SitsDataset:
    """Draw a labeled dataset; a pure function of ``cfg`` (including its seed)."""
    rng = np.random.default_rng(cfg.seed)
    days = cfg.acquisition_days
    t = len(days)
    b = cfg.grid.n_bands
    lo, hi = cfg.pixels_per_plot
    vals, masks, plots, labels = [], [], [], []
    plot_id = 0
    for c, n_plots in enumerate(cfg.plots_per_class):
        for _ in range(n_plots):
            n_px = int(rng.integers(lo, hi + 1))
            d_sos, d_eos = rng.normal(0.0, cfg.plot_day_jitter, size=2) if cfg.plot_day_jitter else (0.0, 0.0)
            signal = phenology_signal(cfg, c, days, d_sos, d_eos)
            if cfg.plot_base_jitter:
                signal = signal + rng.normal(0.0, cfg.plot_base_jitter, size=(b, 1))
            noise = rng.normal(0.0, cfg.noise_std, size=(n_px, b, t)) if cfg.noise_std else 0.0
            v = signal[None] + noise
            m = rng.random((n_px, t)) >= cfg.gap_prob
            empty = ~m.any(axis=1)
            if empty.any():
                m[empty, rng.integers(0, t, size=int(empty.sum()))] = True
            v = np.where(m[:, None, :], v, 0.0)
            vals.append(v)
            masks.append(m)
            plots.append(np.full(n_px, plot_id))
            labels.append(np.full(n_px, c))
            plot_id += 1
    values = np.concatenate(vals)
    return SitsDataset(
        grid=cfg.grid,
        class_names=cfg.class_names,
        days=days,
        pixel_ids=np.arange(len(values)),
        plot_ids=np.concatenate(plots),
        labels=np.concatenate(labels),
        values=values,
        valid=np.concatenate(masks),
    )


TABLE1_CLASSES = (
    "birch", "hornbeam", "chestnut", "oak", "douglas_fir",
    "fraxinus", "beech", "poplar", "pine", "robinia",
)
TABLE1_PLOTS = (52, 48, 61, 3219, 131, 39, 254, 78, 486, 20)
_CONIFERS = ("douglas_fir", "pine")

# Sentinel-2 bands B2 B3 B4 B5 B6 B7 B8 B8A B11 B12 of a broadleaf canopy.
_BASE = np.array([0.030, 0.050, 0.030, 0.070, 0.120, 0.140, 0.150, 0.160, 0.120, 0.060])
_AMP = np.array([-0.010, 0.020, -0.015, 0.030, 0.150, 0.200, 0.220, 0.220, 0.060, 0.000])


def table1_config(
    scale: float = 0.25,
    separation: float = 1.0,
    noise_std: float = 0.01,
    gap_prob: float = 0.3,
    plot_day_jitter: float = 6.0,
    plot_base_jitter: float = 0.006,
    pixels_per_plot: tuple = (6, 20),
    grid: TimeGrid | None = None,
    seed: int = 0,
    design_seed: int = 2024,
) -> SynthConfig:
    """Ten-species benchmark with the reference-data class proportions.

    Plot counts are the reference counts times ``scale`` (at least one plot per
    class). ``separation`` scales how far each species' phenology sits from the
    majority (oak) profile: small values mean heavy overlap. The phenology
    design is drawn from ``design_seed`` so it stays fixed across data seeds.
    """
    grid = grid or TimeGrid()
    b = grid.n_bands
    if b != len(_BASE):
        base0 = np.interp(np.linspace(0, 1, b), np.linspace(0, 1, len(_BASE)), _BASE)
        amp0 = np.interp(np.linspace(0, 1, b), np.linspace(0, 1, len(_AMP)), _AMP)
    else:
        base0, amp0 = _BASE, _AMP
    design = np.random.default_rng(design_seed)
    k = len(TABLE1_CLASSES)
    base = np.empty((k, b))
    amp = np.empty((k, b))
    sos = np.empty(k)
    eos = np.empty(k)
    k_up = np.empty(k)
    k_down = np.empty(k)
    for c, name in enumerate(TABLE1_CLASSES):
        d_base = design.normal(0.0, 0.012, size=b)
        d_amp = design.normal(0.0, 0.04, size=b)
        d_sos, d_eos = design.uniform(-20, 20, size=2)
        d_ku, d_kd = design.uniform(-0.03, 0.03, size=2)
        if name == "oak":
            d_base[:] = 0.0
            d_amp[:] = 0.0
            d_sos = d_eos = d_ku = d_kd = 0.0
        s = separation
        base[c] = base0 + s * d_base
        amp[c] = amp0 * (1.0 + s * d_amp / 0.1) if name not in _CONIFERS else 0.05 * amp0
        if name in _CONIFERS:
            base[c] = base0 + 0.5 * amp0 + s * d_base
        sos[c] = 110.0 + s * d_sos
        eos[c] = 295.0 + s * d_eos
        k_up[c] = 0.10 + s * d_ku
        k_down[c] = 0.08 + s * d_kd
    plots = tuple(max(1, int(round(p * scale))) for p in TABLE1_PLOTS)
    return SynthConfig(
        plots_per_class=plots,
        base=base,
        amp=amp,
        sos=sos,
        eos=eos,
        k_up=k_up,
        k_down=k_down,
        class_names=TABLE1_CLASSES,
        pixels_per_plot=pixels_per_plot,
        noise_std=noise_std,
        gap_prob=gap_prob,
        plot_day_jitter=plot_day_jitter,
        plot_base_jitter=plot_base_jitter,
        grid=grid,
        seed=seed,
    )
