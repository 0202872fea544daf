"""Gap-filling onto the regular grid, per-band standardization and feature layouts."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import PixelSample, SitsDataset, TimeGrid

FLAT = "flat"
CHANNELS = "channels"


class GapFillError(ValueError):
    pass


def _interp_weights(days: np.ndarray, valid: np.ndarray, grid_days: np.ndarray):
    """Left/right acquisition indices and right-hand weight for every grid day.

    Grid days outside the valid range get both indices on the nearest valid
    acquisition (constant extrapolation).
    """
    vdays = days[valid]
    vidx = np.flatnonzero(valid)
    pos = np.searchsorted(vdays, grid_days, side="right")
    right = np.clip(pos, 0, len(vdays) - 1)
    left = np.clip(pos - 1, 0, len(vdays) - 1)
    d0 = vdays[left].astype(float)
    d1 = vdays[right].astype(float)
    span = d1 - d0
    w = np.zeros(len(grid_days))
    inner = span > 0
    w[inner] = (grid_days[inner] - d0[inner]) / span[inner]
    return vidx[left], vidx[right], w


def gapfill(pixel: PixelSample, grid: TimeGrid) -> np.ndarray:
    """Linearly interpolate valid acquisitions onto ``grid``; returns (n_bands, n_steps)."""
    valid = np.asarray(pixel.valid, dtype=bool)
    if not valid.any():
        raise GapFillError(f"pixel {pixel.pixel_id} has no valid acquisition")
    li, ri, w = _interp_weights(np.asarray(pixel.days), valid, grid.days)
    v = np.asarray(pixel.values, dtype=float)
    v0 = v[:, li]
    return v0 + (v[:, ri] - v0) * w


@dataclass(eq=False)
class FeatureMatrix:
    """Per-pixel features aligned with pixel/plot ids and labels.

    ``values`` is (n, n_bands*n_steps) for the flat layout and
    (n, n_bands, n_steps) for the channels layout; flat index is
    ``band * n_steps + step``.
    """

    values: np.ndarray
    n_bands: int
    n_steps: int
    pixel_ids: np.ndarray
    plot_ids: np.ndarray
    labels: np.ndarray
    layout: str = FLAT

    def __post_init__(self):
        if self.layout not in (FLAT, CHANNELS):
            raise ValueError(f"unknown layout {self.layout!r}")
        n = len(self.pixel_ids)
        want = (n, self.n_bands * self.n_steps) if self.layout == FLAT else (n, self.n_bands, self.n_steps)
        if self.values.shape != want:
            raise ValueError(f"feature shape {self.values.shape} != {want}")
        if len(self.plot_ids) != n or len(self.labels) != n:
            raise ValueError("ids and labels must align with rows")

    def __len__(self):
        return len(self.pixel_ids)

    def rows(self, index) -> "FeatureMatrix":
        return replace(
            self,
            values=self.values[index],
            pixel_ids=self.pixel_ids[index],
            plot_ids=self.plot_ids[index],
            labels=self.labels[index],
        )

    def channels(self) -> np.ndarray:
        return self.values.reshape(len(self), self.n_bands, self.n_steps)


def gapfill_dataset(ds: SitsDataset) -> FeatureMatrix:
    """Gap-fill every pixel of ``ds`` onto its grid (flat layout)."""
    grid = ds.grid
    gdays = grid.days
    n = ds.n_pixels
    out = np.empty((n, grid.n_bands, grid.n_steps))
    if ds.valid.all():
        li, ri, w = _interp_weights(ds.days, np.ones(len(ds.days), bool), gdays)
        v0 = ds.values[:, :, li]
        out[:] = v0 + (ds.values[:, :, ri] - v0) * w
    else:
        for i in range(n):
            valid = ds.valid[i]
            if not valid.any():
                raise GapFillError(f"pixel {int(ds.pixel_ids[i])} has no valid acquisition")
            li, ri, w = _interp_weights(ds.days, valid, gdays)
            v0 = ds.values[i][:, li]
            out[i] = v0 + (ds.values[i][:, ri] - v0) * w
    return FeatureMatrix(
        values=out.reshape(n, -1),
        n_bands=grid.n_bands,
        n_steps=grid.n_steps,
        pixel_ids=ds.pixel_ids.copy(),
        plot_ids=ds.plot_ids.copy(),
        labels=ds.labels.copy(),
    )


@dataclass
class BandStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.std))):
            raise ValueError("non-finite band statistics")
        if np.any(self.std <= 0):
            raise ValueError(f"zero-variance band(s): {np.flatnonzero(self.std <= 0).tolist()}")

    @property
    def n_bands(self) -> int:
        return len(self.mean)


def standardize_fit(matrix: FeatureMatrix) -> BandStats:
    """Per-band mean and population std, pooled over all pixels and all dates."""
    if len(matrix) == 0:
        raise ValueError("cannot fit statistics on an empty matrix")
    ch = matrix.channels()
    mean = ch.mean(axis=(0, 2))
    std = np.sqrt(((ch - mean[None, :, None]) ** 2).mean(axis=(0, 2)))
    if np.any(std <= 0):
        raise ValueError(f"zero-variance band(s): {np.flatnonzero(std <= 0).tolist()}")
    return BandStats(mean, std)


def standardize_apply(matrix: FeatureMatrix, stats: BandStats) -> FeatureMatrix:
    if stats.n_bands != matrix.n_bands:
        raise ValueError(f"band count mismatch: stats have {stats.n_bands}, data {matrix.n_bands}")
    ch = (matrix.channels() - stats.mean[None, :, None]) / stats.std[None, :, None]
    if matrix.layout == FLAT:
        ch = ch.reshape(len(matrix), -1)
    return replace(matrix, values=ch)


def as_layout(matrix: FeatureMatrix, target: str) -> FeatureMatrix:
    if target not in (FLAT, CHANNELS):
        raise ValueError(f"unknown layout {target!r}")
    if target == matrix.layout:
        return matrix
    n = len(matrix)
    if target == CHANNELS:
        vals = matrix.values.reshape(n, matrix.n_bands, matrix.n_steps)
    else:
        vals = matrix.values.reshape(n, -1)
    return replace(matrix, values=vals, layout=target)


def features_to_dataset(matrix: FeatureMatrix, grid: TimeGrid, class_names) -> SitsDataset:
    """Wrap a gap-filled matrix as a complete dataset on the grid days."""
    ch = as_layout(matrix, CHANNELS).values
    return SitsDataset(
        grid=grid,
        class_names=class_names,
        days=grid.days,
        pixel_ids=matrix.pixel_ids,
        plot_ids=matrix.plot_ids,
        labels=matrix.labels,
        values=ch,
        valid=np.ones((len(matrix), grid.n_steps), dtype=bool),
        preprocessed=True,
    )
