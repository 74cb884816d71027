"""Heatmap representation of 2D landmarks: Gaussian encoding, visibility-
masked MSE loss, subpixel peak decoding, and ensemble averaging.

Encoded maps are peak-normalized (amplitude 1 at the mean), not
unit-integral; means may lie off-grid, in which case the grid samples a
clipped Gaussian tail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoPeakError

__all__ = ["Heatmap", "encode", "decode", "masked_mse", "average", "write_pgm"]


@dataclass(frozen=True)
class Heatmap:
    """Scalar grid in [0, 1]; values[v, u] indexes row v (y), column u (x)."""

    values: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.values, dtype=float)
        if a.ndim != 2 or a.size == 0:
            raise ValueError("heatmap values must be a non-empty 2D grid")
        if not np.all(np.isfinite(a)):
            raise ValueError("heatmap values must be finite")
        if a.min() < -1e-9 or a.max() > 1.0 + 1e-9:
            raise ValueError("heatmap values must lie in [0, 1]")
        object.__setattr__(self, "values", a)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def encode(point, width: int, height: int, sigma: float = 1.0) -> Heatmap:
    """Peak-normalized Gaussian centred on `point` = (x, y) in pixels."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x, y = float(point[0]), float(point[1])
    u = np.arange(width, dtype=float)
    v = np.arange(height, dtype=float)
    gx = np.exp(-((u - x) ** 2) / (2.0 * sigma**2))
    gy = np.exp(-((v - y) ** 2) / (2.0 * sigma**2))
    return Heatmap(np.outer(gy, gx))


def decode(hm: Heatmap) -> np.ndarray:
    """Peak location (x, y) with quarter-pixel refinement.

    Argmax pixel (ties resolved toward the smallest row-major index),
    shifted 0.25 px toward the strictly larger adjacent neighbour along
    each axis.
    """
    a = hm.values
    if a.max() == a.min():
        raise NoPeakError("constant heatmap has no peak")
    iy, ix = np.unravel_index(int(np.argmax(a)), a.shape)
    x, y = float(ix), float(iy)

    left = a[iy, ix - 1] if ix > 0 else -np.inf
    right = a[iy, ix + 1] if ix < hm.width - 1 else -np.inf
    if right > left:
        x += 0.25
    elif left > right:
        x -= 0.25

    up = a[iy - 1, ix] if iy > 0 else -np.inf
    down = a[iy + 1, ix] if iy < hm.height - 1 else -np.inf
    if down > up:
        y += 0.25
    elif up > down:
        y -= 0.25
    return np.array([x, y])


def masked_mse(
    pred: Sequence[Heatmap], truth: Sequence[Heatmap], visibility: Sequence[bool]
) -> float:
    """Visibility-masked loss: (1/N) sum_i v_i * mean((pred_i - truth_i)^2).

    Invisible landmarks contribute nothing regardless of content.
    """
    if not (len(pred) == len(truth) == len(visibility)):
        raise ValueError("pred, truth and visibility must have equal length")
    n = len(pred)
    if n == 0:
        raise ValueError("need at least one heatmap pair")
    total = 0.0
    for p, t, vis in zip(pred, truth, visibility):
        if p.values.shape != t.values.shape:
            raise ValueError("heatmap dimensions differ")
        if vis:
            total += float(np.mean((p.values - t.values) ** 2))
    return total / n


def average(hms: Sequence[Heatmap]) -> Heatmap:
    """Elementwise arithmetic mean of same-sized heatmaps (model ensembling)."""
    if len(hms) == 0:
        raise ValueError("need at least one heatmap")
    shape = hms[0].values.shape
    if any(h.values.shape != shape for h in hms):
        raise ValueError("heatmap dimensions differ")
    return Heatmap(sum(h.values for h in hms) / len(hms))


def write_pgm(hm: Heatmap, path) -> None:
    """Debug dump as a binary PGM (values scaled to 0..255)."""
    grid = np.clip(np.rint(hm.values * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{hm.width} {hm.height}\n255\n".encode("ascii"))
        f.write(grid.tobytes())
