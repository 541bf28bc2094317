"""Segmentation quality metrics: Dice overlap, symmetric average surface
distance, and the boundary F-score.

Masks are strict {0, 1} grids. Boundary metrics operate on the set of
foreground pixels that touch background through a 4-neighbor (the image
border counts as background), with nearest-neighbor distances computed
exactly via a KD-tree; no distance-transform approximation is used.

Distances are reported in pixels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import MaskOutOfRange, ShapeMismatch

#: Boundary tolerance for the F-score, as a fraction of the image diagonal.
F_BOUNDARY_TOL_FRACTION = 0.008


def as_binary_mask(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ShapeMismatch(f"mask must be 2-D, got shape {m.shape}")
    vals = np.unique(m)
    if not np.isin(vals, (0, 1)).all():
        raise MaskOutOfRange(f"mask must be strictly binary, found values {vals[:8]}")
    return m.astype(bool)


def _check_same_shape(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"mask shapes differ: {pred.shape} vs {gt.shape}")


def image_diagonal(shape: tuple[int, int]) -> float:
    return math.hypot(shape[0], shape[1])


def dice(pred, gt) -> float:
    """Dice overlap 2|P & G| / (|P| + |G|); two empty masks count as 1.0."""
    p = as_binary_mask(pred)
    g = as_binary_mask(gt)
    _check_same_shape(p, g)
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / total


def boundary_pixels(mask) -> np.ndarray:
    """(n, 2) array of (x, y) boundary pixels in row-major order.

    A foreground pixel is boundary when at least one 4-neighbor is
    background; pixels on the image border always qualify.
    """
    m = as_binary_mask(mask)
    padded = np.pad(m, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    ys, xs = np.nonzero(m & ~interior)
    return np.stack([xs, ys], axis=1).astype(np.int64)


def _directed_mean(points: np.ndarray, targets: np.ndarray) -> float:
    dists, _ = cKDTree(targets).query(points)
    return float(np.mean(dists))


def average_surface_distance(pred, gt) -> float:
    """Symmetric mean nearest-boundary distance in pixels.

    When exactly one mask has no boundary the distance is undefined; a
    finite sentinel equal to the image diagonal is returned so sequence
    means stay finite while failures still dominate them. Two boundary-less
    masks are identical, distance 0.
    """
    p = as_binary_mask(pred)
    g = as_binary_mask(gt)
    _check_same_shape(p, g)
    bp = boundary_pixels(p)
    bg = boundary_pixels(g)
    if bp.size == 0 and bg.size == 0:
        return 0.0
    if bp.size == 0 or bg.size == 0:
        return image_diagonal(p.shape)
    fwd = _directed_mean(bp.astype(np.float64), bg.astype(np.float64))
    bwd = _directed_mean(bg.astype(np.float64), bp.astype(np.float64))
    return 0.5 * (fwd + bwd)


def default_boundary_tolerance(shape: tuple[int, int]) -> int:
    return math.ceil(F_BOUNDARY_TOL_FRACTION * image_diagonal(shape))


def f_boundary(pred, gt, tol: float | None = None) -> float:
    """Boundary F-score: harmonic mean of boundary precision and recall.

    A boundary pixel matches when its nearest opposite boundary lies within
    tol pixels (default: 0.8% of the image diagonal, rounded up). Both
    boundaries empty scores 1.0; exactly one empty scores 0.0.
    """
    p = as_binary_mask(pred)
    g = as_binary_mask(gt)
    _check_same_shape(p, g)
    if tol is None:
        tol = default_boundary_tolerance(p.shape)
    if tol < 0:
        raise MaskOutOfRange(f"tolerance must be >= 0, got {tol}")
    bp = boundary_pixels(p)
    bg = boundary_pixels(g)
    if bp.size == 0 and bg.size == 0:
        return 1.0
    if bp.size == 0 or bg.size == 0:
        return 0.0
    d_pred, _ = cKDTree(bg.astype(np.float64)).query(bp.astype(np.float64))
    d_gt, _ = cKDTree(bp.astype(np.float64)).query(bg.astype(np.float64))
    precision = float(np.mean(d_pred <= tol))
    recall = float(np.mean(d_gt <= tol))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class MetricsReport:
    """Per-frame metric traces plus their arithmetic means."""

    dice: list[float] = field(default_factory=list)
    asd: list[float] = field(default_factory=list)
    f_boundary: list[float] = field(default_factory=list)

    @property
    def mean_dice(self) -> float:
        return float(np.mean(self.dice))

    @property
    def mean_asd(self) -> float:
        return float(np.mean(self.asd))

    @property
    def mean_f_boundary(self) -> float:
        return float(np.mean(self.f_boundary))

    @classmethod
    def from_pairs(cls, preds, gts, tol: float | None = None) -> "MetricsReport":
        preds = list(preds)
        gts = list(gts)
        if len(preds) != len(gts):
            raise ShapeMismatch(
                f"{len(preds)} predictions vs {len(gts)} ground-truth masks"
            )
        report = cls()
        for p, g in zip(preds, gts):
            report.dice.append(dice(p, g))
            report.asd.append(average_surface_distance(p, g))
            report.f_boundary.append(f_boundary(p, g, tol))
        return report

    def to_dict(self) -> dict:
        return {
            "per_frame": {
                "dice": self.dice,
                "asd": self.asd,
                "f_boundary": self.f_boundary,
            },
            "means": {
                "dice": self.mean_dice,
                "asd": self.mean_asd,
                "f_boundary": self.mean_f_boundary,
            },
        }
