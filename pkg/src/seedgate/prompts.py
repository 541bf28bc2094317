"""Auxiliary point-prompt synthesis from a dense feature grid.

A cosine-similarity map anchored at the user click is searched, inside the
selected scale box, for up to three well-separated local maxima. Those
become extra positive prompts; no negative prompts are produced.

Feature grids may be coarser than the frame. The stride helpers at the
bottom map click coordinates into the grid and peak cells back to frame
pixels (cell center = stride * i + stride // 2).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadConfig,
    BoxOutOfBounds,
    ClickOutOfBounds,
    DuplicatePoint,
    ShapeMismatch,
    ZeroNormAnchor,
)
from .maps import as_f64

Point = tuple[int, int]  # (x, y)
Box = tuple[int, int, int, int]  # (x0, y0, x1, y1), half-open


@dataclass(frozen=True)
class RefineConfig:
    nms_radius: int = 6
    max_aux: int = 3
    #: optional acceptance floor on peak similarity; disabled by default
    min_similarity: float = float("-inf")

    def __post_init__(self):
        if self.nms_radius < 1:
            raise BadConfig("nms_radius must be >= 1")
        if self.max_aux < 0:
            raise BadConfig("max_aux must be >= 0")


@dataclass
class SimilarityMap:
    """Dense cosine similarity to the anchor pixel's feature vector."""

    map: np.ndarray  # (h, w) in [-1, 1]
    anchor: Point  # grid coordinates of the click


@dataclass(frozen=True)
class Peak:
    x: int
    y: int
    score: float


@dataclass
class PromptSet:
    """Ordered positive point prompts; entry 0 is always the user click."""

    points: list[Point]
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.labels:
            self.labels = ["positive"] * len(self.points)


def dense_similarity(features, p0: Point) -> SimilarityMap:
    """Per-pixel cosine between the feature at p0 and every grid cell.

    Cells with zero-norm features score -1 so they can never win a peak
    search. The anchor itself scores exactly 1.
    """
    f = as_f64(features)
    if f.ndim != 3:
        raise ShapeMismatch(f"feature grid must be (h, w, d), got {f.shape}")
    h, w, _ = f.shape
    x, y = int(p0[0]), int(p0[1])
    if not (0 <= x < w and 0 <= y < h):
        raise ClickOutOfBounds(f"anchor {p0} outside {w}x{h} grid")

    anchor_vec = f[y, x]
    anchor_norm = np.linalg.norm(anchor_vec)
    if anchor_norm == 0.0:
        raise ZeroNormAnchor(f"feature vector at {p0} has zero norm")

    norms = np.linalg.norm(f, axis=2)
    valid = norms > 0.0
    sim = np.full((h, w), -1.0)
    dots = f @ (anchor_vec / anchor_norm)
    sim[valid] = np.clip(dots[valid] / norms[valid], -1.0, 1.0)
    sim[y, x] = 1.0
    return SimilarityMap(map=sim, anchor=(x, y))


def nms_peaks(sim: SimilarityMap, box: Box, cfg: RefineConfig) -> list[Peak]:
    """Greedy non-maximum suppression restricted to a box.

    Repeatedly takes the highest unsuppressed cell inside the box and
    suppresses its Chebyshev r-neighborhood, until max_aux peaks are found
    or the box is exhausted. The anchor's own neighborhood is suppressed up
    front (the click is already a prompt). Exact value ties break in
    row-major order (smallest y, then smallest x) so results are stable.
    """
    grid = sim.map
    h, w = grid.shape
    x0, y0, x1, y1 = (int(v) for v in box)
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise BoxOutOfBounds(f"box {box} outside {w}x{h} map")

    suppressed = np.zeros((h, w), dtype=bool)
    _suppress(suppressed, sim.anchor, cfg.nms_radius)

    ys, xs = np.mgrid[y0:y1, x0:x1]
    ys = ys.ravel()
    xs = xs.ravel()
    values = grid[ys, xs]
    # row-major tie-break falls out of a stable sort on value alone
    order = np.argsort(-values, kind="stable")

    peaks: list[Peak] = []
    for idx in order:
        if len(peaks) >= cfg.max_aux:
            break
        v = values[idx]
        if v <= cfg.min_similarity:
            break
        py, px = int(ys[idx]), int(xs[idx])
        if suppressed[py, px]:
            continue
        peaks.append(Peak(x=px, y=py, score=float(v)))
        _suppress(suppressed, (px, py), cfg.nms_radius)
    return peaks


def _suppress(mask: np.ndarray, center: Point, radius: int) -> None:
    h, w = mask.shape
    cx, cy = center
    mask[
        max(0, cy - radius) : min(h, cy + radius + 1),
        max(0, cx - radius) : min(w, cx + radius + 1),
    ] = True


def assemble_prompts(p0: Point, aux: list[Point]) -> PromptSet:
    """Prepend the user click to the auxiliary points, all labeled positive."""
    p0 = (int(p0[0]), int(p0[1]))
    points = [p0]
    for pt in aux:
        pt = (int(pt[0]), int(pt[1]))
        if pt in points:
            raise DuplicatePoint(f"auxiliary point {pt} duplicates an existing prompt")
        points.append(pt)
    return PromptSet(points=points)


# -- stride mapping between frame pixels and a coarser feature grid ----------

def frame_to_grid(p: Point, stride: int, grid_hw: tuple[int, int]) -> Point:
    """Map a frame-pixel point to the feature-grid cell containing it."""
    gh, gw = grid_hw
    return (min(int(p[0]) // stride, gw - 1), min(int(p[1]) // stride, gh - 1))


def grid_to_frame(p: Point, stride: int) -> Point:
    """Map a grid cell to the frame pixel at its center."""
    return (int(p[0]) * stride + stride // 2, int(p[1]) * stride + stride // 2)


def frame_box_to_grid_box(box: Box, stride: int, grid_hw: tuple[int, int]) -> Box | None:
    """Grid-space box of cells whose centers fall inside a frame-pixel box.

    Restricting the peak search to cell centers inside the box guarantees
    that peaks mapped back via grid_to_frame land inside the box, with no
    clamping. Returns None when no cell center is covered.
    """
    gh, gw = grid_hw
    x0, y0, x1, y1 = box
    half = stride // 2
    gx0 = max(0, -(-(x0 - half) // stride))  # ceil division
    gy0 = max(0, -(-(y0 - half) // stride))
    gx1 = min(gw, (x1 - 1 - half) // stride + 1)
    gy1 = min(gh, (y1 - 1 - half) // stride + 1)
    if gx0 >= gx1 or gy0 >= gy1:
        return None
    return (gx0, gy0, gx1, gy1)
