"""Independent brute-force oracles and fixture builders shared by the tests.

Everything here is deliberately written as plain loops over Python scalars,
with no calls into the package's own vectorized implementations, so oracle
agreement is a meaningful check.
"""
from __future__ import annotations

import json
import math

import numpy as np


# -- metric oracles -----------------------------------------------------------

def boundary_oracle(mask) -> list[tuple[int, int]]:
    """Foreground pixels with a 4-neighbor background (border = background)."""
    m = np.asarray(mask)
    h, w = m.shape
    points = []
    for y in range(h):
        for x in range(w):
            if m[y, x] != 1:
                continue
            exposed = False
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                xx, yy = x + dx, y + dy
                if not (0 <= xx < w and 0 <= yy < h) or m[yy, xx] == 0:
                    exposed = True
                    break
            if exposed:
                points.append((x, y))
    return points


def dice_oracle(pred, gt) -> float:
    p = np.asarray(pred)
    g = np.asarray(gt)
    inter = p_count = g_count = 0
    h, w = p.shape
    for y in range(h):
        for x in range(w):
            if p[y, x] == 1:
                p_count += 1
            if g[y, x] == 1:
                g_count += 1
            if p[y, x] == 1 and g[y, x] == 1:
                inter += 1
    if p_count + g_count == 0:
        return 1.0
    return 2.0 * inter / (p_count + g_count)


def _directed_mean_oracle(points, targets) -> float:
    total = 0.0
    for px, py in points:
        best = math.inf
        for tx, ty in targets:
            d = math.hypot(px - tx, py - ty)
            if d < best:
                best = d
        total += best
    return total / len(points)


def asd_oracle(pred, gt) -> float:
    bp = boundary_oracle(pred)
    bg = boundary_oracle(gt)
    h, w = np.asarray(pred).shape
    if not bp and not bg:
        return 0.0
    if not bp or not bg:
        return math.hypot(h, w)
    return 0.5 * (_directed_mean_oracle(bp, bg) + _directed_mean_oracle(bg, bp))


def f_boundary_oracle(pred, gt, tol) -> float:
    bp = boundary_oracle(pred)
    bg = boundary_oracle(gt)
    if not bp and not bg:
        return 1.0
    if not bp or not bg:
        return 0.0
    matched_p = sum(
        1
        for px, py in bp
        if any(math.hypot(px - tx, py - ty) <= tol for tx, ty in bg)
    )
    matched_g = sum(
        1
        for gx, gy in bg
        if any(math.hypot(gx - px, gy - py) <= tol for px, py in bp)
    )
    precision = matched_p / len(bp)
    recall = matched_g / len(bg)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# -- peak-selection oracle ----------------------------------------------------

def nms_oracle(grid, box, anchor, radius, max_aux) -> list[tuple[int, int, float]]:
    """Literal greedy peak scan: re-scan the whole box after each suppression.

    Ties resolve to the first maximum in row-major order because the scan
    uses a strict greater-than comparison.
    """
    g = np.asarray(grid)
    h, w = g.shape
    x0, y0, x1, y1 = box
    suppressed = [[False] * w for _ in range(h)]

    def suppress(cx, cy):
        for yy in range(max(0, cy - radius), min(h, cy + radius + 1)):
            for xx in range(max(0, cx - radius), min(w, cx + radius + 1)):
                suppressed[yy][xx] = True

    suppress(anchor[0], anchor[1])
    peaks = []
    while len(peaks) < max_aux:
        best = None
        for yy in range(y0, y1):
            for xx in range(x0, x1):
                if suppressed[yy][xx]:
                    continue
                v = float(g[yy, xx])
                if best is None or v > best[2]:
                    best = (xx, yy, v)
        if best is None:
            break
        peaks.append(best)
        suppress(best[0], best[1])
    return peaks


# -- scalar oracles -----------------------------------------------------------

def masked_pool_oracle(features, mask, eps) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    h, w, d = f.shape
    acc = np.zeros(d)
    weight = 0.0
    for y in range(h):
        for x in range(w):
            acc += m[y, x] * f[y, x]
            weight += m[y, x]
    return acc / (weight + eps)


def dense_similarity_oracle(features, p0) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    h, w, _ = f.shape
    ax, ay = p0
    anchor = f[ay, ax]
    out = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            v = f[y, x]
            na = math.sqrt(float(anchor @ anchor))
            nv = math.sqrt(float(v @ v))
            if nv == 0.0:
                out[y, x] = -1.0
            else:
                out[y, x] = max(-1.0, min(1.0, float(anchor @ v) / (na * nv)))
    out[ay, ax] = 1.0
    return out


# -- reference synthetic configuration ---------------------------------------

def reference_corrupted_config(seed: int):
    """Corrupted drift scenario used by the policy-comparison checks.

    24x24x8 grid, 40 frames, pairwise-orthogonal signatures, uniform noise
    0.02, appearance corrupted on frames 10..17. The disc is large enough
    that descriptor pooling stays stable before the corruption hits.
    """
    from seedgate.simulate import SynthConfig

    basis = np.eye(8)
    return SynthConfig(
        frames=40,
        grid=(24, 24, 8),
        centers=[(11.5 + 0.05 * t, 11.5 + 0.025 * t) for t in range(40)],
        radius=9.0,
        target_signature=basis[0],
        background_signature=basis[1],
        corruption_window=(10, 17),
        corruption_signature=basis[2],
        noise_sigma=0.02,
        seed=seed,
    )


def reference_config_dict(seed: int) -> dict:
    """JSON-shaped twin of reference_corrupted_config for CLI runs."""
    return {
        "frames": 40,
        "grid": [24, 24, 8],
        "trajectory": {"start": [11.5, 11.5], "velocity": [0.05, 0.025], "radius": 9.0},
        "target_signature": [1, 0, 0, 0, 0, 0, 0, 0],
        "background_signature": [0, 1, 0, 0, 0, 0, 0, 0],
        "corruption": {"window": [10, 17], "signature": [0, 0, 1, 0, 0, 0, 0, 0]},
        "noise_sigma": 0.02,
        "seed": seed,
        "gate": {"tau": 0.5, "bank_capacity": 7},
    }


# -- synthetic first-frame fixture set for manifest/CLI checks ----------------

# Hand-computable design: three scales whose semantic scores are exactly
# representable in float32 and whose attribution maps are flat / half-on /
# one-hot, so the expected selection falls out on paper.
STAGE1_FRAME = (64, 64)
STAGE1_P0 = (33, 30)
STAGE1_SCHEDULE = [1.0, 0.6, 0.3]
STAGE1_STRIDE = 4
STAGE1_SEM = [0.375, 0.875, 0.6875]
STAGE1_EXPECTED_KSTAR = 1
STAGE1_EXPECTED_BOX = (14, 11, 52, 49)
STAGE1_EXPECTED_SPA = [0.1, 0.375, 0.0]
# peak grid cells (x, y, cosine to the anchor direction), all inside the
# expected box and mutually separated by more than the grid NMS radius
STAGE1_PEAK_CELLS = [(12, 4, 0.97), (3, 10, 0.95), (12, 10, 0.93)]
STAGE1_EXPECTED_PROMPTS = [(33, 30), (50, 18), (14, 42), (50, 42)]


def write_stage1_fixtures(root) -> "Path":
    """Write a complete synthetic manifest + tensors; returns manifest path."""
    from pathlib import Path

    from seedgate.tensorio import write_tensor

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    write_tensor(root / "text.sgt", np.array([1.0, 0.0, 0.0, 0.0]))

    crops = []
    spa_patterns = {
        0: {"affinities": np.full(16, 3.0), "value0": 0.1},  # flat map at 0.1
        1: {"affinities": np.array([1.0] * 8 + [0.0] * 8), "value0": 1.0},
        2: {"affinities": np.eye(16)[3] * 5.0, "value0": 1.0},  # one-hot
    }
    for k, c in enumerate(STAGE1_SEM):
        emb = np.array([c, math.sqrt(1 - c * c), 0.0, 0.0])
        write_tensor(root / f"crop{k}_emb.sgt", emb)
        pattern = spa_patterns[k]
        layers = []
        for layer_id in (10, 11):  # two identical layers: mean is a no-op
            prefix = f"crop{k}_l{layer_id}"
            write_tensor(root / f"{prefix}_wc.sgt", np.array([1.0, 0.0, 0.0]))
            write_tensor(root / f"{prefix}_aff.sgt", pattern["affinities"])
            values = np.zeros((16, 3))
            values[:, 0] = pattern["value0"]
            values[:, 1] = 0.25  # dead channel, weight 0
            write_tensor(root / f"{prefix}_val.sgt", values)
            layers.append(
                {
                    "layer_id": layer_id,
                    "channel_weights": f"{prefix}_wc.sgt",
                    "affinities": f"{prefix}_aff.sgt",
                    "values": f"{prefix}_val.sgt",
                }
            )
        crops.append(
            {"embedding": f"crop{k}_emb.sgt", "token_grid": [4, 4], "layers": layers}
        )

    # VFM grid: background on one axis, anchor direction on another, plus
    # three off-anchor peak cells of decreasing similarity.
    d = 6
    grid = np.zeros((16, 16, d))
    grid[:, :, 1] = 1.0  # background direction, orthogonal to the anchor
    ax, ay = STAGE1_P0[0] // STAGE1_STRIDE, STAGE1_P0[1] // STAGE1_STRIDE
    for yy in range(ay - 1, ay + 2):
        for xx in range(ax - 1, ax + 2):
            grid[yy, xx] = 0.0
            grid[yy, xx, 0] = 1.0
    for px, py, cos_val in STAGE1_PEAK_CELLS:
        grid[py, px] = 0.0
        grid[py, px, 0] = cos_val
        grid[py, px, 2] = math.sqrt(1 - cos_val * cos_val)
    write_tensor(root / "vfm.sgt", grid)
    write_tensor(root / "frame0_feat.sgt", grid)

    manifest = {
        "schema_version": 1,
        "frame_size": list(STAGE1_FRAME),
        "frames": [{"features": "frame0_feat.sgt"}],
        "interaction": {"p0": list(STAGE1_P0), "category": "synthetic blob"},
        "stage1": {
            "schedule": STAGE1_SCHEDULE,
            "text_embedding": "text.sgt",
            "vfm_features": "vfm.sgt",
            "crops": crops,
        },
        "configs": {
            "epsilon": 1e-8,
            "refine": {"nms_radius": 6, "max_aux": 3},
            "gate": {"tau": 0.5, "bank_capacity": 7},
        },
        "provenance": {
            "vlm": "synthetic",
            "vfm": "synthetic",
            "segmentor": "synthetic",
            "stride": STAGE1_STRIDE,
        },
    }
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path
