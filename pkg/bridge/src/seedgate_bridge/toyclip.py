"""Deterministic 3-frame toy clip used by the bundled smoke test.

A bright elliptical blob drifts over a darker speckled background, vaguely
echoing a sonographic structure. Regeneration is exact: fixed seed, integer
math where it matters.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

CLIP_SIZE = 64
CLIP_FRAMES = 3
_SEED = 7


def render_frame(t: int) -> np.ndarray:
    rng = np.random.default_rng(_SEED + t)
    ys, xs = np.mgrid[0:CLIP_SIZE, 0:CLIP_SIZE]
    cx, cy = 30.0 + 3.0 * t, 34.0 - 2.0 * t
    blob = np.exp(-(((xs - cx) / 9.0) ** 2 + ((ys - cy) / 6.0) ** 2))
    speckle = rng.uniform(0.0, 0.25, size=(CLIP_SIZE, CLIP_SIZE))
    img = 40.0 + 170.0 * blob + 60.0 * speckle
    return np.clip(img, 0, 255).astype(np.uint8)


def make_toy_clip(out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(CLIP_FRAMES):
        path = out_dir / f"frame_{t:03d}.png"
        Image.fromarray(render_frame(t), mode="L").save(path)
        paths.append(path)
    return paths


def bundled_clip_dir() -> Path:
    return Path(__file__).parent / "assets" / "toy_clip"
