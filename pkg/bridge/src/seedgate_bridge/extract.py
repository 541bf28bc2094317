"""Extraction jobs: frames in, a complete seedgate fixture directory out.

The output directory doubles as both interfaces the engine reads:

- manifest.json + stage-1 tensors (crop embeddings, per-layer attribution
  ingredients, text embedding, dense feature grid) for `seedgate stage1`
- features_NNNN.sgt / mask_NNNN.sgt pairs for `seedgate gate`

The per-frame masks are smoke-grade placeholder predictions (clamped
feature similarity to the clicked cell); real mask quality comes from the
actual video segmentor, which is outside the bridge's scope.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeFailure, JobValidationError
from .fixture_writer import write_fixture
from .models import load_backend

log = logging.getLogger("seedgate_bridge")

DEFAULT_SCHEDULE = (1.0, 0.8, 0.6, 0.4, 0.2)
MIN_CROP_SIDE = 8


@dataclass
class ExtractionJob:
    frames_dir: Path
    click: tuple[int, int]
    category: str
    out_dir: Path
    backend: str = "toy"
    schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    gate_tau: float = 0.5
    frame_paths: list[Path] = field(default_factory=list)

    def validate(self) -> "ExtractionJob":
        self.frames_dir = Path(self.frames_dir)
        self.out_dir = Path(self.out_dir)
        if not self.frames_dir.is_dir():
            raise JobValidationError(f"frames directory not found: {self.frames_dir}")
        self.frame_paths = sorted(
            p for p in self.frames_dir.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
        if not self.frame_paths:
            raise JobValidationError(f"no decodable frames in {self.frames_dir}")
        if not self.category.strip():
            raise JobValidationError("category must be a nonempty string")
        if any(b >= a for a, b in zip(self.schedule, self.schedule[1:])) or not all(
            0 < s <= 1 for s in self.schedule
        ):
            raise JobValidationError(f"schedule must be strictly decreasing in (0,1]: {self.schedule}")
        h, w = self._frame_shape()
        x, y = self.click
        if not (0 <= x < w and 0 <= y < h):
            raise JobValidationError(f"click {self.click} outside {w}x{h} frame")
        return self

    def _frame_shape(self):
        return decode_frame(self.frame_paths[0]).shape


def decode_frame(path) -> np.ndarray:
    """Grayscale float image in [0, 1]."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeFailure(f"cannot decode frame {path}: {exc}") from exc


def crop_boxes(frame_hw, click, schedule):
    """Center crops around the click, translated (never shrunk) into bounds.

    Mirrors the engine's pyramid construction so the pixels each crop
    embedding describes line up with the boxes the engine selects among.
    """
    h, w = frame_hw
    x0, y0 = click
    boxes = []
    for sigma in schedule:
        side_w = min(w, max(MIN_CROP_SIDE, round(sigma * w)))
        side_h = min(h, max(MIN_CROP_SIDE, round(sigma * h)))
        bx = min(max(x0 - side_w // 2, 0), w - side_w)
        by = min(max(y0 - side_h // 2, 0), h - side_h)
        boxes.append((bx, by, bx + side_w, by + side_h))
    return boxes


def _resize(frame: np.ndarray, size: int) -> np.ndarray:
    img = Image.fromarray((np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8), mode="L")
    return np.asarray(img.resize((size, size), Image.BILINEAR), dtype=np.float64) / 255.0


def extract_stage1_fixtures(job: ExtractionJob, backend, frame0: np.ndarray) -> dict:
    """Write crop/text/attribution/dense fixtures; returns the stage1 block."""
    text = backend.text_embedding(job.category)
    write_fixture(job.out_dir / "text.sgt", text)

    crops_meta = []
    boxes = crop_boxes(frame0.shape, job.click, job.schedule)
    for k, (bx0, by0, bx1, by1) in enumerate(boxes):
        crop = _resize(frame0[by0:by1, bx0:bx1], backend.model_input_size)
        enc = backend.encode_crop(crop, text)
        write_fixture(job.out_dir / f"crop{k}_emb.sgt", enc.embedding)
        layer_meta = []
        for cap in enc.layers:
            prefix = f"crop{k}_l{cap.layer_id:02d}"
            write_fixture(job.out_dir / f"{prefix}_wc.sgt", cap.channel_gradients)
            write_fixture(job.out_dir / f"{prefix}_aff.sgt", cap.affinities)
            write_fixture(job.out_dir / f"{prefix}_val.sgt", cap.values)
            layer_meta.append(
                {
                    "layer_id": cap.layer_id,
                    "channel_weights": f"{prefix}_wc.sgt",
                    "affinities": f"{prefix}_aff.sgt",
                    "values": f"{prefix}_val.sgt",
                }
            )
        crops_meta.append(
            {
                "embedding": f"crop{k}_emb.sgt",
                "token_grid": list(enc.token_grid),
                "layers": layer_meta,
            }
        )
        log.info("crop %d box=%s s_sem=%.4f", k, (bx0, by0, bx1, by1), enc.semantic_score)

    vfm = backend.dense_features(_resize(frame0, backend.model_input_size))
    write_fixture(job.out_dir / "vfm.sgt", vfm)

    return {
        "schedule": list(job.schedule),
        "text_embedding": "text.sgt",
        "vfm_features": "vfm.sgt",
        "crops": crops_meta,
    }


def extract_memory_features(job: ExtractionJob, backend, frames) -> list[dict]:
    """Write per-frame memory grids plus placeholder probability masks."""
    frame_entries = []
    anchor_vec = None
    for t, frame in enumerate(frames):
        grid = backend.memory_features(_resize(frame, backend.model_input_size))
        feat_name = f"features_{t:04d}.sgt"
        mask_name = f"mask_{t:04d}.sgt"
        write_fixture(job.out_dir / feat_name, grid)

        if anchor_vec is None:
            stride = backend.model_input_size // grid.shape[1]
            cx = min(job.click[0] // stride, grid.shape[1] - 1)
            cy = min(job.click[1] // stride, grid.shape[0] - 1)
            anchor_vec = grid[cy, cx]

        norms = np.linalg.norm(grid, axis=2) * np.linalg.norm(anchor_vec)
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = np.where(norms > 0, grid @ anchor_vec / norms, 0.0)
        write_fixture(job.out_dir / mask_name, np.clip(sim, 0.0, 1.0))
        frame_entries.append({"features": feat_name, "mask": mask_name})
    return frame_entries


def run_extraction(job: ExtractionJob) -> Path:
    """Full job: decode, extract, and write a validated manifest."""
    job.validate()
    backend = load_backend(job.backend)
    frames = [decode_frame(p) for p in job.frame_paths]
    h, w = frames[0].shape
    for p, f in zip(job.frame_paths, frames):
        if f.shape != (h, w):
            raise JobValidationError(f"frame {p} has shape {f.shape}, expected {(h, w)}")

    job.out_dir.mkdir(parents=True, exist_ok=True)
    stage1_block = extract_stage1_fixtures(job, backend, frames[0])
    frame_entries = extract_memory_features(job, backend, frames)

    # the dense grid is computed on the square model input; express its
    # stride in original-frame pixels (frames are assumed square-ish at
    # desk scale, the toy clip is exactly square)
    vfm_cells = backend.model_input_size // backend.vfm_stride
    stride = max(1, round(w / vfm_cells))

    manifest = {
        "schema_version": 1,
        "frame_size": [h, w],
        "frames": frame_entries,
        "interaction": {"p0": list(job.click), "category": job.category},
        "stage1": stage1_block,
        "configs": {
            "epsilon": 1e-8,
            "refine": {"nms_radius": 6, "max_aux": 3},
            "gate": {"tau": job.gate_tau, "bank_capacity": 7},
        },
        "provenance": dict(backend.provenance, stride=stride),
    }
    manifest_path = job.out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    log.info("wrote %s (%d frames, %d crops)", manifest_path, len(frames), len(job.schedule))
    return manifest_path
