"""Sequence manifest schema and fixture-directory conventions.

A manifest is a JSON file tying together everything one video run needs:
per-frame feature fixtures, the user interaction, the scale-stage fixture
set, and tool configuration. All referenced paths are resolved relative to
the manifest's directory and checked eagerly at load time, so failures
surface before any computation starts. docs/formats.md is the normative
schema description.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BadSchedule,
    ClickOutOfBounds,
    MissingFixture,
    SchemaViolation,
)
from .gate import GateConfig
from .maps import DEFAULT_EPS
from .prompts import RefineConfig
from .scale import AttributionIngredients, validate_schedule
from .tensorio import read_tensor

SCHEMA_VERSION = 1

#: Gate fixture directories pair these two name patterns frame by frame.
FEATURES_PATTERN = "features_{t:04d}.sgt"
MASK_PATTERN = "mask_{t:04d}.sgt"
ANCHOR_NAME = "anchor.sgt"


@dataclass
class ManifestFrame:
    features: Path
    gt_mask: Path | None = None
    mask: Path | None = None


@dataclass
class CropFixtures:
    embedding: Path
    token_grid: tuple[int, int]
    layers: list[dict] = field(default_factory=list)  # layer_id + three paths


@dataclass
class Stage1Fixtures:
    schedule: tuple[float, ...]
    text_embedding: Path
    vfm_features: Path
    crops: list[CropFixtures] = field(default_factory=list)


@dataclass
class SequenceManifest:
    frame_size: tuple[int, int]  # (h, w) pixels
    frames: list[ManifestFrame]
    p0: tuple[int, int]
    category: str
    stage1: Stage1Fixtures
    epsilon: float = DEFAULT_EPS
    refine: RefineConfig = field(default_factory=RefineConfig)
    gate: GateConfig = field(default_factory=GateConfig)
    provenance: dict = field(default_factory=dict)
    stride: int = 1

    @property
    def frame_count(self) -> int:
        return len(self.frames)


def _require(raw: dict, key: str, where: str):
    if key not in raw:
        raise SchemaViolation(f"{where}: missing required field '{key}'")
    return raw[key]


def _resolve(base: Path, rel, where: str) -> Path:
    if not isinstance(rel, str) or not rel:
        raise SchemaViolation(f"{where}: fixture path must be a nonempty string")
    path = (base / rel).resolve()
    if not path.is_file():
        raise MissingFixture(f"{where}: fixture not found: {path}")
    return path


def load_manifest(path) -> SequenceManifest:
    """Parse and eagerly validate a sequence manifest."""
    path = Path(path)
    if not path.is_file():
        raise MissingFixture(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaViolation(f"{path}: manifest root must be an object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise SchemaViolation(
            f"{path}: schema_version must be {SCHEMA_VERSION}, got {raw.get('schema_version')!r}"
        )
    base = path.parent

    fs = _require(raw, "frame_size", "manifest")
    try:
        frame_h, frame_w = int(fs[0]), int(fs[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise SchemaViolation(f"frame_size must be [h, w]: {fs!r}") from exc
    if frame_h < 1 or frame_w < 1:
        raise SchemaViolation(f"frame_size must be positive, got {fs!r}")

    frames_raw = _require(raw, "frames", "manifest")
    if not isinstance(frames_raw, list) or not frames_raw:
        raise SchemaViolation("frames must be a nonempty list")
    frames = []
    for t, entry in enumerate(frames_raw):
        where = f"frames[{t}]"
        feat = _resolve(base, _require(entry, "features", where), where)
        gt = entry.get("gt_mask")
        mask = entry.get("mask")
        frames.append(
            ManifestFrame(
                features=feat,
                gt_mask=_resolve(base, gt, where) if gt else None,
                mask=_resolve(base, mask, where) if mask else None,
            )
        )

    inter = _require(raw, "interaction", "manifest")
    p0_raw = _require(inter, "p0", "interaction")
    try:
        p0 = (int(p0_raw[0]), int(p0_raw[1]))
    except (TypeError, ValueError, IndexError) as exc:
        raise SchemaViolation(f"interaction.p0 must be [x, y]: {p0_raw!r}") from exc
    if not (0 <= p0[0] < frame_w and 0 <= p0[1] < frame_h):
        raise ClickOutOfBounds(f"p0 {p0} outside {frame_w}x{frame_h} frame")
    category = _require(inter, "category", "interaction")
    if not isinstance(category, str) or not category.strip():
        raise SchemaViolation("interaction.category must be a nonempty string")

    s1 = _require(raw, "stage1", "manifest")
    schedule_raw = _require(s1, "schedule", "stage1")
    schedule = validate_schedule(schedule_raw)  # BadSchedule on violation
    text_emb = _resolve(base, _require(s1, "text_embedding", "stage1"), "stage1")
    vfm = _resolve(base, _require(s1, "vfm_features", "stage1"), "stage1")
    crops_raw = _require(s1, "crops", "stage1")
    if not isinstance(crops_raw, list) or len(crops_raw) != len(schedule):
        raise SchemaViolation(
            f"stage1.crops must list one entry per schedule scale "
            f"({len(schedule)}), got {len(crops_raw) if isinstance(crops_raw, list) else crops_raw!r}"
        )
    crops = []
    for k, crop in enumerate(crops_raw):
        where = f"stage1.crops[{k}]"
        grid_raw = _require(crop, "token_grid", where)
        try:
            grid = (int(grid_raw[0]), int(grid_raw[1]))
        except (TypeError, ValueError, IndexError) as exc:
            raise SchemaViolation(f"{where}: token_grid must be [h, w]") from exc
        if grid[0] < 1 or grid[1] < 1:
            raise SchemaViolation(f"{where}: token_grid must be positive")
        layers_raw = _require(crop, "layers", where)
        if not isinstance(layers_raw, list) or not layers_raw:
            raise MissingFixture(f"{where}: needs at least one attribution layer")
        layers = []
        for i, layer in enumerate(layers_raw):
            lw = f"{where}.layers[{i}]"
            layers.append(
                {
                    "layer_id": int(layer.get("layer_id", i)),
                    "channel_weights": _resolve(
                        base, _require(layer, "channel_weights", lw), lw
                    ),
                    "affinities": _resolve(base, _require(layer, "affinities", lw), lw),
                    "values": _resolve(base, _require(layer, "values", lw), lw),
                }
            )
        crops.append(
            CropFixtures(
                embedding=_resolve(base, _require(crop, "embedding", where), where),
                token_grid=grid,
                layers=layers,
            )
        )

    configs = raw.get("configs", {})
    refine_raw = configs.get("refine", {})
    gate_raw = configs.get("gate", {})
    try:
        epsilon = float(configs.get("epsilon", DEFAULT_EPS))
        refine = RefineConfig(
            nms_radius=int(refine_raw.get("nms_radius", 6)),
            max_aux=int(refine_raw.get("max_aux", 3)),
            min_similarity=float(refine_raw.get("min_similarity", float("-inf"))),
        )
        gate = GateConfig(
            tau=float(gate_raw.get("tau", 0.5)),
            bank_capacity=int(gate_raw.get("bank_capacity", 7)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(f"bad configs block: {exc}") from exc
    if epsilon <= 0:
        raise SchemaViolation(f"epsilon must be positive, got {epsilon}")

    provenance = raw.get("provenance", {})
    stride = provenance.get("stride", 1)
    if not isinstance(stride, int) or stride < 1:
        raise SchemaViolation(f"provenance.stride must be a positive int, got {stride!r}")

    return SequenceManifest(
        frame_size=(frame_h, frame_w),
        frames=frames,
        p0=p0,
        category=category,
        stage1=Stage1Fixtures(
            schedule=schedule, text_embedding=text_emb, vfm_features=vfm, crops=crops
        ),
        epsilon=epsilon,
        refine=refine,
        gate=gate,
        provenance=dict(provenance),
        stride=stride,
    )


def load_stage1_inputs(manifest: SequenceManifest):
    """Read every stage-1 fixture into memory.

    Returns (crop_embeddings, crop_ingredients, text_embedding, vfm_features).
    """
    text = read_tensor(manifest.stage1.text_embedding)
    vfm = read_tensor(manifest.stage1.vfm_features)
    embeddings = []
    ingredients = []
    for crop in manifest.stage1.crops:
        embeddings.append(read_tensor(crop.embedding))
        layer_list = []
        for layer in crop.layers:
            layer_list.append(
                AttributionIngredients(
                    layer_id=layer["layer_id"],
                    channel_weights=read_tensor(layer["channel_weights"]),
                    affinities=read_tensor(layer["affinities"]),
                    values=read_tensor(layer["values"]),
                    grid=crop.token_grid,
                )
            )
        ingredients.append(layer_list)
    return embeddings, ingredients, text, vfm


def load_gate_fixtures(directory):
    """Read a gate fixture directory.

    Expects features_0000.sgt / mask_0000.sgt pairs for t = 0..T-1 plus an
    optional anchor.sgt descriptor. Returns (pairs, anchor) where pairs is a
    list of (features, mask) arrays and anchor is a vector or None.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFixture(f"fixture directory not found: {directory}")
    feat_files = {}
    for p in directory.iterdir():
        m = re.fullmatch(r"features_(\d{4})\.sgt", p.name)
        if m:
            feat_files[int(m.group(1))] = p
    if not feat_files:
        raise MissingFixture(f"no features_*.sgt fixtures in {directory}")
    count = max(feat_files) + 1
    pairs = []
    for t in range(count):
        if t not in feat_files:
            raise MissingFixture(f"missing {FEATURES_PATTERN.format(t=t)} in {directory}")
        mask_path = directory / MASK_PATTERN.format(t=t)
        if not mask_path.is_file():
            raise MissingFixture(f"missing {mask_path.name} in {directory}")
        pairs.append((read_tensor(feat_files[t]), read_tensor(mask_path)))
    anchor_path = directory / ANCHOR_NAME
    anchor = read_tensor(anchor_path) if anchor_path.is_file() else None
    if anchor is not None and anchor.ndim != 1:
        raise SchemaViolation(f"{anchor_path}: anchor must be a rank-1 descriptor")
    return pairs, anchor
