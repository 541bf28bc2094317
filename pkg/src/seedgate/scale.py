"""Stage-I contextual scale selection.

Builds a pyramid of center crops around the user click, scores each crop
semantically (clamped image/text cosine) and spatially (mean attribution
strength times normalized attribution entropy), then picks the scale whose
min-max normalized score product is largest.

Gradients, affinities and attention values arrive as fixtures; this module
only combines them. Feature extraction and autodiff live outside the engine.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadSchedule,
    ClickOutOfBounds,
    EmptyInput,
    MissingFixture,
    ShapeMismatch,
    TooFewCandidates,
)
from .maps import (
    DEFAULT_EPS,
    as_f64,
    clamp_nonneg,
    cosine,
    distribution_from_map,
    energy_density,
    minmax_normalize,
    normalized_entropy,
)

#: Default crop-scale schedule (fraction of full frame extent per level).
DEFAULT_SCHEDULE = (1.0, 0.8, 0.6, 0.4, 0.2)

#: Crops are never shrunk below this side length, in pixels.
MIN_CROP_SIDE = 8

Box = tuple[int, int, int, int]  # (x0, y0, x1, y1), half-open
Point = tuple[int, int]  # (x, y)


@dataclass(frozen=True)
class InteractionSpec:
    """First-frame user input: one positive click plus a category name."""

    p0: Point
    category: str


@dataclass(frozen=True)
class CropPyramid:
    scales: tuple[float, ...]
    boxes: tuple[Box, ...]


@dataclass
class AttributionIngredients:
    """Per-layer inputs to the attribution combination.

    channel_weights: (d_c,) gradient of the semantic score w.r.t. the class
    token's attention output, one weight per channel.
    affinities: (n_tokens,) raw class-query/key scores, normalized here.
    values: (n_tokens, d_c) attention values.
    grid: (h, w) token-grid shape with h * w == n_tokens.
    """

    layer_id: int
    channel_weights: np.ndarray
    affinities: np.ndarray
    values: np.ndarray
    grid: tuple[int, int]


@dataclass
class ScaleCandidate:
    k: int
    sigma: float
    box: Box
    s_sem: float
    s_spa: float
    crop_embedding: np.ndarray | None = None
    attribution: np.ndarray | None = None


@dataclass
class ScoreRow:
    """Per-scale diagnostics carried into the run report."""

    k: int
    sigma: float
    box: Box
    s_sem: float
    s_spa: float
    sem_hat: float
    spa_hat: float
    product: float


@dataclass
class ScaleSelection:
    k_star: int
    box: Box
    sigma: float
    rows: list[ScoreRow] = field(default_factory=list)


def validate_schedule(schedule) -> tuple[float, ...]:
    sched = tuple(float(s) for s in schedule)
    if not sched:
        raise BadSchedule("empty scale schedule")
    for s in sched:
        if not (0.0 < s <= 1.0):
            raise BadSchedule(f"scale {s} outside (0, 1]")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise BadSchedule(f"schedule must be strictly decreasing: {sched}")
    return sched


def build_crop_pyramid(frame_size: tuple[int, int], p0: Point, schedule) -> CropPyramid:
    """Axis-aligned center crops around p0, one per scale.

    frame_size is (h, w). Box k has side lengths round(sigma_k * (w, h)),
    floored at MIN_CROP_SIDE, centered on p0 and translated (never shrunk)
    to stay inside the frame, so the configured area ratios survive clicks
    near a border. Every box contains p0.
    """
    h, w = int(frame_size[0]), int(frame_size[1])
    x0, y0 = int(p0[0]), int(p0[1])
    if not (0 <= x0 < w and 0 <= y0 < h):
        raise ClickOutOfBounds(f"click {p0} outside {w}x{h} frame")
    sched = validate_schedule(schedule)

    boxes = []
    for sigma in sched:
        side_w = min(w, max(MIN_CROP_SIDE, round(sigma * w)))
        side_h = min(h, max(MIN_CROP_SIDE, round(sigma * h)))
        bx = min(max(x0 - side_w // 2, 0), w - side_w)
        by = min(max(y0 - side_h // 2, 0), h - side_h)
        boxes.append((bx, by, bx + side_w, by + side_h))
    return CropPyramid(scales=sched, boxes=tuple(boxes))


def semantic_score(crop_embedding, text_embedding) -> float:
    """Clamped cosine between a crop embedding and the category embedding."""
    return clamp_nonneg(cosine(crop_embedding, text_embedding))


def psi_normalize(affinities) -> np.ndarray:
    """Affinity normalization applied to raw spatial attention scores.

    Implemented as per-crop min-max normalization; isolated behind this one
    function so the normalization scheme can be swapped without touching the
    attribution combination.
    """
    return minmax_normalize(affinities)


def layer_attribution(ing: AttributionIngredients) -> np.ndarray:
    """Single-layer attribution map on the token grid.

    Per token i: relu(psi(affinity)[i] * sum_c channel_weights[c] * values[i, c]),
    reshaped to the (h, w) token grid.
    """
    w_c = as_f64(ing.channel_weights)
    aff = as_f64(ing.affinities)
    vals = as_f64(ing.values)
    gh, gw = int(ing.grid[0]), int(ing.grid[1])
    if w_c.ndim != 1 or aff.ndim != 1 or vals.ndim != 2:
        raise ShapeMismatch(
            f"expected ranks (1, 1, 2), got {w_c.ndim}, {aff.ndim}, {vals.ndim}"
        )
    n_tokens = aff.shape[0]
    if vals.shape != (n_tokens, w_c.shape[0]):
        raise ShapeMismatch(
            f"values {vals.shape} inconsistent with {n_tokens} tokens x {w_c.shape[0]} channels"
        )
    if gh * gw != n_tokens:
        raise ShapeMismatch(f"token grid {gh}x{gw} does not hold {n_tokens} tokens")
    spatial = psi_normalize(aff)
    per_token = np.maximum(0.0, spatial * (vals @ w_c))
    return per_token.reshape(gh, gw)


def aggregate_layers(layer_maps) -> np.ndarray:
    """Elementwise mean over per-layer attribution maps."""
    maps = [as_f64(m) for m in layer_maps]
    if not maps:
        raise EmptyInput("no attribution maps to aggregate")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ShapeMismatch(f"layer map {m.shape} does not match {shape}")
    return np.mean(maps, axis=0)


def seed_score(attribution, eps: float = DEFAULT_EPS) -> float:
    """Spatial score of an attribution map: energy density times entropy.

    High when evidence is both strong on average and spread over the crop;
    zero when the map collapses onto a single token.
    """
    a = as_f64(attribution)
    return energy_density(a) * normalized_entropy(distribution_from_map(a, eps))


def select_scale(candidates: list[ScaleCandidate]) -> ScaleSelection:
    """Pick the scale maximizing the product of min-max normalized scores.

    Both score channels are normalized across scales before the product, so
    neither dominates by magnitude alone. Ties resolve to the smallest k
    (largest context).
    """
    if len(candidates) < 2:
        raise TooFewCandidates(f"need >= 2 scale candidates, got {len(candidates)}")
    sem_hat = minmax_normalize([c.s_sem for c in candidates])
    spa_hat = minmax_normalize([c.s_spa for c in candidates])
    product = sem_hat * spa_hat
    k_star = int(np.argmax(product))  # argmax takes the first max: smallest k
    rows = [
        ScoreRow(
            k=c.k,
            sigma=c.sigma,
            box=c.box,
            s_sem=c.s_sem,
            s_spa=c.s_spa,
            sem_hat=float(sem_hat[i]),
            spa_hat=float(spa_hat[i]),
            product=float(product[i]),
        )
        for i, c in enumerate(candidates)
    ]
    chosen = candidates[k_star]
    return ScaleSelection(k_star=chosen.k, box=chosen.box, sigma=chosen.sigma, rows=rows)


def run_stage1(
    crop_embeddings,
    crop_ingredients,
    text_embedding,
    interaction: InteractionSpec,
    schedule,
    frame_size: tuple[int, int],
    eps: float = DEFAULT_EPS,
) -> ScaleSelection:
    """Score every crop of the pyramid and select the contextual scale.

    crop_embeddings: one (d_e,) vector per scale.
    crop_ingredients: per scale, a nonempty list of AttributionIngredients.
    """
    pyramid = build_crop_pyramid(frame_size, interaction.p0, schedule)
    n = len(pyramid.scales)
    if len(crop_embeddings) != n:
        raise MissingFixture(
            f"{n} scales but {len(crop_embeddings)} crop embeddings"
        )
    if len(crop_ingredients) != n:
        raise MissingFixture(
            f"{n} scales but {len(crop_ingredients)} ingredient sets"
        )
    text = as_f64(text_embedding)

    candidates = []
    for k in range(n):
        layers = crop_ingredients[k]
        if not layers:
            raise MissingFixture(f"crop {k} has no attribution layers")
        attribution = aggregate_layers([layer_attribution(ing) for ing in layers])
        candidates.append(
            ScaleCandidate(
                k=k,
                sigma=pyramid.scales[k],
                box=pyramid.boxes[k],
                s_sem=semantic_score(crop_embeddings[k], text),
                s_spa=seed_score(attribution, eps),
                crop_embedding=as_f64(crop_embeddings[k]),
                attribution=attribution,
            )
        )
    return select_scale(candidates)
