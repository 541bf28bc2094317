"""Shared dense-map and vector primitives.

All arithmetic runs in float64 regardless of how fixtures were stored on
disk (the codec widens float32 payloads on load). Scalar maps are (h, w)
arrays, feature maps are (h, w, d), embeddings are flat (d,) vectors.
Every function here is pure.
"""
from __future__ import annotations

import numpy as np

from .errors import (
    EmptyInput,
    LengthMismatch,
    MaskOutOfRange,
    NegativeEntry,
    ShapeMismatch,
    SinglePixel,
    ZeroNorm,
)

#: Stability constant used wherever a denominator could vanish. The value is
#: configurable at every call site; this is only the default.
DEFAULT_EPS = 1e-8


def as_f64(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


def cosine(a, b) -> float:
    """Cosine similarity between two equal-length vectors, in [-1, 1]."""
    a = as_f64(a)
    b = as_f64(b)
    if a.ndim != 1 or b.ndim != 1:
        raise ShapeMismatch(f"cosine expects 1-D vectors, got {a.shape} and {b.shape}")
    if a.shape[0] != b.shape[0]:
        raise LengthMismatch(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine undefined for zero-norm vector")
    # Guard against float drift pushing |cos| a hair past 1.
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def clamp_nonneg(x: float) -> float:
    return max(0.0, float(x))


def minmax_normalize(values) -> np.ndarray:
    """Affinely map a list of values onto [0, 1].

    A degenerate input (all entries equal) maps to all-ones, so a constant
    score channel becomes neutral in downstream products instead of zeroing
    them out.
    """
    v = as_f64(values)
    if v.size == 0:
        raise EmptyInput("minmax_normalize needs at least one value")
    lo = v.min()
    hi = v.max()
    if hi == lo:
        return np.ones_like(v)
    return (v - lo) / (hi - lo)


def distribution_from_map(attribution, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Normalize a non-negative map into (almost) a probability distribution.

    P(i) = A(i) / (sum(A) + eps). The total mass is sum(A) / (sum(A) + eps),
    which tends to 1 whenever the map's energy dominates eps.
    """
    a = as_f64(attribution)
    if (a < 0).any():
        raise NegativeEntry("attribution map must be elementwise >= 0")
    return a / (a.sum() + eps)


def normalized_entropy(p) -> float:
    """Shannon entropy of a distribution-like map, scaled to [0, 1].

    Natural log in both numerator and denominator; zero-probability cells
    contribute exactly 0. Requires at least two cells (log of 1 cell is 0).
    """
    p = as_f64(p)
    if p.size < 2:
        raise SinglePixel("entropy normalization needs at least 2 cells")
    if (p < 0).any():
        raise NegativeEntry("distribution entries must be >= 0")
    nz = p[p > 0]
    h = float(-(nz * np.log(nz)).sum()) or 0.0  # empty sum gives -0.0
    # an eps-subnormalized uniform input can overshoot log(n) by O(eps);
    # clip so the declared [0, 1] range is exact
    return min(1.0, h / float(np.log(p.size)))


def energy_density(attribution) -> float:
    """Arithmetic mean of a scalar map."""
    a = as_f64(attribution)
    if a.size == 0:
        raise EmptyInput("energy_density of an empty map")
    return float(a.mean())


def masked_average_pool(features, mask, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Soft-weighted per-channel mean of a feature grid under a [0, 1] mask.

    Returns a (d,) vector sum(M * F) / (sum(M) + eps). An all-zero mask
    yields the zero vector; callers that must not pool over nothing check
    the mask sum themselves (see the gate module).
    """
    f = as_f64(features)
    m = as_f64(mask)
    if f.ndim != 3:
        raise ShapeMismatch(f"feature grid must be (h, w, d), got {f.shape}")
    if m.shape != f.shape[:2]:
        raise ShapeMismatch(f"mask {m.shape} does not match grid {f.shape[:2]}")
    if (m < 0).any() or (m > 1).any():
        raise MaskOutOfRange("mask entries must lie in [0, 1]")
    weighted = (f * m[:, :, None]).sum(axis=(0, 1))
    return weighted / (m.sum() + eps)
