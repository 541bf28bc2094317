"""Reliability-gated memory-bank updates.

Each propagated frame is summarized by masked-average-pooling its feature
grid under the predicted mask. The pooled descriptor's cosine to a pinned
first-frame anchor decides whether the frame enters the fixed-capacity
memory bank: it is written only when the similarity strictly exceeds the
threshold. Low similarity skips the write; it never triggers a correction.

An empty predicted mask always skips: a zero descriptor carries no evidence
and would poison every cosine downstream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import BadConfig, EmptyInitialMask, EmptyInput, OutOfOrderWrite
from .maps import DEFAULT_EPS, as_f64, cosine, masked_average_pool

#: Mask sums below this are treated as an empty prediction.
EMPTY_MASK_SUM = 1e-6

REASON_WRITTEN = "written"
REASON_BELOW_THRESHOLD = "below-threshold"
REASON_EMPTY_MASK = "empty-mask"


@dataclass(frozen=True)
class GateConfig:
    """Write-gate threshold and bank size.

    tau may be set to -1 to disable the gate entirely (every non-empty frame
    passes), which is the knob the greedy-equivalence checks rely on.
    """

    tau: float = 0.5
    bank_capacity: int = 7  # 1 pinned conditioning entry + 6 recents

    def __post_init__(self):
        if not (-1.0 <= self.tau <= 1.0):
            raise BadConfig(f"tau must be in [-1, 1], got {self.tau}")
        if self.bank_capacity < 2:
            raise BadConfig("bank capacity must be >= 2")


@dataclass
class MemoryEntry:
    frame_index: int
    descriptor: np.ndarray
    pinned: bool = False
    payload: Any = None  # opaque slot for segmentor-specific state


@dataclass
class GateDecision:
    frame_index: int
    g: float
    written: bool
    reason: str


@dataclass
class MemoryBank:
    """Ordered store of frame descriptors; entry 0 is pinned and never evicted."""

    entries: list[MemoryEntry] = field(default_factory=list)
    capacity: int = 7

    @classmethod
    def start(cls, anchor: MemoryEntry, capacity: int) -> "MemoryBank":
        if not anchor.pinned:
            raise BadConfig("bank must start from a pinned conditioning entry")
        return cls(entries=[anchor], capacity=capacity)

    @property
    def anchor(self) -> MemoryEntry:
        return self.entries[0]

    def frame_indices(self) -> list[int]:
        return [e.frame_index for e in self.entries]


def init_anchor(features0, mask0, eps: float = DEFAULT_EPS) -> MemoryEntry:
    """Pinned conditioning descriptor pooled from the first-frame mask."""
    m = as_f64(mask0)
    if m.sum() < EMPTY_MASK_SUM:
        raise EmptyInitialMask("first-frame mask is empty; nothing to anchor on")
    descriptor = masked_average_pool(features0, m, eps)
    return MemoryEntry(frame_index=0, descriptor=descriptor, pinned=True)


def compute_descriptor(features, mask, eps: float = DEFAULT_EPS):
    """Masked-average-pool descriptor plus an empty-mask flag.

    Returns (descriptor, empty) where empty marks a mask whose total weight
    is below EMPTY_MASK_SUM; such descriptors must not be gated or written.
    """
    m = as_f64(mask)
    descriptor = masked_average_pool(features, m, eps)
    return descriptor, bool(m.sum() < EMPTY_MASK_SUM)


def gate_decision(
    descriptor,
    anchor,
    cfg: GateConfig,
    empty_mask: bool = False,
    frame_index: int = -1,
) -> GateDecision:
    """One-sided write decision for a single frame.

    written iff cos(descriptor, anchor) strictly exceeds tau and the mask was
    not empty. An empty mask forces a skip and reports g = -1 (no meaningful
    similarity exists for a zero descriptor).
    """
    if empty_mask:
        return GateDecision(
            frame_index=frame_index, g=-1.0, written=False, reason=REASON_EMPTY_MASK
        )
    g = cosine(descriptor, anchor)
    written = g > cfg.tau
    return GateDecision(
        frame_index=frame_index,
        g=g,
        written=written,
        reason=REASON_WRITTEN if written else REASON_BELOW_THRESHOLD,
    )


def bank_write(bank: MemoryBank, entry: MemoryEntry) -> MemoryBank:
    """Append an entry, evicting the oldest non-pinned entry when full.

    Writes must arrive in strictly increasing frame order; the pinned
    conditioning entry survives every eviction.
    """
    last = bank.entries[-1].frame_index
    if entry.frame_index <= last:
        raise OutOfOrderWrite(
            f"frame {entry.frame_index} written after frame {last}"
        )
    bank.entries.append(entry)
    if len(bank.entries) > bank.capacity:
        for i, e in enumerate(bank.entries):
            if not e.pinned:
                del bank.entries[i]
                break
    return bank


def run_gated_stream(descriptors, anchor, cfg: GateConfig) -> list[GateDecision]:
    """Pure per-frame gate evaluation over a descriptor stream.

    No state feeds back into the stream, so this is the surface used by the
    threshold sweeps and the monotonicity properties. Frames are numbered
    from 1 (frame 0 is the anchor by convention).
    """
    descriptors = list(descriptors)
    if not descriptors:
        raise EmptyInput("empty descriptor stream")
    anchor = as_f64(anchor)
    return [
        gate_decision(d, anchor, cfg, frame_index=i + 1)
        for i, d in enumerate(descriptors)
    ]


def rejection_rate(decisions: list[GateDecision]) -> float:
    if not decisions:
        raise EmptyInput("no decisions")
    return 1.0 - sum(d.written for d in decisions) / len(decisions)
