"""Deterministic desk-scale harness for greedy vs gated memory updates.

A synthetic feature video carries a moving disc of one signature vector on a
background of another; inside a configurable corruption window the disc's
appearance switches to a third signature while the ground truth stays put
(the anatomy is still there, it just looks wrong). A minimal descriptor-
correlation segmentor predicts each frame from the memory bank, so the only
thing that differs between policies is which frames get written.

Determinism is part of the contract: noise comes from a fixed 64-bit linear
congruential generator (constants below, documented in docs/formats.md),
not from any library RNG, so identical configs reproduce bit-identical
sequences on any platform.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadConfig, EmptyBank, SchemaViolation
from .gate import (
    GateConfig,
    GateDecision,
    MemoryBank,
    MemoryEntry,
    REASON_EMPTY_MASK,
    REASON_WRITTEN,
    bank_write,
    compute_descriptor,
    gate_decision,
    init_anchor,
    rejection_rate,
    run_gated_stream,
)
from .maps import DEFAULT_EPS, as_f64, cosine
from .metrics import average_surface_distance, dice
from .prompts import PromptSet, dense_similarity

POLICY_GREEDY = "greedy"
POLICY_GATED = "gated"

#: Masks binarize at this fraction of the frame's peak response. Like a real
#: promptable decoder, the stand-in always commits to its best-guess region
#: instead of predicting nothing; whenever the target is actually visible the
#: peak response is ~1 (self-similarity), making this equivalent to an
#: absolute 0.5 cut.
MASK_THRESHOLD = 0.5


def binarize_prediction(prob: np.ndarray) -> np.ndarray:
    """Best-guess binary mask from a probability map (half-peak cut)."""
    peak = float(prob.max())
    if peak <= 0.0:
        return np.zeros_like(prob, dtype=bool)
    return prob >= MASK_THRESHOLD * peak

# Knuth MMIX linear congruential constants.
LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


class Lcg64:
    """64-bit LCG; uniform doubles come from the top 53 bits of each state."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (LCG_MULTIPLIER * self.state + LCG_INCREMENT) & _MASK64
        return self.state

    def next_unit(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_block(self, n: int, scale: float) -> np.ndarray:
        """n draws of scale * (2u - 1), in generation order."""
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = scale * (2.0 * self.next_unit() - 1.0)
        return out


@dataclass
class SynthConfig:
    """Synthetic sequence description. centers has one (x, y) per frame."""

    frames: int
    grid: tuple[int, int, int]  # (h, w, d)
    centers: list[tuple[float, float]]
    radius: float
    target_signature: np.ndarray
    background_signature: np.ndarray
    corruption_window: tuple[int, int] | None = None  # inclusive frame span
    corruption_signature: np.ndarray | None = None
    noise_sigma: float = 0.0
    seed: int = 0

    def validate(self) -> "SynthConfig":
        h, w, d = self.grid
        if self.frames < 1 or h < 1 or w < 1 or d < 1:
            raise BadConfig("frames and grid dimensions must be positive")
        if len(self.centers) != self.frames:
            raise BadConfig(
                f"{len(self.centers)} centers for {self.frames} frames"
            )
        if self.radius <= 0:
            raise BadConfig("radius must be positive")
        if self.noise_sigma < 0:
            raise BadConfig("noise_sigma must be >= 0")
        sigs = [as_f64(self.target_signature), as_f64(self.background_signature)]
        if self.corruption_window is not None:
            a, b = self.corruption_window
            if not (1 <= a <= b <= self.frames - 1):
                raise BadConfig(
                    f"corruption window {self.corruption_window} outside [1, {self.frames - 1}]"
                )
            if self.corruption_signature is None:
                raise BadConfig("corruption window given without a signature")
            sigs.append(as_f64(self.corruption_signature))
        for s in sigs:
            if s.shape != (d,):
                raise BadConfig(f"signature shape {s.shape} does not match d={d}")
        for i in range(len(sigs)):
            for j in range(i + 1, len(sigs)):
                if abs(cosine(sigs[i], sigs[j])) > 1.0 - 1e-9:
                    raise BadConfig("signatures must be pairwise non-parallel")
        return self

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        """Build from the JSON config schema (see docs/formats.md).

        The trajectory is either an explicit per-frame center list or a
        start point plus constant velocity. A corruption block without a
        window defaults to 20% of the sequence starting at the 25% mark.
        """
        try:
            frames = int(raw["frames"])
            h, w, d = (int(v) for v in raw["grid"])
            traj = raw["trajectory"]
            radius = float(traj["radius"])
            if "centers" in traj:
                centers = [(float(c[0]), float(c[1])) for c in traj["centers"]]
            else:
                sx, sy = (float(v) for v in traj["start"])
                vx, vy = (float(v) for v in traj.get("velocity", (0.0, 0.0)))
                centers = [(sx + t * vx, sy + t * vy) for t in range(frames)]
            target = as_f64(raw["target_signature"])
            background = as_f64(raw["background_signature"])
            corruption = raw.get("corruption")
            window = None
            corr_sig = None
            if corruption is not None:
                corr_sig = as_f64(corruption["signature"])
                if "window" in corruption:
                    window = (int(corruption["window"][0]), int(corruption["window"][1]))
                else:
                    start = max(1, round(0.25 * frames))
                    length = max(1, round(0.2 * frames))
                    window = (start, min(frames - 1, start + length - 1))
            cfg = cls(
                frames=frames,
                grid=(h, w, d),
                centers=centers,
                radius=radius,
                target_signature=target,
                background_signature=background,
                corruption_window=window,
                corruption_signature=corr_sig,
                noise_sigma=float(raw.get("noise_sigma", 0.0)),
                seed=int(raw.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"bad synthetic config: {exc}") from exc
        return cfg.validate()


@dataclass
class SynthFrame:
    features: np.ndarray  # (h, w, d)
    gt_mask: np.ndarray  # (h, w) uint8


def _disc_mask(h: int, w: int, center: tuple[float, float], radius: float) -> np.ndarray:
    cx, cy = center
    ys, xs = np.mgrid[0:h, 0:w]
    return ((xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2).astype(np.uint8)


def synth_sequence(cfg: SynthConfig) -> list[SynthFrame]:
    """Generate the full frame list deterministically from the config.

    Per frame: background signature everywhere, the disc signature inside
    the disc (corruption signature instead while inside the corruption
    window), plus one LCG noise draw per (y, x, channel) in row-major
    order. Frames are generated in temporal order from a single generator
    seeded once, so any prefix of the sequence is also reproducible.
    """
    cfg.validate()
    h, w, d = cfg.grid
    rng = Lcg64(cfg.seed)
    frames = []
    for t in range(cfg.frames):
        disc = _disc_mask(h, w, cfg.centers[t], cfg.radius)
        if disc.sum() == 0:
            raise BadConfig(f"frame {t}: disc left the {w}x{h} grid entirely")
        corrupted = (
            cfg.corruption_window is not None
            and cfg.corruption_window[0] <= t <= cfg.corruption_window[1]
        )
        inside = as_f64(
            cfg.corruption_signature if corrupted else cfg.target_signature
        )
        features = np.where(
            disc[:, :, None].astype(bool),
            inside[None, None, :],
            as_f64(cfg.background_signature)[None, None, :],
        )
        if cfg.noise_sigma > 0:
            features = features + rng.uniform_block(h * w * d, cfg.noise_sigma).reshape(
                h, w, d
            )
        frames.append(SynthFrame(features=features, gt_mask=disc))
    return frames


def standin_predict(features, bank: MemoryBank) -> np.ndarray:
    """Probability mask from descriptor correlation against the bank.

    M(x) = max(0, max over bank entries of cos(F(x), descriptor)). Pixels
    with zero-norm features score 0. Deliberately has no spatial smoothing
    or decoding so the write policy is the only moving part.
    """
    if not bank.entries:
        raise EmptyBank("cannot predict from an empty memory bank")
    f = as_f64(features)
    h, w, d = f.shape
    flat = f.reshape(-1, d)
    pixel_norms = np.linalg.norm(flat, axis=1)
    descs = np.stack([as_f64(e.descriptor) for e in bank.entries])
    desc_norms = np.linalg.norm(descs, axis=1)
    sims = flat @ descs.T
    denom = pixel_norms[:, None] * desc_norms[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, sims / denom, 0.0)
    return np.maximum(0.0, sims.max(axis=1)).reshape(h, w)


def prompt_mask(features, prompt_points) -> np.ndarray:
    """First-frame mask surrogate: prompt similarities thresholded at 0.5.

    The anchor pixel's self-similarity is exactly 1, so the absolute 0.5 cut
    coincides with the half-peak rule used for propagated frames.
    """
    best = None
    for p in prompt_points:
        sim = dense_similarity(features, p).map
        best = sim if best is None else np.maximum(best, sim)
    return (best >= MASK_THRESHOLD).astype(np.float64)


@dataclass
class FrameRecord:
    t: int
    dice: float
    asd: float
    g: float | None
    written: bool
    reason: str
    bank_min_g: float


@dataclass
class PolicyReport:
    policy: str
    tau: float
    frames: list[FrameRecord] = field(default_factory=list)
    bank_frames: list[int] = field(default_factory=list)
    bank_cos_to_anchor: list[float] = field(default_factory=list)
    #: binary prediction per frame; kept for equivalence tests, not serialized
    masks: list[np.ndarray] = field(default_factory=list)

    @property
    def mean_dice(self) -> float:
        return float(np.mean([f.dice for f in self.frames]))

    @property
    def mean_asd(self) -> float:
        return float(np.mean([f.asd for f in self.frames]))

    def decisions(self) -> list[GateDecision]:
        return [
            GateDecision(frame_index=f.t, g=f.g, written=f.written, reason=f.reason)
            for f in self.frames
            if f.t > 0
        ]

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "tau": self.tau,
            "frames": [
                {
                    "t": f.t,
                    "dice": f.dice,
                    "asd": f.asd,
                    "g": f.g,
                    "written": f.written,
                    "reason": f.reason,
                    "bank_min_g": f.bank_min_g,
                }
                for f in self.frames
            ],
            "means": {"dice": self.mean_dice, "asd": self.mean_asd},
            "final_bank": {
                "frames": self.bank_frames,
                "cos_to_anchor": self.bank_cos_to_anchor,
            },
        }


def _bank_min_g(bank: MemoryBank) -> float:
    anchor = bank.anchor.descriptor
    return min(cosine(e.descriptor, anchor) for e in bank.entries)


def propagate(
    seq: list[SynthFrame],
    prompts: PromptSet,
    policy: str,
    cfg: GateConfig,
    eps: float = DEFAULT_EPS,
) -> PolicyReport:
    """Run one policy over a sequence and collect per-frame quality.

    Frame 0 is segmented from the prompts and pins the anchor. Every later
    frame is predicted from the bank, pooled into a descriptor, and then
    written or skipped: the greedy policy writes every frame, the gated
    policy only those whose anchor similarity clears tau. Empty predictions
    are never written under either policy (a zero descriptor is not
    evidence). The anchor similarity g is recorded for greedy frames too,
    purely as diagnostics.
    """
    if policy not in (POLICY_GREEDY, POLICY_GATED):
        raise BadConfig(f"unknown policy {policy!r}")
    if not seq:
        raise BadConfig("empty sequence")

    report = PolicyReport(policy=policy, tau=cfg.tau)

    m0 = prompt_mask(seq[0].features, prompts.points)
    anchor = init_anchor(seq[0].features, m0, eps)
    bank = MemoryBank.start(anchor, cfg.bank_capacity)

    pred0 = m0 > 0
    report.masks.append(pred0)
    report.frames.append(
        FrameRecord(
            t=0,
            dice=dice(pred0.astype(np.uint8), seq[0].gt_mask),
            asd=average_surface_distance(pred0.astype(np.uint8), seq[0].gt_mask),
            g=1.0,
            written=True,
            reason=REASON_WRITTEN,
            bank_min_g=_bank_min_g(bank),
        )
    )

    for t in range(1, len(seq)):
        frame = seq[t]
        prob = standin_predict(frame.features, bank)
        descriptor, empty = compute_descriptor(frame.features, prob, eps)
        decision = gate_decision(
            descriptor, anchor.descriptor, cfg, empty_mask=empty, frame_index=t
        )
        if policy == POLICY_GREEDY:
            written = not empty
            reason = REASON_WRITTEN if written else REASON_EMPTY_MASK
        else:
            written = decision.written
            reason = decision.reason
        if written:
            bank_write(bank, MemoryEntry(frame_index=t, descriptor=descriptor))

        pred = binarize_prediction(prob)
        report.masks.append(pred)
        report.frames.append(
            FrameRecord(
                t=t,
                dice=dice(pred.astype(np.uint8), frame.gt_mask),
                asd=average_surface_distance(pred.astype(np.uint8), frame.gt_mask),
                g=decision.g,
                written=written,
                reason=reason,
                bank_min_g=_bank_min_g(bank),
            )
        )

    report.bank_frames = bank.frame_indices()
    report.bank_cos_to_anchor = [
        cosine(e.descriptor, anchor.descriptor) for e in bank.entries
    ]
    return report


def default_prompts(cfg: SynthConfig) -> PromptSet:
    """Single click at the frame-0 disc center, rounded to a pixel."""
    cx, cy = cfg.centers[0]
    return PromptSet(points=[(int(round(cx)), int(round(cy)))])


def compare_policies(
    seq: list[SynthFrame],
    prompts: PromptSet,
    cfg: GateConfig,
    eps: float = DEFAULT_EPS,
) -> tuple[PolicyReport, PolicyReport, dict]:
    """Greedy vs gated on the same sequence, with a delta summary."""
    greedy = propagate(seq, prompts, POLICY_GREEDY, cfg, eps)
    gated = propagate(seq, prompts, POLICY_GATED, cfg, eps)
    delta = {
        "mean_dice": gated.mean_dice - greedy.mean_dice,
        "mean_asd": gated.mean_asd - greedy.mean_asd,
    }
    return greedy, gated, delta


def sweep_taus_stream(descriptors, anchor, taus) -> list[dict]:
    """Pure-stream threshold sweep: rejection rate only, no masks involved."""
    rows = []
    for tau in taus:
        decisions = run_gated_stream(descriptors, anchor, GateConfig(tau=tau))
        rows.append(
            {
                "tau": float(tau),
                "rejection_rate": rejection_rate(decisions),
                "written_frames": [d.frame_index for d in decisions if d.written],
                "mean_dice": None,
                "mean_asd": None,
            }
        )
    return rows


def sweep_taus_simulated(cfg: SynthConfig, taus, eps: float = DEFAULT_EPS) -> list[dict]:
    """Gated simulator run per threshold on one shared sequence."""
    seq = synth_sequence(cfg)
    prompts = default_prompts(cfg)
    rows = []
    for tau in taus:
        report = propagate(seq, prompts, POLICY_GATED, GateConfig(tau=tau), eps)
        rows.append(
            {
                "tau": float(tau),
                "rejection_rate": rejection_rate(report.decisions()),
                "written_frames": [f.t for f in report.frames if f.t > 0 and f.written],
                "mean_dice": report.mean_dice,
                "mean_asd": report.mean_asd,
            }
        )
    return rows
