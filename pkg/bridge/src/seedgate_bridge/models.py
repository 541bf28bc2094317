"""Backbone adapters.

Two backends share one interface:

- "toy": small fixed-seed torch networks that run anywhere. The vision-
  language part is a real ViT with hooked attention internals, so the
  exported gradients/affinities/values go through genuine autodiff, just
  with random (but frozen and reproducible) weights. Meant for smoke runs
  and format-contract tests, not for segmentation quality.
- "production": loaders for the published biomedical VLM / dense-feature /
  video-segmentor stacks. They raise ModelLoadFailure with an actionable
  message when the packages or weights are absent; nothing is downloaded
  implicitly.

Every adapter consumes grayscale frames as (h, w) float arrays in [0, 1]
and returns numpy arrays; torch stays an implementation detail.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ModelLoadFailure

TOY_SEED = 20240611
TOY_IMAGE_SIZE = 64
TOY_PATCH = 8
TOY_WIDTH = 32
TOY_EMBED_DIM = 48
TOY_LAYERS = 2
TOY_VFM_STRIDE = 4
TOY_VFM_DIM = 24
TOY_MEM_DIM = 16


@dataclass
class LayerCapture:
    """Per-layer attention internals captured while encoding one crop."""

    layer_id: int
    channel_gradients: np.ndarray  # (d_c,) dS/d(cls attention output)
    affinities: np.ndarray  # (n_tokens,) raw q_cls . k_i scores
    values: np.ndarray  # (n_tokens, d_c)


@dataclass
class CropEncoding:
    embedding: np.ndarray  # (d_e,) shared-space crop embedding
    semantic_score: float
    token_grid: tuple[int, int]
    layers: list[LayerCapture] = field(default_factory=list)


class _ToyAttention(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.proj = nn.Linear(dim, dim)
        self.scale = 1.0 / math.sqrt(dim)

    def forward(self, x, record: dict | None = None):
        q, k, v = self.q(x), self.k(x), self.v(x)
        scores = (q @ k.transpose(-2, -1)) * self.scale
        out = scores.softmax(dim=-1) @ v
        if record is not None:
            # keep the cls attention output as a graph leaf we can grad
            o_cls = out[:, 0, :]
            o_cls.retain_grad()
            out = torch.cat([o_cls.unsqueeze(1), out[:, 1:, :]], dim=1)
            record["o_cls"] = o_cls
            record["affinities"] = (q[:, 0:1, :] @ k[:, 1:, :].transpose(-2, -1)).reshape(-1)
            record["values"] = v[:, 1:, :].squeeze(0)
        return self.proj(out)


class _ToyBlock(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = _ToyAttention(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, dim * 2), nn.GELU(), nn.Linear(dim * 2, dim))

    def forward(self, x, record=None):
        x = x + self.attn(self.norm1(x), record)
        return x + self.mlp(self.norm2(x))


class _ToyViT(nn.Module):
    def __init__(self):
        super().__init__()
        self.patch = nn.Conv2d(1, TOY_WIDTH, kernel_size=TOY_PATCH, stride=TOY_PATCH)
        n_tokens = (TOY_IMAGE_SIZE // TOY_PATCH) ** 2
        self.cls = nn.Parameter(torch.zeros(1, 1, TOY_WIDTH))
        self.pos = nn.Parameter(torch.zeros(1, n_tokens + 1, TOY_WIDTH))
        self.blocks = nn.ModuleList(_ToyBlock(TOY_WIDTH) for _ in range(TOY_LAYERS))
        self.norm = nn.LayerNorm(TOY_WIDTH)
        self.head = nn.Linear(TOY_WIDTH, TOY_EMBED_DIM)

    def forward(self, image, records: list[dict] | None = None):
        x = self.patch(image).flatten(2).transpose(1, 2)
        x = torch.cat([self.cls.expand(x.shape[0], -1, -1), x], dim=1) + self.pos
        for i, block in enumerate(self.blocks):
            x = block(x, records[i] if records is not None else None)
        return self.head(self.norm(x)[:, 0, :])


def _text_embedding_from_hash(category: str) -> torch.Tensor:
    """Deterministic pseudo text encoder: stable hash seeds a unit vector."""
    digest = hashlib.md5(category.strip().lower().encode()).digest()
    gen = torch.Generator().manual_seed(int.from_bytes(digest[:8], "little"))
    vec = torch.randn(TOY_EMBED_DIM, generator=gen)
    return vec / vec.norm()


class ToyBackend:
    """Frozen random-weight stack with genuine attention/grad extraction."""

    name = "toy"
    vfm_stride = TOY_VFM_STRIDE
    provenance = {
        "vlm": "toy-vit-b32s8",
        "vfm": "toy-conv-s4",
        "segmentor": "toy-memconv-s4",
    }

    def __init__(self):
        torch.manual_seed(TOY_SEED)
        self.vit = _ToyViT()
        self.vfm = nn.Sequential(
            nn.Conv2d(1, TOY_VFM_DIM, kernel_size=TOY_VFM_STRIDE, stride=TOY_VFM_STRIDE),
            nn.Tanh(),
            nn.Conv2d(TOY_VFM_DIM, TOY_VFM_DIM, kernel_size=3, padding=1),
        )
        self.mem = nn.Sequential(
            nn.Conv2d(1, TOY_MEM_DIM, kernel_size=TOY_VFM_STRIDE, stride=TOY_VFM_STRIDE),
            nn.Tanh(),
        )
        # weights stay frozen by never being optimized; parameters keep
        # requires_grad so the backward pass to the attention internals works
        self.vit.eval()
        self.vfm.eval()
        self.mem.eval()

    def text_embedding(self, category: str) -> np.ndarray:
        return _text_embedding_from_hash(category).numpy().astype(np.float64)

    def encode_crop(self, crop: np.ndarray, text_embedding: np.ndarray) -> CropEncoding:
        """Embed one crop and capture attention internals plus gradients.

        The semantic score (clamped cosine against the category embedding)
        is backpropagated to each layer's class-token attention output in a
        single backward pass; a crop scoring zero semantically yields
        all-zero channel gradients, which downstream handles as an all-zero
        attribution map.
        """
        img = torch.from_numpy(self._to_model_input(crop)).float()[None, None]
        records = [{} for _ in range(TOY_LAYERS)]
        embedding = self.vit(img, records).squeeze(0)

        text = torch.from_numpy(np.asarray(text_embedding)).float()
        score = torch.clamp(F.cosine_similarity(embedding, text, dim=0), min=0.0)
        if score.requires_grad:
            score.backward()

        side = TOY_IMAGE_SIZE // TOY_PATCH
        layers = []
        for i, rec in enumerate(records):
            grad = rec["o_cls"].grad
            layers.append(
                LayerCapture(
                    layer_id=i,
                    channel_gradients=(
                        grad.squeeze(0).numpy().astype(np.float64)
                        if grad is not None
                        else np.zeros(TOY_WIDTH)
                    ),
                    affinities=rec["affinities"].detach().numpy().astype(np.float64),
                    values=rec["values"].detach().numpy().astype(np.float64),
                )
            )
        return CropEncoding(
            embedding=embedding.detach().numpy().astype(np.float64),
            semantic_score=float(score.detach()),
            token_grid=(side, side),
            layers=layers,
        )

    def dense_features(self, frame: np.ndarray) -> np.ndarray:
        """(h/stride, w/stride, d) feature grid for the prompt-refinement map."""
        img = torch.from_numpy(self._to_model_input(frame)).float()[None, None]
        with torch.no_grad():
            out = self.vfm(img).squeeze(0)
        return out.permute(1, 2, 0).numpy().astype(np.float64)

    def memory_features(self, frame: np.ndarray) -> np.ndarray:
        """(h/stride, w/stride, d) per-frame memory-encoder stand-in grid."""
        img = torch.from_numpy(self._to_model_input(frame)).float()[None, None]
        with torch.no_grad():
            out = self.mem(img).squeeze(0)
        return out.permute(1, 2, 0).numpy().astype(np.float64)

    @staticmethod
    def _to_model_input(frame: np.ndarray) -> np.ndarray:
        if frame.shape != (TOY_IMAGE_SIZE, TOY_IMAGE_SIZE):
            raise ValueError(f"toy backend expects {TOY_IMAGE_SIZE}px square input")
        return np.ascontiguousarray(frame, dtype=np.float32)

    @property
    def model_input_size(self) -> int:
        return TOY_IMAGE_SIZE


class ProductionBackend:
    """Loader for the published model stack; requires local packages/weights."""

    name = "production"

    def __init__(self):
        try:
            import open_clip  # noqa: F401
        except ImportError as exc:
            raise ModelLoadFailure(
                "production backend needs the open_clip package (plus local "
                "BiomedCLIP weights); install it or use --backend toy"
            ) from exc
        # Weights are never fetched implicitly: a missing local checkpoint
        # is a load failure, same as a missing package.
        raise ModelLoadFailure(
            "no local BiomedCLIP/DINOv3/SAM2 checkpoints configured; "
            "point the relevant *_CHECKPOINT environment variables at local "
            "files or use --backend toy"
        )


def load_backend(name: str):
    if name == "toy":
        return ToyBackend()
    if name == "production":
        return ProductionBackend()
    raise ModelLoadFailure(f"unknown backend {name!r} (choices: toy, production)")
