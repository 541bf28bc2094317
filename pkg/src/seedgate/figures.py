"""Matplotlib renderings saved next to each report.

Every CLI path that writes a report also drops the matching figures here
unless --no-figures is passed. All renderers take explicit output paths and
use the Agg backend, so they are safe on headless machines.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def policy_curves(reports, path):
    """Per-frame Dice and surface-distance traces, one line per policy."""
    fig, (ax_d, ax_a) = plt.subplots(1, 2, figsize=(9, 3.2))
    for rep in reports:
        ts = [f.t for f in rep.frames]
        ax_d.plot(ts, [f.dice for f in rep.frames], label=rep.policy, linewidth=1.2)
        ax_a.plot(ts, [f.asd for f in rep.frames], label=rep.policy, linewidth=1.2)
    ax_d.set_xlabel("frame")
    ax_d.set_ylabel("Dice")
    ax_d.set_ylim(-0.02, 1.02)
    ax_a.set_xlabel("frame")
    ax_a.set_ylabel("avg surface distance (px)")
    ax_d.legend()
    ax_a.legend()
    return _finish(fig, path)


def gate_timeline(decisions, tau, path):
    """Anchor-similarity trace with the threshold and skip markers."""
    ts = [d.frame_index for d in decisions]
    gs = [d.g for d in decisions]
    written = np.array([d.written for d in decisions], dtype=bool)
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(ts, gs, color="tab:blue", linewidth=1.0, label="anchor similarity")
    ts_arr = np.array(ts)
    gs_arr = np.array(gs, dtype=float)
    ax.scatter(ts_arr[written], gs_arr[written], s=14, color="tab:green", label="written")
    if (~written).any():
        ax.scatter(ts_arr[~written], gs_arr[~written], s=14, color="tab:red", label="skipped")
    ax.axhline(tau, color="gray", linestyle="--", linewidth=0.8, label=f"tau={tau:g}")
    ax.set_xlabel("frame")
    ax.set_ylabel("g")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(loc="lower left", fontsize=8)
    return _finish(fig, path)


def sweep_curve(rows, path):
    """Rejection rate (and quality means when present) against tau."""
    taus = [r["tau"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(taus, [r["rejection_rate"] for r in rows], marker="o", color="tab:red")
    ax.set_xlabel("tau")
    ax.set_ylabel("rejection rate", color="tab:red")
    ax.set_ylim(-0.02, 1.02)
    if any(r.get("mean_dice") is not None for r in rows):
        ax2 = ax.twinx()
        ax2.plot(taus, [r["mean_dice"] for r in rows], marker="s", color="tab:blue")
        ax2.set_ylabel("mean Dice", color="tab:blue")
        ax2.set_ylim(-0.02, 1.02)
    return _finish(fig, path)


def scale_scores(rows, path):
    """Raw and normalized per-scale scores with the winner highlighted."""
    ks = [r.k for r in rows]
    fig, (ax_raw, ax_hat) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax_raw.plot(ks, [r.s_sem for r in rows], marker="o", label="semantic")
    ax_raw.plot(ks, [r.s_spa for r in rows], marker="s", label="spatial")
    ax_raw.set_xlabel("scale index")
    ax_raw.set_ylabel("raw score")
    ax_raw.legend()
    ax_hat.plot(ks, [r.sem_hat for r in rows], marker="o", label="semantic (norm)")
    ax_hat.plot(ks, [r.spa_hat for r in rows], marker="s", label="spatial (norm)")
    ax_hat.plot(ks, [r.product for r in rows], marker="^", label="product")
    best = max(rows, key=lambda r: r.product)
    ax_hat.axvline(best.k, color="gray", linestyle="--", linewidth=0.8)
    ax_hat.set_xlabel("scale index")
    ax_hat.legend(fontsize=8)
    return _finish(fig, path)


def similarity_heatmap(sim_map, prompts, box, path):
    """Click-anchored similarity with selected box and prompt points."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    im = ax.imshow(sim_map, cmap="viridis", vmin=-1.0, vmax=1.0)
    fig.colorbar(im, ax=ax, fraction=0.046)
    if box is not None:
        x0, y0, x1, y1 = box
        ax.add_patch(
            plt.Rectangle(
                (x0 - 0.5, y0 - 0.5), x1 - x0, y1 - y0,
                fill=False, edgecolor="white", linewidth=1.2,
            )
        )
    if prompts:
        xs, ys = zip(*prompts)
        ax.scatter(xs[:1], ys[:1], marker="*", s=160, color="red", label="click")
        if len(xs) > 1:
            ax.scatter(xs[1:], ys[1:], marker="*", s=120, color="yellow", label="auxiliary")
        ax.legend(fontsize=8, loc="upper right")
    ax.set_xticks([])
    ax.set_yticks([])
    return _finish(fig, path)


def metric_traces(report, path):
    """Dice / surface distance / boundary-F per frame for the eval command."""
    fig, axes = plt.subplots(1, 3, figsize=(11, 3))
    ts = range(len(report.dice))
    for ax, values, name in zip(
        axes,
        (report.dice, report.asd, report.f_boundary),
        ("Dice", "avg surface distance (px)", "boundary F"),
    ):
        ax.plot(list(ts), values, linewidth=1.2)
        ax.set_xlabel("frame")
        ax.set_ylabel(name)
    return _finish(fig, path)
