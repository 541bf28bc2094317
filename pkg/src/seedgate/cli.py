"""Command-line surface: stage1, gate, simulate, eval, sweep-tau.

Every subcommand reads fixtures or configs, writes a run-report JSON to
--out, a CSV next to it, and (unless --no-figures) rendered figures with
the same stem. Exit codes: 0 success, 1 input/validation error, 2 runtime
error. Verbosity comes from the SEEDGATE_LOG environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import figures
from .errors import EngineError, SchemaViolation, UsageError
from .gate import (
    GateConfig,
    compute_descriptor,
    gate_decision,
    init_anchor,
    rejection_rate,
)
from .manifest import load_gate_fixtures, load_manifest, load_stage1_inputs
from .maps import DEFAULT_EPS
from .metrics import MetricsReport
from .prompts import (
    RefineConfig,
    assemble_prompts,
    dense_similarity,
    frame_box_to_grid_box,
    frame_to_grid,
    grid_to_frame,
    nms_peaks,
)
from .report import (
    csv_path_for,
    figure_path_for,
    make_body,
    write_csv,
    write_report,
)
from .scale import InteractionSpec, run_stage1
from .simulate import (
    POLICY_GATED,
    POLICY_GREEDY,
    SynthConfig,
    compare_policies,
    default_prompts,
    propagate,
    sweep_taus_simulated,
    sweep_taus_stream,
    synth_sequence,
)
from .tensorio import read_tensor

log = logging.getLogger("seedgate")

SWEEP_CSV_HEADER = ["tau", "rejection_rate", "mean_dice", "mean_asd"]
FRAME_CSV_HEADER = ["frame", "policy", "dice", "asd", "g", "written", "reason"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="seedgate", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("stage1", parents=[], help="scale selection + prompt synthesis")
    p.add_argument("--manifest", required=True, help="sequence manifest JSON")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("gate", help="write-gate decision log over fixture pairs")
    p.add_argument("--fixtures", required=True, help="directory of features_* / mask_* pairs")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--capacity", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("simulate", help="synthetic greedy/gated propagation run")
    p.add_argument("--config", required=True, help="synthetic sequence config JSON")
    p.add_argument(
        "--policy", choices=[POLICY_GREEDY, POLICY_GATED, "both"], default="both"
    )
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("eval", help="mask-quality metrics over fixture directories")
    p.add_argument("--pred", required=True, help="directory of predicted mask fixtures")
    p.add_argument("--gt", required=True, help="directory of ground-truth mask fixtures")
    p.add_argument("--tol", type=float, default=None, help="boundary tolerance in px")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("sweep-tau", help="threshold sweep on a stream or simulation")
    p.add_argument("--taus", required=True, help="comma-separated thresholds")
    p.add_argument("--stream", default=None, help="rank-2 (T, d) descriptor fixture")
    p.add_argument("--anchor", default=None, help="rank-1 anchor fixture")
    p.add_argument("--config", default=None, help="synthetic config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")

    return parser


def _read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON: {exc}") from exc


def _parse_taus(spec: str) -> list[float]:
    try:
        taus = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --taus value {spec!r}") from exc
    if not taus:
        raise UsageError("--taus must name at least one threshold")
    return taus


def _emit(args, body: dict, csv_header, csv_rows, figure_jobs) -> None:
    out = Path(args.out)
    write_report(out, body)
    write_csv(csv_path_for(out), csv_header, csv_rows)
    log.info("wrote %s and %s", out, csv_path_for(out))
    if not args.no_figures:
        for tag, render in figure_jobs:
            path = figure_path_for(out, tag)
            render(path)
            log.info("wrote %s", path)


# -- subcommands --------------------------------------------------------------

def cmd_stage1(args) -> int:
    man = load_manifest(args.manifest)
    embeddings, ingredients, text, vfm = load_stage1_inputs(man)
    selection = run_stage1(
        embeddings,
        ingredients,
        text,
        InteractionSpec(p0=man.p0, category=man.category),
        man.stage1.schedule,
        man.frame_size,
        man.epsilon,
    )

    grid_hw = vfm.shape[:2]
    p0_grid = frame_to_grid(man.p0, man.stride, grid_hw)
    sim = dense_similarity(vfm, p0_grid)
    grid_box = frame_box_to_grid_box(selection.box, man.stride, grid_hw)
    # nms_radius is specified in frame pixels; the peak search runs on the
    # feature grid, so convert (and keep the pixel-separation guarantee).
    grid_cfg = RefineConfig(
        nms_radius=max(1, math.ceil(man.refine.nms_radius / man.stride)),
        max_aux=man.refine.max_aux,
        min_similarity=man.refine.min_similarity,
    )
    peaks = nms_peaks(sim, grid_box, grid_cfg) if grid_box else []
    aux = [grid_to_frame((p.x, p.y), man.stride) for p in peaks]
    prompts = assemble_prompts(man.p0, aux)

    body = make_body(
        "stage1",
        {
            "frame_size": list(man.frame_size),
            "interaction": {"p0": list(man.p0), "category": man.category},
            "stride": man.stride,
            "selection": {
                "k_star": selection.k_star,
                "sigma": selection.sigma,
                "box": list(selection.box),
                "scores": [
                    {
                        "k": r.k,
                        "sigma": r.sigma,
                        "box": list(r.box),
                        "s_sem": r.s_sem,
                        "s_spa": r.s_spa,
                        "sem_hat": r.sem_hat,
                        "spa_hat": r.spa_hat,
                        "product": r.product,
                    }
                    for r in selection.rows
                ],
            },
            "prompts": {"points": [list(p) for p in prompts.points], "labels": prompts.labels},
            "peaks": [{"x": p.x, "y": p.y, "score": p.score} for p in peaks],
            "configs": {
                "epsilon": man.epsilon,
                "nms_radius": man.refine.nms_radius,
                "max_aux": man.refine.max_aux,
            },
        },
    )
    rows = [
        [r.k, r.sigma, *r.box, r.s_sem, r.s_spa, r.sem_hat, r.spa_hat, r.product]
        for r in selection.rows
    ]
    header = ["k", "sigma", "x0", "y0", "x1", "y1", "s_sem", "s_spa", "sem_hat", "spa_hat", "product"]
    grid_points = [p0_grid] + [(p.x, p.y) for p in peaks]
    figure_jobs = [
        ("scores", lambda path: figures.scale_scores(selection.rows, path)),
        (
            "similarity",
            lambda path: figures.similarity_heatmap(sim.map, grid_points, grid_box, path),
        ),
    ]
    _emit(args, body, header, rows, figure_jobs)
    return 0


def cmd_gate(args) -> int:
    pairs, anchor_vec = load_gate_fixtures(args.fixtures)
    cfg = GateConfig(
        tau=0.5 if args.tau is None else args.tau,
        bank_capacity=7 if args.capacity is None else args.capacity,
    )
    if anchor_vec is None:
        anchor_vec = init_anchor(pairs[0][0], pairs[0][1]).descriptor
        anchor_source = "frame0"
    else:
        anchor_source = "fixture"

    decisions = []
    for t in range(1, len(pairs)):
        feats, mask = pairs[t]
        descriptor, empty = compute_descriptor(feats, mask)
        decisions.append(
            gate_decision(descriptor, anchor_vec, cfg, empty_mask=empty, frame_index=t)
        )

    body = make_body(
        "gate",
        {
            "fixtures": str(Path(args.fixtures).resolve()),
            "tau": cfg.tau,
            "bank_capacity": cfg.bank_capacity,
            "anchor_source": anchor_source,
            "frame_count": len(pairs),
            "decisions": [
                {"frame": d.frame_index, "g": d.g, "written": d.written, "reason": d.reason}
                for d in decisions
            ],
            "rejection_rate": rejection_rate(decisions) if decisions else 0.0,
        },
    )
    rows = [[d.frame_index, d.g, d.written, d.reason] for d in decisions]
    figure_jobs = [
        ("timeline", lambda path: figures.gate_timeline(decisions, cfg.tau, path))
    ]
    _emit(args, body, ["frame", "g", "written", "reason"], rows, figure_jobs)
    return 0


def _frame_rows(report):
    return [
        [f.t, report.policy, f.dice, f.asd, f.g, f.written, f.reason]
        for f in report.frames
    ]


def cmd_simulate(args) -> int:
    raw = _read_json(args.config)
    if args.seed is not None:
        raw = dict(raw)
        raw["seed"] = args.seed
    cfg = SynthConfig.from_dict(raw)
    gate_raw = raw.get("gate", {})
    gate_cfg = GateConfig(
        tau=args.tau if args.tau is not None else float(gate_raw.get("tau", 0.5)),
        bank_capacity=int(gate_raw.get("bank_capacity", 7)),
    )
    eps = float(raw.get("epsilon", DEFAULT_EPS))

    seq = synth_sequence(cfg)
    prompts = default_prompts(cfg)

    config_echo = {
        "frames": cfg.frames,
        "grid": list(cfg.grid),
        "radius": cfg.radius,
        "noise_sigma": cfg.noise_sigma,
        "seed": cfg.seed,
        "corruption_window": list(cfg.corruption_window) if cfg.corruption_window else None,
        "tau": gate_cfg.tau,
        "bank_capacity": gate_cfg.bank_capacity,
        "epsilon": eps,
        "prompt": list(prompts.points[0]),
    }

    if args.policy == "both":
        greedy, gated, delta = compare_policies(seq, prompts, gate_cfg, eps)
        reports = [greedy, gated]
        payload = {
            "config": config_echo,
            "greedy": greedy.to_dict(),
            "gated": gated.to_dict(),
            "delta": delta,
        }
        gated_for_timeline = gated
    else:
        rep = propagate(seq, prompts, args.policy, gate_cfg, eps)
        reports = [rep]
        payload = {"config": config_echo, args.policy: rep.to_dict()}
        gated_for_timeline = rep

    body = make_body("simulate", payload)
    rows = [row for rep in reports for row in _frame_rows(rep)]
    figure_jobs = [
        ("curves", lambda path: figures.policy_curves(reports, path)),
        (
            "timeline",
            lambda path: figures.gate_timeline(
                gated_for_timeline.decisions(), gate_cfg.tau, path
            ),
        ),
    ]
    _emit(args, body, FRAME_CSV_HEADER, rows, figure_jobs)
    return 0


def _load_mask_dir(directory) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise UsageError(f"not a directory: {directory}")
    paths = sorted(directory.glob("*.sgt"))
    if not paths:
        raise UsageError(f"no .sgt fixtures in {directory}")
    return [read_tensor(p) for p in paths]


def cmd_eval(args) -> int:
    preds = _load_mask_dir(args.pred)
    gts = _load_mask_dir(args.gt)
    report = MetricsReport.from_pairs(preds, gts, args.tol)
    body = make_body(
        "eval",
        {
            "pred_dir": str(Path(args.pred).resolve()),
            "gt_dir": str(Path(args.gt).resolve()),
            "tolerance": args.tol,
            "metrics": report.to_dict(),
        },
    )
    rows = [
        [t, d, a, f]
        for t, (d, a, f) in enumerate(zip(report.dice, report.asd, report.f_boundary))
    ]
    figure_jobs = [("metrics", lambda path: figures.metric_traces(report, path))]
    _emit(args, body, ["frame", "dice", "asd", "f_boundary"], rows, figure_jobs)
    return 0


def cmd_sweep_tau(args) -> int:
    taus = _parse_taus(args.taus)
    if (args.stream is None) == (args.config is None):
        raise UsageError("sweep-tau needs exactly one of --stream or --config")

    if args.stream is not None:
        stream = read_tensor(args.stream)
        if stream.ndim != 2:
            raise UsageError(f"--stream must be a rank-2 (T, d) fixture, got {stream.shape}")
        if args.anchor is not None:
            anchor = read_tensor(args.anchor)
            descriptors = list(stream)
        else:
            # no explicit anchor: row 0 anchors the rest of the stream
            anchor = stream[0]
            descriptors = list(stream[1:])
        if not descriptors:
            raise UsageError("descriptor stream is empty")
        rows = sweep_taus_stream(descriptors, anchor, taus)
        mode = "stream"
    else:
        cfg = SynthConfig.from_dict(_read_json(args.config))
        rows = sweep_taus_simulated(cfg, taus)
        mode = "simulated"

    body = make_body("sweep-tau", {"mode": mode, "taus": taus, "rows": rows})
    csv_rows = [[r["tau"], r["rejection_rate"], r["mean_dice"], r["mean_asd"]] for r in rows]
    figure_jobs = [("sweep", lambda path: figures.sweep_curve(rows, path))]
    _emit(args, body, SWEEP_CSV_HEADER, csv_rows, figure_jobs)
    return 0


_HANDLERS = {
    "stage1": cmd_stage1,
    "gate": cmd_gate,
    "simulate": cmd_simulate,
    "eval": cmd_eval,
    "sweep-tau": cmd_sweep_tau,
}


def _setup_logging() -> None:
    level_name = os.environ.get("SEEDGATE_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.command not in _HANDLERS:
            raise UsageError(f"unknown subcommand {args.command!r}")
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(parser.format_usage(), file=sys.stderr, end="")
        print(f"seedgate: error: {exc}", file=sys.stderr)
        return 1
    except EngineError as exc:
        print(f"seedgate: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        code = exc.code
        return int(code) if isinstance(code, int) else 0
    except Exception as exc:  # pragma: no cover - defensive runtime mapping
        print(f"seedgate: unexpected failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
