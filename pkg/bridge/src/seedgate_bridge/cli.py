"""Bridge command line: `seedgate-bridge extract ...`

Writes a fixture directory the seedgate engine consumes directly:

    seedgate-bridge extract --video frames/ --click 30,34 \
        --category "toy blob" --out fixtures/
    seedgate stage1 --manifest fixtures/manifest.json --out out/stage1.json
    seedgate gate --fixtures fixtures/ --out out/gate.json
"""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import BridgeError
from .extract import DEFAULT_SCHEDULE, ExtractionJob, run_extraction
from .toyclip import make_toy_clip


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seedgate-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("extract", help="extract fixtures from a frame directory")
    p.add_argument("--video", required=True, help="directory of PNG/JPEG frames")
    p.add_argument("--click", required=True, help="first-frame point as x,y")
    p.add_argument("--category", required=True, help="anatomical category name")
    p.add_argument("--out", required=True, help="fixture output directory")
    p.add_argument("--backend", choices=["toy", "production"], default="toy")
    p.add_argument(
        "--schedule",
        default=",".join(str(s) for s in DEFAULT_SCHEDULE),
        help="comma-separated crop scales, strictly decreasing in (0,1]",
    )

    p = sub.add_parser("make-toy-clip", help="regenerate the bundled 3-frame clip")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "make-toy-clip":
            paths = make_toy_clip(args.out)
            print(f"wrote {len(paths)} frames to {args.out}")
            return 0
        try:
            x, y = (int(v) for v in args.click.split(","))
            schedule = tuple(float(s) for s in args.schedule.split(","))
        except ValueError:
            print(f"bad --click or --schedule value", file=sys.stderr)
            return 1
        manifest = run_extraction(
            ExtractionJob(
                frames_dir=args.video,
                click=(x, y),
                category=args.category,
                out_dir=args.out,
                backend=args.backend,
                schedule=schedule,
            )
        )
        print(f"manifest: {manifest}")
        return 0
    except BridgeError as exc:
        print(f"seedgate-bridge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
