"""Run-report serialization and the delimited outputs.

Reports split into a deterministic body and a small envelope. The body is
everything computed from the inputs and serializes canonically (sorted
keys, fixed separators), so byte-comparing two bodies is a valid identity
check; the envelope holds the timestamp and nothing else depends on it.
"""
from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import IoFailure

ENGINE_VERSION = __version__


def canonical_body_bytes(body: dict) -> bytes:
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()


def make_body(command: str, payload: dict) -> dict:
    body = {"schema_version": 1, "command": command, "engine_version": ENGINE_VERSION}
    body.update(payload)
    return body


def write_report(path, body: dict) -> Path:
    """Write {envelope, body} JSON; only the envelope carries volatile data."""
    path = Path(path)
    doc = {
        "envelope": {"created_at": datetime.now(timezone.utc).isoformat()},
        "body": body,
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write report {path}: {exc}") from exc
    return path


def read_report_body(path) -> dict:
    try:
        return json.loads(Path(path).read_text())["body"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise IoFailure(f"cannot read report {path}: {exc}") from exc


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow(["" if v is None else v for v in row])
    except OSError as exc:
        raise IoFailure(f"cannot write csv {path}: {exc}") from exc
    return path


def csv_path_for(report_path) -> Path:
    report_path = Path(report_path)
    return report_path.with_suffix(".csv")


def figure_path_for(report_path, tag: str) -> Path:
    report_path = Path(report_path)
    return report_path.with_name(f"{report_path.stem}_{tag}.png")
