"""Binary tensor fixture codec.

One format carries every tensor the engine consumes: embeddings (rank 1),
scalar maps and masks (rank 2), and feature grids (rank 3, channel-fastest).
The byte layout is fixed and little-endian regardless of host. See
docs/formats.md for the normative description.

    offset  size  field
    0       8     magic  b"SGTENSOR"
    8       4     format version, u32  (currently 1)
    12      4     element type code, u32  (1 = IEEE-754 binary32)
    16      4     ndim, u32  (1..8)
    20      4*n   dims, u32 each  (all >= 1)
    ...           payload: prod(dims) float32 values, row-major

Values are widened to float64 on load; writes go through a temp file and an
atomic rename so readers never observe a half-written fixture.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    BadHeader,
    BadMagic,
    IoFailure,
    NonFiniteValues,
    ShapeOverflow,
    TruncatedPayload,
)

MAGIC = b"SGTENSOR"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1
MAX_NDIM = 8
MAX_ELEMENTS = 2**31


def _check_shape(shape: tuple[int, ...]) -> int:
    if not (1 <= len(shape) <= MAX_NDIM):
        raise ShapeOverflow(f"rank {len(shape)} outside 1..{MAX_NDIM}")
    count = 1
    for d in shape:
        if d < 1:
            raise ShapeOverflow(f"dimension {d} must be >= 1")
        count *= d
        if count > MAX_ELEMENTS:
            raise ShapeOverflow(f"element count {count} exceeds {MAX_ELEMENTS}")
    return count


def read_tensor(path) -> np.ndarray:
    """Load a fixture as a float64 array with its stored shape."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(blob) < 20:
        raise TruncatedPayload(f"{path}: header truncated ({len(blob)} bytes)")
    if blob[:8] != MAGIC:
        raise BadMagic(f"{path}: bad magic {blob[:8]!r}")
    version, dtype_code, ndim = struct.unpack_from("<III", blob, 8)
    if version != FORMAT_VERSION:
        raise BadHeader(f"{path}: unsupported format version {version}")
    if dtype_code != DTYPE_FLOAT32:
        raise BadHeader(f"{path}: unsupported element type code {dtype_code}")
    if not (1 <= ndim <= MAX_NDIM):
        raise ShapeOverflow(f"{path}: rank {ndim} outside 1..{MAX_NDIM}")
    header_end = 20 + 4 * ndim
    if len(blob) < header_end:
        raise TruncatedPayload(f"{path}: shape list truncated")
    shape = struct.unpack_from(f"<{ndim}I", blob, 20)
    count = _check_shape(shape)
    expected = header_end + 4 * count
    if len(blob) < expected:
        raise TruncatedPayload(
            f"{path}: payload holds {(len(blob) - header_end) // 4} of {count} elements"
        )
    if len(blob) > expected:
        raise TruncatedPayload(f"{path}: {len(blob) - expected} trailing bytes")
    values = np.frombuffer(blob, dtype="<f4", count=count, offset=header_end)
    if not np.isfinite(values).all():
        raise NonFiniteValues(f"{path}: payload contains non-finite values")
    return values.astype(np.float64).reshape(shape)


def write_tensor(path, tensor) -> None:
    """Serialize an array to the fixture format, atomically.

    The payload is stored as float32; callers hand in float64 working arrays
    and accept the narrowing. Non-finite values are rejected up front.
    """
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.isfinite(arr).all():
        raise NonFiniteValues("refusing to write non-finite values")
    _check_shape(arr.shape)

    header = MAGIC + struct.pack(
        f"<III{arr.ndim}I", FORMAT_VERSION, DTYPE_FLOAT32, arr.ndim, *arr.shape
    )
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(header)
                fh.write(payload)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
