"""Writer for the engine's tensor fixture format.

Implemented from the format documentation (engine docs/formats.md), not by
importing the engine: the byte layout is the interface. Little-endian
throughout; payload is float32 row-major; writes are atomic via rename.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"SGTENSOR"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1


def write_fixture(path, tensor) -> Path:
    arr = np.ascontiguousarray(np.asarray(tensor, dtype=np.float64))
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.isfinite(arr).all():
        raise ValueError(f"refusing to write non-finite values to {path}")
    if not (1 <= arr.ndim <= 8) or any(d < 1 for d in arr.shape):
        raise ValueError(f"unsupported fixture shape {arr.shape}")

    header = MAGIC + struct.pack(
        f"<III{arr.ndim}I", FORMAT_VERSION, DTYPE_FLOAT32, arr.ndim, *arr.shape
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(arr.astype("<f4").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
