"""Versioned binary checkpoints for named parameter arrays.

Layout (all integers little-endian):

    magic    4 bytes  b"SKCP"
    version  u32      currently 1
    model id u32 length + utf-8 bytes
    count    u32      number of arrays
    entry*   name (u32 length + utf-8), dtype code u8 (0=f32, 1=f64),
             ndim u32, dims u64 each, raw array bytes (C order, little-endian)

Round trips are bit-exact: load(save(x)) compares equal with ==, NaNs aside.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SKCP"
VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint file."""


def save_checkpoint(path: str | Path, model_id: str, arrays: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    ident = model_id.encode("utf-8")
    chunks.append(struct.pack("<I", len(ident)))
    chunks.append(ident)
    chunks.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if arr.dtype not in _CODE_FOR:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name!r}")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", _CODE_FOR[arr.dtype]))
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        chunks.append(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError("truncated checkpoint")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]


def load_checkpoint(path: str | Path) -> tuple[str, dict[str, np.ndarray]]:
    r = _Reader(Path(path).read_bytes())
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    model_id = r.take(r.u32()).decode("utf-8")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        dtype = _DTYPE_CODES.get(r.u8())
        if dtype is None:
            raise CheckpointError(f"{path}: unknown dtype code for {name!r}")
        ndim = r.u32()
        shape = struct.unpack(f"<{ndim}Q", r.take(8 * ndim)) if ndim else ()
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        raw = r.take(count * dtype.itemsize)
        arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    if r.pos != len(r.blob):
        raise CheckpointError(f"{path}: trailing bytes after last array")
    return model_id, arrays
