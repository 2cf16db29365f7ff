"""Named-tensor checkpoint format shared by all trained components.

Layout (little-endian)::

    magic   "EMOP"   4 bytes
    version u32      currently 1
    count   u32      number of table entries
    entry*  name_len u32 | name bytes (utf-8) | rank u32 | dims u32[rank]
            | payload float64 LE (prod(dims) values)

Entries are written in sorted-name order so checkpoint bytes are a pure
function of the tensor contents. Free-form metadata (fusion strategy,
ablation flags, config echo) rides along as a reserved ``__meta__`` entry
holding UTF-8 JSON bytes widened to float64.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMOP"
FORMAT_VERSION = 1
META_KEY = "__meta__"


class CheckpointError(ValueError):
    pass


def write_checkpoint(
    tensors: dict[str, np.ndarray], path: str | Path, meta: dict | None = None
) -> None:
    path = Path(path)
    table = {name: np.asarray(value, dtype=np.float64) for name, value in tensors.items()}
    if META_KEY in table:
        raise CheckpointError(f"tensor name {META_KEY!r} is reserved")
    if meta is not None:
        raw = json.dumps(meta, sort_keys=True).encode("utf-8")
        table[META_KEY] = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", FORMAT_VERSION, len(table))
    for name in sorted(table):
        value = table[name]
        encoded = name.encode("utf-8")
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<I", value.ndim)
        blob += struct.pack(f"<{value.ndim}I", *value.shape)
        blob += np.ascontiguousarray(value, dtype="<f8").tobytes()
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(blob))
    os.replace(tmp, path)


def read_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns ``(tensors, meta)``; ``meta`` is ``{}`` when absent."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: version mismatch (got {version})")
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        dims = struct.unpack_from(f"<{rank}I", raw, offset)
        offset += 4 * rank
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = np.frombuffer(raw, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        tensors[name] = payload.reshape(dims).copy()
    if offset != len(raw):
        raise CheckpointError(f"{path}: trailing bytes after tensor table")
    meta: dict = {}
    if META_KEY in tensors:
        meta = json.loads(bytes(tensors.pop(META_KEY).astype(np.uint8)).decode("utf-8"))
    return tensors, meta


def checkpoint_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
