"""Writers for the detector package's on-disk interfaces.

Implemented from the documented formats rather than by importing the
detector package: the file layouts are the contract between the two sides.

Embedding file (little-endian): magic "EMOS" | version u32 (=1) |
modality u8 (0=video, 1=audio) | 3 zero bytes | T u32 | d u32 |
T*d float32 row-major payload.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMOS"
FORMAT_VERSION = 1
MODALITY_CODES = {"video": 0, "audio": 1}
_HEADER = struct.Struct("<4sIB3sII")


def write_embedding(data: np.ndarray, modality: str, destination: str | Path) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise ValueError(f"embedding must be (T, d) with T, d >= 1, got {data.shape}")
    if not np.isfinite(data).all():
        raise ValueError("non-finite value in embedding data")
    destination = Path(destination)
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, MODALITY_CODES[modality], b"\x00\x00\x00",
        data.shape[0], data.shape[1],
    )
    tmp = destination.with_name(destination.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())
    os.replace(tmp, destination)


def write_manifest_json(samples: list[dict], metadata: dict[str, str], path: str | Path) -> None:
    """Manifest document in the detector package's schema."""
    path = Path(path)
    doc = {
        "format_version": 1,
        "metadata": dict(sorted(metadata.items())),
        "samples": samples,
    }
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
