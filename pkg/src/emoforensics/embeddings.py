"""Frame-level emotion embedding sequences and their binary file format.

File layout (little-endian throughout)::

    magic   "EMOS"      4 bytes
    version u32         currently 1
    modality u8         0 = video, 1 = audio
    reserved 3 bytes    must be zero
    T       u32         number of frames, >= 1
    d       u32         embedding dimension, >= 1
    payload T*d float32 row-major

Payloads are stored as 32-bit floats; training code upcasts to float64.
"""

from __future__ import annotations

import enum
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"EMOS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIB3sII")


class EmbeddingFormatError(ValueError):
    """Raised when an embedding file violates the format contract."""


class Modality(enum.Enum):
    VIDEO = 0
    AUDIO = 1

    @classmethod
    def from_code(cls, code: int) -> "Modality":
        try:
            return cls(code)
        except ValueError:
            raise EmbeddingFormatError(f"unknown modality code {code}") from None


@dataclass
class EmbeddingSequence:
    """One modality's frame-level emotion embeddings for a single clip.

    ``data`` has shape ``(num_frames, dim)`` and dtype float32. The library
    accepts any positive ``dim``; files written by the generator or the
    encoder bridge use 512 (video) and 1024 (audio).
    """

    modality: Modality
    data: np.ndarray
    sample_id: str = ""

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"data must be 2-D (frames x dim), got shape {self.data.shape}")
        if self.num_frames < 1 or self.dim < 1:
            raise ValueError(f"need num_frames >= 1 and dim >= 1, got {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValueError("non-finite value in embedding data")

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def write_embedding_file(seq: EmbeddingSequence, destination: str | Path) -> None:
    """Write ``seq`` to ``destination``; read-back is bit-exact.

    The write is atomic (temp file + rename). Non-finite values are rejected
    before anything touches disk.
    """
    if not np.isfinite(seq.data).all():
        raise ValueError("non-finite value in embedding data")
    destination = Path(destination)
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, seq.modality.value, b"\x00\x00\x00", seq.num_frames, seq.dim
    )
    payload = np.ascontiguousarray(seq.data, dtype="<f4").tobytes()
    tmp = destination.with_name(destination.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, destination)


def read_embedding_file(source: str | Path, sample_id: str = "") -> EmbeddingSequence:
    """Read and validate an embedding file.

    Raises :class:`EmbeddingFormatError` on bad magic, version mismatch,
    size mismatch, zero frame/dim counts, or non-finite payload values.
    """
    source = Path(source)
    raw = source.read_bytes()
    if len(raw) < _HEADER.size:
        raise EmbeddingFormatError(f"{source}: size mismatch (file shorter than header)")
    magic, version, mod_code, reserved, num_frames, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{source}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise EmbeddingFormatError(f"{source}: version mismatch (got {version}, want {FORMAT_VERSION})")
    if reserved != b"\x00\x00\x00":
        raise EmbeddingFormatError(f"{source}: nonzero reserved bytes")
    modality = Modality.from_code(mod_code)
    if num_frames < 1 or dim < 1:
        raise EmbeddingFormatError(f"{source}: invalid shape T={num_frames}, d={dim}")
    expected = _HEADER.size + 4 * num_frames * dim
    if len(raw) != expected:
        raise EmbeddingFormatError(
            f"{source}: size mismatch (got {len(raw)} bytes, want {expected})"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(num_frames, dim)
    if not np.isfinite(data).all():
        raise EmbeddingFormatError(f"{source}: non-finite value in payload")
    return EmbeddingSequence(modality=modality, data=data.copy(), sample_id=sample_id)


def downsample_array(frames: np.ndarray, target_len: int) -> np.ndarray:
    """Segment-mean pooling of a ``(T, d)`` float array down to ``target_len`` rows.

    Row ``i`` of the output is the mean of source rows
    ``[floor(i*T/target_len), floor((i+1)*T/target_len))``. Computation is
    float64 regardless of input dtype.
    """
    num_frames = frames.shape[0]
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    if target_len > num_frames:
        raise ValueError(f"target_len {target_len} exceeds num_frames {num_frames}")
    if target_len == num_frames:
        return frames.astype(np.float64, copy=True)
    bounds = (np.arange(target_len + 1) * num_frames) // target_len
    acc = frames.astype(np.float64, copy=False)
    out = np.add.reduceat(acc, bounds[:-1], axis=0)
    return out / (bounds[1:] - bounds[:-1])[:, None]


def downsample_to_length(seq: EmbeddingSequence, target_len: int) -> EmbeddingSequence:
    """Downsample a sequence in time via segment mean pooling.

    Identity when ``target_len == num_frames``; constant input stays constant.
    """
    pooled = downsample_array(seq.data, target_len)
    return EmbeddingSequence(
        modality=seq.modality, data=pooled.astype(np.float32), sample_id=seq.sample_id
    )
