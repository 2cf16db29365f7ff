"""Frozen emotion encoders behind a minimal interface.

The production encoders are large pretrained models (a facial-emotion
network at 512-d per frame, a speech-emotion network at 1024-d per frame).
This module defines the interface plus deterministic stand-ins built from
fixed seeded projections, so extraction runs anywhere and output bytes are
reproducible. Each encoder reports an identity string and a parameter hash
that the manifest records for provenance.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

VISUAL_DIM = 512
AUDIO_DIM = 1024
_CROP_SIZE = 64
_SPECTRUM_BINS = 128


class VisualEncoder(Protocol):
    name: str
    weights_hash: str

    def encode(self, crops: np.ndarray) -> np.ndarray:
        """(T, H, W, 3) uint8 face crops -> (T, 512) float32."""


class AudioEncoder(Protocol):
    name: str
    weights_hash: str

    def encode(self, windows: np.ndarray) -> np.ndarray:
        """(T, window) float64 -> (T, 1024) float32."""


def _seeded_projection(seed_tag: str, shape: tuple[int, int]) -> np.ndarray:
    seed = int.from_bytes(hashlib.blake2b(seed_tag.encode(), digest_size=8).digest(), "little")
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(shape) / np.sqrt(shape[0])).astype(np.float64)


def _hash_array(array: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(array).tobytes()).hexdigest()[:16]


class StubVisualEncoder:
    """Grayscale crop -> fixed random projection; a stand-in, not a model."""

    def __init__(self, seed_tag: str = "visual-stub-v1"):
        self.projection = _seeded_projection(seed_tag, (_CROP_SIZE * _CROP_SIZE, VISUAL_DIM))
        self.name = f"stub-visual/{seed_tag}"
        self.weights_hash = _hash_array(self.projection)

    def encode(self, crops: np.ndarray) -> np.ndarray:
        if crops.ndim != 4 or crops.shape[1:3] != (_CROP_SIZE, _CROP_SIZE):
            raise ValueError(f"expected (T, {_CROP_SIZE}, {_CROP_SIZE}, 3) crops, got {crops.shape}")
        gray = crops.astype(np.float64).mean(axis=3) / 255.0
        flat = gray.reshape(gray.shape[0], -1)
        flat = flat - flat.mean(axis=1, keepdims=True)
        return (flat @ self.projection).astype(np.float32)


class StubAudioEncoder:
    """Log magnitude spectrum -> fixed random projection."""

    def __init__(self, seed_tag: str = "audio-stub-v1"):
        self.projection = _seeded_projection(seed_tag, (_SPECTRUM_BINS, AUDIO_DIM))
        self.name = f"stub-audio/{seed_tag}"
        self.weights_hash = _hash_array(self.projection)

    def encode(self, windows: np.ndarray) -> np.ndarray:
        spectrum = np.abs(np.fft.rfft(windows, axis=1))
        bins = np.zeros((spectrum.shape[0], _SPECTRUM_BINS))
        take = min(_SPECTRUM_BINS, spectrum.shape[1])
        bins[:, :take] = spectrum[:, :take]
        features = np.log1p(bins)
        return (features @ self.projection).astype(np.float32)
