"""WAV reading and frame-level windowing for the speech-emotion encoder."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

FRAME_HOP_SECONDS = 0.02
FRAME_WINDOW_SECONDS = 0.025


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Mono float64 waveform in [-1, 1] plus the sample rate."""
    with wave.open(str(path), "rb") as fh:
        rate = fh.getframerate()
        channels = fh.getnchannels()
        width = fh.getsampwidth()
        raw = fh.readframes(fh.getnframes())
    if width != 2:
        raise ValueError(f"{path}: only 16-bit PCM supported, got {8 * width}-bit")
    signal = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        signal = signal.reshape(-1, channels).mean(axis=1)
    if signal.size == 0:
        raise ValueError(f"{path}: empty audio track")
    return signal, rate


def frame_windows(signal: np.ndarray, rate: int) -> np.ndarray:
    """(T, window) matrix of overlapping analysis windows; T >= 1 always."""
    hop = max(1, int(rate * FRAME_HOP_SECONDS))
    window = max(2, int(rate * FRAME_WINDOW_SECONDS))
    if signal.size < window:
        padded = np.zeros(window)
        padded[: signal.size] = signal
        return padded[None, :]
    starts = np.arange(0, signal.size - window + 1, hop)
    return np.stack([signal[s : s + window] for s in starts])
