"""Synthetic 10-second clips for extraction tests."""

from __future__ import annotations

import wave
from pathlib import Path

import cv2
import numpy as np
import pytest

FPS = 25
SECONDS = 10
RATE = 16000


def write_clip_video(path: Path, num_frames: int = FPS * SECONDS, size: int = 128) -> None:
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"MJPG"), FPS, (size, size)
    )
    for i in range(num_frames):
        frame = np.full((size, size, 3), 30, dtype=np.uint8)
        # a drifting bright "face": disc plus darker eye patches
        cx = size // 2 + int(10 * np.sin(i / 20))
        cy = size // 2 + int(6 * np.cos(i / 25))
        cv2.circle(frame, (cx, cy), size // 4, (200, 190, 180), -1)
        cv2.circle(frame, (cx - 10, cy - 8), 4, (60, 60, 60), -1)
        cv2.circle(frame, (cx + 10, cy - 8), 4, (60, 60, 60), -1)
        writer.write(frame)
    writer.release()


def write_clip_audio(path: Path, seconds: float = SECONDS, silent: bool = False) -> None:
    t = np.arange(int(RATE * seconds)) / RATE
    if silent:
        signal = np.zeros_like(t)
    else:
        signal = 0.4 * np.sin(2 * np.pi * 220 * t) * (0.6 + 0.4 * np.sin(2 * np.pi * 0.5 * t))
    pcm = (signal * 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(RATE)
        fh.writeframes(pcm.tobytes())


@pytest.fixture(scope="session")
def clip_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("clips")
    write_clip_video(root / "clip0.avi")
    write_clip_audio(root / "clip0.wav")
    write_clip_video(root / "clip1.avi")
    write_clip_audio(root / "clip1.wav")
    write_clip_video(root / "short.avi", num_frames=50)
    write_clip_audio(root / "short.wav", seconds=2)
    write_clip_audio(root / "silent.wav", silent=True)
    return root
