"""Frame sampling and face cropping."""

from __future__ import annotations

from pathlib import Path
from typing import Protocol

import cv2
import numpy as np

FRAMES_PER_CLIP = 16
FRAME_STEP = 5
MIN_USABLE_FRAMES = FRAMES_PER_CLIP * FRAME_STEP - (FRAME_STEP - 1)  # 76


class FaceDetector(Protocol):
    name: str

    def detect(self, frame: np.ndarray) -> tuple[int, int, int] | None:
        """Returns a square face box ``(x, y, side)`` or None."""


class HaarFaceDetector:
    """OpenCV Haar cascade, the default for real footage."""

    def __init__(self, margin: float = 0.3):
        self.name = f"haar-frontalface-margin{margin}"
        self.margin = margin
        path = cv2.data.haarcascades + "haarcascade_frontalface_default.xml"
        self.cascade = cv2.CascadeClassifier(path)

    def detect(self, frame: np.ndarray) -> tuple[int, int, int] | None:
        gray = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
        faces = self.cascade.detectMultiScale(gray, scaleFactor=1.1, minNeighbors=4)
        if len(faces) == 0:
            return None
        x, y, w, h = max(faces, key=lambda box: box[2] * box[3])
        side = int(max(w, h) * (1.0 + self.margin))
        cx, cy = x + w // 2, y + h // 2
        return cx - side // 2, cy - side // 2, side


class CenterBoxDetector:
    """Fixed centered square; for staged or pre-cropped footage."""

    def __init__(self, fraction: float = 0.6):
        self.name = f"center-box-{fraction}"
        self.fraction = fraction

    def detect(self, frame: np.ndarray) -> tuple[int, int, int] | None:
        height, width = frame.shape[:2]
        side = int(min(height, width) * self.fraction)
        return (width - side) // 2, (height - side) // 2, side


DETECTORS = {"haar": HaarFaceDetector, "center": CenterBoxDetector}


def crop_square(frame: np.ndarray, box: tuple[int, int, int], size: int = 64) -> np.ndarray:
    """Clamped square crop resized to ``size`` x ``size``."""
    x, y, side = box
    height, width = frame.shape[:2]
    x0, y0 = max(0, x), max(0, y)
    x1, y1 = min(width, x + side), min(height, y + side)
    if x1 <= x0 or y1 <= y0:
        raise ValueError("face box outside the frame")
    crop = frame[y0:y1, x0:x1]
    return cv2.resize(crop, (size, size), interpolation=cv2.INTER_AREA)


def sample_frames(video_path: str | Path) -> list[np.ndarray]:
    """The clip's 16 sampled frames (step 5, anchored at frame 0).

    Raises ValueError when the clip does not decode or holds fewer than the
    76 frames the sampling pattern needs.
    """
    capture = cv2.VideoCapture(str(video_path))
    if not capture.isOpened():
        raise ValueError(f"cannot decode video: {video_path}")
    wanted = {i * FRAME_STEP for i in range(FRAMES_PER_CLIP)}
    frames: dict[int, np.ndarray] = {}
    index = 0
    while index <= max(wanted):
        ok, frame = capture.read()
        if not ok:
            break
        if index in wanted:
            frames[index] = frame
        index += 1
    capture.release()
    if len(frames) < FRAMES_PER_CLIP:
        raise ValueError(
            f"clip too short: needs >= {MIN_USABLE_FRAMES} frames, decoded {index}"
        )
    return [frames[i * FRAME_STEP] for i in range(FRAMES_PER_CLIP)]
