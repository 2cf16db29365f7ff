"""Per-clip extraction: video -> 16x512 file, audio -> T_a x 1024 file."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from emobridge.audio import frame_windows, read_wav
from emobridge.encoders import AudioEncoder, StubAudioEncoder, StubVisualEncoder, VisualEncoder
from emobridge.formats import write_embedding
from emobridge.video import FaceDetector, HaarFaceDetector, crop_square, sample_frames


class ClipRejected(ValueError):
    """Clip cannot be processed; the reason lands in the rejection log."""


@dataclass
class ClipInput:
    id: str
    video: Path
    audio: Path
    video_fake: bool = False
    audio_fake: bool = False
    manipulation_tags: tuple[str, ...] = ()
    group_key: str = ""

    def __post_init__(self) -> None:
        self.video = Path(self.video)
        self.audio = Path(self.audio)
        if not self.group_key:
            self.group_key = self.id


def extract_visual_embeddings(
    clip: ClipInput,
    destination: Path,
    detector: FaceDetector | None = None,
    encoder: VisualEncoder | None = None,
) -> np.ndarray:
    """Face-cropped sampled frames encoded to (16, 512) and written to disk."""
    detector = detector or HaarFaceDetector()
    encoder = encoder or StubVisualEncoder()
    try:
        frames = sample_frames(clip.video)
    except ValueError as exc:
        raise ClipRejected(f"{clip.id}: {exc}") from None
    crops = []
    for index, frame in enumerate(frames):
        box = detector.detect(frame)
        if box is None:
            raise ClipRejected(f"{clip.id}: no face found in sampled frame {index}")
        crops.append(crop_square(frame, box))
    embeddings = encoder.encode(np.stack(crops))
    write_embedding(embeddings, "video", destination)
    return embeddings


def extract_audio_embeddings(
    clip: ClipInput, destination: Path, encoder: AudioEncoder | None = None
) -> np.ndarray:
    """Full-rate (T_a, 1024) frame embeddings; downsampling is the detector's job."""
    encoder = encoder or StubAudioEncoder()
    try:
        signal, rate = read_wav(clip.audio)
    except (ValueError, EOFError, FileNotFoundError) as exc:
        raise ClipRejected(f"{clip.id}: {exc}") from None
    embeddings = encoder.encode(frame_windows(signal, rate))
    write_embedding(embeddings, "audio", destination)
    return embeddings
