"""Encoder bridge: media clips -> frame-level emotion embedding files.

Samples 16 face-cropped frames (step 5) from each video and runs them
through a frame-level facial-emotion encoder (512-d per frame); the full
audio track goes through a speech-emotion encoder (1024-d per frame).
Results are written in the detector package's binary embedding format plus a
manifest JSON, which is the only coupling between the two packages.

The production emotion encoders are external, frozen models; this package
ships deterministic stand-in encoders behind the same interface so the
pipeline is runnable and testable without model downloads.
"""

from emobridge.extract import ClipInput, ClipRejected, extract_audio_embeddings, extract_visual_embeddings
from emobridge.manifest_build import build_manifest

__version__ = "0.1.0"

__all__ = [
    "ClipInput",
    "ClipRejected",
    "build_manifest",
    "extract_audio_embeddings",
    "extract_visual_embeddings",
]
