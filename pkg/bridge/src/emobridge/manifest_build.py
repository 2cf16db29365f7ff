"""Batch extraction and manifest assembly."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from emobridge.encoders import StubAudioEncoder, StubVisualEncoder
from emobridge.extract import ClipInput, ClipRejected, extract_audio_embeddings, extract_visual_embeddings
from emobridge.formats import write_manifest_json
from emobridge.video import HaarFaceDetector


@dataclass
class ExtractionReport:
    manifest_path: Path
    accepted: list[str]
    rejected: dict[str, str]


def build_manifest(
    clips: list[ClipInput],
    out_dir: str | Path,
    detector=None,
    visual_encoder=None,
    audio_encoder=None,
) -> ExtractionReport:
    """Extract every clip; write manifest.json plus a rejected-clips sidecar.

    Duplicate clip ids are an error. Rejected clips (too short, no face,
    unreadable audio) are skipped and logged with their reason.
    """
    ids = [c.id for c in clips]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate clip ids: {dupes}")
    detector = detector or HaarFaceDetector()
    visual_encoder = visual_encoder or StubVisualEncoder()
    audio_encoder = audio_encoder or StubAudioEncoder()

    out_dir = Path(out_dir)
    (out_dir / "embeddings").mkdir(parents=True, exist_ok=True)
    samples: list[dict] = []
    accepted: list[str] = []
    rejected: dict[str, str] = {}
    for clip in clips:
        video_rel = f"embeddings/{clip.id}_video.emb"
        audio_rel = f"embeddings/{clip.id}_audio.emb"
        try:
            extract_visual_embeddings(clip, out_dir / video_rel, detector, visual_encoder)
            extract_audio_embeddings(clip, out_dir / audio_rel, audio_encoder)
        except ClipRejected as exc:
            rejected[clip.id] = str(exc)
            for rel in (video_rel, audio_rel):
                (out_dir / rel).unlink(missing_ok=True)
            continue
        samples.append(
            {
                "id": clip.id,
                "label": int(clip.video_fake or clip.audio_fake),
                "video_fake": clip.video_fake,
                "audio_fake": clip.audio_fake,
                "manipulation_tags": sorted(clip.manipulation_tags),
                "group_key": clip.group_key,
                "video_path": video_rel,
                "audio_path": audio_rel,
            }
        )
        accepted.append(clip.id)

    metadata = {
        "generator": "encoder-bridge",
        "face_detector": detector.name,
        "visual_encoder": f"{visual_encoder.name}#{visual_encoder.weights_hash}",
        "audio_encoder": f"{audio_encoder.name}#{audio_encoder.weights_hash}",
    }
    manifest_path = out_dir / "manifest.json"
    write_manifest_json(samples, metadata, manifest_path)
    log_path = out_dir / "rejected.json"
    tmp = log_path.with_name(log_path.name + ".tmp")
    tmp.write_text(json.dumps(rejected, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, log_path)
    return ExtractionReport(manifest_path=manifest_path, accepted=accepted, rejected=rejected)
