"""Dataset manifests: labeled clip records pointing at embedding files.

A manifest is a single JSON document with snake_case keys::

    {
      "format_version": 1,
      "metadata": {"...": "..."},
      "samples": [
        {"id", "label", "video_fake", "audio_fake", "manipulation_tags",
         "group_key", "video_path", "audio_path"}, ...
      ]
    }

Paths are stored relative to the manifest file so a dataset directory can be
moved as a unit.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from emoforensics.embeddings import read_embedding_file

MANIFEST_VERSION = 1


class ManifestError(ValueError):
    """Raised when a manifest violates its invariants."""


@dataclass
class Sample:
    """One labeled clip. ``label`` is 1 iff either modality is fake."""

    id: str
    video_fake: bool
    audio_fake: bool
    manipulation_tags: frozenset[str]
    group_key: str
    video_path: str
    audio_path: str

    @property
    def label(self) -> int:
        return int(self.video_fake or self.audio_fake)

    def validate(self) -> None:
        fake = self.video_fake or self.audio_fake
        if fake and not self.manipulation_tags:
            raise ManifestError(f"sample {self.id}: fake sample needs >= 1 manipulation tag")
        if not fake and self.manipulation_tags:
            raise ManifestError(f"sample {self.id}: real sample must have no manipulation tags")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "video_fake": self.video_fake,
            "audio_fake": self.audio_fake,
            "manipulation_tags": sorted(self.manipulation_tags),
            "group_key": self.group_key,
            "video_path": self.video_path,
            "audio_path": self.audio_path,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Sample":
        known = {
            "id", "label", "video_fake", "audio_fake", "manipulation_tags",
            "group_key", "video_path", "audio_path",
        }
        unknown = set(obj) - known
        if unknown:
            raise ManifestError(f"sample record has unknown keys: {sorted(unknown)}")
        sample = cls(
            id=str(obj["id"]),
            video_fake=bool(obj["video_fake"]),
            audio_fake=bool(obj["audio_fake"]),
            manipulation_tags=frozenset(obj.get("manipulation_tags", [])),
            group_key=str(obj["group_key"]),
            video_path=str(obj["video_path"]),
            audio_path=str(obj["audio_path"]),
        )
        if "label" in obj and int(obj["label"]) != sample.label:
            raise ManifestError(
                f"sample {sample.id}: label {obj['label']} inconsistent with modality flags"
            )
        sample.validate()
        return sample


@dataclass
class DatasetManifest:
    samples: list[Sample]
    metadata: dict[str, str] = field(default_factory=dict)
    format_version: int = MANIFEST_VERSION
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self) -> None:
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ManifestError(f"duplicate sample ids: {dupes}")
        for s in self.samples:
            s.validate()

    def __len__(self) -> int:
        return len(self.samples)

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}

    def video_file(self, sample: Sample) -> Path:
        return self.base_dir / sample.video_path

    def audio_file(self, sample: Sample) -> Path:
        return self.base_dir / sample.audio_path

    def subset(self, ids: list[str]) -> "DatasetManifest":
        """Manifest restricted to ``ids``, in the given order."""
        lookup = self.by_id()
        missing = [i for i in ids if i not in lookup]
        if missing:
            raise ManifestError(f"unknown sample ids: {missing[:5]}")
        return DatasetManifest(
            samples=[lookup[i] for i in ids],
            metadata=dict(self.metadata),
            base_dir=self.base_dir,
        )


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    doc = {
        "format_version": manifest.format_version,
        "metadata": dict(sorted(manifest.metadata.items())),
        "samples": [s.to_json() for s in manifest.samples],
    }
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_manifest(path: str | Path, verify_files: bool = True) -> DatasetManifest:
    """Load a manifest, optionally reading every referenced embedding file.

    With ``verify_files`` (the default) each referenced file must exist and
    parse; callers that immediately load the embeddings anyway can skip the
    double read.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    unknown = set(doc) - {"format_version", "metadata", "samples"}
    if unknown:
        raise ManifestError(f"manifest has unknown keys: {sorted(unknown)}")
    if doc.get("format_version") != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest format_version {doc.get('format_version')}")
    manifest = DatasetManifest(
        samples=[Sample.from_json(o) for o in doc["samples"]],
        metadata={str(k): str(v) for k, v in doc.get("metadata", {}).items()},
        base_dir=path.parent,
    )
    if verify_files:
        for s in manifest.samples:
            read_embedding_file(manifest.video_file(s), sample_id=s.id)
            read_embedding_file(manifest.audio_file(s), sample_id=s.id)
    return manifest
