"""Bridge CLI: ``bridge extract --in <dir> --labels <csv> --out <dir>``.

The labels CSV columns: ``id, video, audio, video_fake, audio_fake, tags,
group_key``. ``video``/``audio`` are paths relative to ``--in``; ``tags``
are ``|``-separated; ``group_key`` may be empty (defaults to the id).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from emobridge.extract import ClipInput
from emobridge.manifest_build import build_manifest
from emobridge.video import DETECTORS

_TRUE = {"1", "true", "yes"}


def load_labels(labels_path: Path, in_dir: Path) -> list[ClipInput]:
    clips = []
    with open(labels_path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "video", "audio", "video_fake", "audio_fake", "tags"}
        missing = required - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"labels csv missing columns: {sorted(missing)}")
        for row in reader:
            tags = tuple(t for t in row["tags"].split("|") if t)
            clips.append(
                ClipInput(
                    id=row["id"],
                    video=in_dir / row["video"],
                    audio=in_dir / row["audio"],
                    video_fake=row["video_fake"].strip().lower() in _TRUE,
                    audio_fake=row["audio_fake"].strip().lower() in _TRUE,
                    manipulation_tags=tags,
                    group_key=row.get("group_key", "") or row["id"],
                )
            )
    return clips


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    extract = sub.add_parser("extract", help="extract embeddings for labeled clips")
    extract.add_argument("--in", dest="in_dir", required=True, help="clip directory")
    extract.add_argument("--labels", required=True, help="labels csv")
    extract.add_argument("--out", required=True, help="output directory")
    extract.add_argument("--detector", choices=sorted(DETECTORS), default="haar")
    args = parser.parse_args(argv)
    try:
        clips = load_labels(Path(args.labels), Path(args.in_dir))
        detector = DETECTORS[args.detector]()
        report = build_manifest(clips, Path(args.out), detector=detector)
    except Exception as exc:  # noqa: BLE001 - single-line failure contract
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"accepted {len(report.accepted)} clip(s), rejected {len(report.rejected)} "
        f"-> {report.manifest_path}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
