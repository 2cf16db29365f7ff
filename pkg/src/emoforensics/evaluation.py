"""Scoring trained models over split plans and assembling reports.

For leave-one-out plans the reporting view re-unites the val-test subsample
with the test set; val-test exists only for model selection.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from emoforensics.manifest import DatasetManifest
from emoforensics.metrics import ScoredSet, average_auc, average_precision, roc_auc, stability_area
from emoforensics.model import EmoForensicsModel
from emoforensics.splits import SplitPlan


def score_samples(
    model: EmoForensicsModel, manifest: DatasetManifest, ids: list[str], batch_size: int = 64
) -> ScoredSet:
    """Fake probabilities plus targets (modality-specific in unimodal modes)."""
    lookup = manifest.by_id()
    scores: list[float] = []
    labels: list[int] = []
    with torch.no_grad():
        for start in range(0, len(ids), batch_size):
            chunk = [lookup[i] for i in ids[start : start + batch_size]]
            videos, audios = [], []
            for sample in chunk:
                video, audio = model.load_sample_tensors(manifest, sample)
                videos.append(video)
                audios.append(audio)
            out = model.forward_batch(
                torch.stack(videos) if videos and videos[0] is not None else None,
                torch.stack(audios) if audios and audios[0] is not None else None,
                training=False,
            )
            scores.extend(torch.sigmoid(out["logit"]).tolist())
            labels.extend(model.target_label(s) for s in chunk)
    return ScoredSet(np.asarray(scores), np.asarray(labels))


@dataclass
class SplitMetrics:
    name: str
    auc: float
    ap: float
    num_real: int
    num_fake: int

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "auc": self.auc,
            "ap": self.ap,
            "num_real": self.num_real,
            "num_fake": self.num_fake,
        }


def metrics_for(name: str, scored: ScoredSet) -> SplitMetrics:
    return SplitMetrics(
        name=name,
        auc=roc_auc(scored),
        ap=average_precision(scored),
        num_real=int((scored.labels == 0).sum()),
        num_fake=int((scored.labels == 1).sum()),
    )


def evaluate_split(
    model: EmoForensicsModel, manifest: DatasetManifest, plan: SplitPlan, reunite: bool = True
) -> SplitMetrics:
    ids = plan.test_with_val_test if reunite else list(plan.test)
    return metrics_for(plan.name, score_samples(model, manifest, ids))


@dataclass
class EvalReport:
    splits: list[SplitMetrics]
    average_auc: float
    stability_area: float

    def to_json(self) -> dict:
        return {
            "splits": [m.to_json() for m in self.splits],
            "average_auc": self.average_auc,
            "stability_area": self.stability_area,
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        os.replace(tmp, path)


def build_report(splits: list[SplitMetrics]) -> EvalReport:
    aucs = [m.auc for m in splits]
    return EvalReport(
        splits=splits, average_auc=average_auc(aucs), stability_area=stability_area(aucs)
    )
