"""Emotion-consistency deepfake detection.

Two cooperating detectors operating on frame-level emotion embeddings:

* ``EmoForensicsModel`` — dual temporal-transformer encoders over visual and
  audio emotion embeddings, trained with a combined BCE + margin-contrastive
  objective to pick up intra- and inter-modal emotion inconsistencies.
* Emo-Boost — a frozen late-fusion stage that multiplies a projected
  EmoForensics representation into the feature vector of a frozen low-level
  detector and trains only the projection and classification heads.

The package ships the binary embedding file format, dataset manifests, a
seeded synthetic data generator, split protocols (in-domain, leave-one-out,
val-test), exact AUC/AP metrics, and a CLI that drives the whole pipeline
deterministically from JSON configs.
"""

from emoforensics.boost import EmoBoostConfig, MockDetector, MockDetectorConfig, train_emoboost
from emoforensics.embeddings import (
    EmbeddingSequence,
    Modality,
    downsample_to_length,
    read_embedding_file,
    write_embedding_file,
)
from emoforensics.manifest import DatasetManifest, Sample, load_manifest, save_manifest
from emoforensics.metrics import ScoredSet, average_auc, average_precision, roc_auc, stability_area
from emoforensics.model import EmoForensicsModel, ModelConfig
from emoforensics.splits import make_in_domain_split, make_leave_one_out_splits, make_val_test_split
from emoforensics.synth import SynthConfig, generate_synthetic_dataset
from emoforensics.training import TrainConfig, train_emoforensics

__version__ = "0.1.0"

__all__ = [
    "DatasetManifest",
    "EmbeddingSequence",
    "EmoBoostConfig",
    "EmoForensicsModel",
    "Modality",
    "MockDetector",
    "MockDetectorConfig",
    "ModelConfig",
    "Sample",
    "ScoredSet",
    "SynthConfig",
    "TrainConfig",
    "average_auc",
    "average_precision",
    "downsample_to_length",
    "generate_synthetic_dataset",
    "load_manifest",
    "make_in_domain_split",
    "make_leave_one_out_splits",
    "make_val_test_split",
    "read_embedding_file",
    "roc_auc",
    "save_manifest",
    "stability_area",
    "train_emoboost",
    "train_emoforensics",
    "write_embedding_file",
]
