"""Training objective: BCE plus margin contrastive loss over modality pairs.

Pair rules per batch: every real sample contributes one positive pair of its
own (video, audio) representations; every fake sample contributes two
negatives against one uniformly drawn real batch member (fake-video with
real-audio, and real-video with fake-audio). Fake-fake pairs are never
formed, and a batch without reals contributes no contrastive term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch


def bce_with_logits(logit: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Binary cross-entropy ``-(y log p + (1-y) log(1-p))`` for ``p = sigmoid(logit)``.

    Evaluated in logit space (softplus form), so saturated logits never hit a
    literal ``log(0)``.
    """
    return torch.nn.functional.binary_cross_entropy_with_logits(
        logit, target.to(logit.dtype), reduction="none"
    )


def contrastive_distance(h_v: torch.Tensor, h_a: torch.Tensor) -> torch.Tensor:
    """Euclidean distance between L2-normalized vectors; in [0, 2].

    Supports a trailing batch-free vector or (B, D) batches. Zero-norm
    inputs are rejected: their normalization is undefined.
    """
    norm_v = torch.linalg.vector_norm(h_v, dim=-1, keepdim=True)
    norm_a = torch.linalg.vector_norm(h_a, dim=-1, keepdim=True)
    if (norm_v == 0).any() or (norm_a == 0).any():
        raise ValueError("contrastive distance undefined for zero-norm input")
    return torch.linalg.vector_norm(h_v / norm_v - h_a / norm_a, dim=-1)


def contrastive_loss(
    h_v: torch.Tensor, h_a: torch.Tensor, pair_label: torch.Tensor, margin: float
) -> torch.Tensor:
    """``y_c d^2 + (1 - y_c) max(0, m - d)^2`` with d the normalized distance."""
    d = contrastive_distance(h_v, h_a)
    y = pair_label.to(d.dtype)
    return y * d * d + (1.0 - y) * torch.clamp(margin - d, min=0.0) ** 2


@dataclass(frozen=True)
class PairIndices:
    """A contrastive pair referencing batch positions: (video side, audio side)."""

    video_index: int
    audio_index: int
    pair_label: int


def build_contrastive_pairs(
    labels: Sequence[int], generator: torch.Generator | None = None
) -> list[PairIndices]:
    """Index pairs for a batch given its fake labels (1 = fake).

    Pair count is ``#real + 2 * #fake`` when the batch has a real sample,
    else zero. The real partner of each fake is drawn uniformly from the
    batch's reals using ``generator``.
    """
    reals = [i for i, y in enumerate(labels) if y == 0]
    fakes = [i for i, y in enumerate(labels) if y == 1]
    if not reals:
        return []
    pairs = [PairIndices(i, i, 1) for i in reals]
    for f in fakes:
        if generator is None:
            pick = reals[0]
        else:
            pick = reals[int(torch.randint(len(reals), (1,), generator=generator))]
        pairs.append(PairIndices(f, pick, 0))
        pairs.append(PairIndices(pick, f, 0))
    return pairs


def pair_loss(
    h_v: torch.Tensor, h_a: torch.Tensor, pairs: list[PairIndices], margin: float
) -> torch.Tensor:
    """Mean contrastive loss over the batch's pairs; 0 without pairs."""
    if not pairs:
        return torch.zeros((), dtype=h_v.dtype)
    v_idx = torch.tensor([p.video_index for p in pairs])
    a_idx = torch.tensor([p.audio_index for p in pairs])
    y = torch.tensor([p.pair_label for p in pairs])
    return contrastive_loss(h_v[v_idx], h_a[a_idx], y, margin).mean()


def combined_loss(bce: torch.Tensor, contrast: torch.Tensor, alpha: float) -> torch.Tensor:
    """``(1 - alpha) * bce + alpha * contrast``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return (1.0 - alpha) * bce + alpha * contrast
