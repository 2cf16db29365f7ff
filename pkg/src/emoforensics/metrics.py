"""Exact ranking metrics and split-level aggregates.

AUC uses the Mann-Whitney form with half credit for ties, so it equals the
pairwise count ``(#{s_pos > s_neg} + 0.5 * #ties) / (P * N)`` exactly, not
just to rounding. AP is the mean of precision evaluated at each positive's
rank in the score-descending order, ties broken by original index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


@dataclass
class ScoredSet:
    """Scores and binary labels aligned by index."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.scores.ndim != 1 or self.labels.ndim != 1:
            raise MetricError("scores and labels must be 1-D")
        if len(self.scores) != len(self.labels):
            raise MetricError("scores and labels must have equal length")
        if len(self.scores) < 1:
            raise MetricError("need at least one sample")
        if not np.isin(self.labels, (0, 1)).all():
            raise MetricError("labels must be binary")
        self.labels = self.labels.astype(np.int64)


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    s = scores[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scored: ScoredSet) -> float:
    """Area under the ROC curve: P(score_pos > score_neg) with tie credit 0.5."""
    labels = scored.labels
    num_pos = int(labels.sum())
    num_neg = len(labels) - num_pos
    if num_pos == 0 or num_neg == 0:
        raise MetricError("AUC undefined: needs at least one positive and one negative")
    ranks = _midranks(scored.scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    u = pos_rank_sum - num_pos * (num_pos + 1) / 2.0
    return u / (num_pos * num_neg)


def average_precision(scored: ScoredSet) -> float:
    """Mean of precision-at-rank over the positives, no interpolation."""
    labels = scored.labels
    num_pos = int(labels.sum())
    if num_pos == 0:
        raise MetricError("AP undefined: needs at least one positive")
    # descending by score, ties by original index
    order = np.argsort(-scored.scores, kind="stable")
    hits = labels[order]
    cum_pos = np.cumsum(hits)
    ranks = np.arange(1, len(hits) + 1)
    precision_at_pos = cum_pos[hits == 1] / ranks[hits == 1]
    return float(precision_at_pos.sum() / num_pos)


def average_auc(split_aucs: list[float]) -> float:
    """Arithmetic mean of per-split AUC values (any common scale)."""
    if len(split_aucs) == 0:
        raise MetricError("average_auc of empty list")
    return float(np.mean(np.asarray(split_aucs, dtype=np.float64)))


def stability_area(split_aucs: list[float]) -> float:
    """Sum of absolute deviations of per-split AUCs from their mean.

    Lower means more uniform behavior across manipulation splits.
    """
    values = np.asarray(split_aucs, dtype=np.float64)
    if values.size == 0:
        raise MetricError("stability_area of empty list")
    return float(np.abs(values - values.mean()).sum())
