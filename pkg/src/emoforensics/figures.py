"""Matplotlib rendering for the report path.

Two figures accompany each multi-split report: a bar chart of per-split AUC
against the average, and the stability step plot (per-split absolute
deviation from the mean, with the summed area annotated).
"""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from emoforensics.metrics import stability_area


def _save_atomic(fig, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.png")
    fig.savefig(tmp, dpi=150)
    plt.close(fig)
    os.replace(tmp, path)


def split_auc_bars(names: list[str], aucs: list[float], path: str | Path) -> None:
    values = np.asarray(aucs, dtype=float)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(names)), 3.2))
    ax.bar(range(len(names)), values, color="#4878cf")
    ax.axhline(values.mean(), color="#d65f5f", linestyle="--", linewidth=1.2,
               label=f"average = {values.mean():.2f}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("AUC")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_atomic(fig, path)


def stability_step_plot(
    series: dict[str, tuple[list[str], list[float]]], path: str | Path
) -> None:
    """Stepwise |AUC - mean| per split for one or more methods."""
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    for label, (names, aucs) in series.items():
        values = np.asarray(aucs, dtype=float)
        deviation = np.abs(values - values.mean())
        area = stability_area(list(values))
        positions = np.arange(len(names) + 1)
        ax.step(positions, np.append(deviation, deviation[-1]), where="post",
                label=f"{label} (area = {area:.2f})")
        ax.fill_between(positions, np.append(deviation, deviation[-1]),
                        step="post", alpha=0.25)
    first = next(iter(series.values()))
    ax.set_xticks(np.arange(len(first[0])) + 0.5)
    ax.set_xticklabels(first[0], rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("|AUC - mean|")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_atomic(fig, path)
