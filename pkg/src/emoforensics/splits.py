"""Split protocols: in-domain, leave-one-out (cross-manipulation), val-test.

All splits are grouped by ``group_key`` so every sample of one group lands in
one part (identity-style splitting; synthetic data uses singleton groups).
Leave-one-out plans exclude every sample carrying a held-out tag from train
and val; those fakes form the test set together with the real test partition.
The val-test part is a per-class 20% subsample of test used only for model
selection and is reunited with test for reporting.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from emoforensics.manifest import DatasetManifest, Sample


class SplitError(ValueError):
    pass


@dataclass
class SplitPlan:
    name: str
    train: list[str]
    val: list[str]
    test: list[str]
    val_test: list[str] = field(default_factory=list)
    held_out_tags: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        parts = [self.train, self.val, self.test, self.val_test]
        seen: set[str] = set()
        for part in parts:
            overlap = seen.intersection(part)
            if overlap:
                raise SplitError(f"plan {self.name}: ids in multiple parts: {sorted(overlap)[:5]}")
            if len(set(part)) != len(part):
                raise SplitError(f"plan {self.name}: duplicate ids within a part")
            seen.update(part)

    @property
    def test_with_val_test(self) -> list[str]:
        """Reporting view: val-test samples added back to the test set."""
        return list(self.test) + list(self.val_test)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
            "val_test": list(self.val_test),
            "held_out_tags": sorted(self.held_out_tags),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitPlan":
        return cls(
            name=obj["name"],
            train=list(obj["train"]),
            val=list(obj["val"]),
            test=list(obj["test"]),
            val_test=list(obj.get("val_test", [])),
            held_out_tags=frozenset(obj.get("held_out_tags", [])),
        )


def save_plans(plans: list[SplitPlan], path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps([p.to_json() for p in plans], indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_plans(path: str | Path) -> list[SplitPlan]:
    return [SplitPlan.from_json(o) for o in json.loads(Path(path).read_text())]


def _integer_targets(total: int, ratios: tuple[float, ...]) -> list[int]:
    """Per-part sample targets; rounds but always sums to ``total``."""
    targets = [int(round(r * total)) for r in ratios[:-1]]
    targets.append(total - sum(targets))
    if min(targets) < 0:
        raise SplitError(f"ratios {ratios} produce negative part size for n={total}")
    return targets


def _grouped_assignment(
    samples: list[Sample], ratios: tuple[float, ...], rng: np.random.Generator
) -> list[list[str]]:
    """Assign whole groups to parts, filling each part to its sample target."""
    groups: dict[str, list[str]] = {}
    for s in samples:
        groups.setdefault(s.group_key, []).append(s.id)
    keys = sorted(groups)
    if len(keys) < len(ratios):
        raise SplitError(f"only {len(keys)} groups for {len(ratios)} parts")
    rng.shuffle(keys)
    targets = _integer_targets(len(samples), ratios)
    parts: list[list[str]] = [[] for _ in ratios]
    counts = [0] * len(ratios)
    part = 0
    for key in keys:
        while part < len(ratios) - 1 and counts[part] >= targets[part]:
            part += 1
        parts[part].extend(groups[key])
        counts[part] += len(groups[key])
    return parts


def make_in_domain_split(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float] = (0.6, 0.1, 0.3),
    seed: int = 0,
    name: str = "in_domain",
) -> SplitPlan:
    """Grouped train/val/test split with realized sizes within one group of target."""
    if len(manifest) == 0:
        raise SplitError("empty manifest")
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise SplitError(f"ratios must sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    train, val, test = _grouped_assignment(manifest.samples, ratios, rng)
    return SplitPlan(name=name, train=train, val=val, test=test)


def make_val_test_split(
    ids_with_labels: list[tuple[str, int]], fraction: float = 0.2, seed: int = 0
) -> tuple[list[str], list[str]]:
    """Uniformly sample ``fraction`` of each class for model selection.

    Per-class counts use round-half-up (150 real / 929 fake at 0.2 gives
    exactly 30 / 186). Returns ``(val_test_ids, remaining_ids)``.
    """
    if not 0.0 < fraction < 1.0:
        raise SplitError(f"fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    picked: set[str] = set()
    for cls in (0, 1):
        members = [i for i, y in ids_with_labels if y == cls]
        if not members:
            raise SplitError(f"val-test split: class {cls} is empty")
        take = int(math.floor(fraction * len(members) + 0.5))
        chosen = rng.choice(len(members), size=take, replace=False)
        picked.update(members[j] for j in sorted(chosen))
    val_test = [i for i, _ in ids_with_labels if i in picked]
    remaining = [i for i, _ in ids_with_labels if i not in picked]
    return val_test, remaining


def make_leave_one_out_splits(
    manifest: DatasetManifest,
    tag_sets: dict[str, frozenset[str]] | None = None,
    ratios: tuple[float, float, float] = (0.6, 0.1, 0.3),
    val_test_fraction: float = 0.2,
    seed: int = 0,
) -> list[SplitPlan]:
    """One plan per named tag group, excluding tagged fakes from train/val.

    ``tag_sets`` defaults to one singleton group per tag in the manifest.
    Reals (and the non-held-out fakes, which can only go to train/val) are
    split by group; the excluded fakes plus the real test partition form the
    test set, from which the val-test subsample is carved.
    """
    if tag_sets is None:
        all_tags = sorted({t for s in manifest.samples for t in s.manipulation_tags})
        tag_sets = {t: frozenset([t]) for t in all_tags}
    manifest_tags = {t for s in manifest.samples for t in s.manipulation_tags}
    plans = []
    for name in sorted(tag_sets):
        held = frozenset(tag_sets[name])
        missing = held - manifest_tags
        if missing:
            raise SplitError(f"plan {name}: tags {sorted(missing)} absent from manifest")
        held_fakes = [s for s in manifest.samples if s.manipulation_tags & held]
        kept_fakes = [s for s in manifest.samples if s.label == 1 and not (s.manipulation_tags & held)]
        reals = [s for s in manifest.samples if s.label == 0]
        if not kept_fakes:
            raise SplitError(f"plan {name}: holding out {sorted(held)} leaves no fakes to train on")
        rng = np.random.default_rng(seed)
        real_train, real_val, real_test = _grouped_assignment(reals, ratios, rng)
        # non-held fakes only feed train/val, in the same relative proportion
        fake_ratio = ratios[0] / (ratios[0] + ratios[1])
        fake_train, fake_val = _grouped_assignment(kept_fakes, (fake_ratio, 1.0 - fake_ratio), rng)
        test_samples = [(s.id, s.label) for s in held_fakes] + [
            (i, 0) for i in real_test
        ]
        val_test, remaining = make_val_test_split(test_samples, val_test_fraction, seed=seed)
        plans.append(
            SplitPlan(
                name=name,
                train=real_train + fake_train,
                val=real_val + fake_val,
                test=remaining,
                val_test=val_test,
                held_out_tags=held,
            )
        )
    return plans
