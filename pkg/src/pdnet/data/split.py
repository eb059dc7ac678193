"""Stratified train/val/test assignment."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from pdnet.data.manifest import LABELS, SPLITS, DatasetManifest
from pdnet.errors import ManifestError

# Reported partition sizes of the original scan collection.
REPORTED_COUNTS = (13571, 2396, 2237)


@dataclass(frozen=True)
class SplitRatios:
    train: float
    val: float
    test: float

    def __post_init__(self):
        vals = self.as_tuple()
        if any(v < 0 for v in vals):
            raise ValueError(f"split ratios must be non-negative, got {vals}")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {sum(vals)}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.train, self.val, self.test)

    @classmethod
    def from_counts(cls, counts=REPORTED_COUNTS) -> SplitRatios:
        total = sum(counts)
        tr, va = counts[0] / total, counts[1] / total
        return cls(tr, va, 1.0 - tr - va)

    @classmethod
    def from_percentages(cls, val_of_train: float = 0.15, test_of_total: float = 0.10) -> SplitRatios:
        """Hold out ``test_of_total``, then carve ``val_of_train`` of the remainder for validation."""
        pool = 1.0 - test_of_total
        val = pool * val_of_train
        return cls(pool - val, val, test_of_total)


DEFAULT_RATIOS = SplitRatios.from_counts()


def largest_remainder(n: int, ratios) -> list[int]:
    """Integer allocation of ``n`` items proportional to ``ratios``.

    Floors first, then hands the leftover items to the largest fractional
    parts; ties go to the earlier split.
    """
    quotas = [n * r for r in ratios]
    counts = [math.floor(q + 1e-9) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def split_dataset(manifest: DatasetManifest, ratios: SplitRatios = DEFAULT_RATIOS,
                  seed: int = 0) -> DatasetManifest:
    """Assign every row a split, stratified by label.

    Within each label the rows (sorted by path) are shuffled with ``seed`` and
    cut into contiguous train/val/test runs sized by largest-remainder
    rounding.  If a split with a positive ratio would end up empty overall,
    one row is moved into it from the largest split; if there are too few
    rows for that, ``ManifestError`` is raised.
    """
    if not manifest.rows:
        raise ManifestError("cannot split an empty manifest")
    rng = np.random.default_rng(seed)
    by_label = {lab: sorted((r for r in manifest.rows if r.label == lab), key=lambda r: r.path)
                for lab in LABELS}
    plan: dict[str, list[list]] = {}
    for lab in LABELS:
        rows = by_label[lab]
        perm = [rows[i] for i in rng.permutation(len(rows))]
        counts = largest_remainder(len(rows), ratios.as_tuple())
        cuts = np.cumsum([0] + counts)
        plan[lab] = [perm[cuts[k]:cuts[k + 1]] for k in range(3)]

    wanted = [k for k, r in enumerate(ratios.as_tuple()) if r > 0]
    if len(manifest.rows) < len(wanted):
        raise ManifestError(f"{len(manifest.rows)} rows cannot fill {len(wanted)} non-empty splits")
    for k in wanted:
        if any(plan[lab][k] for lab in LABELS):
            continue
        donor_lab, donor_k = max(((lab, j) for lab in LABELS for j in range(3) if j != k),
                                 key=lambda t: (len(plan[t[0]][t[1]]), -LABELS.index(t[0]), -t[1]))
        if len(plan[donor_lab][donor_k]) < 2 and donor_k in wanted:
            raise ManifestError(f"ratios {ratios.as_tuple()} leave split {SPLITS[k]!r} empty")
        plan[donor_lab][k].append(plan[donor_lab][donor_k].pop())

    assigned = {}
    for lab in LABELS:
        for k in range(3):
            for row in plan[lab][k]:
                assigned[row.path] = SPLITS[k]
    return DatasetManifest([replace(r, split=assigned[r.path]) for r in manifest.rows], manifest.root)
