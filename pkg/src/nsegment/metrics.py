"""Segmentation overlap metrics: per-class IoU and their mean.

Pixels where either map holds the ignore index are excluded from the
confusion counts. Accumulators merge associatively, so dataset-scale
tallies can be built in parallel and combined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidParam, NoData
from .types import LabelMap


@dataclass
class ConfusionAccumulator:
    """C x C tally of (reference class, other class) pixel pairs."""

    num_classes: int
    counts: np.ndarray = field(default=None)
    ignored: int = 0

    def __post_init__(self) -> None:
        if self.num_classes <= 0:
            raise InvalidParam(f"num_classes must be > 0, got {self.num_classes}")
        if self.counts is None:
            self.counts = np.zeros((self.num_classes, self.num_classes), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (self.num_classes, self.num_classes):
                raise InvalidParam("counts shape does not match num_classes")

    def merge(self, other: "ConfusionAccumulator") -> "ConfusionAccumulator":
        if other.num_classes != self.num_classes:
            raise InvalidParam("cannot merge accumulators with different num_classes")
        return ConfusionAccumulator(
            self.num_classes, self.counts + other.counts, self.ignored + other.ignored
        )


def accumulate(
    acc: ConfusionAccumulator, reference: LabelMap, other: LabelMap
) -> ConfusionAccumulator:
    """Add one pair of maps to the tally, in place; returns ``acc``.

    A pixel counts only when neither map holds its ignore index there;
    otherwise it increments ``acc.ignored``.
    """
    if reference.data.shape != other.data.shape:
        raise DimensionMismatch(
            f"maps differ in size: {reference.data.shape} vs {other.data.shape}"
        )
    c = acc.num_classes
    valid = (reference.data != reference.ignore_index) & (other.data != other.ignore_index)
    ref = reference.data[valid].astype(np.int64)
    oth = other.data[valid].astype(np.int64)
    if ref.size and (ref.max() >= c or oth.max() >= c):
        raise InvalidParam(f"class value >= num_classes={c} in inputs")
    acc.counts += np.bincount(ref * c + oth, minlength=c * c).reshape(c, c)
    acc.ignored += int(valid.size - valid.sum())
    return acc


def miou(acc: ConfusionAccumulator) -> tuple[list[float], float]:
    """Per-class IoU and their mean.

    IoU_c = diag_c / (row_c + col_c - diag_c). Classes with zero union are
    reported as NaN and excluded from the mean.

    Raises:
        NoData: if every class has zero union.
    """
    diag = np.diag(acc.counts).astype(np.float64)
    union = acc.counts.sum(axis=1) + acc.counts.sum(axis=0) - np.diag(acc.counts)
    present = union > 0
    if not present.any():
        raise NoData("no class has any counted pixel")
    per_class = np.full(acc.num_classes, np.nan)
    per_class[present] = diag[present] / union[present].astype(np.float64)
    mean = float(per_class[present].mean())
    return per_class.tolist(), mean


def pair_miou(reference: LabelMap, other: LabelMap) -> float:
    """Mean IoU of a single pair of maps."""
    num_classes = max(reference.num_classes, other.num_classes, 1)
    acc = ConfusionAccumulator(num_classes)
    accumulate(acc, reference, other)
    return miou(acc)[1]
