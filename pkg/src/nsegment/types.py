"""Core raster types shared by every transform in the package.

Coordinate convention, fixed package-wide: ``x`` is the column index in
``[0, w)`` and ``y`` is the row index in ``[0, h)``. Arrays are stored
row-major with shape ``(h, w)``, so a field lookup written ``dx[x, y]`` in
prose maps to ``dx_array[y, x]`` in code.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySegment, InvalidParam
from .validation import (
    ensure_label_array,
    ensure_non_negative,
    ensure_positive,
    ensure_probability,
)

DEFAULT_IGNORE_INDEX = 255
DEFAULT_THETA = 1000.0
DEFAULT_PROB = 0.5
DEFAULT_ALPHAS = (1.0, 15.0, 30.0, 50.0, 100.0)
DEFAULT_SIGMAS = (3.0, 5.0, 10.0)


def _read_only(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class Mode(str, enum.Enum):
    """Which deformation variant a config requests."""

    NSEGMENT = "nsegment"
    NSEGMENT_PLUS = "nsegment+"


class Target(str, enum.Enum):
    """What the sampled displacement field is applied to.

    LABEL_ONLY is the production setting; IMAGE_ONLY and BOTH exist to
    reproduce the deformation-target ablation and robustness studies.
    """

    LABEL_ONLY = "label"
    IMAGE_ONLY = "image"
    BOTH = "both"


@dataclass(frozen=True)
class LabelMap:
    """Dense per-pixel class-index raster with a reserved ignore value.

    Every pixel holds either a class index < ``num_classes`` or
    ``ignore_index``. Instances are immutable; the backing array is
    marked read-only at construction.
    """

    data: np.ndarray
    num_classes: int
    ignore_index: int = DEFAULT_IGNORE_INDEX

    def __post_init__(self) -> None:
        arr = ensure_label_array(self.data)
        if not 0 <= self.ignore_index <= 255:
            raise InvalidParam(f"ignore_index must be in 0..255, got {self.ignore_index}")
        if self.num_classes < 0 or self.num_classes > 256:
            raise InvalidParam(f"num_classes must be in 0..256, got {self.num_classes}")
        valid = (arr < self.num_classes) | (arr == self.ignore_index)
        if not valid.all():
            bad = np.unique(arr[~valid])
            raise InvalidParam(
                f"label values {bad.tolist()} are neither < num_classes={self.num_classes} "
                f"nor the ignore index {self.ignore_index}"
            )
        object.__setattr__(self, "data", _read_only(arr))

    @classmethod
    def from_array(
        cls,
        data: np.ndarray,
        num_classes: int | None = None,
        ignore_index: int = DEFAULT_IGNORE_INDEX,
    ) -> "LabelMap":
        """Wrap an array, inferring ``num_classes`` from its content if omitted."""
        arr = ensure_label_array(data)
        if num_classes is None:
            real = arr[arr != ignore_index]
            num_classes = int(real.max()) + 1 if real.size else 0
        return cls(arr, num_classes=num_classes, ignore_index=ignore_index)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def classes_present(self) -> list[int]:
        """Sorted class indices present in the raster, ignore excluded."""
        values = np.unique(self.data)
        return [int(v) for v in values if v != self.ignore_index]

    def with_data(self, data: np.ndarray) -> "LabelMap":
        """New map with the same metadata and different pixels."""
        return LabelMap(data, num_classes=self.num_classes, ignore_index=self.ignore_index)


@dataclass(frozen=True)
class ClassMask:
    """Boolean membership raster for one class of a LabelMap."""

    bits: np.ndarray
    class_id: int

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.bits, dtype=bool))
        if arr.ndim != 2:
            raise InvalidParam(f"mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "bits", _read_only(arr))

    @classmethod
    def from_label(cls, label: LabelMap, class_id: int) -> "ClassMask":
        return cls(label.data == class_id, class_id=class_id)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def area(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box with inclusive pixel coordinates."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_min < 0 or self.y_min < 0 or self.x_min > self.x_max or self.y_min > self.y_max:
            raise InvalidParam(f"invalid bbox ({self.x_min},{self.y_min},{self.x_max},{self.y_max})")


@dataclass(frozen=True)
class DisplacementField:
    """Per-pixel real-valued offsets driving a warp.

    ``dx``/``dy`` are float32 arrays of shape (h, w), in pixel units.
    ``alpha`` records the magnitude bound the field was built under; every
    value satisfies ``|dx|, |dy| <= alpha``.
    """

    dx: np.ndarray
    dy: np.ndarray
    alpha: float = 0.0

    def __post_init__(self) -> None:
        dx = np.ascontiguousarray(np.asarray(self.dx, dtype=np.float32))
        dy = np.ascontiguousarray(np.asarray(self.dy, dtype=np.float32))
        if dx.ndim != 2 or dx.shape != dy.shape:
            raise InvalidParam(f"dx/dy must be 2-D and same shape, got {dx.shape} vs {dy.shape}")
        object.__setattr__(self, "dx", _read_only(dx))
        object.__setattr__(self, "dy", _read_only(dy))
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def zero(cls, width: int, height: int) -> "DisplacementField":
        shape = (int(height), int(width))
        return cls(np.zeros(shape, np.float32), np.zeros(shape, np.float32), alpha=0.0)

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @property
    def height(self) -> int:
        return self.dx.shape[0]


@dataclass(frozen=True)
class DeformParams:
    """One (alpha, sigma) pair: deformation magnitude and spatial smoothness."""

    alpha: float
    sigma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", ensure_non_negative(self.alpha, "alpha"))
        object.__setattr__(self, "sigma", ensure_positive(self.sigma, "sigma"))


@dataclass(frozen=True)
class OmegaSpace:
    """Finite, duplicate-free set of DeformParams sampled uniformly per call."""

    pairs: tuple[DeformParams, ...]

    def __post_init__(self) -> None:
        pairs = tuple(self.pairs)
        if not pairs:
            raise InvalidParam("omega space must contain at least one (alpha, sigma) pair")
        if len(set(pairs)) != len(pairs):
            raise InvalidParam("omega space must not contain duplicate pairs")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @classmethod
    def from_product(cls, alphas: Iterable[float], sigmas: Iterable[float]) -> "OmegaSpace":
        """Cartesian product of magnitude and smoothness values."""
        return cls(tuple(DeformParams(a, s) for a in alphas for s in sigmas))

    @classmethod
    def default(cls) -> "OmegaSpace":
        return cls.from_product(DEFAULT_ALPHAS, DEFAULT_SIGMAS)

    @classmethod
    def from_string(cls, text: str) -> "OmegaSpace":
        """Parse the CLI grammar: ``a1,a2,...xs1,s2,...`` is a Cartesian
        product; ``a1:s1,a2:s2,...`` lists explicit pairs."""
        parts = text.lower().split("x")
        if len(parts) == 1 and ":" in text:
            try:
                pairs = []
                for item in text.split(","):
                    alpha, sigma = item.split(":")
                    pairs.append(DeformParams(float(alpha), float(sigma)))
            except ValueError as exc:
                raise InvalidParam(f"bad pair in omega spec {text!r}") from exc
            return cls(tuple(pairs))
        if len(parts) != 2:
            raise InvalidParam(f"omega spec must look like '1,15x3,5' or '1:3,15:5', got {text!r}")
        try:
            alphas = [float(v) for v in parts[0].split(",") if v.strip()]
            sigmas = [float(v) for v in parts[1].split(",") if v.strip()]
        except ValueError as exc:
            raise InvalidParam(f"bad number in omega spec {text!r}") from exc
        if not alphas or not sigmas:
            raise InvalidParam(f"omega spec needs values on both sides of 'x', got {text!r}")
        return cls.from_product(alphas, sigmas)

    def to_list(self) -> list[list[float]]:
        return [[p.alpha, p.sigma] for p in self.pairs]


@dataclass(frozen=True)
class AugmentConfig:
    """Everything the deformation transform needs beyond the sample itself."""

    p: float = DEFAULT_PROB
    theta: float = DEFAULT_THETA
    omega: OmegaSpace = field(default_factory=OmegaSpace.default)
    mode: Mode = Mode.NSEGMENT_PLUS
    target: Target = Target.LABEL_ONLY
    seed: int = 0
    # Off-by-default variant that suppresses per connected component
    # instead of per class mask; excluded from the acceptance contract.
    per_component: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", ensure_probability(self.p, "p"))
        object.__setattr__(self, "theta", ensure_non_negative(self.theta, "theta"))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "target", Target(self.target))
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "theta": self.theta,
            "omega": self.omega.to_list(),
            "mode": self.mode.value,
            "target": self.target.value,
            "seed": self.seed,
            "per_component": self.per_component,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentConfig":
        omega = data.get("omega")
        if omega is None:
            space = OmegaSpace.default()
        elif isinstance(omega, OmegaSpace):
            space = omega
        elif isinstance(omega, str):
            space = OmegaSpace.from_string(omega)
        else:
            space = OmegaSpace(tuple(DeformParams(float(a), float(s)) for a, s in omega))
        return cls(
            p=data.get("p", DEFAULT_PROB),
            theta=data.get("theta", DEFAULT_THETA),
            omega=space,
            mode=Mode(data.get("mode", Mode.NSEGMENT_PLUS)),
            target=Target(data.get("target", Target.LABEL_ONLY)),
            seed=int(data.get("seed", 0)),
            per_component=bool(data.get("per_component", False)),
        )


def decompose(label: LabelMap) -> list[ClassMask]:
    """Split a label map into one binary mask per class present.

    The ignore index never yields a mask. Masks are returned in ascending
    class order and tile the raster together with the ignore pixels.
    """
    return [ClassMask.from_label(label, c) for c in label.classes_present()]


def recompose(
    masks: Sequence[ClassMask],
    width: int,
    height: int,
    num_classes: int,
    ignore_index: int = DEFAULT_IGNORE_INDEX,
) -> LabelMap:
    """Inverse of :func:`decompose`: claim pixels per mask, lowest class first.

    Pixels claimed by no mask become ``ignore_index``.
    """
    out = np.full((height, width), ignore_index, dtype=np.uint8)
    claimed = np.zeros((height, width), dtype=bool)
    for mask in sorted(masks, key=lambda m: m.class_id):
        take = mask.bits & ~claimed
        out[take] = mask.class_id
        claimed |= mask.bits
    return LabelMap(out, num_classes=num_classes, ignore_index=ignore_index)


def class_bbox(mask: ClassMask) -> BBox:
    """Tightest axis-aligned box containing every set pixel.

    Raises:
        EmptySegment: if the mask has no set pixel.
    """
    rows = np.flatnonzero(mask.bits.any(axis=1))
    if rows.size == 0:
        raise EmptySegment(f"class {mask.class_id} has no pixels")
    cols = np.flatnonzero(mask.bits.any(axis=0))
    return BBox(
        x_min=int(cols[0]),
        y_min=int(rows[0]),
        x_max=int(cols[-1]),
        y_max=int(rows[-1]),
    )


def floor_half(alpha: float) -> int:
    """The suppression margin: floor(alpha / 2)."""
    return int(math.floor(alpha / 2.0))
