"""Joint image-label transforms used alongside the deformation engine:
CutOut, CutMix and Random Erasing.

All three erase or replace rectangles in image and label together.
Erased label pixels become the ignore index, so none of them can ever
introduce a class value that was absent from the inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParam
from .rng import RngStream
from .types import LabelMap
from .validation import ensure_image_array, ensure_probability, ensure_same_hw


@dataclass(frozen=True)
class CutoutParams:
    holes: tuple[int, int] = (5, 10)  # hole count, inclusive
    side: tuple[int, int] = (16, 32)  # box side in px, inclusive
    prob: float = 0.5

    def __post_init__(self) -> None:
        _check_range(self.holes, "holes", low=1)
        _check_range(self.side, "side", low=1)
        ensure_probability(self.prob, "prob")


@dataclass(frozen=True)
class CutmixParams:
    area_frac: tuple[float, float] = (0.20, 0.50)
    prob: float = 0.5

    def __post_init__(self) -> None:
        _check_frac_range(self.area_frac, "area_frac")
        ensure_probability(self.prob, "prob")


@dataclass(frozen=True)
class ErasingParams:
    area_frac: tuple[float, float] = (0.05, 0.20)
    aspect: tuple[float, float] = (0.5, 2.0)  # box height / box width
    prob: float = 0.5

    def __post_init__(self) -> None:
        _check_frac_range(self.area_frac, "area_frac")
        _check_range(self.aspect, "aspect", low=1e-9)
        ensure_probability(self.prob, "prob")


@dataclass(frozen=True)
class CompanionConfig:
    cutout: CutoutParams = field(default_factory=CutoutParams)
    cutmix: CutmixParams = field(default_factory=CutmixParams)
    erasing: ErasingParams = field(default_factory=ErasingParams)


def _require_rng(rng: RngStream | None) -> RngStream:
    if rng is None:
        raise InvalidParam("an RngStream is required")
    return rng


def _check_range(pair, name, low):
    lo, hi = pair
    if lo > hi or lo < low:
        raise InvalidParam(f"{name} must satisfy {low} <= min <= max, got {pair}")


def _check_frac_range(pair, name):
    lo, hi = pair
    if not (0.0 < lo <= hi <= 1.0):
        raise InvalidParam(f"{name} must satisfy 0 < min <= max <= 1, got {pair}")


def _place_box(width: int, height: int, bw: int, bh: int, rng: RngStream):
    """Uniform position keeping the box inside the raster; oversized boxes clip."""
    bw = min(bw, width)
    bh = min(bh, height)
    x0 = rng.randint(0, width - bw)
    y0 = rng.randint(0, height - bh)
    return x0, y0, bw, bh


def _dims_for_area_fraction(width: int, height: int, frac: float, lo: float, hi: float):
    """Integer box dims realizing an area fraction, nudged back into [lo, hi].

    Rounding the square-root scaling can land just outside the window, so
    the dims are grown/shrunk one pixel at a time until the realized
    fraction is inside it (or the raster leaves no room).
    """
    total = width * height
    bw = min(width, max(1, round(width * math.sqrt(frac))))
    bh = min(height, max(1, round(frac * total / bw)))
    lo_px = math.ceil(lo * total)
    hi_px = math.floor(hi * total)
    while bw * bh < lo_px and (bw < width or bh < height):
        if bw / width <= bh / height and bw < width:
            bw += 1
        else:
            bh += 1
    while bw * bh > hi_px and (bw > 1 or bh > 1):
        if bw >= bh and bw > 1:
            bw -= 1
        else:
            bh -= 1
    return bw, bh


def cutout(
    image: np.ndarray,
    label: LabelMap,
    cfg: CutoutParams | None = None,
    rng: RngStream | None = None,
) -> tuple[np.ndarray, LabelMap]:
    """Blank several rectangles: image pixels to black, label pixels to ignore."""
    cfg = cfg or CutoutParams()
    rng = _require_rng(rng)
    image = ensure_image_array(image)
    ensure_same_hw(image, label.data, "image and label")
    if rng.random() >= cfg.prob:
        return image, label
    h, w = label.data.shape
    img = image.copy()
    lab = label.data.copy()
    for _ in range(rng.randint(cfg.holes[0], cfg.holes[1])):
        bw = rng.randint(cfg.side[0], cfg.side[1])
        bh = rng.randint(cfg.side[0], cfg.side[1])
        x0, y0, bw, bh = _place_box(w, h, bw, bh, rng)
        img[y0 : y0 + bh, x0 : x0 + bw] = 0
        lab[y0 : y0 + bh, x0 : x0 + bw] = label.ignore_index
    return img, label.with_data(lab)


def cutmix(
    image_a: np.ndarray,
    label_a: LabelMap,
    image_b: np.ndarray,
    label_b: LabelMap,
    cfg: CutmixParams | None = None,
    rng: RngStream | None = None,
) -> tuple[np.ndarray, LabelMap]:
    """Copy one rectangle (image and label) from donor B into A.

    The box area is a uniformly drawn fraction of the raster inside
    ``cfg.area_frac``, realized to the nearest feasible integer box.
    """
    cfg = cfg or CutmixParams()
    rng = _require_rng(rng)
    image_a = ensure_image_array(image_a)
    image_b = ensure_image_array(image_b)
    ensure_same_hw(image_a, label_a.data, "image and label")
    ensure_same_hw(image_a, image_b, "sample and donor")
    ensure_same_hw(label_a.data, label_b.data, "sample and donor labels")
    if rng.random() >= cfg.prob:
        return image_a, label_a
    h, w = label_a.data.shape
    frac = cfg.area_frac[0] + rng.random() * (cfg.area_frac[1] - cfg.area_frac[0])
    bw, bh = _dims_for_area_fraction(w, h, frac, *cfg.area_frac)
    x0, y0, bw, bh = _place_box(w, h, bw, bh, rng)
    img = image_a.copy()
    lab = label_a.data.copy()
    img[y0 : y0 + bh, x0 : x0 + bw] = image_b[y0 : y0 + bh, x0 : x0 + bw]
    lab[y0 : y0 + bh, x0 : x0 + bw] = label_b.data[y0 : y0 + bh, x0 : x0 + bw]
    num_classes = max(label_a.num_classes, label_b.num_classes)
    return img, LabelMap(lab, num_classes=num_classes, ignore_index=label_a.ignore_index)


def random_erasing(
    image: np.ndarray,
    label: LabelMap,
    cfg: ErasingParams | None = None,
    rng: RngStream | None = None,
) -> tuple[np.ndarray, LabelMap]:
    """Erase one rectangle: random image pixels, ignore label pixels.

    The drawn aspect (height/width) stays inside ``cfg.aspect`` after
    integer rounding; the area fraction is realized best-effort around the
    drawn value.
    """
    cfg = cfg or ErasingParams()
    rng = _require_rng(rng)
    image = ensure_image_array(image)
    ensure_same_hw(image, label.data, "image and label")
    if rng.random() >= cfg.prob:
        return image, label
    h, w = label.data.shape
    frac = cfg.area_frac[0] + rng.random() * (cfg.area_frac[1] - cfg.area_frac[0])
    aspect = cfg.aspect[0] + rng.random() * (cfg.aspect[1] - cfg.aspect[0])
    area = frac * w * h
    bh = max(1, round(math.sqrt(area * aspect)))
    bw = max(1, round(bh / aspect))
    # Keep the realized aspect inside the configured window despite rounding.
    bw = min(max(bw, math.ceil(bh / cfg.aspect[1])), max(1, math.floor(bh / cfg.aspect[0])))
    x0, y0, bw, bh = _place_box(w, h, bw, bh, rng)
    img = image.copy()
    lab = label.data.copy()
    fill = rng.randint(0, 255, size=(bh, bw, 3))
    img[y0 : y0 + bh, x0 : x0 + bw] = np.asarray(fill, dtype=image.dtype)
    lab[y0 : y0 + bh, x0 : x0 + bw] = label.ignore_index
    return img, label.with_data(lab)
