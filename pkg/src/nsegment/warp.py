"""Elastic warping of label maps and images, plus small-mask suppression.

Warp semantics are inverse remap: output pixel (x, y) samples the input at
(x + dx[y, x], y + dy[y, x]), with source coordinates clipped to the
raster. Inverse remap produces hole-free output and makes the behavior on
zero-field regions an exact identity, which is what the small-mask
suppression below relies on.

Labels are categorical, so they are warped per class channel: each output
pixel bilinearly interpolates the binary membership of every class (the
ignore value forms its own channel) at the sampled coordinate and takes
the argmax. Ties break toward the lowest class index; the ignore channel
is ordered last so it loses every tie against a real class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch
from .types import (
    BBox,
    ClassMask,
    DisplacementField,
    LabelMap,
    class_bbox,
    floor_half,
)


@dataclass(frozen=True)
class WarpSemantics:
    """Warp convention recorded in run metadata."""

    mode: str = "inverse_remap"


WARP_SEMANTICS = WarpSemantics()


def _check_field(shape: tuple[int, int], field: DisplacementField) -> None:
    if field.dx.shape != shape:
        raise DimensionMismatch(
            f"field {field.dx.shape} does not match raster {shape}"
        )


def _sample_coords(field: DisplacementField):
    """Clipped source coordinates and bilinear corner indices/weights."""
    h, w = field.dx.shape
    sx = np.arange(w, dtype=np.float64)[None, :] + field.dx.astype(np.float64)
    sy = np.arange(h, dtype=np.float64)[:, None] + field.dy.astype(np.float64)
    np.clip(sx, 0.0, float(w - 1), out=sx)
    np.clip(sy, 0.0, float(h - 1), out=sy)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy
    return (y0, x0, y1, x1), (w00, w10, w01, w11)


def warp_label(label: LabelMap, field: DisplacementField) -> LabelMap:
    """Warp a categorical label map through a displacement field.

    Each class channel (plus the ignore channel, when present) is
    bilinearly sampled at the clipped source coordinate; the output class
    is the channel of maximum weight, lowest class index winning ties and
    the ignore channel losing them. The output never contains a class
    value absent from the input, and a zero field is an exact identity.
    """
    _check_field(label.data.shape, field)
    channels = label.classes_present()
    if bool((label.data == label.ignore_index).any()):
        channels = channels + [label.ignore_index]
    (y0, x0, y1, x1), (w00, w10, w01, w11) = _sample_coords(field)
    n00 = label.data[y0, x0]
    n10 = label.data[y0, x1]
    n01 = label.data[y1, x0]
    n11 = label.data[y1, x1]
    out = np.empty(label.data.shape, dtype=np.uint8)
    best = np.full(label.data.shape, -1.0, dtype=np.float64)
    for value in channels:
        weight = (
            w00 * (n00 == value)
            + w10 * (n10 == value)
            + w01 * (n01 == value)
            + w11 * (n11 == value)
        )
        take = weight > best
        out[take] = value
        best[take] = weight[take]
    return label.with_data(out)


def warp_image(image: np.ndarray, field: DisplacementField) -> np.ndarray:
    """Warp an image through a displacement field, channel by channel.

    Integer inputs are interpolated in float64 and rounded back to the
    original dtype; float inputs stay float.
    """
    image = np.asarray(image)
    _check_field(image.shape[:2], field)
    (y0, x0, y1, x1), (w00, w10, w01, w11) = _sample_coords(field)
    planes = image if image.ndim == 3 else image[..., None]
    out = np.empty(planes.shape, dtype=np.float64)
    for c in range(planes.shape[2]):
        p = planes[..., c].astype(np.float64)
        out[..., c] = w00 * p[y0, x0] + w10 * p[y0, x1] + w01 * p[y1, x0] + w11 * p[y1, x1]
    if image.ndim == 2:
        out = out[..., 0]
    if np.issubdtype(image.dtype, np.integer):
        info = np.iinfo(image.dtype)
        return np.clip(np.rint(out), info.min, info.max).astype(image.dtype)
    return out.astype(image.dtype)


def _zero_region(dx: np.ndarray, dy: np.ndarray, bbox: BBox, eps: int) -> None:
    """Zero both offset rasters over the eps-expanded bbox, in place.

    Expansion follows the suppression rule: the lower corner clamps at 0,
    the upper corner may reach w/h and is clipped to the last valid index
    at access time.
    """
    h, w = dx.shape
    x_lo = max(bbox.x_min - eps, 0)
    y_lo = max(bbox.y_min - eps, 0)
    x_hi = min(min(bbox.x_max + eps, w), w - 1)
    y_hi = min(min(bbox.y_max + eps, h), h - 1)
    dx[y_lo : y_hi + 1, x_lo : x_hi + 1] = 0.0
    dy[y_lo : y_hi + 1, x_lo : x_hi + 1] = 0.0


def suppress_small_mask(
    mask: ClassMask, field: DisplacementField, alpha: float
) -> DisplacementField:
    """Zero the field inside the mask's bbox expanded by floor(alpha / 2).

    Returns a new field; the input is untouched. Zeroing is idempotent and
    commutative, so suppressing several masks is order-independent.

    Raises:
        EmptySegment: if the mask has no pixels.
    """
    bbox = class_bbox(mask)
    if mask.bits.shape != field.dx.shape:
        raise DimensionMismatch(
            f"mask {mask.bits.shape} does not match field {field.dx.shape}"
        )
    dx = field.dx.copy()
    dy = field.dy.copy()
    _zero_region(dx, dy, bbox, floor_half(alpha))
    return DisplacementField(dx=dx, dy=dy, alpha=field.alpha)


def suppress_small_masks(
    label: LabelMap,
    field: DisplacementField,
    theta: float,
    alpha: float,
    per_component: bool = False,
) -> tuple[DisplacementField, list[int]]:
    """Apply suppression for every class whose area is at most ``theta``.

    The shared field accumulates all zeroed regions. With
    ``per_component`` the area test and bbox apply to 4-connected
    components instead of whole class masks (off-contract variant).
    Returns the updated field and the sorted suppressed class indices.
    """
    dx = field.dx.copy()
    dy = field.dy.copy()
    eps = floor_half(alpha)
    suppressed: list[int] = []
    for class_id in label.classes_present():
        mask = ClassMask.from_label(label, class_id)
        if mask.area == 0:
            continue
        if per_component:
            comps, n = ndimage.label(mask.bits)
            hit = False
            for comp_id in range(1, n + 1):
                comp = ClassMask(comps == comp_id, class_id=class_id)
                if comp.area <= theta:
                    _zero_region(dx, dy, class_bbox(comp), eps)
                    hit = True
            if hit:
                suppressed.append(class_id)
        elif mask.area <= theta:
            _zero_region(dx, dy, class_bbox(mask), eps)
            suppressed.append(class_id)
    return DisplacementField(dx=dx, dy=dy, alpha=field.alpha), suppressed
