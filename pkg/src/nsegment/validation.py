"""Input validation helpers used at API boundaries."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, InvalidParam


def ensure_probability(value: float, name: str = "p") -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InvalidParam(f"{name} must be in [0, 1], got {value}")
    return value


def ensure_positive(value: float, name: str) -> float:
    value = float(value)
    if not value > 0.0:
        raise InvalidParam(f"{name} must be > 0, got {value}")
    return value


def ensure_non_negative(value: float, name: str) -> float:
    value = float(value)
    if value < 0.0:
        raise InvalidParam(f"{name} must be >= 0, got {value}")
    return value


def ensure_odd(value: int, name: str) -> int:
    value = int(value)
    if value < 1 or value % 2 == 0:
        raise InvalidParam(f"{name} must be an odd integer >= 1, got {value}")
    return value


def ensure_label_array(data: np.ndarray) -> np.ndarray:
    """Coerce to a contiguous 2-D uint8 array, rejecting anything lossy."""
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise InvalidParam(f"label raster must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidParam("label raster must have positive width and height")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise InvalidParam(f"label raster must hold integers, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise InvalidParam("label values must fit in uint8 (0..255)")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def ensure_image_array(image: np.ndarray) -> np.ndarray:
    """Coerce to a contiguous (h, w, 3) array; dtype is preserved."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidParam(f"image must have shape (h, w, 3), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidParam("image must have positive width and height")
    return np.ascontiguousarray(arr)


def ensure_same_hw(a: np.ndarray, b: np.ndarray, what: str = "rasters") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"{what} differ in size: {a.shape[:2]} vs {b.shape[:2]}")
