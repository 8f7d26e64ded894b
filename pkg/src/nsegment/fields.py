"""Displacement-field generation and Gaussian smoothing.

A raw field is per-pixel uniform noise in [-1, 1]. Smoothing scales it by
the magnitude ``alpha`` and convolves with a normalized Gaussian of width
``sigma`` under zero padding, which preserves shape and keeps every output
value inside [-alpha, alpha] (the kernel is non-negative and sums to at
most one at every output position).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidParam
from .rng import RngStream
from .types import DeformParams, DisplacementField, _read_only


def kernel_side(sigma: float) -> int:
    """Kernel side length ``2 * round(3 * sigma) + 1``.

    ``round`` is round-half-to-even, which resolves the half cases
    (e.g. sigma = 0.5 -> 3 * sigma = 1.5 -> side 5) deterministically.
    """
    if sigma <= 0:
        raise InvalidParam(f"sigma must be > 0, got {sigma}")
    return 2 * int(round(3.0 * float(sigma))) + 1


@dataclass(frozen=True)
class GaussianKernel:
    """Separable normalized Gaussian: 1-D taps whose outer product is the 2-D kernel."""

    sigma: float
    weights: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _read_only(np.asarray(self.weights, np.float64)))

    @property
    def side(self) -> int:
        return self.weights.shape[0]

    def dense(self) -> np.ndarray:
        """Materialize the full 2-D kernel (outer product of the taps)."""
        return np.outer(self.weights, self.weights)


def gaussian_kernel(sigma: float) -> GaussianKernel:
    """Normalized separable Gaussian kernel for the given width.

    Taps are proportional to exp(-t^2 / (2 sigma^2)) over the side
    dictated by :func:`kernel_side` and normalized to sum to one, so the
    2-D kernel sums to one as well.
    """
    side = kernel_side(sigma)
    radius = side // 2
    t = np.arange(side, dtype=np.float64) - radius
    taps = np.exp(-(t * t) / (2.0 * float(sigma) ** 2))
    taps /= taps.sum()
    return GaussianKernel(sigma=float(sigma), weights=taps)


def raw_field(width: int, height: int, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Two (h, w) rasters of uniform noise in [-1, 1].

    The x raster is drawn in full before the y raster, so the two come
    from disjoint portions of the stream.
    """
    if width <= 0 or height <= 0:
        raise InvalidParam(f"field size must be positive, got {width}x{height}")
    dx_raw = 2.0 * rng.rand(height, width) - 1.0
    dy_raw = 2.0 * rng.rand(height, width) - 1.0
    return dx_raw, dy_raw


def smooth_field(raw: np.ndarray, alpha: float, sigma: float) -> np.ndarray:
    """Scale a raw field by ``alpha`` and smooth it with a zero-padded Gaussian.

    Equivalent to a dense 2-D convolution of ``alpha * raw`` with the
    normalized kernel; computed as two separable 1-D passes. Accumulation
    is float64, the result is stored as float32 and clipped to
    [-alpha, alpha] so float rounding can never leak past the bound.
    """
    if alpha < 0:
        raise InvalidParam(f"alpha must be >= 0, got {alpha}")
    kernel = gaussian_kernel(sigma)
    scaled = float(alpha) * np.asarray(raw, dtype=np.float64)
    out = ndimage.convolve1d(scaled, kernel.weights, axis=0, mode="constant", cval=0.0)
    out = ndimage.convolve1d(out, kernel.weights, axis=1, mode="constant", cval=0.0)
    np.clip(out, -float(alpha), float(alpha), out=out)
    return out.astype(np.float32)


def build_displacement(
    width: int, height: int, params: DeformParams, rng: RngStream
) -> DisplacementField:
    """Draw, scale and smooth both offset rasters of a displacement field."""
    dx_raw, dy_raw = raw_field(width, height, rng)
    dx = smooth_field(dx_raw, params.alpha, params.sigma)
    dy = smooth_field(dy_raw, params.alpha, params.sigma)
    return DisplacementField(dx=dx, dy=dy, alpha=params.alpha)
