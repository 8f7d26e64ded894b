"""Estimator-style wrappers around the functional transforms.

Each class follows the scikit-learn convention: constructor arguments are
stored verbatim (so ``get_params``/``set_params``/``clone`` work), ``fit``
is a stateless no-op, and ``transform(image, label)`` returns the pair.
Labels may be passed as :class:`~nsegment.types.LabelMap` or as a bare
uint8 array; arrays come back as arrays.

Randomness: pass an :class:`~nsegment.rng.RngStream` per call for full
control, or rely on the transform's own stream derived from ``seed``
(created lazily, advancing call by call like any augmenter).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import companions as comp
from .errors import InvalidParam
from .pipeline import augment_sample
from .rng import RngStream
from .types import AugmentConfig, LabelMap, Mode


def _as_label(label, ignore_index: int) -> tuple[LabelMap, bool]:
    if isinstance(label, LabelMap):
        return label, False
    return LabelMap.from_array(np.asarray(label), ignore_index=ignore_index), True


class JointTransform(BaseEstimator):
    """Base class: joint (image, label) transform with sklearn plumbing."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, image, label, rng: RngStream | None = None):
        raise NotImplementedError

    def __call__(self, image, label, rng: RngStream | None = None):
        return self.transform(image, label, rng)

    def _stream(self, rng: RngStream | None) -> RngStream:
        if rng is not None:
            return rng
        if not hasattr(self, "_own_stream"):
            self._own_stream = RngStream(getattr(self, "seed", 0))
        return self._own_stream


class NSegment(JointTransform):
    """Stochastic elastic deformation of the configured target(s).

    Args:
        p: transform probability; the deformation fires iff u < p.
        omega: (alpha, sigma) pool, as an OmegaSpace, ``[[a, s], ...]``
            list, or the string grammar ``"1,15x3,5"``; None = default.
        target: "label" (default), "image" or "both".
        ignore_index: ignore value assumed for bare-array labels.
        seed: seed of the transform's own stream when no rng is passed.
    """

    _mode = Mode.NSEGMENT

    def __init__(self, p=0.5, omega=None, target="label", ignore_index=255, seed=0):
        self.p = p
        self.omega = omega
        self.target = target
        self.ignore_index = ignore_index
        self.seed = seed

    def _config(self) -> AugmentConfig:
        return AugmentConfig.from_dict(
            {
                "p": self.p,
                "omega": self.omega,
                "mode": self._mode,
                "target": self.target,
                "seed": self.seed,
            }
        )

    def transform(self, image, label, rng: RngStream | None = None):
        label_in, was_array = _as_label(label, self.ignore_index)
        outcome = augment_sample(image, label_in, self._config(), self._stream(rng))
        self.last_outcome_ = outcome
        label_out = outcome.label_out.data if was_array else outcome.label_out
        return outcome.image_out, label_out


class NSegmentPlus(NSegment):
    """NSegment with scale-aware suppression of small class masks.

    Adds ``theta``: classes whose pixel area is at most ``theta`` get the
    displacement field zeroed over their expanded bounding box before the
    warp, so small objects keep their exact shape.
    """

    _mode = Mode.NSEGMENT_PLUS

    def __init__(
        self, p=0.5, theta=1000.0, omega=None, target="label",
        ignore_index=255, seed=0, per_component=False,
    ):
        super().__init__(p=p, omega=omega, target=target, ignore_index=ignore_index, seed=seed)
        self.theta = theta
        self.per_component = per_component

    def _config(self) -> AugmentConfig:
        return AugmentConfig.from_dict(
            {
                "p": self.p,
                "theta": self.theta,
                "omega": self.omega,
                "mode": self._mode,
                "target": self.target,
                "seed": self.seed,
                "per_component": self.per_component,
            }
        )


class Cutout(JointTransform):
    """Blank 5-10 boxes of 16-32 px sides (defaults) in image and label."""

    def __init__(self, holes=(5, 10), side=(16, 32), prob=0.5, ignore_index=255, seed=0):
        self.holes = holes
        self.side = side
        self.prob = prob
        self.ignore_index = ignore_index
        self.seed = seed

    def transform(self, image, label, rng: RngStream | None = None):
        label_in, was_array = _as_label(label, self.ignore_index)
        cfg = comp.CutoutParams(holes=tuple(self.holes), side=tuple(self.side), prob=self.prob)
        image_out, label_out = comp.cutout(image, label_in, cfg, self._stream(rng))
        return image_out, (label_out.data if was_array else label_out)


class RandomErasing(JointTransform):
    """Erase one box: random image pixels, ignore label pixels."""

    def __init__(
        self, area_frac=(0.05, 0.20), aspect=(0.5, 2.0), prob=0.5, ignore_index=255, seed=0
    ):
        self.area_frac = area_frac
        self.aspect = aspect
        self.prob = prob
        self.ignore_index = ignore_index
        self.seed = seed

    def transform(self, image, label, rng: RngStream | None = None):
        label_in, was_array = _as_label(label, self.ignore_index)
        cfg = comp.ErasingParams(
            area_frac=tuple(self.area_frac), aspect=tuple(self.aspect), prob=self.prob
        )
        image_out, label_out = comp.random_erasing(image, label_in, cfg, self._stream(rng))
        return image_out, (label_out.data if was_array else label_out)


class CutMix(JointTransform):
    """Paste one box from a donor sample into the input.

    ``donor`` supplies the second sample: either a fixed (image, label)
    pair or a callable ``rng -> (image, label)``.
    """

    def __init__(self, area_frac=(0.20, 0.50), prob=0.5, donor=None, ignore_index=255, seed=0):
        self.area_frac = area_frac
        self.prob = prob
        self.donor = donor
        self.ignore_index = ignore_index
        self.seed = seed

    def transform(self, image, label, rng: RngStream | None = None):
        if self.donor is None:
            raise InvalidParam("CutMix needs a donor sample or donor provider")
        stream = self._stream(rng)
        donor = self.donor(stream) if callable(self.donor) else self.donor
        donor_image, donor_label = donor
        label_in, was_array = _as_label(label, self.ignore_index)
        donor_label_in, _ = _as_label(donor_label, self.ignore_index)
        cfg = comp.CutmixParams(area_frac=tuple(self.area_frac), prob=self.prob)
        image_out, label_out = comp.cutmix(
            image, label_in, donor_image, donor_label_in, cfg, stream
        )
        return image_out, (label_out.data if was_array else label_out)


class Compose(JointTransform):
    """Apply transforms in order; stage ``i`` draws from ``rng.split(i)``.

    Splitting is path-based, so without a per-call rng the stage streams
    are additionally keyed by a call counter to keep successive calls
    stochastic.
    """

    def __init__(self, transforms: Sequence[JointTransform] = (), seed=0):
        self.transforms = transforms
        self.seed = seed

    def transform(self, image, label, rng: RngStream | None = None):
        if not self.transforms:
            raise InvalidParam("Compose needs at least one transform")
        if rng is None:
            calls = getattr(self, "_calls", 0)
            self._calls = calls + 1
            rng = RngStream(self.seed).split(calls)
        for i, stage in enumerate(self.transforms):
            image, label = stage.transform(image, label, rng.split(i))
        return image, label
