"""Per-sample, per-epoch stochastic label deformation.

One call draws: the activation uniform (the transform fires iff u < p),
one (alpha, sigma) pair from the omega space, then the raw x and y noise
rasters. The draw order is part of the reproducibility contract; the
basic and suppressed variants consume identical streams and differ only
in the suppression step between field construction and warping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from . import dataio
from .errors import InvalidParam
from .fields import build_displacement
from .rng import RngStream
from .types import AugmentConfig, DeformParams, LabelMap, Mode, Target
from .validation import ensure_image_array, ensure_same_hw
from .warp import suppress_small_masks, warp_image, warp_label

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentOutcome:
    """Result of one transform application.

    When ``applied`` is false, ``label_out`` and ``image_out`` are the
    inputs themselves, unchanged.
    """

    label_out: LabelMap
    image_out: np.ndarray | None
    applied: bool
    params_used: DeformParams | None
    suppressed_classes: tuple[int, ...] = ()


def _deform(
    image: np.ndarray | None,
    label: LabelMap,
    config: AugmentConfig,
    rng: RngStream,
    suppress: bool,
) -> AugmentOutcome:
    if image is not None:
        image = ensure_image_array(image)
        ensure_same_hw(image, label.data, "image and label")
    elif config.target is not Target.LABEL_ONLY:
        raise InvalidParam(f"target={config.target.value} needs an image")

    if rng.random() >= config.p:
        return AugmentOutcome(label, image, applied=False, params_used=None)

    params = config.omega.pairs[rng.index(len(config.omega))]
    field = build_displacement(label.width, label.height, params, rng)

    suppressed: list[int] = []
    if suppress:
        field, suppressed = suppress_small_masks(
            label, field, config.theta, params.alpha, per_component=config.per_component
        )

    label_out = label
    image_out = image
    if config.target in (Target.LABEL_ONLY, Target.BOTH):
        label_out = warp_label(label, field)
    if config.target in (Target.IMAGE_ONLY, Target.BOTH):
        image_out = warp_image(image, field)
    return AugmentOutcome(
        label_out,
        image_out,
        applied=True,
        params_used=params,
        suppressed_classes=tuple(suppressed),
    )


def nsegment(
    image: np.ndarray | None,
    label: LabelMap,
    config: AugmentConfig,
    rng: RngStream,
) -> AugmentOutcome:
    """Stochastic elastic deformation without small-mask protection."""
    if config.mode is not Mode.NSEGMENT:
        raise InvalidParam(f"config.mode must be {Mode.NSEGMENT.value!r}, got {config.mode.value!r}")
    return _deform(image, label, config, rng, suppress=False)


def nsegment_plus(
    image: np.ndarray | None,
    label: LabelMap,
    config: AugmentConfig,
    rng: RngStream,
) -> AugmentOutcome:
    """Stochastic elastic deformation with scale-aware small-mask suppression.

    Before warping, the shared field is zeroed over the expanded bbox of
    every class whose area is at most ``config.theta``; the one modified
    field then warps all classes simultaneously.
    """
    if config.mode is not Mode.NSEGMENT_PLUS:
        raise InvalidParam(
            f"config.mode must be {Mode.NSEGMENT_PLUS.value!r}, got {config.mode.value!r}"
        )
    return _deform(image, label, config, rng, suppress=True)


def augment_sample(
    image: np.ndarray | None,
    label: LabelMap,
    config: AugmentConfig,
    rng: RngStream,
) -> AugmentOutcome:
    """Dispatch on ``config.mode``."""
    suppress = config.mode is Mode.NSEGMENT_PLUS
    return _deform(image, label, config, rng, suppress=suppress)


def sample_stream(base_seed: int, epoch: int, index: int) -> RngStream:
    """The independent substream owned by one (epoch, sample) pair."""
    return RngStream(base_seed).split(epoch, index)


def augment_epoch(
    records: Sequence["dataio.SampleRecord"],
    epoch: int,
    config: AugmentConfig,
    base_seed: int,
    on_error: Callable[["dataio.SampleRecord", Exception], None] | None = None,
) -> Iterator[tuple["dataio.SampleRecord", AugmentOutcome]]:
    """Transform every sample of one epoch, each on its own substream.

    Yields (record, outcome) pairs in record order. Per-sample I/O
    failures do not abort the stream: they are passed to ``on_error`` (or
    logged when none is given) and the sample is skipped.
    """
    for index, record in enumerate(records):
        try:
            label = dataio.load_label(record.label_path)
            image = None
            if config.target is not Target.LABEL_ONLY:
                image = dataio.load_image(record.image_path)
            rng = sample_stream(base_seed, epoch, index)
            outcome = augment_sample(image, label, config, rng)
        except Exception as exc:  # noqa: BLE001 - surfaced per sample by contract
            if on_error is not None:
                on_error(record, exc)
            else:
                log.warning("skipping %s: %s", record.sample_id, exc)
            continue
        yield record, outcome


def compose(
    transforms: Sequence[Callable[[np.ndarray | None, LabelMap, RngStream], tuple[np.ndarray | None, LabelMap]]],
):
    """Chain joint transforms, giving stage ``i`` the substream ``rng.split(i)``.

    Each stage is a callable ``(image, label, rng) -> (image, label)``.
    Because stages draw from independent substreams, dropping or adding a
    stage never shifts the randomness of the others.
    """
    transforms = list(transforms)
    if not transforms:
        raise InvalidParam("compose() needs at least one transform")

    def composed(image: np.ndarray | None, label: LabelMap, rng: RngStream):
        for i, stage in enumerate(transforms):
            image, label = stage(image, label, rng.split(i))
        return image, label

    return composed
