"""Label-only elastic deformation augmentation for semantic segmentation.

The core transform perturbs segmentation labels with smooth stochastic
displacement fields while leaving the image untouched; the scale-aware
variant additionally freezes the field around small class masks so they
keep their exact shape. Companion joint transforms, an implicit-noise
perturbation harness, and overlap metrics round out the toolkit.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

__version__ = "0.1.0"

from .errors import (
    CorruptFile,
    DimensionMismatch,
    EmptySegment,
    InvalidParam,
    NoData,
    NoPairsFound,
    NsegmentError,
    UnsupportedFormat,
)
from .types import (
    AugmentConfig,
    BBox,
    ClassMask,
    DeformParams,
    DisplacementField,
    LabelMap,
    Mode,
    OmegaSpace,
    Target,
    class_bbox,
    decompose,
    recompose,
)
from .rng import RngStream
from .fields import GaussianKernel, build_displacement, gaussian_kernel, raw_field, smooth_field
from .warp import suppress_small_mask, suppress_small_masks, warp_image, warp_label
from .pipeline import (
    AugmentOutcome,
    augment_epoch,
    augment_sample,
    compose,
    nsegment,
    nsegment_plus,
    sample_stream,
)
from .companions import (
    CompanionConfig,
    CutmixParams,
    CutoutParams,
    ErasingParams,
    cutout,
    cutmix,
    random_erasing,
)
from .perturb import (
    PerturbKind,
    PerturbSpec,
    PerturbTarget,
    perturb_elastic,
    perturb_morph,
    perturb_shift,
    sweep,
)
from .metrics import ConfusionAccumulator, accumulate, miou, pair_miou
from .dataio import (
    Manifest,
    ManifestRecord,
    SampleRecord,
    ScanResult,
    load_image,
    load_label,
    save_image,
    save_label,
    scan_dataset,
)

# The estimator wrappers pull in scikit-learn, which dominates import time;
# load them lazily so CLI startup stays light.
_ESTIMATORS = ("Compose", "CutMix", "Cutout", "NSegment", "NSegmentPlus", "RandomErasing")

if TYPE_CHECKING:
    from .transforms import (  # noqa: F401
        Compose,
        CutMix,
        Cutout,
        NSegment,
        NSegmentPlus,
        RandomErasing,
    )


def __getattr__(name):
    if name in _ESTIMATORS:
        from . import transforms

        return getattr(transforms, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

__all__ = [
    "__version__",
    "AugmentConfig",
    "AugmentOutcome",
    "BBox",
    "ClassMask",
    "CompanionConfig",
    "Compose",
    "ConfusionAccumulator",
    "CorruptFile",
    "CutMix",
    "CutmixParams",
    "Cutout",
    "CutoutParams",
    "DeformParams",
    "DimensionMismatch",
    "DisplacementField",
    "EmptySegment",
    "ErasingParams",
    "GaussianKernel",
    "InvalidParam",
    "LabelMap",
    "Manifest",
    "ManifestRecord",
    "Mode",
    "NSegment",
    "NSegmentPlus",
    "NoData",
    "NoPairsFound",
    "NsegmentError",
    "OmegaSpace",
    "PerturbKind",
    "PerturbSpec",
    "PerturbTarget",
    "RandomErasing",
    "RngStream",
    "SampleRecord",
    "ScanResult",
    "Target",
    "UnsupportedFormat",
    "accumulate",
    "augment_epoch",
    "augment_sample",
    "build_displacement",
    "class_bbox",
    "compose",
    "cutmix",
    "cutout",
    "decompose",
    "gaussian_kernel",
    "load_image",
    "load_label",
    "miou",
    "nsegment",
    "nsegment_plus",
    "pair_miou",
    "perturb_elastic",
    "perturb_morph",
    "perturb_shift",
    "random_erasing",
    "raw_field",
    "recompose",
    "sample_stream",
    "save_image",
    "save_label",
    "scan_dataset",
    "smooth_field",
    "suppress_small_mask",
    "suppress_small_masks",
    "sweep",
    "warp_image",
    "warp_label",
]
