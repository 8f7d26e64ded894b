"""Dataset ingestion and persistence.

Labels live in 8-bit single-channel or paletted lossless rasters
(PNG-compatible; PGM also accepted) where the byte value is the class
index and 255 means ignore. The augmentation manifest is line-delimited
JSON: one header line with version, seed and config, then one record per
(sample, epoch); see docs/manifest.md.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptFile, NoPairsFound, UnsupportedFormat
from .types import DEFAULT_IGNORE_INDEX, AugmentConfig, LabelMap

MANIFEST_FORMAT = "nsegment-manifest/1"

LABEL_EXTENSIONS = (".png", ".pgm", ".bmp", ".tif", ".tiff")
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".ppm", ".pgm", ".bmp", ".tif", ".tiff")

_LOSSLESS_8BIT_MODES = {"L", "P"}


def load_label(
    path: str | Path,
    num_classes: int | None = None,
    ignore_index: int = DEFAULT_IGNORE_INDEX,
) -> LabelMap:
    """Read a label raster; palette files are read by index, not color.

    Raises:
        UnsupportedFormat: for 16-bit or multi-channel label files.
        CorruptFile: when the file cannot be decoded at all.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            mode = img.mode
            if mode not in _LOSSLESS_8BIT_MODES:
                hint = (
                    "re-export the mask as an 8-bit single-channel or paletted file "
                    "whose pixel values are class indices"
                )
                raise UnsupportedFormat(f"{path}: mode {mode!r} is not an index mask; {hint}")
            data = np.asarray(img, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptFile(f"{path}: not a decodable image") from exc
    except OSError as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise CorruptFile(f"{path}: {exc}") from exc
    return LabelMap.from_array(data, num_classes=num_classes, ignore_index=ignore_index)


def save_label(label: LabelMap, path: str | Path) -> None:
    """Write a label raster losslessly; round-trips bit-exactly.

    The format follows the suffix (.png default, .pgm supported); encoder
    settings are fixed so identical maps produce identical bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(label.data), mode="L").save(path)


def load_image(path: str | Path) -> np.ndarray:
    """Read an image as (h, w, 3) uint8."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptFile(f"{path}: not a decodable image") from exc


def save_image(image: np.ndarray, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(path)


def _image_size(path: Path) -> tuple[int, int]:
    """(width, height) from the file header, without decoding pixels."""
    try:
        with Image.open(path) as img:
            return img.size
    except UnidentifiedImageError as exc:
        raise CorruptFile(f"{path}: not a decodable image") from exc


@dataclass(frozen=True)
class SampleRecord:
    """One (image, label) pair of a dataset manifest."""

    sample_id: str
    image_path: Path
    label_path: Path
    width: int
    height: int


@dataclass(frozen=True)
class ScanResult:
    """Pairing outcome: usable records plus everything that failed to pair."""

    records: tuple[SampleRecord, ...]
    images_without_labels: tuple[str, ...]
    labels_without_images: tuple[str, ...]
    size_mismatches: tuple[str, ...]


def scan_dataset(
    image_dir: str | Path,
    label_dir: str | Path,
    label_suffix: str = "",
) -> ScanResult:
    """Pair images and labels by shared stem, in byte-lexicographic order.

    A label file pairs with an image when its stem equals the image stem
    plus ``label_suffix``. Unpaired files and size-mismatched pairs are
    reported, never silently dropped.

    Raises:
        NoPairsFound: when no usable pair exists.
    """
    image_dir = Path(image_dir)
    label_dir = Path(label_dir)
    if not image_dir.is_dir():
        raise NoPairsFound(f"image directory {image_dir} does not exist")
    if not label_dir.is_dir():
        raise NoPairsFound(f"label directory {label_dir} does not exist")

    def listing(root: Path, extensions: tuple[str, ...]) -> dict[str, Path]:
        files = {}
        for entry in sorted(root.iterdir(), key=lambda p: p.name.encode()):
            if entry.is_file() and entry.suffix.lower() in extensions:
                files.setdefault(entry.stem, entry)
        return files

    images = listing(image_dir, IMAGE_EXTENSIONS)
    labels = listing(label_dir, LABEL_EXTENSIONS)

    records: list[SampleRecord] = []
    size_mismatches: list[str] = []
    matched_labels: set[str] = set()
    for stem in sorted(images, key=str.encode):
        label_stem = stem + label_suffix
        label_path = labels.get(label_stem)
        if label_path is None:
            continue
        matched_labels.add(label_stem)
        iw, ih = _image_size(images[stem])
        lw, lh = _image_size(label_path)
        if (iw, ih) != (lw, lh):
            size_mismatches.append(f"{stem}: image {iw}x{ih} vs label {lw}x{lh}")
            continue
        records.append(
            SampleRecord(
                sample_id=stem,
                image_path=images[stem],
                label_path=label_path,
                width=iw,
                height=ih,
            )
        )

    images_without_labels = tuple(
        stem for stem in sorted(images, key=str.encode) if stem + label_suffix not in labels
    )
    labels_without_images = tuple(
        stem for stem in sorted(labels, key=str.encode) if stem not in matched_labels
    )
    if not records:
        raise NoPairsFound(
            f"no image/label pairs between {image_dir} and {label_dir} "
            f"({len(images)} images, {len(labels)} labels)"
        )
    return ScanResult(
        records=tuple(records),
        images_without_labels=images_without_labels,
        labels_without_images=labels_without_images,
        size_mismatches=tuple(size_mismatches),
    )


# --- augmentation manifest -------------------------------------------------


def _json_line(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


@dataclass(frozen=True)
class ManifestRecord:
    sample_id: str
    epoch: int
    applied: bool
    params_used: tuple[float, float] | None
    suppressed_classes: tuple[int, ...]
    output_label_path: str

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "epoch": self.epoch,
            "applied": self.applied,
            "params_used": list(self.params_used) if self.params_used else None,
            "suppressed_classes": list(self.suppressed_classes),
            "output_label_path": self.output_label_path,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestRecord":
        params = data.get("params_used")
        return cls(
            sample_id=data["sample_id"],
            epoch=int(data["epoch"]),
            applied=bool(data["applied"]),
            params_used=tuple(params) if params else None,
            suppressed_classes=tuple(data.get("suppressed_classes", ())),
            output_label_path=data["output_label_path"],
        )


@dataclass(frozen=True)
class Manifest:
    """Header plus one record per (sample, epoch) of an augmentation run.

    The header carries everything replay needs to reproduce the output
    tree byte-for-byte: seed, config, input dirs, and the run options
    that shape the outputs (label format, companion pre-transforms).
    """

    version: str
    seed: int
    epochs: int
    config: AugmentConfig
    image_dir: str
    label_dir: str
    warp: str
    records: tuple[ManifestRecord, ...]
    label_format: str = "png"
    companions: tuple[str, ...] = ()
    cutmix_window: int = 4

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = {
            "format": MANIFEST_FORMAT,
            "version": self.version,
            "seed": self.seed,
            "epochs": self.epochs,
            "config": self.config.to_dict(),
            "image_dir": self.image_dir,
            "label_dir": self.label_dir,
            "warp": self.warp,
            "label_format": self.label_format,
            "companions": list(self.companions),
            "cutmix_window": self.cutmix_window,
        }
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(_json_line(header))
            for record in self.records:
                fh.write(_json_line(record.to_dict()))

    @classmethod
    def read(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            lines = [line for line in fh if line.strip()]
        if not lines:
            raise CorruptFile(f"{path}: empty manifest")
        header = json.loads(lines[0])
        if header.get("format") != MANIFEST_FORMAT:
            raise UnsupportedFormat(
                f"{path}: expected {MANIFEST_FORMAT!r}, got {header.get('format')!r}"
            )
        records = tuple(ManifestRecord.from_dict(json.loads(line)) for line in lines[1:])
        return cls(
            version=header["version"],
            seed=int(header["seed"]),
            epochs=int(header["epochs"]),
            config=AugmentConfig.from_dict(header["config"]),
            image_dir=header["image_dir"],
            label_dir=header["label_dir"],
            warp=header.get("warp", "inverse_remap"),
            records=records,
            label_format=header.get("label_format", "png"),
            companions=tuple(header.get("companions", ())),
            cutmix_window=int(header.get("cutmix_window", 4)),
        )
