"""Command-line frontend: ``nseg augment | perturb | evaluate | inspect``.

Exit codes: 0 success, 1 configuration/usage error, 2 I/O error. The seed
resolves as --seed flag > NSEG_SEED env var > config file > 0. A JSON
config file (--config) supplies defaults for any long flag; explicit
flags win.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, dataio, perturb
from .errors import (
    CorruptFile,
    DimensionMismatch,
    InvalidParam,
    NoData,
    NoPairsFound,
    NsegmentError,
    UnsupportedFormat,
)
from .companions import CompanionConfig, cutmix, cutout, random_erasing
from .metrics import ConfusionAccumulator, accumulate, miou
from .pipeline import augment_sample, sample_stream
from .rng import RngStream
from .types import AugmentConfig, LabelMap, Mode, OmegaSpace, Target
from .warp import WARP_SEMANTICS

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2

_COMPANION_NAMES = ("cutout", "cutmix", "erasing")
# Spawn key reserved for the per-epoch cutmix donor shuffle.
_SHUFFLE_KEY = 1_000_003


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse, but usage errors exit 1 instead of 2."""

    def error(self, message):
        raise UsageError(message)


# --- augment ----------------------------------------------------------------


def _epoch_dir(kind: str, epoch: int) -> str:
    return f"{kind}/ep{epoch:03d}"


def _donor_indices(n: int, epoch: int, base_seed: int, window: int) -> list[int]:
    """Cyclic donor within a shuffled window of the epoch's sample order."""
    order = RngStream(base_seed).split(epoch, _SHUFFLE_KEY)._gen.permutation(n)
    donor = [0] * n
    for start in range(0, n, window):
        block = order[start : start + window]
        for pos, idx in enumerate(block):
            donor[int(idx)] = int(block[(pos + 1) % len(block)])
    return donor


def run_augment(
    records,
    config: AugmentConfig,
    epochs: int,
    base_seed: int,
    out_dir: Path,
    image_dir: Path,
    label_dir: Path,
    jobs: int = 1,
    label_format: str = "png",
    images_out: str = "none",
    companions: tuple[str, ...] = (),
    companion_config: CompanionConfig | None = None,
    cutmix_window: int = 4,
    on_error=None,
) -> dataio.Manifest:
    """Write deformed labels plus a manifest for every (sample, epoch).

    Each pair runs on its own substream, so the output is byte-identical
    for a given seed regardless of ``jobs``. With companions enabled the
    joint pre-transforms change the image too, so transformed images are
    written alongside the labels.
    """
    out_dir = Path(out_dir)
    companion_config = companion_config or CompanionConfig()
    write_images = bool(companions) or config.target is not Target.LABEL_ONLY
    need_images = write_images
    n = len(records)

    def one(task):
        epoch, index = task
        record = records[index]
        label = dataio.load_label(record.label_path)
        image = dataio.load_image(record.image_path) if need_images else None
        rng = sample_stream(base_seed, epoch, index)
        stage = 0
        for name in companions:
            stage_rng = rng.split(stage)
            if name == "cutout":
                image, label = cutout(image, label, companion_config.cutout, stage_rng)
            elif name == "erasing":
                image, label = random_erasing(image, label, companion_config.erasing, stage_rng)
            elif name == "cutmix":
                donor = records[donors[epoch][index]]
                donor_label = dataio.load_label(donor.label_path)
                donor_image = dataio.load_image(donor.image_path)
                image, label = cutmix(
                    image, label, donor_image, donor_label, companion_config.cutmix, stage_rng
                )
            stage += 1
        outcome = augment_sample(image, label, config, rng.split(stage) if companions else rng)
        rel_label = f"{_epoch_dir('labels', epoch)}/{record.sample_id}.{label_format}"
        dataio.save_label(outcome.label_out, out_dir / rel_label)
        if write_images and outcome.image_out is not None:
            rel_image = f"{_epoch_dir('images', epoch)}/{record.sample_id}.png"
            dataio.save_image(outcome.image_out, out_dir / rel_image)
        return dataio.ManifestRecord(
            sample_id=record.sample_id,
            epoch=epoch,
            applied=outcome.applied,
            params_used=(
                (outcome.params_used.alpha, outcome.params_used.sigma)
                if outcome.params_used
                else None
            ),
            suppressed_classes=outcome.suppressed_classes,
            output_label_path=rel_label,
        )

    donors = {}
    if "cutmix" in companions:
        donors = {e: _donor_indices(n, e, base_seed, max(2, cutmix_window)) for e in range(epochs)}

    tasks = [(epoch, index) for epoch in range(epochs) for index in range(n)]
    results: dict[tuple[int, int], dataio.ManifestRecord] = {}
    failures: list[tuple[int, int, Exception]] = []

    def guarded(task):
        try:
            return task, one(task)
        except Exception as exc:  # noqa: BLE001 - listed, run continues
            return task, exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(guarded, tasks))
    else:
        outcomes = [guarded(t) for t in tasks]
    for task, result in outcomes:
        if isinstance(result, Exception):
            failures.append((task[0], task[1], result))
            if on_error is not None:
                on_error(records[task[1]], result)
        else:
            results[task] = result

    if images_out in ("copy", "symlink") and not write_images:
        dest_root = out_dir / "images"
        dest_root.mkdir(parents=True, exist_ok=True)
        for record in records:
            dest = dest_root / record.image_path.name
            if dest.exists() or dest.is_symlink():
                dest.unlink()
            if images_out == "copy":
                shutil.copyfile(record.image_path, dest)
            else:
                dest.symlink_to(record.image_path.resolve())

    manifest = dataio.Manifest(
        version=__version__,
        seed=base_seed,
        epochs=epochs,
        config=config,
        image_dir=str(image_dir),
        label_dir=str(label_dir),
        warp=WARP_SEMANTICS.mode,
        records=tuple(results[t] for t in tasks if t in results),
        label_format=label_format,
        companions=tuple(companions),
        cutmix_window=cutmix_window,
    )
    manifest.write(out_dir / "manifest.jsonl")
    if failures and on_error is None:
        for epoch, index, exc in failures:
            print(f"error: epoch {epoch} sample {records[index].sample_id}: {exc}", file=sys.stderr)
    return manifest


def cmd_augment(args) -> int:
    if args.replay:
        manifest = dataio.Manifest.read(args.replay)
        image_dir = Path(args.images or manifest.image_dir)
        label_dir = Path(args.labels or manifest.label_dir)
        config = manifest.config
        epochs = manifest.epochs
        seed = manifest.seed
        args.label_format = manifest.label_format
        args.companions = ",".join(manifest.companions)
        args.cutmix_window = manifest.cutmix_window
    else:
        if not args.images or not args.labels:
            raise UsageError("augment needs --images and --labels (or --replay)")
        image_dir = Path(args.images)
        label_dir = Path(args.labels)
        omega = OmegaSpace.from_string(args.omega) if args.omega else OmegaSpace.default()
        config = AugmentConfig(
            p=args.p,
            theta=args.theta,
            omega=omega,
            mode=Mode(args.mode),
            target=Target(args.target),
            seed=args.seed,
            per_component=args.per_component,
        )
        epochs = args.epochs
        seed = args.seed
    if not args.out:
        raise UsageError("augment needs --out")

    scan = dataio.scan_dataset(image_dir, label_dir, label_suffix=args.label_suffix)
    for line in scan.images_without_labels:
        print(f"unpaired image: {line}", file=sys.stderr)
    for line in scan.labels_without_images:
        print(f"unpaired label: {line}", file=sys.stderr)
    for line in scan.size_mismatches:
        print(f"size mismatch: {line}", file=sys.stderr)

    companions = tuple(args.companions.split(",")) if args.companions else ()
    for name in companions:
        if name not in _COMPANION_NAMES:
            raise UsageError(f"unknown companion {name!r}; choose from {_COMPANION_NAMES}")

    failures = []
    manifest = run_augment(
        scan.records,
        config,
        epochs,
        seed,
        Path(args.out),
        image_dir,
        label_dir,
        jobs=args.jobs,
        label_format=args.label_format,
        images_out=args.images_out,
        companions=companions,
        cutmix_window=args.cutmix_window,
        on_error=lambda record, exc: failures.append((record.sample_id, exc)),
    )

    if args.replay:
        expected = {(r.epoch, r.sample_id): r for r in dataio.Manifest.read(args.replay).records}
        for record in manifest.records:
            ref = expected.get((record.epoch, record.sample_id))
            if ref is not None and ref != record:
                print(f"replay drift on {record.sample_id} epoch {record.epoch}", file=sys.stderr)
                return EXIT_CONFIG

    applied = sum(1 for r in manifest.records if r.applied)
    suppressed = sum(len(r.suppressed_classes) for r in manifest.records)
    print(
        f"samples: {len(scan.records)}  epochs: {epochs}  "
        f"outputs: {len(manifest.records)}  applied: {applied}  "
        f"suppressed-class events: {suppressed}"
    )
    if failures:
        for sample_id, exc in failures:
            print(f"failed: {sample_id}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# --- perturb ----------------------------------------------------------------


def _parse_grid(kind: perturb.PerturbKind, text: str) -> list:
    values = [v.strip() for v in text.split(",") if v.strip()]
    if not values:
        raise UsageError("--grid must contain at least one value")
    if kind is perturb.PerturbKind.ELASTIC:
        out = []
        for v in values:
            if ":" in v:
                a, s = v.split(":", 1)
                out.append((float(a), float(s)))
            else:
                out.append((float(v), 5.0))
        return out
    return [int(v) for v in values]


def _default_grid(kind: perturb.PerturbKind) -> list:
    if kind is perturb.PerturbKind.ELASTIC:
        return [(p.alpha, p.sigma) for p in OmegaSpace.default().pairs]
    if kind is perturb.PerturbKind.SHIFT:
        return [0, 1, 2, 4, 8]
    return [perturb.normalize_kernel_size(k) for k in perturb.MORPH_KERNEL_PALETTE]


def cmd_perturb(args) -> int:
    try:
        kind = perturb.PerturbKind(args.kind)
    except ValueError:
        raise UsageError(f"invalid kind {args.kind!r}; choose from "
                         f"{[k.value for k in perturb.PerturbKind]}") from None
    target = perturb.PerturbTarget(args.target)
    grid = _parse_grid(kind, args.grid) if args.grid else _default_grid(kind)
    if kind in (perturb.PerturbKind.ERODE, perturb.PerturbKind.DILATE):
        grid = [perturb.normalize_kernel_size(k) for k in grid]
    specs = [perturb.PerturbSpec(kind=kind, magnitude=m, target=target) for m in grid]

    label_dir = Path(args.labels)
    if not label_dir.is_dir():
        raise NoPairsFound(f"label directory {label_dir} does not exist")
    paths = [
        p
        for p in sorted(label_dir.iterdir(), key=lambda p: p.name.encode())
        if p.is_file() and p.suffix.lower() in dataio.LABEL_EXTENSIONS
    ]
    if not paths:
        raise NoPairsFound(f"no label files in {label_dir}")
    labels = [dataio.load_label(p) for p in paths]

    rows = perturb.sweep(labels, specs, base_seed=args.seed)
    csv_text = perturb.sweep_to_csv(rows)
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)

    if args.save_perturbed:
        root = RngStream(args.seed)
        for spec_idx, spec in enumerate(specs):
            sub = Path(args.save_perturbed) / f"{spec.kind.value}_{spec.magnitude_text().replace(':', 'x')}"
            for sample_idx, (path, label) in enumerate(zip(paths, labels)):
                _, perturbed = perturb.apply_spec(None, label, spec, root.split(spec_idx, sample_idx))
                dataio.save_label(perturbed, sub / path.name)
    return EXIT_OK


# --- evaluate ---------------------------------------------------------------


def _label_files(root: Path) -> dict[str, Path]:
    if not root.is_dir():
        raise NoPairsFound(f"directory {root} does not exist")
    return {
        p.stem: p
        for p in sorted(root.iterdir(), key=lambda p: p.name.encode())
        if p.is_file() and p.suffix.lower() in dataio.LABEL_EXTENSIONS
    }


def cmd_evaluate(args) -> int:
    ref_files = _label_files(Path(args.ref))
    pred_files = _label_files(Path(args.pred))
    stems = sorted(set(ref_files) & set(pred_files), key=str.encode)
    if not stems:
        raise NoPairsFound("no common label files between --ref and --pred")
    for stem in sorted(set(ref_files) ^ set(pred_files), key=str.encode):
        print(f"unpaired: {stem}", file=sys.stderr)

    num_classes = args.classes
    if num_classes is None:
        top = 0
        for stem in stems:
            for path in (ref_files[stem], pred_files[stem]):
                top = max(top, max(dataio.load_label(path).classes_present(), default=-1))
        num_classes = top + 1 if top >= 0 else 1

    acc = ConfusionAccumulator(num_classes)
    for stem in stems:
        accumulate(acc, dataio.load_label(ref_files[stem]), dataio.load_label(pred_files[stem]))
    per_class, mean = miou(acc)

    lines = [("class", "iou")]
    for c, iou in enumerate(per_class):
        lines.append((str(c), "-" if math.isnan(iou) else f"{iou:.6f}"))
    lines.append(("mean", f"{mean:.6f}"))
    width = max(len(a) for a, _ in lines)
    for a, b in lines:
        print(f"{a:<{width}}  {b}")

    if args.csv:
        out_path = Path(args.csv)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        rows = ["class,iou"]
        rows += [f"{c},{'' if math.isnan(iou) else f'{iou:.6f}'}" for c, iou in enumerate(per_class)]
        rows.append(f"mean,{mean:.6f}")
        out_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return EXIT_OK


# --- inspect ----------------------------------------------------------------


def class_palette(value: int) -> tuple[int, int, int]:
    """Deterministic color for a class index (bit-shuffled channel ramps)."""
    r = g = b = 0
    v = value
    for shift in range(7, -1, -1):
        r |= ((v >> 0) & 1) << shift
        g |= ((v >> 1) & 1) << shift
        b |= ((v >> 2) & 1) << shift
        v >>= 3
    return r, g, b


def _colorize(label: LabelMap) -> np.ndarray:
    table = np.zeros((256, 3), dtype=np.uint8)
    for value in range(256):
        table[value] = class_palette(value)
    table[label.ignore_index] = (64, 64, 64)
    return table[label.data]


def cmd_inspect(args) -> int:
    label_dir = Path(args.labels)
    files = _label_files(label_dir)
    if not files:
        raise NoPairsFound(f"no label files in {label_dir}")
    omega = OmegaSpace.from_string(args.omega) if args.omega else OmegaSpace.default()
    config = AugmentConfig(
        p=args.p, theta=args.theta, omega=omega, mode=Mode(args.mode),
        target=Target.LABEL_ONLY, seed=args.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for index, stem in enumerate(sorted(files, key=str.encode)):
        label = dataio.load_label(files[stem])
        outcome = augment_sample(None, label, config, sample_stream(args.seed, 0, index))
        disagree = (label.data != outcome.label_out.data).astype(np.uint8) * 255
        gap = np.full((label.height, 2, 3), 255, dtype=np.uint8)
        panel = np.concatenate(
            [
                _colorize(label),
                gap,
                _colorize(outcome.label_out),
                gap,
                np.repeat(disagree[..., None], 3, axis=2),
            ],
            axis=1,
        )
        dataio.save_image(panel, out_dir / f"{stem}.png")
    print(f"wrote {len(files)} triptychs to {out_dir}")
    return EXIT_OK


# --- parser / dispatch ------------------------------------------------------


def build_parser() -> Parser:
    parser = Parser(prog="nseg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    aug = sub.add_parser("augment", help="deform dataset labels and write a manifest")
    aug.add_argument("--images", help="input image directory")
    aug.add_argument("--labels", help="input label directory")
    aug.add_argument("--out", help="output directory")
    aug.add_argument("--mode", choices=[m.value for m in Mode])
    aug.add_argument("--target", choices=[t.value for t in Target])
    aug.add_argument("--epochs", type=int)
    aug.add_argument("--seed", type=int)
    aug.add_argument("--p", type=float, help="transform probability")
    aug.add_argument("--theta", type=float, help="small-mask area threshold")
    aug.add_argument("--omega", help="alpha/sigma pool, e.g. '1,15,30,50,100x3,5,10'")
    aug.add_argument("--jobs", type=int, help="worker threads (default: cores)")
    aug.add_argument("--label-suffix", help="label stem = image stem + suffix")
    aug.add_argument("--label-format", choices=["png", "pgm"])
    aug.add_argument("--images-out", choices=["none", "copy", "symlink"],
                     help="how to materialize untouched input images in the output tree")
    aug.add_argument("--companions",
                     help="comma list of joint pre-transforms: cutout,cutmix,erasing")
    aug.add_argument("--cutmix-window", type=int,
                     help="shuffled window size for cutmix donors")
    aug.add_argument("--per-component", action="store_const", const=True,
                     help="suppress per connected component instead of per class")
    aug.add_argument("--replay", help="manifest to reproduce (seed/config/dirs from its header)")
    aug.add_argument("--config", help="JSON file with defaults for these flags")
    aug.set_defaults(func=cmd_augment)

    per = sub.add_parser("perturb", help="sweep label perturbations and report mean mIoU")
    per.add_argument("--labels", required=True)
    per.add_argument("--kind", required=True, help="elastic | erode | dilate | shift")
    per.add_argument("--grid",
                     help="comma list of magnitudes; elastic accepts alpha:sigma pairs")
    per.add_argument("--target", choices=[t.value for t in perturb.PerturbTarget])
    per.add_argument("--seed", type=int)
    per.add_argument("--out", help="CSV path (default: stdout)")
    per.add_argument("--save-perturbed",
                     help="also write perturbed labels under this directory")
    per.add_argument("--config", help="JSON file with defaults for these flags")
    per.set_defaults(func=cmd_perturb)

    ev = sub.add_parser("evaluate", help="per-class IoU and mean between two label trees")
    ev.add_argument("--ref", required=True, help="reference label directory")
    ev.add_argument("--pred", required=True, help="other label directory")
    ev.add_argument("--classes", type=int, help="class count (default: infer)")
    ev.add_argument("--csv", help="also write the table as CSV")
    ev.add_argument("--config", help="JSON file with defaults for these flags")
    ev.set_defaults(func=cmd_evaluate)

    ins = sub.add_parser("inspect", help="render label / deformed label / disagreement panels")
    ins.add_argument("--labels", required=True)
    ins.add_argument("--out", required=True)
    ins.add_argument("--mode", choices=[m.value for m in Mode])
    ins.add_argument("--p", type=float)
    ins.add_argument("--theta", type=float)
    ins.add_argument("--omega")
    ins.add_argument("--seed", type=int)
    ins.add_argument("--config", help="JSON file with defaults for these flags")
    ins.set_defaults(func=cmd_inspect)

    return parser


# Paper-era defaults, applied after flag and config-file resolution.
_HARD_DEFAULTS = {
    "mode": Mode.NSEGMENT_PLUS.value,
    "target": Target.LABEL_ONLY.value,
    "epochs": 1,
    "p": 0.5,
    "theta": 1000.0,
    "label_suffix": "",
    "label_format": "png",
    "images_out": "none",
    "companions": "",
    "cutmix_window": 4,
    "per_component": False,
}


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill flags the command line left unset (None) from a JSON object."""
    if not getattr(args, "config", None):
        return
    try:
        values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
    if not isinstance(values, dict):
        raise UsageError(f"config file {args.config} must hold a JSON object")
    for key, value in values.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)


def _resolve_defaults(args: argparse.Namespace) -> None:
    if getattr(args, "seed", None) is None:
        env = os.environ.get("NSEG_SEED")
        args.seed = int(env) if env else 0
    if hasattr(args, "jobs") and args.jobs is None:
        args.jobs = os.cpu_count() or 1
    for attr, value in _HARD_DEFAULTS.items():
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)
    if getattr(args, "jobs", 1) < 1:
        raise UsageError("--jobs must be >= 1")
    if getattr(args, "epochs", 1) < 1:
        raise UsageError("--epochs must be >= 1")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args)
        _resolve_defaults(args)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidParam, DimensionMismatch, NoData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoPairsFound, UnsupportedFormat, CorruptFile, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NsegmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
