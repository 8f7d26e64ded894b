"""Acceptance suite: one test per contract criterion, at its stated tolerance.

Run ``pytest tests/test_acceptance.py``; the terminal summary prints one
PASS/FAIL line per criterion (hook in conftest.py).
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from nsegment import dataio
from nsegment.cli import main
from nsegment.fields import build_displacement, gaussian_kernel, smooth_field
from nsegment.metrics import ConfusionAccumulator, accumulate, miou
from nsegment.perturb import (
    PerturbKind,
    PerturbSpec,
    perturb_morph,
    perturb_shift,
    sweep,
)
from nsegment.pipeline import augment_sample, nsegment, nsegment_plus
from nsegment.rng import RngStream
from nsegment.types import (
    AugmentConfig,
    ClassMask,
    DisplacementField,
    LabelMap,
    Mode,
    OmegaSpace,
    Target,
    floor_half,
)
from nsegment.warp import suppress_small_mask, warp_label
from nsegment.companions import cutmix, cutout, random_erasing

from conftest import make_random_image, make_random_label, make_stripe_label
from oracles import smooth_field_reference, warp_label_reference

OMEGA_PAIRS = list(OmegaSpace.default().pairs)


def test_c01_kernel_size_law():
    for sigma, side in ((3, 19), (5, 31), (10, 61)):
        kernel = gaussian_kernel(sigma)
        assert kernel.side == side
        assert abs(kernel.dense().sum() - 1.0) <= 1e-6


def test_c02_convolution_oracle():
    gen = np.random.default_rng(2024)
    for i in range(50):
        raw = 2.0 * gen.random((64, 64)) - 1.0
        params = OMEGA_PAIRS[i % 15]
        ours = smooth_field(raw, params.alpha, params.sigma)
        dense = smooth_field_reference(raw, params.alpha, params.sigma)
        assert np.abs(ours.astype(np.float64) - dense).max() <= 1e-5


def test_c03_field_bound_and_linearity():
    root = RngStream(33)
    for i in range(1000):
        params = OMEGA_PAIRS[i % 15]
        field = build_displacement(32, 32, params, root.split(i))
        assert max(np.abs(field.dx).max(), np.abs(field.dy).max()) <= params.alpha
    gen = np.random.default_rng(7)
    for params in OMEGA_PAIRS:
        raw = 2.0 * gen.random((32, 32)) - 1.0
        doubled = smooth_field(raw, 2.0 * params.alpha, params.sigma)
        single = smooth_field(raw, params.alpha, params.sigma)
        assert np.abs(doubled - 2.0 * single).max() <= 1e-6


def test_c04_warp_oracle():
    gen = np.random.default_rng(41)
    for _ in range(500):
        lab = make_random_label(gen, 8, 8, num_classes=4, ignore_frac=0.1)
        alpha = float(gen.uniform(0.0, 5.0))
        dx = ((2.0 * gen.random((8, 8)) - 1.0) * alpha).astype(np.float32)
        dy = ((2.0 * gen.random((8, 8)) - 1.0) * alpha).astype(np.float32)
        field = DisplacementField(dx, dy, alpha=alpha)
        assert np.array_equal(
            warp_label(lab, field).data, warp_label_reference(lab, field).data
        )
    for _ in range(1000):
        lab = make_random_label(gen, 32, 32, num_classes=6, ignore_frac=0.05)
        out = warp_label(lab, DisplacementField.zero(32, 32))
        assert np.array_equal(out.data, lab.data)


def test_c05_suppression_trace():
    ones = np.ones((100, 100), np.float32)
    field = DisplacementField(ones, ones.copy(), alpha=15.0)
    bits = np.zeros((100, 100), bool)
    bits[10:21, 10:21] = True
    out = suppress_small_mask(ClassMask(bits, 1), field, alpha=15.0)
    expected = np.zeros((100, 100), bool)
    expected[3:28, 3:28] = True
    assert np.array_equal(out.dx == 0.0, expected)
    assert np.array_equal(out.dy == 0.0, expected)

    ones = np.ones((50, 50), np.float32)
    field = DisplacementField(ones, ones.copy(), alpha=10.0)
    bits = np.zeros((50, 50), bool)
    bits[0, 0] = bits[49, 49] = True
    out = suppress_small_mask(ClassMask(bits, 1), field, alpha=10.0)
    assert not out.dx.any() and not out.dy.any()

    gen = np.random.default_rng(3)
    lab = make_random_label(gen, 40, 40, num_classes=3)
    base = DisplacementField(
        gen.random((40, 40)).astype(np.float32), gen.random((40, 40)).astype(np.float32),
        alpha=9.0,
    )
    masks = [ClassMask.from_label(lab, c) for c in lab.classes_present()]
    outputs = []
    for order in itertools.permutations(masks):
        field = base
        for mask in order:
            field = suppress_small_mask(mask, field, alpha=9.0)
        outputs.append(field)
    for other in outputs[1:]:
        assert np.array_equal(outputs[0].dx, other.dx)
        assert np.array_equal(outputs[0].dy, other.dy)


def _small_class_label(gen) -> LabelMap:
    # stripes of at most 15 rows on width 64: every class area <= 960 and
    # the stripe bboxes tile (hence cover) the raster
    rows = []
    remaining = 64
    while remaining > 0:
        if remaining <= 15:
            step = remaining
        else:
            step = int(gen.integers(4, 16))
            if remaining - step < 4:
                step = remaining - 4
        rows.append(step)
        remaining -= step
    lab = make_stripe_label(64, 64, rows)
    if gen.random() < 0.5:
        lab = LabelMap(np.ascontiguousarray(lab.data.T), num_classes=lab.num_classes)
    return lab


def test_c06_small_mask_preservation():
    gen = np.random.default_rng(11)
    cfg = AugmentConfig(p=1.0, theta=1000.0, mode=Mode.NSEGMENT_PLUS)
    for i in range(100):
        lab = _small_class_label(gen)
        out = nsegment_plus(None, lab, cfg, RngStream(1000 + i))
        assert out.applied
        assert np.array_equal(out.label_out.data, lab.data)
        assert out.suppressed_classes == tuple(range(lab.num_classes))
    for i in range(20):
        data = np.zeros((64, 64), np.uint8)
        x0 = int(gen.integers(0, 54))
        y0 = int(gen.integers(0, 54))
        data[y0 : y0 + 10, x0 : x0 + 10] = 1  # area 100 <= theta; class 0 > theta
        lab = LabelMap(data, num_classes=2)
        out = nsegment_plus(None, lab, cfg, RngStream(5000 + i))
        assert out.suppressed_classes == (1,)
        eps = floor_half(out.params_used.alpha)
        ys = slice(max(y0 - eps, 0), min(y0 + 9 + eps, 63) + 1)
        xs = slice(max(x0 - eps, 0), min(x0 + 9 + eps, 63) + 1)
        assert np.array_equal(out.label_out.data[ys, xs], lab.data[ys, xs])


def test_c07_image_immutability():
    gen = np.random.default_rng(77)
    for i in range(1000):
        w = int(gen.integers(8, 25))
        h = int(gen.integers(8, 25))
        img = make_random_image(gen, w, h)
        lab = make_random_label(gen, w, h, num_classes=int(gen.integers(1, 6)))
        cfg = AugmentConfig(
            p=float(gen.random()),
            theta=float(gen.integers(0, 2000)),
            mode=Mode.NSEGMENT_PLUS if i % 2 else Mode.NSEGMENT,
            target=Target.LABEL_ONLY,
        )
        out = augment_sample(img, lab, cfg, RngStream(i))
        assert out.image_out is img
        assert np.array_equal(out.image_out, img)


def test_c08_stochasticity_contract(tmp_path):
    lab = LabelMap(np.zeros((2, 2), np.uint8), num_classes=1)
    root = RngStream(8080)
    applied = sum(
        augment_sample(None, lab, AugmentConfig(p=0.5), root.split(i)).applied
        for i in range(10_000)
    )
    assert 0.47 <= applied / 10_000 <= 0.53

    cfg = AugmentConfig(p=1.0)
    counts = dict.fromkeys(OMEGA_PAIRS, 0)
    for i in range(15_000):
        out = augment_sample(None, lab, cfg, root.split(100_000 + i))
        counts[out.params_used] += 1
    for pair, count in counts.items():
        assert 800 <= count <= 1200, (pair, count)

    gen = np.random.default_rng(5)
    image_dir, label_dir = tmp_path / "img", tmp_path / "ann"
    for i in range(8):
        dataio.save_image(make_random_image(gen, 24, 24), image_dir / f"s{i}.png")
        dataio.save_label(make_random_label(gen, 24, 24, 4), label_dir / f"s{i}.png")
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main([
            "augment", "--images", str(image_dir), "--labels", str(label_dir),
            "--out", str(out), "--epochs", "2", "--seed", "606",
        ]) == 0
        runs.append((out / "manifest.jsonl").read_bytes())
    assert runs[0] == runs[1]


def test_c09_class_closure():
    gen = np.random.default_rng(90)
    lab_cfg = AugmentConfig(p=1.0, mode=Mode.NSEGMENT)
    plus_cfg = AugmentConfig(p=1.0, theta=200.0, mode=Mode.NSEGMENT_PLUS)
    for i in range(1000):
        lab = make_random_label(gen, 16, 16, num_classes=5, ignore_frac=0.1)
        allowed = set(np.unique(lab.data).tolist())
        basic = nsegment(None, lab, lab_cfg, RngStream(2 * i))
        assert set(np.unique(basic.label_out.data).tolist()) <= allowed
        plus = nsegment_plus(None, lab, plus_cfg, RngStream(2 * i + 1))
        assert set(np.unique(plus.label_out.data).tolist()) <= allowed

    for i in range(1000):
        img = make_random_image(gen, 24, 24)
        lab = make_random_label(gen, 24, 24, num_classes=4, ignore_frac=0.05)
        allowed = set(np.unique(lab.data).tolist()) | {255}
        stream = RngStream(10_000 + i)
        _, out = cutout(img, lab, None, stream.split(0))
        assert set(np.unique(out.data).tolist()) <= allowed
        _, out = random_erasing(img, lab, None, stream.split(1))
        assert set(np.unique(out.data).tolist()) <= allowed
        donor_lab = make_random_label(gen, 24, 24, num_classes=3)
        _, out = cutmix(img, lab, make_random_image(gen, 24, 24), donor_lab, None,
                        stream.split(2))
        assert set(np.unique(out.data).tolist()) <= allowed | set(
            np.unique(donor_lab.data).tolist()
        )
        kind = PerturbKind.ERODE if i % 2 else PerturbKind.DILATE
        out = perturb_morph(lab, kind, int(gen.choice([3, 5, 7])))
        assert set(np.unique(out.data).tolist()) <= allowed
        out = perturb_shift(lab, int(gen.integers(-8, 9)), int(gen.integers(-8, 9)))
        assert set(np.unique(out.data).tolist()) <= allowed


def test_c10_metrics():
    gen = np.random.default_rng(10)
    lab = make_random_label(gen, 16, 16, num_classes=4)
    _, mean = miou(accumulate(ConfusionAccumulator(4), lab, lab))
    assert mean == 1.0

    ref = np.zeros((4, 4), np.uint8)
    ref[:, 2:] = 1
    acc = accumulate(
        ConfusionAccumulator(2),
        LabelMap(ref, 2),
        LabelMap(np.zeros((4, 4), np.uint8), 2),
    )
    per_class, mean = miou(acc)
    assert per_class == [0.5, 0.0]
    assert mean == 0.25

    pairs = [
        (make_random_label(gen, 8, 8, 3, 0.1), make_random_label(gen, 8, 8, 3, 0.1))
        for _ in range(8)
    ]
    whole = ConfusionAccumulator(3)
    for a, b in pairs:
        accumulate(whole, a, b)
    for cut in (1, 3, 5):
        left, right = ConfusionAccumulator(3), ConfusionAccumulator(3)
        for a, b in pairs[:cut]:
            accumulate(left, a, b)
        for a, b in pairs[cut:]:
            accumulate(right, a, b)
        merged = left.merge(right)
        assert np.array_equal(merged.counts, whole.counts)
        assert merged.ignored == whole.ignored


def test_c11_perturb_harness():
    def square(side):
        data = np.zeros((64, 64), np.uint8)
        lo = (64 - side) // 2
        data[lo : lo + side, lo : lo + side] = 1
        return LabelMap(data, num_classes=2)

    labels = [square(s) for s in (16, 20, 24)]
    zero_rows = sweep(labels, [PerturbSpec(PerturbKind.SHIFT, 0),
                               PerturbSpec(PerturbKind.ELASTIC, (0.0, 3.0))])
    for row in zero_rows:
        assert row.mean_miou == pytest.approx(1.0)

    rows = sweep(labels, [PerturbSpec(PerturbKind.SHIFT, m) for m in (0, 1, 2, 4, 8)])
    values = [row.mean_miou for row in rows]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] < values[0]

    lab = square(20)
    for k in (3, 7, 15):
        opened = perturb_morph(perturb_morph(lab, PerturbKind.ERODE, k),
                               PerturbKind.DILATE, k)
        assert np.array_equal(opened.data, lab.data)


def test_c12_end_to_end_determinism(tmp_path):
    gen = np.random.default_rng(12)
    image_dir, label_dir = tmp_path / "img", tmp_path / "ann"
    for i in range(50):
        dataio.save_image(make_random_image(gen, 32, 32), image_dir / f"s{i:03d}.png")
        dataio.save_label(
            make_random_label(gen, 32, 32, num_classes=5, ignore_frac=0.05),
            label_dir / f"s{i:03d}.png",
        )
    trees = []
    for name in ("one", "two"):
        out = tmp_path / name
        code = main([
            "augment", "--images", str(image_dir), "--labels", str(label_dir),
            "--out", str(out), "--mode", "nsegment+", "--epochs", "2",
            "--seed", "424242", "--jobs", "4" if name == "one" else "1",
        ])
        assert code == 0
        trees.append({
            str(p.relative_to(out)): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file()
        })
    assert trees[0] == trees[1]
