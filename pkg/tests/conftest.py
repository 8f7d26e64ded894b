"""Shared fixtures, synthetic data builders and the acceptance summary hook."""

from __future__ import annotations

import numpy as np
import pytest

from nsegment.types import DisplacementField, LabelMap


def make_random_label(gen: np.random.Generator, width: int, height: int,
                      num_classes: int = 4, ignore_frac: float = 0.0) -> LabelMap:
    data = gen.integers(0, num_classes, size=(height, width)).astype(np.uint8)
    if ignore_frac > 0:
        data[gen.random((height, width)) < ignore_frac] = 255
    return LabelMap(data, num_classes=num_classes)


def make_stripe_label(width: int, height: int, rows_per_stripe,
                      num_classes: int | None = None) -> LabelMap:
    """Horizontal stripes, one class per stripe, tiling the raster."""
    data = np.zeros((height, width), dtype=np.uint8)
    y = 0
    cls = 0
    for rows in rows_per_stripe:
        data[y : y + rows] = cls
        y += rows
        cls += 1
    if y < height:
        data[y:] = cls
        cls += 1
    return LabelMap(data, num_classes=num_classes or cls)


def make_random_field(gen: np.random.Generator, width: int, height: int,
                      alpha: float) -> DisplacementField:
    dx = (2.0 * gen.random((height, width)) - 1.0) * alpha
    dy = (2.0 * gen.random((height, width)) - 1.0) * alpha
    return DisplacementField(dx.astype(np.float32), dy.astype(np.float32), alpha=alpha)


def make_random_image(gen: np.random.Generator, width: int, height: int) -> np.ndarray:
    return gen.integers(0, 256, size=(height, width, 3)).astype(np.uint8)


@pytest.fixture
def gen() -> np.random.Generator:
    return np.random.default_rng(20240817)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            if report.when == "call" and "test_acceptance.py" in report.nodeid:
                rows.append((report.nodeid.split("::")[-1], outcome == "passed"))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, ok in sorted(rows):
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
