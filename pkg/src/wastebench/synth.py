"""Synthetic data generators: a 3-shape image corpus and an informative-dims
feature benchmark. Both stand in for external datasets in tests and CI."""

from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, IoError
from .image import seeded_rng

SHAPES = ("disc", "square", "stripes")


def _class_color(class_id: int, n_classes: int) -> np.ndarray:
    hue = class_id / n_classes
    r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 0.85)
    return np.array([r, g, b]) * 255.0


def _draw_sample(class_id: int, n_classes: int, side: int, rng: np.random.Generator) -> np.ndarray:
    img = 20.0 + rng.uniform(-10.0, 10.0, size=(side, side, 3))
    color = _class_color(class_id, n_classes) + rng.uniform(-15.0, 15.0, size=3)
    cy, cx = (side / 2 + rng.uniform(-0.08 * side, 0.08 * side, size=2)).tolist()
    half = rng.uniform(0.20 * side, 0.30 * side)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    shape = SHAPES[class_id % len(SHAPES)]
    if shape == "disc":
        region = (yy - cy) ** 2 + (xx - cx) ** 2 <= half ** 2
    elif shape == "square":
        region = (np.abs(yy - cy) <= half) & (np.abs(xx - cx) <= half)
    else:
        region = (np.abs(yy - cy) <= half) & (np.abs(xx - cx) <= half)
        dark = ((xx - cx + half) // 3).astype(np.int64) % 2 == 1
        region_dark = region & dark
        region = region & ~dark
        img[region_dark] = color * 0.45 + rng.uniform(-6.0, 6.0, size=(int(region_dark.sum()), 3))
    img[region] = color + rng.uniform(-6.0, 6.0, size=(int(region.sum()), 3))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def synth_corpus(out_dir, n_classes: int = 3, per_class: int = 100,
                 seed: int = 0, side: int = 64) -> dict:
    """Write a PNG corpus of solid-color shapes, one directory per class.

    Classes cycle through disc/square/stripes with evenly spaced hues, so
    color statistics and contour geometry both separate them.
    """
    if n_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {n_classes}")
    if per_class < 1:
        raise ConfigError(f"need at least 1 image per class, got {per_class}")
    if side < 16:
        raise ConfigError(f"side must be >= 16, got {side}")
    root = Path(out_dir)
    counts = {}
    for c in range(n_classes):
        name = f"class{c:02d}_{SHAPES[c % len(SHAPES)]}"
        cdir = root / name
        try:
            cdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create {cdir}: {exc}") from exc
        for i in range(per_class):
            img = _draw_sample(c, n_classes, side, seeded_rng(seed, c, i))
            try:
                Image.fromarray(img, mode="RGB").save(cdir / f"img_{i:04d}.png")
            except OSError as exc:
                raise IoError(f"cannot write image under {cdir}: {exc}") from exc
        counts[name] = per_class
    return counts


def make_informative_noise(n: int, d: int, informative: int, seed: int = 0,
                           n_classes: int = 2, amplitude: float = 2.5):
    """Gaussian noise matrix with class-marker mean shifts on a known subset.

    Informative dim t marks class t % n_classes with +amplitude. Returns
    (x, y, informative_indices); rows are shuffled, classes balanced.
    """
    if not 0 < informative <= d:
        raise ConfigError(f"informative must be in [1, {d}], got {informative}")
    if n < n_classes or n_classes < 2:
        raise ConfigError(f"invalid sizes n={n}, classes={n_classes}")
    rng = np.random.default_rng(seed)
    y = rng.permutation(np.arange(n) % n_classes)
    x = rng.standard_normal((n, d))
    idx = rng.permutation(d)[:informative]
    idx.sort()
    for t, j in enumerate(idx):
        x[y == (t % n_classes), j] += amplitude
    return x, y.astype(np.int64), idx
