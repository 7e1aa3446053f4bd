"""Image primitives: decode, resize, augment, colour conversions.

An image is an ``(h, w, 3)`` uint8 numpy array in RGB channel order,
row-major.  Greyscale sources are replicated to three channels at decode
time so every downstream stage sees the same buffer shape.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, DecodeError, IoError

AugmentPolicy = Union[str, Tuple[str, float]]

AUGMENT_KINDS = ("hflip", "rotation", "brightness")
ROTATION_RANGE_DEG = 15.0   # rotation amounts drawn from [-15, +15] degrees
BRIGHTNESS_RANGE = 0.10     # brightness factors drawn from [-10%, +10%]


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate the (h, w, 3) uint8 contract and return the array."""
    a = np.asarray(img)
    if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
        raise ConfigError(f"expected (h, w, 3) uint8 image, got shape {a.shape} dtype {a.dtype}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ConfigError("empty image")
    return a


def load_image(path: Union[str, Path]) -> np.ndarray:
    """Decode an image file to an RGB uint8 buffer."""
    p = Path(path)
    try:
        with Image.open(p) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError as exc:
        raise IoError(f"cannot read {p}: {exc}") from exc
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode {p}: {exc}") from exc


def image_seed(img: np.ndarray) -> int:
    """Deterministic 64-bit seed derived from pixel content."""
    digest = hashlib.blake2b(img.tobytes(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seeded_rng(*parts: int) -> np.random.Generator:
    """Generator seeded from a tuple of integers, stable across runs and platforms."""
    return np.random.default_rng([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])


def _sample_bilinear(chan: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear lookup of float coordinates in a 2-D float array, edge-clamped."""
    h, w = chan.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    top = chan[y0, x0] * (1.0 - fx) + chan[y0, x1] * fx
    bot = chan[y1, x0] * (1.0 - fx) + chan[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resize_bilinear(img: np.ndarray, side: int = 400) -> np.ndarray:
    """Resize to side x side with bilinear interpolation (pixel-centre mapping).

    An image already at the target size is returned unchanged, bit for bit.
    """
    img = check_image(img)
    if side < 1:
        raise ConfigError(f"side must be >= 1, got {side}")
    h, w = img.shape[:2]
    if h == side and w == side:
        return img
    ys = (np.arange(side, dtype=np.float64) + 0.5) * (h / side) - 0.5
    xs = (np.arange(side, dtype=np.float64) + 0.5) * (w / side) - 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    out = np.empty((side, side, 3), dtype=np.float64)
    for c in range(3):
        out[:, :, c] = _sample_bilinear(img[:, :, c].astype(np.float64), gy, gx)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _rotate(img: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image centre, bilinear sampling, black fill, same dims."""
    h, w = img.shape[:2]
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    gy, gx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    # inverse map: output pixel -> source position
    dy, dx = gy - cy, gx - cx
    sx = cx + c * dx + s * dy
    sy = cy - s * dx + c * dy
    inside = (sx >= -0.5) & (sx <= w - 0.5) & (sy >= -0.5) & (sy <= h - 0.5)
    out = np.zeros((h, w, 3), dtype=np.float64)
    for ch in range(3):
        out[:, :, ch] = _sample_bilinear(img[:, :, ch].astype(np.float64), sy, sx)
    out[~inside] = 0.0
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def augment(img: np.ndarray, policy: AugmentPolicy, seed: int = 0) -> np.ndarray:
    """Apply one augmentation drawn from {hflip, rotation +-15 deg, brightness +-10%}.

    ``policy`` is a kind name or a ``(kind, amount)`` pair; with a bare kind
    the amount is drawn uniformly from the kind's range using ``seed``.
    Deterministic given (policy, seed).
    """
    img = check_image(img)
    if isinstance(policy, str):
        kind, amount = policy, None
    else:
        kind, amount = policy[0], float(policy[1])
    if kind not in AUGMENT_KINDS:
        raise ConfigError(f"unknown augmentation {kind!r}, expected one of {AUGMENT_KINDS}")
    if kind == "hflip":
        return img[:, ::-1].copy()
    rng = seeded_rng(seed, AUGMENT_KINDS.index(kind))
    if kind == "rotation":
        deg = amount if amount is not None else float(rng.uniform(-ROTATION_RANGE_DEG, ROTATION_RANGE_DEG))
        if abs(deg) > ROTATION_RANGE_DEG + 1e-9:
            raise ConfigError(f"rotation amount {deg} outside +-{ROTATION_RANGE_DEG} degrees")
        return _rotate(img, deg)
    frac = amount if amount is not None else float(rng.uniform(-BRIGHTNESS_RANGE, BRIGHTNESS_RANGE))
    if abs(frac) > BRIGHTNESS_RANGE + 1e-9:
        raise ConfigError(f"brightness amount {frac} outside +-{BRIGHTNESS_RANGE}")
    scaled = np.rint(img.astype(np.float64) * (1.0 + frac))
    return np.clip(scaled, 0, 255).astype(np.uint8)


def to_gray(img: np.ndarray) -> np.ndarray:
    """Luma greyscale (0.299 R + 0.587 G + 0.114 B) as float64 in [0, 255]."""
    img = check_image(img)
    f = img.astype(np.float64)
    return 0.299 * f[:, :, 0] + 0.587 * f[:, :, 1] + 0.114 * f[:, :, 2]


def to_hsv_bytes(img: np.ndarray) -> np.ndarray:
    """RGB -> HSV with every channel rescaled to [0, 255] float64.

    H covers [0, 360) scaled by 255/360, S covers [0, 1] scaled by 255,
    V is max(R, G, B).  A uniform byte scale keeps the histogram binning
    identical across channels.
    """
    img = check_image(img)
    f = img.astype(np.float64) / 255.0
    r, g, b = f[:, :, 0], f[:, :, 1], f[:, :, 2]
    v = np.max(f, axis=2)
    cmin = np.min(f, axis=2)
    delta = v - cmin
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)
    h = np.zeros_like(v)
    nz = delta > 0
    rmax = nz & (v == r)
    gmax = nz & ~rmax & (v == g)
    bmax = nz & ~rmax & ~gmax
    d = np.where(nz, delta, 1.0)
    h[rmax] = (((g - b) / d) % 6.0)[rmax]
    h[gmax] = (((b - r) / d) + 2.0)[gmax]
    h[bmax] = (((r - g) / d) + 4.0)[bmax]
    h *= 60.0  # degrees in [0, 360)
    out = np.stack([h * (255.0 / 360.0), s * 255.0, v * 255.0], axis=2)
    return out


def write_pgm(path: Union[str, Path], mask: np.ndarray) -> None:
    """Write a binary mask as an 8-bit P5 PGM (foreground 255, background 0)."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ConfigError(f"mask must be 2-D, got shape {m.shape}")
    data = (m.astype(bool).astype(np.uint8) * 255).tobytes()
    header = f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii")
    try:
        Path(path).write_bytes(header + data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
