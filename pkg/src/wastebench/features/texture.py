"""Gray-level co-occurrence properties and uniform rotation-invariant LBP."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateInput
from .block import FeatureBlock
from ..image import check_image, to_gray

GLCM_LEVELS = 32

# Offsets (dr, dc) for angles 0, 45, 90, 135 degrees.
_GLCM_OFFSETS = [(0, 1), (-1, 1), (-1, 0), (-1, -1)]


def _glcm_matrix(levels: np.ndarray, fg: np.ndarray, off: tuple[int, int]) -> np.ndarray:
    h, w = levels.shape
    dr, dc = off
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    src = (slice(r0, r1), slice(c0, c1))
    dst = (slice(r0 + dr, r1 + dr), slice(c0 + dc, c1 + dc))
    both = fg[src] & fg[dst]
    a = levels[src][both].astype(np.int64)
    b = levels[dst][both].astype(np.int64)
    counts = np.bincount(a * GLCM_LEVELS + b, minlength=GLCM_LEVELS ** 2)
    mat = counts.reshape(GLCM_LEVELS, GLCM_LEVELS).astype(np.float64)
    return mat + mat.T


def _glcm_props(mat: np.ndarray) -> np.ndarray:
    total = mat.sum()
    if total == 0:
        return np.zeros(5)
    p = mat / total
    idx = np.arange(GLCM_LEVELS, dtype=np.float64)
    diff = idx[:, None] - idx[None, :]
    contrast = float((p * diff ** 2).sum())
    dissimilarity = float((p * np.abs(diff)).sum())
    homogeneity = float((p / (1.0 + diff ** 2)).sum())
    energy = float(np.sqrt((p ** 2).sum()))
    pi = p.sum(axis=1)
    pj = p.sum(axis=0)
    mi = float((idx * pi).sum())
    mj = float((idx * pj).sum())
    si = float(np.sqrt((pi * (idx - mi) ** 2).sum()))
    sj = float(np.sqrt((pj * (idx - mj) ** 2).sum()))
    if si * sj > 0:
        correlation = float((p * (idx[:, None] - mi) * (idx[None, :] - mj)).sum() / (si * sj))
    else:
        correlation = 0.0
    return np.array([contrast, dissimilarity, homogeneity, energy, correlation])


def extract_glcm(img: np.ndarray, mask: np.ndarray) -> FeatureBlock:
    """20 values: contrast/dissimilarity/homogeneity/energy/correlation per angle."""
    img = check_image(img)
    fg = np.asarray(mask).astype(bool)
    if not fg.any():
        raise DegenerateInput("glcm: mask selects no pixels")
    levels = np.clip((to_gray(img) // 8.0).astype(np.int64), 0, GLCM_LEVELS - 1)
    mats = [_glcm_matrix(levels, fg, off) for off in _GLCM_OFFSETS]
    if all(m.sum() == 0 for m in mats):
        raise DegenerateInput("glcm: no co-occurring foreground pairs")
    return FeatureBlock("glcm", np.concatenate([_glcm_props(m) for m in mats]))


def lbp_offsets(points: int = 8, radius: float = 1.0) -> np.ndarray:
    """Sampling offsets (dr, dc); neighbor 0 sits due east, going counterclockwise."""
    angles = 2.0 * np.pi * np.arange(points) / points
    return np.stack([-radius * np.sin(angles), radius * np.cos(angles)], axis=1)


def _bilinear_plane(gray: np.ndarray, dr: float, dc: float) -> np.ndarray:
    """Sample (r + dr, c + dc) for every interior pixel; |dr|,|dc| <= 1."""
    h, w = gray.shape
    rows = np.arange(1, h - 1, dtype=np.float64) + dr
    cols = np.arange(1, w - 1, dtype=np.float64) + dc
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    tl = gray[np.ix_(r0, c0)]
    tr = gray[np.ix_(r0, c1)]
    bl = gray[np.ix_(r1, c0)]
    br = gray[np.ix_(r1, c1)]
    return tl * (1 - fr) * (1 - fc) + tr * (1 - fr) * fc + bl * fr * (1 - fc) + br * fr * fc


def _uniform_bin_table() -> np.ndarray:
    """Map 8-bit patterns to 10 bins: popcount for uniform patterns, else 9."""
    table = np.empty(256, dtype=np.int64)
    for code in range(256):
        bits = [(code >> i) & 1 for i in range(8)]
        transitions = sum(bits[i] != bits[(i + 1) % 8] for i in range(8))
        table[code] = sum(bits) if transitions <= 2 else 9
    return table


_UNIFORM_TABLE = _uniform_bin_table()


def extract_lbp(img: np.ndarray, mask: np.ndarray) -> FeatureBlock:
    """10-bin normalized histogram of uniform rotation-invariant LBP codes."""
    img = check_image(img)
    fg = np.asarray(mask).astype(bool)
    gray = to_gray(img)
    interior = fg[1:-1, 1:-1]
    if not interior.any():
        raise DegenerateInput("lbp: no interior foreground pixels")
    center = gray[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.int64)
    for bit, (dr, dc) in enumerate(lbp_offsets()):
        codes |= (_bilinear_plane(gray, dr, dc) >= center).astype(np.int64) << bit
    bins = _UNIFORM_TABLE[codes[interior]]
    hist = np.bincount(bins, minlength=10).astype(np.float64)
    return FeatureBlock("lbp", hist / hist.sum())
