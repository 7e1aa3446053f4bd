"""Contour geometry of the dominant region and Hu moment invariants."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from ..errors import DegenerateInput
from .block import FeatureBlock
from ..image import check_image, to_gray

_SQRT2 = math.sqrt(2.0)

# Clockwise Moore neighborhood starting east, as (dr, dc).
_MOORE = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]


def _largest_component(fg: np.ndarray) -> np.ndarray:
    labels, count = ndimage.label(fg, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        raise DegenerateInput("contour: mask selects no pixels")
    if count == 1:
        return labels == 1
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, count + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def _trace_perimeter(comp: np.ndarray) -> float:
    """Moore boundary trace; axis steps count 1, diagonal steps sqrt(2)."""
    rows, cols = np.nonzero(comp)
    if len(rows) == 1:
        return 0.0
    padded = np.zeros((comp.shape[0] + 2, comp.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = comp
    start = (int(rows[0]) + 1, int(cols[0]) + 1)  # topmost, then leftmost
    # Backtrack begins at the pixel west of the start, which is background.
    cur = start
    back = (start[0], start[1] - 1)
    perimeter = 0.0
    first_move = None
    while True:
        base = _MOORE.index((back[0] - cur[0], back[1] - cur[1]))
        nxt = None
        for step in range(1, 9):
            dr, dc = _MOORE[(base + step) % 8]
            cand = (cur[0] + dr, cur[1] + dc)
            if padded[cand]:
                nxt = cand
                break
            back = cand
        if nxt is None:  # isolated pixel, guarded above
            return 0.0
        move = (nxt[0] - cur[0], nxt[1] - cur[1])
        if first_move is None:
            first_move = (cur, move)
        elif (cur, move) == first_move:
            break
        perimeter += _SQRT2 if move[0] != 0 and move[1] != 0 else 1.0
        back = cur
        cur = nxt
    return perimeter


def _hull_pixel_count(comp: np.ndarray) -> int:
    """Pixels of the bounding box whose centers fall inside the convex hull."""
    rows, cols = np.nonzero(comp)
    pts = np.stack([cols, rows], axis=1).astype(np.float64)
    try:
        hull = ConvexHull(pts)
    except QhullError:
        # Collinear region: integer points on the segment between extremes.
        dr = int(rows.max() - rows.min())
        dc = int(cols.max() - cols.min())
        return math.gcd(dr, dc) + 1 if (dr or dc) else 1
    r0, r1 = int(rows.min()), int(rows.max())
    c0, c1 = int(cols.min()), int(cols.max())
    gy, gx = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1).astype(np.float64)
    # hull.equations rows are (a, b, offset) with a*x + b*y + offset <= 0 inside
    inside = (grid @ hull.equations[:, :2].T + hull.equations[:, 2] <= 1e-9).all(axis=1)
    return int(inside.sum())


def extract_contour(img: np.ndarray, mask: np.ndarray) -> FeatureBlock:
    """area, perimeter, aspect, extent, solidity of the largest region."""
    check_image(img)
    fg = np.asarray(mask).astype(bool)
    comp = _largest_component(fg)
    rows, cols = np.nonzero(comp)
    area = float(len(rows))
    height = float(rows.max() - rows.min() + 1)
    width = float(cols.max() - cols.min() + 1)
    perimeter = _trace_perimeter(comp)
    aspect = width / height
    extent = area / (width * height)
    solidity = area / float(_hull_pixel_count(comp))
    return FeatureBlock("contour", np.array([area, perimeter, aspect, extent, solidity]))


def extract_hu(img: np.ndarray, mask: np.ndarray) -> FeatureBlock:
    """Seven Hu invariants of masked grayscale, log10-compressed with sign."""
    img = check_image(img)
    fg = np.asarray(mask).astype(bool)
    if not fg.any():
        raise DegenerateInput("hu: mask selects no pixels")
    w = to_gray(img) * fg
    m00 = w.sum()
    if m00 <= 0:
        raise DegenerateInput("hu: masked intensity sums to zero")
    ys, xs = np.mgrid[0:w.shape[0], 0:w.shape[1]]
    xbar = (w * xs).sum() / m00
    ybar = (w * ys).sum() / m00
    dx = xs - xbar
    dy = ys - ybar

    def mu(p: int, q: int) -> float:
        return float((w * dx ** p * dy ** q).sum())

    def eta(p: int, q: int) -> float:
        return mu(p, q) / m00 ** (1.0 + (p + q) / 2.0)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    a = n30 + n12
    b = n21 + n03
    h = np.empty(7)
    h[0] = n20 + n02
    h[1] = (n20 - n02) ** 2 + 4 * n11 ** 2
    h[2] = (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2
    h[3] = a ** 2 + b ** 2
    h[4] = (n30 - 3 * n12) * a * (a ** 2 - 3 * b ** 2) + (3 * n21 - n03) * b * (3 * a ** 2 - b ** 2)
    h[5] = (n20 - n02) * (a ** 2 - b ** 2) + 4 * n11 * a * b
    h[6] = (3 * n21 - n03) * a * (a ** 2 - 3 * b ** 2) - (n30 - 3 * n12) * b * (3 * a ** 2 - b ** 2)
    return FeatureBlock("hu", np.sign(h) * np.log10(np.abs(h) + 1e-30))
