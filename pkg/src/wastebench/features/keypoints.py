"""Binary and gradient-histogram keypoint descriptors, pooled to fixed blocks.

Both extractors run on the full (already cropped and background-zeroed) image;
the mask argument is accepted for signature uniformity but not consulted.
Empty keypoint sets yield zero vectors with the flagged bit set instead of
failing, so batch extraction never aborts.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..image import _sample_bilinear, check_image, to_gray
from .block import FeatureBlock

# ---------------------------------------------------------------- FAST / ORB

FAST_THRESHOLD = 20.0
FAST_ARC = 9
ORB_MAX_KEYPOINTS = 500
ORB_PATCH_RADIUS = 15
ORB_LEVELS = 8
ORB_SCALE = 1.2
# Steered test points can land up to round(15*sqrt(2)) = 21 px away.
_ORB_MARGIN = 21

# Bresenham circle of radius 3, clockwise from the top.
_FAST_CIRCLE = [
    (-3, 0), (-3, 1), (-2, 2), (-1, 3), (0, 3), (1, 3), (2, 2), (3, 1),
    (3, 0), (3, -1), (2, -2), (1, -3), (0, -3), (-1, -3), (-2, -2), (-3, -1),
]


def _brief_pattern() -> np.ndarray:
    """Frozen 256-test sampling pattern, N(0, (patch/5)^2) clipped to the patch."""
    rng = np.random.default_rng(0x0B121F5EED)
    pts = np.round(rng.normal(0.0, 31.0 / 5.0, size=(256, 4)))
    return np.clip(pts, -ORB_PATCH_RADIUS, ORB_PATCH_RADIUS).astype(np.int64)


BRIEF_PATTERN = _brief_pattern()


def _fast_response(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Corner mask and score for FAST-9: an arc of >=9 circle pixels all
    brighter than center+t or all darker than center-t."""
    h, w = gray.shape
    inner = (slice(3, h - 3), slice(3, w - 3))
    center = gray[inner]
    diffs = np.stack([
        gray[3 + dr:h - 3 + dr, 3 + dc:w - 3 + dc] - center
        for dr, dc in _FAST_CIRCLE
    ])
    bright = diffs > FAST_THRESHOLD
    dark = diffs < -FAST_THRESHOLD
    run_b = np.zeros(center.shape, dtype=bool)
    run_d = np.zeros(center.shape, dtype=bool)
    for start in range(16):
        idx = [(start + j) % 16 for j in range(FAST_ARC)]
        run_b |= np.logical_and.reduce(bright[idx])
        run_d |= np.logical_and.reduce(dark[idx])
    corner_inner = run_b | run_d
    score_inner = np.maximum(
        np.where(bright, diffs - FAST_THRESHOLD, 0.0).sum(axis=0),
        np.where(dark, -diffs - FAST_THRESHOLD, 0.0).sum(axis=0),
    )
    corner = np.zeros((h, w), dtype=bool)
    score = np.zeros((h, w))
    corner[inner] = corner_inner
    score[inner] = np.where(corner_inner, score_inner, 0.0)
    return corner, score


def _harris_response(gray: np.ndarray) -> np.ndarray:
    dy = ndimage.sobel(gray, axis=0, mode="nearest")
    dx = ndimage.sobel(gray, axis=1, mode="nearest")
    sxx = ndimage.uniform_filter(dx * dx, size=7, mode="nearest")
    syy = ndimage.uniform_filter(dy * dy, size=7, mode="nearest")
    sxy = ndimage.uniform_filter(dx * dy, size=7, mode="nearest")
    det = sxx * syy - sxy * sxy
    trace = sxx + syy
    return det - 0.04 * trace * trace


def _circle_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    dy, dx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    keep = dy * dy + dx * dx <= radius * radius
    return dy[keep], dx[keep]


_PATCH_DY, _PATCH_DX = _circle_offsets(ORB_PATCH_RADIUS)


def _resize_gray(gray: np.ndarray, oh: int, ow: int) -> np.ndarray:
    h, w = gray.shape
    ys = (np.arange(oh, dtype=np.float64) + 0.5) * (h / oh) - 0.5
    xs = (np.arange(ow, dtype=np.float64) + 0.5) * (w / ow) - 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return _sample_bilinear(gray, gy, gx)


def _orb_pyramid(gray: np.ndarray) -> list[np.ndarray]:
    h, w = gray.shape
    levels = []
    for lvl in range(ORB_LEVELS):
        s = ORB_SCALE ** lvl
        oh, ow = int(round(h / s)), int(round(w / s))
        if min(oh, ow) < 2 * _ORB_MARGIN + 1:
            break
        levels.append(gray if lvl == 0 else _resize_gray(gray, oh, ow))
    return levels


def orb_keypoints(gray: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Multi-scale FAST-9 corners ranked by Harris response.

    Returns (kps, pyramid) where kps rows are (level, row, col, angle) in
    level-local pixel coordinates, at most ORB_MAX_KEYPOINTS of them, ordered
    by descending Harris score (ties by level, row, col).
    """
    pyramid = _orb_pyramid(gray)
    levels, rows, cols, responses = [], [], [], []
    for lvl, g in enumerate(pyramid):
        corner, score = _fast_response(g)
        local_max = ndimage.maximum_filter(score, size=3, mode="constant") == score
        keep = corner & local_max & (score > 0)
        keep[:_ORB_MARGIN, :] = False
        keep[-_ORB_MARGIN:, :] = False
        keep[:, :_ORB_MARGIN] = False
        keep[:, -_ORB_MARGIN:] = False
        r, c = np.nonzero(keep)
        if len(r) == 0:
            continue
        harris = _harris_response(g)[r, c]
        levels.append(np.full(len(r), lvl, dtype=np.int64))
        rows.append(r)
        cols.append(c)
        responses.append(harris)
    if not rows:
        return np.empty((0, 4)), pyramid
    lv = np.concatenate(levels)
    rr = np.concatenate(rows)
    cc = np.concatenate(cols)
    hv = np.concatenate(responses)
    order = np.lexsort((cc, rr, lv, -hv))[:ORB_MAX_KEYPOINTS]
    lv, rr, cc = lv[order], rr[order], cc[order]
    # Intensity-centroid orientation over a circular patch at the native level.
    angles = np.empty(len(order))
    for lvl in np.unique(lv):
        sel = np.nonzero(lv == lvl)[0]
        g = pyramid[lvl]
        patch = g[rr[sel][:, None] + _PATCH_DY[None, :],
                  cc[sel][:, None] + _PATCH_DX[None, :]]
        m01 = (patch * _PATCH_DY).sum(axis=1)
        m10 = (patch * _PATCH_DX).sum(axis=1)
        angles[sel] = np.arctan2(m01, m10)
    kps = np.stack([lv.astype(np.float64), rr.astype(np.float64),
                    cc.astype(np.float64), angles], axis=1)
    return kps, pyramid


def orb_descriptors(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keypoints plus (k, 32) uint8 steered binary descriptors."""
    kps, pyramid = orb_keypoints(gray)
    if len(kps) == 0:
        return kps, np.empty((0, 32), dtype=np.uint8)
    desc = np.empty((len(kps), 32), dtype=np.uint8)
    x1, y1, x2, y2 = (BRIEF_PATTERN[:, i][None, :].astype(np.float64) for i in range(4))
    for lvl in np.unique(kps[:, 0]).astype(np.int64):
        sel = np.nonzero(kps[:, 0] == lvl)[0]
        smooth = ndimage.uniform_filter(pyramid[lvl], size=5, mode="nearest")
        rows = kps[sel, 1].astype(np.int64)[:, None]
        cols = kps[sel, 2].astype(np.int64)[:, None]
        cos = np.cos(kps[sel, 3])[:, None]
        sin = np.sin(kps[sel, 3])[:, None]

        def sample(x: np.ndarray, y: np.ndarray) -> np.ndarray:
            rx = np.round(x * cos - y * sin).astype(np.int64)
            ry = np.round(x * sin + y * cos).astype(np.int64)
            return smooth[rows + ry, cols + rx]

        bits = sample(x1, y1) < sample(x2, y2)
        desc[sel] = np.packbits(bits, axis=1)
    return kps, desc


def extract_orb(img: np.ndarray, mask: np.ndarray | None = None) -> FeatureBlock:
    """32 values: per-byte mean of the binary descriptors, each in [0,255]."""
    img = check_image(img)
    _, desc = orb_descriptors(to_gray(img))
    if len(desc) == 0:
        return FeatureBlock("orb", np.zeros(32), flagged=True)
    return FeatureBlock("orb", desc.astype(np.float64).mean(axis=0))


# ----------------------------------------------------------------------- SIFT

SIFT_OCTAVES = 3
SIFT_SCALES = 3
SIFT_SIGMA0 = 1.6
SIFT_INIT_BLUR = 0.5
SIFT_CONTRAST = 0.04
SIFT_EDGE_RATIO = 10.0
_DESC_WIDTH = 4
_DESC_BINS = 8
_ORI_BINS = 36


def _blur(img: np.ndarray, sigma: float) -> np.ndarray:
    return ndimage.gaussian_filter(img, sigma, mode="nearest", truncate=4.0)


def build_pyramid(base: np.ndarray) -> list[list[np.ndarray]]:
    """Per octave, SCALES+3 Gaussian levels; level i carries sigma0*2^(i/SCALES).

    Octaves shrink by 2x2 block averaging, which commutes exactly with 90
    degree rotations (plain decimation does not on even sizes).
    """
    sigmas = SIFT_SIGMA0 * 2.0 ** (np.arange(SIFT_SCALES + 3) / SIFT_SCALES)
    octaves = []
    current = _blur(base, math.sqrt(SIFT_SIGMA0 ** 2 - SIFT_INIT_BLUR ** 2))
    for _ in range(SIFT_OCTAVES):
        levels = [current]
        for i in range(1, SIFT_SCALES + 3):
            step = math.sqrt(sigmas[i] ** 2 - sigmas[i - 1] ** 2)
            levels.append(_blur(levels[-1], step))
        octaves.append(levels)
        nxt = levels[SIFT_SCALES]
        h2, w2 = nxt.shape[0] // 2, nxt.shape[1] // 2
        if min(h2, w2) < 8:
            break
        current = nxt[:2 * h2, :2 * w2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))
    return octaves


def _refine(dogs: list[np.ndarray], li: int, r: int, c: int):
    """Sub-pixel/scale Newton refinement; returns (li, r, c, dr, dc, ds)."""
    h, w = dogs[0].shape
    for _ in range(5):
        prev, cur, nxt = dogs[li - 1], dogs[li], dogs[li + 1]
        g = np.array([
            (cur[r, c + 1] - cur[r, c - 1]) / 2.0,
            (cur[r + 1, c] - cur[r - 1, c]) / 2.0,
            (nxt[r, c] - prev[r, c]) / 2.0,
        ])
        dxx = cur[r, c + 1] + cur[r, c - 1] - 2 * cur[r, c]
        dyy = cur[r + 1, c] + cur[r - 1, c] - 2 * cur[r, c]
        dss = nxt[r, c] + prev[r, c] - 2 * cur[r, c]
        dxy = (cur[r + 1, c + 1] - cur[r + 1, c - 1] - cur[r - 1, c + 1] + cur[r - 1, c - 1]) / 4.0
        dxs = (nxt[r, c + 1] - nxt[r, c - 1] - prev[r, c + 1] + prev[r, c - 1]) / 4.0
        dys = (nxt[r + 1, c] - nxt[r - 1, c] - prev[r + 1, c] + prev[r - 1, c]) / 4.0
        hess = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
        try:
            delta = -np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            return None
        # 0.6 movement threshold (VLFeat convention): a strict 0.5 oscillates
        # forever when the extremum sits exactly on a cell boundary.
        if np.all(np.abs(delta) <= 0.6):
            value = cur[r, c] + 0.5 * float(g @ delta)
            if abs(value) < SIFT_CONTRAST:
                return None
            tr = dxx + dyy
            det = dxx * dyy - dxy * dxy
            limit = (SIFT_EDGE_RATIO + 1.0) ** 2 / SIFT_EDGE_RATIO
            if det <= 0 or tr * tr / det >= limit:
                return None
            return li, r, c, float(delta[1]), float(delta[0]), float(delta[2])
        c += int(round(delta[0]))
        r += int(round(delta[1]))
        li += int(round(delta[2]))
        if not (1 <= li <= SIFT_SCALES and 1 <= r < h - 1 and 1 <= c < w - 1):
            return None
    return None


def _gradients(level: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dy = np.zeros_like(level)
    dx = np.zeros_like(level)
    dy[1:-1, :] = (level[2:, :] - level[:-2, :]) / 2.0
    dx[:, 1:-1] = (level[:, 2:] - level[:, :-2]) / 2.0
    return np.sqrt(dx * dx + dy * dy), np.arctan2(dy, dx)


def _window(shape, ri: int, ci: int, radius: int):
    """Clipped window box (r0, r1, c0, c1), inclusive bounds."""
    h, w = shape
    return (max(ri - radius, 0), min(ri + radius, h - 1),
            max(ci - radius, 0), min(ci + radius, w - 1))


def _orientations(mag: np.ndarray, ang: np.ndarray, r: float, c: float, sigma: float) -> list[float]:
    radius = int(round(3.0 * 1.5 * sigma))
    ri, ci = int(round(r)), int(round(c))
    r0, r1, c0, c1 = _window(mag.shape, ri, ci, radius)
    if r1 < r0 or c1 < c0:
        return []
    win_m = mag[r0:r1 + 1, c0:c1 + 1]
    win_a = ang[r0:r1 + 1, c0:c1 + 1]
    dy, dx = np.mgrid[r0 - ri:r1 - ri + 1, c0 - ci:c1 - ci + 1]
    weight = np.exp(-(dy * dy + dx * dx) / (2.0 * (1.5 * sigma) ** 2))
    bins = np.floor(_ORI_BINS * (win_a % (2 * np.pi)) / (2 * np.pi)).astype(np.int64) % _ORI_BINS
    hist = np.bincount(bins.ravel(), weights=(win_m * weight).ravel(), minlength=_ORI_BINS)
    for _ in range(2):  # circular smoothing
        hist = (np.roll(hist, 1) + hist + np.roll(hist, -1)) / 3.0
    peak = hist.max()
    if peak <= 0:
        return []
    out = []
    for b in range(_ORI_BINS):
        left = hist[(b - 1) % _ORI_BINS]
        right = hist[(b + 1) % _ORI_BINS]
        if hist[b] >= 0.8 * peak and hist[b] > left and hist[b] > right:
            denom = left - 2 * hist[b] + right
            shift = 0.5 * (left - right) / denom if denom != 0 else 0.0
            out.append(2 * np.pi * ((b + 0.5 + shift) % _ORI_BINS) / _ORI_BINS)
    return out


def _descriptor(mag: np.ndarray, ang: np.ndarray, r: float, c: float,
                sigma: float, theta: float) -> np.ndarray | None:
    hist_width = 3.0 * sigma
    radius = int(round(hist_width * math.sqrt(2) * (_DESC_WIDTH + 1) / 2.0))
    ri, ci = int(round(r)), int(round(c))
    r0, r1, c0, c1 = _window(mag.shape, ri, ci, radius)
    if r1 < r0 or c1 < c0:
        return None
    dy, dx = np.mgrid[r0 - ri:r1 - ri + 1, c0 - ci:c1 - ci + 1].astype(np.float64)
    dy += ri - r
    dx += ci - c
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    # Rotate offsets into the keypoint frame, in histogram units.
    c_rot = (dx * cos_t + dy * sin_t) / hist_width
    r_rot = (-dx * sin_t + dy * cos_t) / hist_width
    rbin = r_rot + _DESC_WIDTH / 2.0 - 0.5
    cbin = c_rot + _DESC_WIDTH / 2.0 - 0.5
    keep = (rbin > -1) & (rbin < _DESC_WIDTH) & (cbin > -1) & (cbin < _DESC_WIDTH)
    win_m = mag[r0:r1 + 1, c0:c1 + 1]
    win_a = ang[r0:r1 + 1, c0:c1 + 1]
    weight = np.exp(-(r_rot ** 2 + c_rot ** 2) / (0.5 * _DESC_WIDTH ** 2))
    rbin, cbin = rbin[keep], cbin[keep]
    vals = (win_m * weight)[keep]
    obin = ((win_a[keep] - theta) % (2 * np.pi)) * _DESC_BINS / (2 * np.pi)

    hist = np.zeros((_DESC_WIDTH + 2, _DESC_WIDTH + 2, _DESC_BINS))
    r0b = np.floor(rbin).astype(np.int64)
    c0b = np.floor(cbin).astype(np.int64)
    o0b = np.floor(obin).astype(np.int64)
    fr, fc, fo = rbin - r0b, cbin - c0b, obin - o0b
    for ir in (0, 1):
        wr = vals * (fr if ir else 1 - fr)
        for ic in (0, 1):
            wc = wr * (fc if ic else 1 - fc)
            for io in (0, 1):
                wo = wc * (fo if io else 1 - fo)
                np.add.at(hist, (r0b + ir + 1, c0b + ic + 1, (o0b + io) % _DESC_BINS), wo)
    vec = hist[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return None
    vec = np.minimum(vec / norm, 0.2)
    return vec / np.linalg.norm(vec)


def sift_descriptors(gray: np.ndarray) -> tuple[list[tuple], np.ndarray]:
    """Keypoints (octave, row, col, sigma, angle in base coords) and (k, 128)
    descriptors."""
    base = gray / 255.0
    pyramid = build_pyramid(base)
    keypoints: list[tuple] = []
    descriptors: list[np.ndarray] = []
    seen: set[tuple] = set()
    for o, levels in enumerate(pyramid):
        dogs = [levels[i + 1] - levels[i] for i in range(SIFT_SCALES + 2)]
        grads: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        stack = np.stack(dogs)
        inner = stack[1:-1, 1:-1, 1:-1]
        footprint = np.ones((3, 3, 3), dtype=bool)
        is_max = inner == ndimage.maximum_filter(
            stack, footprint=footprint, mode="constant", cval=np.inf)[1:-1, 1:-1, 1:-1]
        is_min = inner == ndimage.minimum_filter(
            stack, footprint=footprint, mode="constant", cval=-np.inf)[1:-1, 1:-1, 1:-1]
        cand = (is_max | is_min) & (np.abs(inner) > 0.5 * SIFT_CONTRAST)
        for li, r, c in zip(*np.nonzero(cand)):
            got = _refine(dogs, int(li) + 1, int(r) + 1, int(c) + 1)
            if got is None:
                continue
            li2, r2, c2, dr, dc, ds = got
            # Boundary offsets make adjacent cells refine to one point; dedup.
            key = (o, round((r2 + dr) * 1e6), round((c2 + dc) * 1e6), round((li2 + ds) * 1e6))
            if key in seen:
                continue
            seen.add(key)
            sigma = SIFT_SIGMA0 * 2.0 ** ((li2 + ds) / SIFT_SCALES)
            glevel = int(np.clip(round(li2 + ds), 0, SIFT_SCALES + 2))
            if glevel not in grads:
                grads[glevel] = _gradients(levels[glevel])
            mag, ang = grads[glevel]
            rr, cc = r2 + dr, c2 + dc
            for theta in _orientations(mag, ang, rr, cc, sigma):
                vec = _descriptor(mag, ang, rr, cc, sigma, theta)
                if vec is not None:
                    keypoints.append((o, rr * 2 ** o, cc * 2 ** o, sigma * 2 ** o, theta))
                    descriptors.append(vec)
    if not descriptors:
        return keypoints, np.empty((0, 128))
    return keypoints, np.stack(descriptors)


def extract_sift(img: np.ndarray, mask: np.ndarray | None = None) -> FeatureBlock:
    """128 values: element-wise mean of the normalized keypoint descriptors."""
    img = check_image(img)
    _, desc = sift_descriptors(to_gray(img))
    if len(desc) == 0:
        return FeatureBlock("sift", np.zeros(128), flagged=True)
    return FeatureBlock("sift", desc.mean(axis=0))
