"""Foreground isolation: iterative GMM/graph-cut refinement and Otsu cropping.

The rectangle-initialized segmenter alternates three coordinate-descent
steps on a hard-assignment Gibbs energy: assign each pixel to its best GMM
component, refit per-side GMMs from those assignments, and relabel via an
exact min-cut on the 8-connected grid.  Every step minimizes the shared
energy over its own block, so the recorded per-iteration energy never
increases (up to integer capacity rounding in the cut).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.ndimage import label as cc_label
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from .errors import ConfigError, DegenerateInput, InitError, IoError
from .image import check_image, image_seed, seeded_rng, to_gray

GC_COMPONENTS = 5
GC_GAMMA = 50.0
VAR_FLOOR = 0.5       # eigenvalue floor for GMM covariances (pixel-value scale)
D_MAX = 500.0         # clamp on per-pixel data terms (negative log likelihood)
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class CropBox:
    """Axis-aligned box: top-left corner (x, y), width w, height h."""

    x: int
    y: int
    w: int
    h: int

    def to_json(self) -> str:
        return json.dumps({"x": self.x, "y": self.y, "w": self.w, "h": self.h})


def save_box(box: CropBox, path: Union[str, Path]) -> None:
    try:
        Path(path).write_text(box.to_json() + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def default_rect(img: np.ndarray) -> CropBox:
    """Initialization rectangle inset 5% (at least 1 px) from every border."""
    img = check_image(img)
    h, w = img.shape[:2]
    dy = max(1, int(round(0.05 * h)))
    dx = max(1, int(round(0.05 * w)))
    if h - 2 * dy < 1 or w - 2 * dx < 1:
        raise InitError(f"image {w}x{h} too small for an inset rectangle")
    return CropBox(x=dx, y=dy, w=w - 2 * dx, h=h - 2 * dy)


@dataclass
class SegmentationResult:
    mask: np.ndarray            # (h, w) uint8, 1 = foreground
    energies: List[float]       # Gibbs energy after each iteration
    fallback: bool              # True when the rectangle fallback fired
    iterations: int


class _SideGMM:
    """Full-covariance GMM for one side (foreground or background)."""

    def __init__(self, means, covs, weights):
        self.means = means          # (k, 3)
        self.covs = covs            # (k, 3, 3)
        self.weights = weights      # (k,)
        self._prepare()

    def _prepare(self):
        self.inv = np.zeros_like(self.covs)
        self.logdet = np.zeros(len(self.covs))
        for i, c in enumerate(self.covs):
            self.inv[i] = np.linalg.inv(c)
            sign, ld = np.linalg.slogdet(c)
            self.logdet[i] = ld

    @staticmethod
    def _floor_cov(cov: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eigh(cov)
        vals = np.maximum(vals, VAR_FLOOR)
        return (vecs * vals) @ vecs.T

    @classmethod
    def fit(cls, pixels: np.ndarray, assign: np.ndarray, k: int) -> "_SideGMM":
        """Exact per-component MLE under the eigenvalue-floor constraint."""
        means, covs, weights = [], [], []
        n = len(pixels)
        for comp in range(k):
            sel = assign == comp
            m = int(sel.sum())
            if m == 0:
                continue
            pts = pixels[sel]
            mu = pts.mean(axis=0)
            diff = pts - mu
            cov = (diff.T @ diff) / m
            means.append(mu)
            covs.append(cls._floor_cov(cov))
            weights.append(m / n)
        return cls(np.asarray(means), np.asarray(covs), np.asarray(weights))

    def comp_neglog(self, pixels: np.ndarray) -> np.ndarray:
        """(n, k) per-component -log(pi_k N_k(z)); data term is the row min."""
        n = len(pixels)
        k = len(self.weights)
        out = np.empty((n, k))
        for i in range(k):
            diff = pixels - self.means[i]
            maha = np.einsum("nd,dc,nc->n", diff, self.inv[i], diff)
            out[:, i] = (
                -np.log(self.weights[i])
                + 0.5 * self.logdet[i]
                + 0.5 * maha
                + 1.5 * _LOG_2PI
            )
        return out

    def data_term(self, pixels: np.ndarray) -> np.ndarray:
        return np.clip(self.comp_neglog(pixels).min(axis=1), 0.0, D_MAX)

    def assign(self, pixels: np.ndarray) -> np.ndarray:
        return np.argmin(self.comp_neglog(pixels), axis=1)


def _init_gmm(pixels: np.ndarray, rng: np.random.Generator) -> _SideGMM:
    """K-means seeding; component count shrinks when the side is tiny."""
    k = min(GC_COMPONENTS, len(np.unique(pixels, axis=0)), len(pixels))
    k = max(k, 1)
    if k == 1:
        assign = np.zeros(len(pixels), dtype=np.int64)
    else:
        _, assign = kmeans2(pixels, k, minit="++", seed=rng, iter=10)
    return _SideGMM.fit(pixels, assign, k)


def _neighbor_weights(img_f: np.ndarray) -> Tuple[float, dict]:
    """Beta from the mean squared neighbor color distance, then edge weights.

    Returns (beta, {offset: weight_map}) for the four unique 8-connectivity
    offsets; weight_map[r, c] is the smoothness weight between pixel (r, c)
    and (r + dr, c + dc).
    """
    offsets = {(0, 1): 1.0, (1, 0): 1.0, (1, 1): np.sqrt(2.0), (1, -1): np.sqrt(2.0)}
    sq = {}
    total, count = 0.0, 0
    for (dr, dc) in offsets:
        if dc >= 0:
            a = img_f[: img_f.shape[0] - dr, : img_f.shape[1] - dc]
            b = img_f[dr:, dc:]
        else:
            a = img_f[: img_f.shape[0] - dr, -dc:]
            b = img_f[dr:, : img_f.shape[1] + dc]
        d2 = ((a - b) ** 2).sum(axis=2)
        sq[(dr, dc)] = d2
        total += float(d2.sum())
        count += d2.size
    mean_sq = total / count if count else 0.0
    beta = 0.0 if mean_sq <= 0 else 1.0 / (2.0 * mean_sq)
    weights = {
        off: GC_GAMMA / dist * np.exp(-beta * sq[off]) for off, dist in offsets.items()
    }
    return beta, weights


def _pair_slices(shape, dr, dc):
    """Index grids of the (r, c) and (r+dr, c+dc) members of each pair."""
    h, w = shape
    if dc >= 0:
        ra, ca = np.meshgrid(np.arange(h - dr), np.arange(w - dc), indexing="ij")
    else:
        ra, ca = np.meshgrid(np.arange(h - dr), np.arange(-dc, w), indexing="ij")
    return ra, ca, ra + dr, ca + dc


def _gibbs_energy(d_fg, d_bg, alpha, weights, shape) -> float:
    data = float(np.where(alpha, d_fg, d_bg).sum())
    smooth = 0.0
    for (dr, dc), wmap in weights.items():
        ra, ca, rb, cb = _pair_slices(shape, dr, dc)
        differ = alpha[ra, ca] != alpha[rb, cb]
        smooth += float(wmap[differ].sum())
    return data + smooth


def _min_cut(d_fg, d_bg, weights, unknown, shape) -> np.ndarray:
    """Exact min-cut relabeling of the unknown region; returns new alpha."""
    h, w = shape
    node_id = -np.ones((h, w), dtype=np.int64)
    un_r, un_c = np.nonzero(unknown)
    n_u = len(un_r)
    node_id[un_r, un_c] = np.arange(n_u)
    source, sink = n_u, n_u + 1
    cap_src = d_bg[un_r, un_c].copy()   # paid when the pixel ends up background
    cap_snk = d_fg[un_r, un_c].copy()   # paid when the pixel ends up foreground
    rows, cols, caps = [], [], []
    for (dr, dc), wmap in weights.items():
        ra, ca, rb, cb = _pair_slices(shape, dr, dc)
        a_in = unknown[ra, ca]
        b_in = unknown[rb, cb]
        both = a_in & b_in
        na = node_id[ra[both], ca[both]]
        nb = node_id[rb[both], cb[both]]
        wv = wmap[both]
        rows.extend([na, nb])
        cols.extend([nb, na])
        caps.extend([wv, wv])
        # one endpoint clamped to background: labeling the other foreground
        # cuts that pair, so the weight moves onto its sink link
        only_a = a_in & ~b_in
        if only_a.any():
            np.add.at(cap_snk, node_id[ra[only_a], ca[only_a]], wmap[only_a])
        only_b = b_in & ~a_in
        if only_b.any():
            np.add.at(cap_snk, node_id[rb[only_b], cb[only_b]], wmap[only_b])
    rows.append(np.full(n_u, source))
    cols.append(np.arange(n_u))
    caps.append(cap_src)
    rows.append(np.arange(n_u))
    cols.append(np.full(n_u, sink))
    caps.append(cap_snk)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    caps = np.concatenate(caps)
    # scale into integers keeping the optimal cut value inside int32
    side = min(float(cap_src.sum()), float(cap_snk.sum())) + 1.0
    scale = min(2.0 ** 14, (2.0 ** 31 - 1000.0) / side)
    scale = max(scale, 1.0)
    icaps = np.rint(caps * scale).astype(np.int64)
    graph = coo_matrix((icaps, (rows, cols)), shape=(n_u + 2, n_u + 2)).tocsr()
    result = maximum_flow(graph, source, sink)
    # flow is antisymmetric over an augmented structure, so graph - flow is the
    # residual network including reverse arcs; source side of the cut = nodes
    # reachable through positive residuals
    residual = (graph - result.flow).tocsr()
    residual.eliminate_zeros()
    reach = breadth_first_order(residual, source, directed=True, return_predecessors=False)
    fg_nodes = np.zeros(n_u + 2, dtype=bool)
    fg_nodes[np.asarray(reach, dtype=np.int64)] = True
    alpha = np.zeros(shape, dtype=bool)
    alpha[un_r, un_c] = fg_nodes[:n_u][node_id[un_r, un_c]]
    return alpha


def grabcut_segment(
    img: np.ndarray,
    init_rect: CropBox,
    iters: int = 5,
) -> SegmentationResult:
    """Segment the object inside ``init_rect`` from the surrounding background.

    Pixels outside the rectangle stay background.  A constant image has no
    contrast to separate on; the result then falls back to the rectangle
    interior as the mask, flagged.
    """
    img = check_image(img)
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}")
    h, w = img.shape[:2]
    r = init_rect
    if r.w < 1 or r.h < 1 or r.x < 0 or r.y < 0 or r.x + r.w > w or r.y + r.h > h:
        raise InitError(f"init_rect {r} does not fit inside a {w}x{h} image")
    if r.w * r.h >= h * w:
        raise InitError("init_rect covers the entire image; no background pixels remain")
    img_f = img.astype(np.float64)
    pixels = img_f.reshape(-1, 3)
    inside = np.zeros((h, w), dtype=bool)
    inside[r.y : r.y + r.h, r.x : r.x + r.w] = True
    rect_mask = inside.astype(np.uint8)

    # A constant image carries no contrast to segment on (beta would be 0);
    # that is the one degenerate case.  A side that is merely uniform still
    # seeds a usable one-component model through the covariance floor.
    beta, weights = _neighbor_weights(img_f)
    if beta == 0.0:
        return SegmentationResult(mask=rect_mask, energies=[], fallback=True, iterations=0)

    base = image_seed(img)
    fg_gmm = _init_gmm(pixels[inside.ravel()], seeded_rng(base, 1))
    bg_gmm = _init_gmm(pixels[~inside.ravel()], seeded_rng(base, 2))

    alpha = inside.copy()
    energies: List[float] = []
    for it in range(iters):
        flat_alpha = alpha.ravel()
        fg_now = pixels[flat_alpha]
        bg_now = pixels[~flat_alpha]
        if len(fg_now) == 0:
            break  # object vanished; keep the previous labeling
        # component assignment + GMM refit (both lower the energy for fixed alpha)
        fg_gmm = _SideGMM.fit(fg_now, fg_gmm.assign(fg_now), len(fg_gmm.weights))
        bg_gmm = _SideGMM.fit(bg_now, bg_gmm.assign(bg_now), len(bg_gmm.weights))
        d_fg = fg_gmm.data_term(pixels).reshape(h, w)
        d_bg = bg_gmm.data_term(pixels).reshape(h, w)
        alpha = _min_cut(d_fg, d_bg, weights, inside, (h, w))
        energies.append(_gibbs_energy(d_fg, d_bg, alpha, weights, (h, w)))
    return SegmentationResult(
        mask=alpha.astype(np.uint8), energies=energies, fallback=False, iterations=len(energies)
    )


def _otsu_threshold(values: np.ndarray) -> Tuple[int, float]:
    """Otsu threshold over byte bins: (t, best between-class variance).

    Foreground is values > t.
    """
    hist = np.bincount(np.clip(values.astype(np.int64), 0, 255), minlength=256).astype(np.float64)
    total = hist.sum()
    p = hist / total
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(256))
    mu_total = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(denom > 0, (mu_total * omega - mu) ** 2 / denom, 0.0)
    t = int(np.argmax(sigma_b[:-1])) if len(sigma_b) > 1 else 0
    return t, float(sigma_b[t])


@dataclass
class CropResult:
    image: np.ndarray   # cropped image, background zeroed
    box: CropBox
    mask: np.ndarray    # (box.h, box.w) uint8 component mask
    flagged: bool


def threshold_crop(img: np.ndarray, mask: Optional[np.ndarray] = None) -> CropResult:
    """Otsu threshold inside ``mask``, keep the largest 8-connected component,
    crop to its tight bounding box with background pixels zeroed.

    A histogram with no between-class separation (e.g. an all-black image)
    yields the full-image box, flagged.
    """
    img = check_image(img)
    h, w = img.shape[:2]
    if mask is None:
        mask = np.ones((h, w), dtype=np.uint8)
    m = np.asarray(mask).astype(bool)
    if m.shape != (h, w):
        raise ConfigError(f"mask shape {m.shape} does not match image {h}x{w}")
    if not m.any():
        raise DegenerateInput("mask selects no pixels")
    gray = to_gray(img)
    t, separation = _otsu_threshold(gray[m])
    binary = m & (gray > t)
    if separation <= 0 or not binary.any():
        full = CropBox(0, 0, w, h)
        out = img.copy()
        out[~m] = 0
        return CropResult(image=out, box=full, mask=m.astype(np.uint8), flagged=True)
    labels, n_comp = cc_label(binary, structure=np.ones((3, 3), dtype=np.int64))
    counts = np.bincount(labels.ravel(), minlength=n_comp + 1)
    counts[0] = 0
    biggest = int(np.argmax(counts))  # ties: lowest label = first in scan order
    comp = labels == biggest
    rows = np.flatnonzero(comp.any(axis=1))
    cols = np.flatnonzero(comp.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    box = CropBox(x=x0, y=y0, w=x1 - x0 + 1, h=y1 - y0 + 1)
    sub = img[y0 : y1 + 1, x0 : x1 + 1].copy()
    submask = comp[y0 : y1 + 1, x0 : x1 + 1]
    sub[~submask] = 0
    return CropResult(image=sub, box=box, mask=submask.astype(np.uint8), flagged=False)
