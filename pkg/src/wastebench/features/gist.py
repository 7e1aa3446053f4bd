"""Coarse scene layout: oriented Gabor energy pooled over a 4x4 grid.

The descriptor summarizes the whole crop; the mask argument is accepted for
signature uniformity but not consulted.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from ..errors import DegenerateInput
from ..image import check_image, to_gray
from .block import FeatureBlock

GABOR_ORIENTATIONS = (0.0, 45.0, 90.0, 135.0)
GABOR_WAVELENGTH = 8.0
GABOR_SIGMA = 4.0
GABOR_ASPECT = 0.5
GRID = 4


def gabor_kernel(theta_deg: float) -> np.ndarray:
    """Even Gabor with the carrier along theta; 0 deg = horizontal frequency.

    The mean is subtracted so a constant image produces zero response.
    """
    radius = int(np.ceil(3.0 * GABOR_SIGMA))
    y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1].astype(np.float64)
    theta = np.deg2rad(theta_deg)
    xr = x * np.cos(theta) + y * np.sin(theta)
    yr = -x * np.sin(theta) + y * np.cos(theta)
    envelope = np.exp(-(xr ** 2 + (GABOR_ASPECT * yr) ** 2) / (2.0 * GABOR_SIGMA ** 2))
    kernel = envelope * np.cos(2.0 * np.pi * xr / GABOR_WAVELENGTH)
    return kernel - kernel.mean()


_KERNELS = [gabor_kernel(t) for t in GABOR_ORIENTATIONS]


def _cell_means(mag: np.ndarray) -> np.ndarray:
    h, w = mag.shape
    rows = np.linspace(0, h, GRID + 1).astype(int)
    cols = np.linspace(0, w, GRID + 1).astype(int)
    out = np.empty(GRID * GRID)
    for i in range(GRID):
        for j in range(GRID):
            cell = mag[rows[i]:rows[i + 1], cols[j]:cols[j + 1]]
            out[i * GRID + j] = cell.mean()
    return out


def extract_gist(img: np.ndarray, mask: np.ndarray | None = None) -> FeatureBlock:
    """64 values: mean |Gabor response| per grid cell, orientation-major."""
    img = check_image(img)
    if img.shape[0] < GRID or img.shape[1] < GRID:
        raise DegenerateInput(f"gist needs an image of at least {GRID}x{GRID}")
    gray = to_gray(img)
    # Edge replication, not zero padding: the zero-mean kernel must stay
    # silent on a constant image, including at the borders.
    radius = (_KERNELS[0].shape[0] - 1) // 2
    padded = np.pad(gray, radius, mode="edge")
    parts = [
        _cell_means(np.abs(fftconvolve(padded, k, mode="valid")))
        for k in _KERNELS
    ]
    return FeatureBlock("gist", np.concatenate(parts))
