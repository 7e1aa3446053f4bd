"""Color statistics and joint color histograms over the foreground mask."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateInput
from .block import FeatureBlock
from ..image import check_image, to_hsv_bytes


def _channel_stats(values: np.ndarray) -> np.ndarray:
    """mean, population std, skewness, kurtosis (m4/m2^2), byte-bin entropy."""
    mean = float(values.mean())
    centered = values - mean
    m2 = float((centered ** 2).mean())
    std = float(np.sqrt(m2))
    if m2 > 0:
        m3 = float((centered ** 3).mean())
        m4 = float((centered ** 4).mean())
        skew = m3 / m2 ** 1.5
        kurt = m4 / (m2 * m2)
    else:
        skew = 0.0
        kurt = 0.0
    hist = np.bincount(np.clip(values.astype(np.int64), 0, 255), minlength=256)
    p = hist[hist > 0] / len(values)
    entropy = float(-(p * np.log2(p)).sum())
    return np.array([mean, std, skew, kurt, entropy])


def extract_color_basic(img: np.ndarray, mask: np.ndarray) -> FeatureBlock:
    """15 values: five statistics for each HSV channel, channel-major."""
    img = check_image(img)
    fg = np.asarray(mask).astype(bool)
    if fg.sum() < 2:
        raise DegenerateInput("color_basic: needs at least 2 foreground pixels")
    hsv = to_hsv_bytes(img)
    parts = [_channel_stats(hsv[:, :, c][fg]) for c in range(3)]
    return FeatureBlock("color_basic", np.concatenate(parts))


def _joint_hist(c0: np.ndarray, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """8x8x8 joint histogram of three byte channels, L1-normalized."""
    b0 = np.clip(c0.astype(np.int64) // 32, 0, 7)
    b1 = np.clip(c1.astype(np.int64) // 32, 0, 7)
    b2 = np.clip(c2.astype(np.int64) // 32, 0, 7)
    counts = np.bincount((b0 * 8 + b1) * 8 + b2, minlength=512).astype(np.float64)
    return counts / counts.sum()


def extract_color_hist(img: np.ndarray, mask: np.ndarray) -> FeatureBlock:
    """1024 values: 512-bin HSV joint histogram then 512-bin BGR, each unit L1."""
    img = check_image(img)
    fg = np.asarray(mask).astype(bool)
    if not fg.any():
        raise DegenerateInput("color_hist: mask selects no pixels")
    hsv = to_hsv_bytes(img)
    hsv_part = _joint_hist(hsv[:, :, 0][fg], hsv[:, :, 1][fg], hsv[:, :, 2][fg])
    bgr_part = _joint_hist(img[:, :, 2][fg], img[:, :, 1][fg], img[:, :, 0][fg])
    return FeatureBlock("color_hist", np.concatenate([hsv_part, bgr_part]))
