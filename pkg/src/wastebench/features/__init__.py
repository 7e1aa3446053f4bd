"""Handcrafted descriptor suite: nine blocks concatenated to 1305 dimensions.

Canonical layout (name, dim, offset):

    color_basic   15     0
    color_hist  1024    15
    contour        5  1039
    hu             7  1044
    glcm          20  1051
    lbp           10  1071
    orb           32  1081
    sift         128  1113
    gist          64  1241
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Literal

import numpy as np

from ..errors import ConfigError, DegenerateInput, LayoutError
from ..image import check_image
from ..segmentation import CropResult, default_rect, grabcut_segment, threshold_crop
from .block import BLOCK_DIMS, BLOCK_LAYOUT, BLOCK_OFFSETS, TOTAL_DIM, FeatureBlock
from .color import extract_color_basic, extract_color_hist
from .gist import extract_gist
from .keypoints import extract_orb, extract_sift
from .shape import extract_contour, extract_hu
from .texture import extract_glcm, extract_lbp

EXTRACTORS: dict[str, Callable] = {
    "color_basic": extract_color_basic,
    "color_hist": extract_color_hist,
    "contour": extract_contour,
    "hu": extract_hu,
    "glcm": extract_glcm,
    "lbp": extract_lbp,
    "orb": extract_orb,
    "sift": extract_sift,
    "gist": extract_gist,
}

SegmentMode = Literal["grabcut", "threshold", "none"]
SEGMENT_MODES = ("grabcut", "threshold", "none")


@dataclass
class HandcraftedVector:
    """The nine blocks in canonical order plus their concatenation."""

    blocks: list[FeatureBlock]
    flat: np.ndarray

    @property
    def flags(self) -> dict[str, bool]:
        return {b.name: b.flagged for b in self.blocks}


def assemble(blocks: Iterable[FeatureBlock]) -> HandcraftedVector:
    """Order blocks canonically and concatenate; layout violations name names."""
    by_name: dict[str, FeatureBlock] = {}
    for b in blocks:
        if b.name not in BLOCK_DIMS:
            raise LayoutError(f"unknown block {b.name!r}")
        if b.name in by_name:
            raise LayoutError(f"duplicate block {b.name!r}")
        by_name[b.name] = b
    missing = [name for name, _ in BLOCK_LAYOUT if name not in by_name]
    if missing:
        raise LayoutError("missing blocks: " + ", ".join(missing))
    bad = [
        f"{name} has dim {by_name[name].dim}, expected {dim}"
        for name, dim in BLOCK_LAYOUT
        if by_name[name].dim != dim
    ]
    if bad:
        raise LayoutError("; ".join(bad))
    ordered = [by_name[name] for name, _ in BLOCK_LAYOUT]
    flat = np.concatenate([b.values for b in ordered])
    return HandcraftedVector(blocks=ordered, flat=flat)


def extract_all(img: np.ndarray, mask: np.ndarray) -> HandcraftedVector:
    """Run every extractor; degenerate inputs yield flagged zero blocks."""
    img = check_image(img)
    blocks = []
    for name, fn in EXTRACTORS.items():
        try:
            blocks.append(fn(img, mask))
        except DegenerateInput:
            blocks.append(FeatureBlock(name, np.zeros(BLOCK_DIMS[name]), flagged=True))
    return assemble(blocks)


def extract_from_image(img: np.ndarray, segment: str = "grabcut") -> HandcraftedVector:
    """Segment, crop to the object, and extract the full 1305-dim vector.

    segment: "grabcut" refines a border-inset rectangle before cropping;
    "threshold" crops by Otsu directly; "none" uses the whole image.
    """
    img = check_image(img)
    if segment not in SEGMENT_MODES:
        raise ConfigError(f"segment must be one of {SEGMENT_MODES}, got {segment!r}")
    if segment == "none":
        mask = np.ones(img.shape[:2], dtype=np.uint8)
        return extract_all(img, mask)
    if segment == "grabcut":
        seg = grabcut_segment(img, default_rect(img))
        gc_mask = seg.mask if seg.mask.any() else None
        crop: CropResult = threshold_crop(img, gc_mask)
    else:
        crop = threshold_crop(img)
    return extract_all(crop.image, crop.mask)
