"""Named feature block: one descriptor's output slice of the 1305-dim vector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

# Canonical block order and dims; concatenation offsets follow by cumulation.
BLOCK_LAYOUT: tuple[tuple[str, int], ...] = (
    ("color_basic", 15),
    ("color_hist", 1024),
    ("contour", 5),
    ("hu", 7),
    ("glcm", 20),
    ("lbp", 10),
    ("orb", 32),
    ("sift", 128),
    ("gist", 64),
)

BLOCK_DIMS: dict[str, int] = dict(BLOCK_LAYOUT)
TOTAL_DIM: int = sum(d for _, d in BLOCK_LAYOUT)

_offsets = np.cumsum([0] + [d for _, d in BLOCK_LAYOUT[:-1]])
BLOCK_OFFSETS: dict[str, int] = {name: int(o) for (name, _), o in zip(BLOCK_LAYOUT, _offsets)}


@dataclass
class FeatureBlock:
    name: str
    values: np.ndarray
    flagged: bool = field(default=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if not np.isfinite(self.values).all():
            raise ValidationError(f"block {self.name!r} contains non-finite values")

    @property
    def dim(self) -> int:
        return len(self.values)
