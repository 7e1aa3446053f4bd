"""k-nearest-neighbour classifier on z-scored features.

Distances are plain squared Euclidean computed per query row, summed along
the feature axis, so results match an exhaustive pairwise oracle bit for
bit.  Equal distances are broken by the lower training index; equal vote
counts by the lower class id.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from ..errors import ConfigError


def fit(spec: Dict, x: np.ndarray, y: np.ndarray, n_classes: int, seed: int) -> Dict:
    k = int(spec["k"])
    if k > len(x):
        raise ConfigError(f"k={k} exceeds {len(x)} training samples")
    return {"train_x": x.copy(), "train_y": y.copy(), "k": k}


def score(params: Dict, x: np.ndarray, n_classes: int, hyper: Dict) -> np.ndarray:
    train_x = np.asarray(params["train_x"])
    train_y = np.asarray(params["train_y"]).astype(np.int64)
    k = int(params["k"])
    out = np.zeros((len(x), n_classes))
    for i, q in enumerate(x):
        diff = train_x - q
        dist = (diff * diff).sum(axis=1)
        order = np.argsort(dist, kind="stable")[:k]  # stable: ties to lower index
        votes = np.bincount(train_y[order], minlength=n_classes)
        out[i] = votes / k
    return out
