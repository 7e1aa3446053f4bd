"""Shared fixtures: deterministic random images and a small on-disk corpus."""

import numpy as np
import pytest

from wastebench.image import seeded_rng
from wastebench.synth import synth_corpus


def rand_image(seed, h=64, w=64):
    return seeded_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def rand_mask(seed, h=64, w=64, density=0.7):
    return (seeded_rng(seed, 99).random((h, w)) < density).astype(np.uint8)


@pytest.fixture(scope="session")
def shape_corpus(tmp_path_factory):
    """3 classes x 6 images of 64 px shapes, written once per session."""
    root = tmp_path_factory.mktemp("corpus")
    synth_corpus(root, n_classes=3, per_class=6, seed=0, side=64)
    return root
