"""Texture descriptor tests: co-occurrence properties and uniform LBP patterns."""

import numpy as np
import pytest

import oracles
from conftest import rand_image, rand_mask
from wastebench.errors import DegenerateInput
from wastebench.features.texture import extract_glcm, extract_lbp, lbp_offsets
from wastebench.image import to_gray


class TestGlcm:
    def test_matches_naive_pair_enumeration(self):
        for seed in range(3):
            img = rand_image(seed + 50)
            mask = rand_mask(seed + 50)
            got = extract_glcm(img, mask).values
            assert got.shape == (20,)
            want = oracles.glcm_stats(to_gray(img), mask.astype(bool))
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_constant_image_degenerate_convention(self):
        img = np.full((20, 20, 3), 120, dtype=np.uint8)
        mask = np.ones((20, 20), dtype=np.uint8)
        got = extract_glcm(img, mask).values
        for angle in range(4):
            contrast, dissim, homog, energy, corr = got[5 * angle : 5 * angle + 5]
            assert contrast == 0.0
            assert dissim == 0.0
            assert homog == 1.0
            assert energy == 1.0
            assert corr == 0.0

    def test_vertical_stripes_contrast_by_angle(self):
        img = np.zeros((32, 32, 3), dtype=np.uint8)
        img[:, 1::2] = 255  # alternating columns, levels {0, 31}
        mask = np.ones((32, 32), dtype=np.uint8)
        got = extract_glcm(img, mask).values
        assert got[0] == pytest.approx(961.0, abs=1e-9)   # 0 deg, horizontal pairs
        assert got[10] == pytest.approx(0.0, abs=1e-9)    # 90 deg, vertical pairs

    def test_single_pixel_rejected(self):
        img = rand_image(54)
        mask = np.zeros((64, 64), dtype=np.uint8)
        mask[5, 5] = 1
        with pytest.raises(DegenerateInput):
            extract_glcm(img, mask)

    def test_empty_mask_rejected(self):
        with pytest.raises(DegenerateInput):
            extract_glcm(rand_image(55), np.zeros((64, 64), dtype=np.uint8))


class TestLbp:
    def test_matches_naive_pattern_enumeration_exactly(self):
        for seed in range(3):
            img = rand_image(seed + 60)
            mask = rand_mask(seed + 60)
            got = extract_lbp(img, mask).values
            assert got.shape == (10,)
            want = oracles.lbp_hist(to_gray(img), mask.astype(bool), lbp_offsets())
            assert np.array_equal(got, want)

    def test_constant_image_all_ones_pattern(self):
        img = np.full((16, 16, 3), 90, dtype=np.uint8)
        mask = np.ones((16, 16), dtype=np.uint8)
        got = extract_lbp(img, mask).values
        # every neighbor ties the center, comparator includes ties: bin 8
        assert got[8] == 1.0
        assert got.sum() == 1.0

    def test_histogram_sums_to_one(self):
        for seed in range(3):
            got = extract_lbp(rand_image(seed + 70), rand_mask(seed + 70)).values
            assert got.sum() == pytest.approx(1.0, abs=1e-9)
            assert (got >= 0).all()

    def test_border_only_mask_rejected(self):
        img = rand_image(71)
        mask = np.ones((64, 64), dtype=np.uint8)
        mask[1:-1, 1:-1] = 0
        with pytest.raises(DegenerateInput):
            extract_lbp(img, mask)

    def test_deterministic(self):
        img = rand_image(72)
        mask = rand_mask(72)
        a = extract_lbp(img, mask).values
        b = extract_lbp(img, mask).values
        assert np.array_equal(a, b)
