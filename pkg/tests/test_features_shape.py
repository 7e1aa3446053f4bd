"""Shape descriptor tests: contour geometry and Hu moment invariances."""

import numpy as np
import pytest

from conftest import rand_image
from wastebench.errors import DegenerateInput
from wastebench.features.shape import extract_contour, extract_hu


def blank(h=200, w=200):
    return np.zeros((h, w, 3), dtype=np.uint8)


def disc_mask(side=200, radius=50):
    yy, xx = np.mgrid[0:side, 0:side]
    return (((yy - side // 2) ** 2 + (xx - side // 2) ** 2) <= radius ** 2).astype(np.uint8)


class TestContour:
    def test_filled_rectangle(self):
        mask = np.zeros((200, 200), dtype=np.uint8)
        mask[20:70, 40:140] = 1  # 50 rows x 100 cols
        area, perim, aspect, extent, solidity = extract_contour(blank(), mask).values
        assert area == 50 * 100
        # axis-aligned boundary walk: 2*(w-1) + 2*(h-1)
        assert perim == pytest.approx(2 * 99 + 2 * 49, abs=1e-9)
        assert aspect == pytest.approx(2.0, abs=1e-12)
        assert extent == pytest.approx(1.0, abs=1e-12)
        assert solidity == pytest.approx(1.0, abs=1e-12)

    def test_single_pixel(self):
        mask = np.zeros((50, 50), dtype=np.uint8)
        mask[7, 9] = 1
        got = extract_contour(blank(50, 50), mask).values
        np.testing.assert_allclose(got, [1.0, 0.0, 1.0, 1.0, 1.0])

    def test_disc_is_nearly_convex(self):
        mask = disc_mask()
        area, perim, aspect, extent, solidity = extract_contour(blank(), mask).values
        assert area == mask.sum()
        assert 0.98 <= solidity <= 1.0
        assert aspect == pytest.approx(1.0, abs=1e-12)
        # extent of a disc in its bounding square is near pi/4
        assert extent == pytest.approx(np.pi / 4, abs=0.02)

    def test_largest_region_wins(self):
        mask = np.zeros((100, 100), dtype=np.uint8)
        mask[10:40, 10:40] = 1   # 900 px
        mask[70:80, 70:80] = 1   # 100 px
        got = extract_contour(blank(100, 100), mask).values
        assert got[0] == 900

    def test_l_shape_solidity_below_one(self):
        mask = np.zeros((100, 100), dtype=np.uint8)
        mask[10:60, 10:30] = 1
        mask[40:60, 10:80] = 1
        got = extract_contour(blank(100, 100), mask).values
        assert got[4] < 0.9
        assert got[3] < 1.0

    def test_empty_mask_rejected(self):
        with pytest.raises(DegenerateInput):
            extract_contour(blank(30, 30), np.zeros((30, 30), dtype=np.uint8))


class TestHu:
    def shapes(self):
        # chiral L-shapes: no mirror symmetry, so every invariant sits well
        # above float noise and the sign-log transform stays stable
        out = []
        rng = np.random.default_rng(11)
        for _ in range(10):
            mask = np.zeros((96, 96), dtype=np.uint8)
            t = int(rng.integers(4, 8))
            a = int(rng.integers(14, 26))
            b = int(rng.integers(a + 4, a + 14))
            mask[30 : 30 + t, 30 : 30 + a] = 1
            mask[30 : 30 + b, 30 : 30 + t] = 1
            out.append(mask)
        return out

    def img_for(self, mask):
        img = np.zeros(mask.shape + (3,), dtype=np.uint8)
        img[mask.astype(bool)] = 180
        return img

    def test_translation_invariant_exactly(self):
        for mask in self.shapes():
            rows, cols = np.nonzero(mask)
            shifted = np.zeros_like(mask)
            shifted[rows + 8, cols + 12] = 1
            a = extract_hu(self.img_for(mask), mask).values
            b = extract_hu(self.img_for(shifted), shifted).values
            np.testing.assert_allclose(a, b, atol=1e-9)

    def test_rotation_90_near_invariant(self):
        for mask in self.shapes():
            rot = np.rot90(mask).copy()
            a = extract_hu(self.img_for(mask), mask).values
            b = extract_hu(self.img_for(rot), rot).values
            np.testing.assert_allclose(a, b, atol=1e-3)

    def test_scale_2x_near_invariant(self):
        for mask in self.shapes():
            big = np.kron(mask, np.ones((2, 2), dtype=np.uint8))
            a = extract_hu(self.img_for(mask), mask).values
            b = extract_hu(self.img_for(big), big).values
            np.testing.assert_allclose(a, b, atol=1e-2)

    def test_dim_and_finiteness(self):
        img = rand_image(40)
        mask = np.ones((64, 64), dtype=np.uint8)
        got = extract_hu(img, mask).values
        assert got.shape == (7,)
        assert np.isfinite(got).all()

    def test_zero_intensity_rejected(self):
        mask = np.ones((20, 20), dtype=np.uint8)
        with pytest.raises(DegenerateInput):
            extract_hu(blank(20, 20), mask)

    def test_empty_mask_rejected(self):
        with pytest.raises(DegenerateInput):
            extract_hu(rand_image(41, 20, 20), np.zeros((20, 20), dtype=np.uint8))
