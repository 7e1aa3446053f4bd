"""Synthetic data generator tests: the shape corpus and the marker benchmark."""

import numpy as np
import pytest

from wastebench.dataset import scan_directory
from wastebench.errors import ConfigError
from wastebench.image import load_image
from wastebench.synth import make_informative_noise, synth_corpus


class TestCorpus:
    def test_layout_and_counts(self, tmp_path):
        counts = synth_corpus(tmp_path, n_classes=4, per_class=3, seed=1, side=32)
        assert counts == {
            "class00_disc": 3,
            "class01_square": 3,
            "class02_stripes": 3,
            "class03_disc": 3,
        }
        ds = scan_directory(tmp_path)
        assert len(ds.samples) == 12
        img = load_image(tmp_path / "class00_disc" / "img_0000.png")
        assert img.shape == (32, 32, 3)
        assert img.dtype == np.uint8

    def test_deterministic_across_runs(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        synth_corpus(a_dir, n_classes=2, per_class=2, seed=9, side=24)
        synth_corpus(b_dir, n_classes=2, per_class=2, seed=9, side=24)
        for rel in ("class00_disc/img_0000.png", "class01_square/img_0001.png"):
            assert (a_dir / rel).read_bytes() == (b_dir / rel).read_bytes()

    def test_seed_changes_pixels(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        synth_corpus(a_dir, n_classes=2, per_class=1, seed=0, side=24)
        synth_corpus(b_dir, n_classes=2, per_class=1, seed=1, side=24)
        a = load_image(a_dir / "class00_disc" / "img_0000.png")
        b = load_image(b_dir / "class00_disc" / "img_0000.png")
        assert not np.array_equal(a, b)

    def test_guards(self, tmp_path):
        with pytest.raises(ConfigError):
            synth_corpus(tmp_path, n_classes=1)
        with pytest.raises(ConfigError):
            synth_corpus(tmp_path, per_class=0)
        with pytest.raises(ConfigError):
            synth_corpus(tmp_path, side=8)


class TestInformativeNoise:
    def test_shapes_and_balance(self):
        x, y, idx = make_informative_noise(100, 30, informative=6, seed=0, n_classes=2)
        assert x.shape == (100, 30)
        assert y.shape == (100,)
        assert len(idx) == 6
        assert sorted(idx.tolist()) == idx.tolist()
        assert np.bincount(y).tolist() == [50, 50]

    def test_markers_actually_shift_means(self):
        x, y, idx = make_informative_noise(400, 20, informative=4, seed=3, amplitude=2.5)
        for t, j in enumerate(idx):
            marked = x[y == (t % 2), j].mean()
            other = x[y != (t % 2), j].mean()
            assert marked - other > 1.5
        noise_cols = [j for j in range(20) if j not in set(idx.tolist())]
        gaps = [abs(x[y == 0, j].mean() - x[y == 1, j].mean()) for j in noise_cols]
        assert max(gaps) < 0.5

    def test_deterministic(self):
        a = make_informative_noise(50, 10, informative=2, seed=7)
        b = make_informative_noise(50, 10, informative=2, seed=7)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])
        assert np.array_equal(a[2], b[2])

    def test_guards(self):
        with pytest.raises(ConfigError):
            make_informative_noise(50, 10, informative=0)
        with pytest.raises(ConfigError):
            make_informative_noise(50, 10, informative=11)
        with pytest.raises(ConfigError):
            make_informative_noise(1, 10, informative=2)
