"""Feature selection tests: forest-importance ranking and greedy wrapper search."""

import numpy as np
import pytest

from wastebench.classifiers import predict, train
from wastebench.errors import ConfigError, FormatError
from wastebench.selection import (
    SelectionResult,
    load_selection,
    rank_embedded_rf,
    save_selection,
    select_top_k,
    wrapper_forward,
)
from wastebench.synth import make_informative_noise


def labels_plus_noise(seed, n=120, d=12):
    """Feature 0 is a copy of the label; the rest is pure noise."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    x = rng.normal(size=(n, d))
    x[:, 0] = y.astype(np.float64)
    return x, y


class TestEmbedded:
    def test_label_copy_ranks_first(self):
        x, y = labels_plus_noise(0)
        res = rank_embedded_rf(x, y, trees=40, seed=0)
        assert res.method == "embedded_rf"
        assert res.ranked_indices[0] == 0
        assert res.scores == sorted(res.scores, reverse=True)
        assert all(s >= 0 for s in res.scores)

    def test_constant_features_score_zero(self):
        x, y = labels_plus_noise(1)
        x[:, 5] = 3.0
        x[:, 7] = -1.0
        res = rank_embedded_rf(x, y, trees=40, seed=0)
        by_index = dict(zip(res.ranked_indices, res.scores))
        assert by_index[5] == 0.0
        assert by_index[7] == 0.0

    def test_all_constant_ties_break_by_index(self):
        x = np.ones((30, 6))
        x[:, 0] = np.arange(30) % 2  # single informative column to allow a fit
        y = (np.arange(30) % 2).astype(np.int64)
        res = rank_embedded_rf(x, y, trees=10, seed=0)
        # the five constant columns tie at zero and fall back to index order
        assert res.ranked_indices[1:] == [1, 2, 3, 4, 5]

    def test_informative_markers_recovered(self):
        for seed in range(3):
            x, y, idx = make_informative_noise(150, 40, informative=2, seed=seed)
            res = rank_embedded_rf(x, y, trees=60, seed=0)
            top4 = set(res.ranked_indices[:4])
            assert set(idx.tolist()) <= top4

    def test_scores_sum_to_forest_impurity_decrease(self):
        x, y = labels_plus_noise(2, n=80, d=8)
        res = rank_embedded_rf(x, y, trees=30, seed=1)
        model = res.meta["model"]
        total = np.asarray(model.params["importances"]).sum()
        assert sum(res.scores) == pytest.approx(total, rel=1e-6)

    def test_oob_accuracy_exposed(self):
        x, y = labels_plus_noise(3)
        res = rank_embedded_rf(x, y, trees=30, seed=0)
        assert 0.0 <= res.meta["oob_accuracy"] <= 1.0


class TestTopK:
    def result(self):
        return SelectionResult(
            method="embedded_rf",
            ranked_indices=[4, 1, 3, 0, 2],
            scores=[5.0, 4.0, 3.0, 2.0, 1.0],
        )

    def test_prefix_in_index_order(self):
        assert select_top_k(self.result(), 3) == [1, 3, 4]

    def test_full_k_is_identity_set(self):
        assert select_top_k(self.result(), 5) == [0, 1, 2, 3, 4]

    def test_k_one(self):
        assert select_top_k(self.result(), 1) == [4]

    def test_nesting(self):
        res = self.result()
        prev: set = set()
        for k in range(1, 6):
            cur = set(select_top_k(res, k))
            assert prev <= cur
            prev = cur

    def test_out_of_range(self):
        with pytest.raises(ConfigError):
            select_top_k(self.result(), 0)
        with pytest.raises(ConfigError):
            select_top_k(self.result(), 6)


class TestWrapper:
    def split(self, seed, n=160, d=8):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, size=n)
        x = rng.normal(size=(n, d))
        x[:, 3] = y * 2.0 + 0.05 * rng.normal(size=n)  # single decisive feature
        half = n // 2
        return x[:half], y[:half], x[half:], y[half:]

    def test_first_pick_matches_single_feature_bruteforce(self):
        xt, yt, xv, yv = self.split(0)
        res = wrapper_forward(xt, yt, xv, yv, max_k=3, patience=2, seed=0)
        best = None
        for f in range(xt.shape[1]):
            model = train({"family": "logistic"}, xt[:, [f]], yt, seed=0)
            acc = float(np.mean(predict(model, xv[:, [f]]) == yv))
            if best is None or acc > best[0]:
                best = (acc, f)
        assert res.ranked_indices[0] == best[1]
        assert res.scores[0] == pytest.approx(best[0], abs=1e-12)

    def test_perfect_accuracy_then_early_stop(self):
        xt, yt, xv, yv = self.split(1)
        res = wrapper_forward(xt, yt, xv, yv, max_k=8, patience=2, seed=0)
        assert res.scores[0] == 1.0
        # after hitting a ceiling the patience window caps the rounds
        assert len(res.ranked_indices) <= 1 + 2
        assert res.k == len(res.ranked_indices)

    def test_no_repeated_features(self):
        xt, yt, xv, yv = self.split(2)
        res = wrapper_forward(xt, yt, xv, yv, max_k=5, patience=5, seed=0)
        assert len(set(res.ranked_indices)) == len(res.ranked_indices)

    def test_max_k_bounds(self):
        xt, yt, xv, yv = self.split(3)
        with pytest.raises(ConfigError):
            wrapper_forward(xt, yt, xv, yv, max_k=0)
        with pytest.raises(ConfigError):
            wrapper_forward(xt, yt, xv, yv, max_k=9)

    def test_patience_bound(self):
        xt, yt, xv, yv = self.split(4)
        with pytest.raises(ConfigError):
            wrapper_forward(xt, yt, xv, yv, patience=0)


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        res = SelectionResult(
            method="embedded_rf",
            ranked_indices=[2, 0, 1],
            scores=[0.5, 0.25, 0.0],
            k=2,
            meta={"model": object()},  # never serialized
        )
        p = tmp_path / "sel.json"
        save_selection(res, p)
        back = load_selection(p)
        assert back.method == res.method
        assert back.ranked_indices == res.ranked_indices
        assert back.scores == res.scores
        assert back.k == 2
        assert back.meta == {}

    def test_malformed(self, tmp_path):
        p = tmp_path / "sel.json"
        p.write_text("{\"method\": \"embedded_rf\"}")
        with pytest.raises(FormatError):
            load_selection(p)
        p.write_text("nonsense")
        with pytest.raises(FormatError):
            load_selection(p)
