"""Evaluation metric tests: confusion counting, percentage summaries, timing."""

import time

import numpy as np
import pytest

import oracles
from wastebench.errors import ConfigError, ValidationError
from wastebench.metrics import TimingRecord, confusion, round_report, summarize, time_stage


class TestConfusion:
    def test_hand_counted(self):
        y_true = np.array([0, 0, 1, 1, 2, 2, 2])
        y_pred = np.array([0, 1, 1, 1, 2, 0, 2])
        m = confusion(y_true, y_pred, 3)
        want = np.array([[1, 1, 0], [0, 2, 0], [1, 0, 2]])
        assert np.array_equal(m, want)

    def test_matches_recount_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            y_true = rng.integers(0, 4, size=200)
            y_pred = rng.integers(0, 4, size=200)
            m = confusion(y_true, y_pred, 4)
            assert np.array_equal(m, oracles.confusion_recount(y_true, y_pred, 4))
            assert m.sum() == 200

    def test_label_out_of_range(self):
        with pytest.raises(ValidationError):
            confusion(np.array([0, 3]), np.array([0, 1]), 3)
        with pytest.raises(ValidationError):
            confusion(np.array([0, -1]), np.array([0, 1]), 3)
        with pytest.raises(ValidationError):
            confusion(np.array([0]), np.array([3]), 3)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            confusion(np.array([0, 1]), np.array([0]), 2)


class TestSummarize:
    def reference(self):
        # 2-class worked example, every ratio recomputed by hand here
        m = np.array([[50, 10], [5, 35]])
        p0, p1 = 50 / 55, 35 / 45
        r0, r1 = 50 / 60, 35 / 40
        f0 = 2 * p0 * r0 / (p0 + r0)
        f1 = 2 * p1 * r1 / (p1 + r1)
        return m, (p0, p1), (r0, r1), (f0, f1)

    def test_worked_example(self):
        m, (p0, p1), (r0, r1), (f0, f1) = self.reference()
        s = summarize(m)
        assert s["accuracy"] == pytest.approx(85.0, abs=1e-12)
        assert s["macro_precision"] == pytest.approx(100 * (p0 + p1) / 2, abs=1e-9)
        assert s["macro_recall"] == pytest.approx(100 * (r0 + r1) / 2, abs=1e-9)
        assert s["macro_f1"] == pytest.approx(100 * (f0 + f1) / 2, abs=1e-9)
        assert s["weighted_precision"] == pytest.approx(100 * (0.6 * p0 + 0.4 * p1), abs=1e-9)
        assert s["support"] == [60, 40]

    def test_rounded_headline_numbers(self):
        m, _, _, _ = self.reference()
        r = round_report(summarize(m))
        assert r["accuracy"] == 85.0
        assert r["macro_precision"] == 84.34
        assert r["per_class_precision"] == [90.91, 77.78]

    def test_weighted_recall_equals_accuracy(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            y_true = rng.integers(0, 3, size=120)
            y_pred = rng.integers(0, 3, size=120)
            s = summarize(confusion(y_true, y_pred, 3))
            assert s["weighted_recall"] == pytest.approx(s["accuracy"], abs=1e-9)

    def test_f1_between_min_and_max(self):
        rng = np.random.default_rng(8)
        y_true = rng.integers(0, 3, size=150)
        y_pred = rng.integers(0, 3, size=150)
        s = summarize(confusion(y_true, y_pred, 3))
        for p, r, f in zip(
            s["per_class_precision"], s["per_class_recall"], s["per_class_f1"]
        ):
            assert min(p, r) - 1e-9 <= f <= max(p, r) + 1e-9

    def test_class_permutation_invariance(self):
        rng = np.random.default_rng(9)
        y_true = rng.integers(0, 3, size=90)
        y_pred = rng.integers(0, 3, size=90)
        perm = np.array([2, 0, 1])
        a = summarize(confusion(y_true, y_pred, 3))
        b = summarize(confusion(perm[y_true], perm[y_pred], 3))
        for key in ("accuracy", "macro_precision", "macro_recall", "macro_f1"):
            assert a[key] == pytest.approx(b[key], abs=1e-9)

    def test_never_predicted_class_gets_zero_precision(self):
        m = np.array([[3, 0, 1], [0, 0, 2], [0, 0, 4]])  # column 1 empty, row 1 tp=0
        s = summarize(m)
        assert s["per_class_precision"][1] == 0.0
        assert s["per_class_f1"][1] == 0.0

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValidationError):
            summarize(np.zeros((3, 3), dtype=np.int64))

    def test_non_square_rejected(self):
        with pytest.raises(ValidationError):
            summarize(np.zeros((2, 3), dtype=np.int64))


class TestTiming:
    def test_median_bounded_below_by_sleep(self):
        got = time_stage(lambda: time.sleep(0.01), reps=3)
        assert got >= 0.009

    def test_reps_floor(self):
        with pytest.raises(ConfigError):
            time_stage(lambda: None, reps=2)

    def test_record_decomposition_is_exact(self):
        rec = TimingRecord(
            model="logistic", train_s=1.0, fe_s=0.5, fe_ms=2.5,
            clf_ms=0.125, n_test=200, reps=5,
        )
        assert rec.infer_ms == rec.fe_ms + rec.clf_ms
        d = rec.as_dict()
        assert d["infer_ms"] == d["fe_ms"] + d["clf_ms"]
        assert set(d) == {
            "model", "train_s", "fe_s", "fe_ms", "clf_ms", "infer_ms", "n_test", "reps",
        }
