"""Benchmark runner tests: plan validation, grid cells, reports, timing."""

import csv
import json

import numpy as np
import pytest

from wastebench.bench import (
    CSV_COLUMNS,
    EvalReport,
    ExperimentPlan,
    run_experiment,
    run_split_experiment,
    sweep_selection,
    timing_table,
    write_reports,
)
from wastebench.classifiers import deserialize
from wastebench.deepfeat import FeatureMatrix, write_matrix
from wastebench.errors import ConfigError, IoError
from wastebench.synth import make_informative_noise


def deep_plan(**kw):
    base = dict(pipeline="deep", specs=[{"family": "knn", "k": 3}], features="unused.fmx")
    base.update(kw)
    return ExperimentPlan(**base)


def marker_data(seed=0, n=120, d=20):
    x, y, idx = make_informative_noise(n, d, informative=3, seed=seed)
    train_idx = np.arange(0, int(0.7 * n))
    test_idx = np.arange(int(0.7 * n), n)
    return x, y, idx, train_idx, test_idx


class TestPlan:
    def test_specs_get_validated_and_defaulted(self):
        plan = deep_plan(specs=[{"family": "logistic"}])
        assert plan.specs[0]["max_iter"] == 2000

    def test_unknown_pipeline(self):
        with pytest.raises(ConfigError):
            deep_plan(pipeline="quantum")

    def test_empty_specs(self):
        with pytest.raises(ConfigError):
            deep_plan(specs=[])

    def test_handcrafted_needs_dataset(self):
        with pytest.raises(ConfigError):
            ExperimentPlan(pipeline="handcrafted", specs=[{"family": "knn"}])

    def test_deep_needs_features(self):
        with pytest.raises(ConfigError):
            ExperimentPlan(pipeline="deep", specs=[{"family": "knn"}])

    def test_bad_segment(self):
        with pytest.raises(ConfigError):
            ExperimentPlan(pipeline="handcrafted", specs=[{"family": "knn"}],
                           dataset="x", segment="chroma_key")

    def test_selection_normalization(self):
        plan = deep_plan(selection={"k_list": [5, 10]})
        assert plan.selection == {"method": "embedded", "k_list": [5, 10], "baseline": True}

    def test_selection_bad_method(self):
        with pytest.raises(ConfigError):
            deep_plan(selection={"method": "oracle"})

    def test_selection_bad_k_list(self):
        with pytest.raises(ConfigError):
            deep_plan(selection={"k_list": [0]})

    def test_from_json_roundtrip(self, tmp_path):
        p = tmp_path / "plan.json"
        p.write_text(json.dumps({
            "pipeline": "deep",
            "specs": [{"family": "knn", "k": 3}],
            "features": "feats.fmx",
            "seed": 7,
        }))
        plan = ExperimentPlan.from_json(p)
        assert plan.seed == 7
        assert plan.pipeline == "deep"

    def test_from_json_unknown_field(self, tmp_path):
        p = tmp_path / "plan.json"
        p.write_text(json.dumps({"pipeline": "deep", "specs": [{"family": "knn"}],
                                 "features": "f", "telemetry": True}))
        with pytest.raises(ConfigError, match="telemetry"):
            ExperimentPlan.from_json(p)

    def test_from_json_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            ExperimentPlan.from_json(tmp_path / "absent.json")

    def test_from_json_invalid_json(self, tmp_path):
        p = tmp_path / "plan.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            ExperimentPlan.from_json(p)


class TestRunSplit:
    def test_grid_with_failing_cell(self):
        x, y, _, train_idx, test_idx = marker_data()
        plan = deep_plan(selection={"method": "embedded", "k_list": [3, 9999]})
        reports = run_split_experiment(x, y, train_idx, test_idx, plan)
        by_k = {r.k_features: r for r in reports}
        assert set(by_k) == {None, 3, 9999}
        assert by_k[9999].error is not None
        assert by_k[9999].metrics is None
        assert by_k[3].error is None
        assert by_k[None].error is None

    def test_cell_contents(self):
        x, y, _, train_idx, test_idx = marker_data()
        plan = deep_plan(selection={"method": "embedded", "k_list": [5]})
        reports = run_split_experiment(x, y, train_idx, test_idx, plan, fe_ms=2.0)
        cell = next(r for r in reports if r.k_features == 5)
        assert cell.d_total == 20
        assert cell.reduction_pct == pytest.approx(75.0)
        assert len(cell.selected) == 5
        assert np.asarray(cell.confusion).shape == (2, 2)
        assert 0.0 <= cell.metrics["accuracy"] <= 100.0
        model = deserialize(cell.model_bytes)
        assert model.feature_dim == 5
        t = cell.timing
        assert t.fe_ms == 2.0
        assert t.infer_ms == t.fe_ms + t.clf_ms
        assert t.n_test == len(test_idx)
        baseline = next(r for r in reports if r.k_features is None)
        assert baseline.reduction_pct is None
        assert baseline.selected is None

    def test_k_cells_are_nested(self):
        x, y, _, train_idx, test_idx = marker_data(seed=1)
        plan = deep_plan(selection={"method": "embedded", "k_list": [3, 8, 12]})
        reports = run_split_experiment(x, y, train_idx, test_idx, plan)
        sets = {r.k_features: set(r.selected) for r in reports if r.k_features}
        assert sets[3] <= sets[8] <= sets[12]

    def test_test_labels_cannot_touch_training(self):
        # same split, poisoned test labels: identical ranking and model bytes
        x, y, _, train_idx, test_idx = marker_data(seed=2)
        plan = deep_plan(selection={"method": "embedded", "k_list": [4]})
        clean = run_split_experiment(x, y, train_idx, test_idx, plan)
        y_pois = y.copy()
        y_pois[test_idx] = (y[test_idx] + 1) % 2
        poisoned = run_split_experiment(x, y_pois, train_idx, test_idx, plan)
        for a, b in zip(clean, poisoned):
            assert a.model_bytes == b.model_bytes
            assert a.selected == b.selected
        acc_clean = clean[0].metrics["accuracy"]
        acc_pois = poisoned[0].metrics["accuracy"]
        assert acc_clean != acc_pois  # the poison shows up only in evaluation

    def test_wrapper_method_runs(self):
        x, y, idx, train_idx, test_idx = marker_data(seed=3, n=160, d=10)
        plan = deep_plan(
            specs=[{"family": "logistic", "max_iter": 200}],
            selection={"method": "wrapper", "k_list": [3], "baseline": False},
        )
        reports = run_split_experiment(x, y, train_idx, test_idx, plan)
        assert len(reports) == 1
        assert reports[0].error is None
        assert len(reports[0].selected) == 3


class TestExperiments:
    def test_handcrafted_end_to_end(self, shape_corpus, tmp_path):
        out = tmp_path / "out"
        plan = ExperimentPlan(
            pipeline="handcrafted",
            specs=[{"family": "knn", "k": 1}],
            dataset=str(shape_corpus),
            segment="threshold",
            ratios=(0.7, 0.15, 0.15),
            out_dir=str(out),
        )
        reports = run_experiment(plan)
        assert len(reports) == 1
        assert reports[0].error is None
        assert reports[0].d_total == 1305
        assert reports[0].timing.fe_ms > 0.0
        assert (out / "results.csv").exists()
        assert (out / "report_handcrafted_knn_all.json").exists()

    def test_deep_matrix_with_labels_csv(self, tmp_path):
        x, y, _ = make_informative_noise(60, 10, informative=2, seed=5)
        ids = [f"s{i:03d}" for i in range(60)]
        fm = FeatureMatrix(values=x.astype(np.float32), sample_ids=ids, source_tag="t")
        fmx = tmp_path / "f.fmx"
        write_matrix(fm, fmx)
        labels_csv = tmp_path / "labels.csv"
        labels_csv.write_text("".join(f"{i},{c}\n" for i, c in zip(ids, y)))
        plan = ExperimentPlan(
            pipeline="deep",
            specs=[{"family": "knn", "k": 3}],
            features=str(fmx),
            labels=str(labels_csv),
            ratios=(0.6, 0.2, 0.2),
        )
        reports = run_experiment(plan)
        assert reports[0].error is None
        assert reports[0].timing.fe_ms == 0.0  # end-to-end rows: no FE stage

    def test_deep_matrix_without_labels_fails(self, tmp_path):
        x, _, _ = make_informative_noise(20, 5, informative=1, seed=6)
        fm = FeatureMatrix(values=x.astype(np.float32),
                           sample_ids=[f"s{i}" for i in range(20)])
        fmx = tmp_path / "f.fmx"
        write_matrix(fm, fmx)
        plan = ExperimentPlan(pipeline="deep", specs=[{"family": "knn"}],
                              features=str(fmx))
        with pytest.raises(ConfigError):
            run_experiment(plan)

    def test_hybrid_uses_standin_fe_cost(self, tmp_path):
        x, y, _ = make_informative_noise(60, 8, informative=2, seed=7)
        fm = FeatureMatrix(values=x.astype(np.float32),
                           sample_ids=[f"s{i}" for i in range(60)], labels=y)
        fmx = tmp_path / "f.fmx"
        write_matrix(fm, fmx)
        labels_csv = tmp_path / "labels.csv"
        labels_csv.write_text("".join(f"s{i},{c}\n" for i, c in zip(range(60), y)))
        plan = ExperimentPlan(
            pipeline="hybrid",
            specs=[{"family": "knn", "k": 3}],
            features=str(fmx),
            labels=str(labels_csv),
            fe_ms_per_sample=3.5,
        )
        reports = run_experiment(plan)
        assert reports[0].timing.fe_ms == 3.5

    def test_sweep_full_k_equals_baseline(self):
        x, y, _, train_idx, test_idx = marker_data(seed=8, n=100, d=12)
        plan = deep_plan(selection=None)
        plan.selection = None
        reports = run_split_experiment(x, y, train_idx, test_idx,
                                       deep_plan(selection={"k_list": [12]}))
        baseline = next(r for r in reports if r.k_features is None)
        full_k = next(r for r in reports if r.k_features == 12)
        assert full_k.selected == list(range(12))
        assert full_k.model_bytes == baseline.model_bytes
        assert full_k.metrics["accuracy"] == baseline.metrics["accuracy"]

    def test_sweep_selection_installs_grid(self, tmp_path):
        x, y, _ = make_informative_noise(80, 10, informative=2, seed=9)
        fm = FeatureMatrix(values=x.astype(np.float32),
                           sample_ids=[f"s{i}" for i in range(80)], labels=y)
        fmx = tmp_path / "f.fmx"
        write_matrix(fm, fmx)
        labels_csv = tmp_path / "labels.csv"
        labels_csv.write_text("".join(f"s{i},{c}\n" for i, c in zip(range(80), y)))
        plan = ExperimentPlan(pipeline="hybrid", specs=[{"family": "knn", "k": 3}],
                              features=str(fmx), labels=str(labels_csv))
        reports = sweep_selection(plan, k_list=[2, 5])
        ks = sorted((r.k_features for r in reports), key=lambda v: (v is not None, v))
        assert ks == [None, 2, 5]


class TestTimingTable:
    def test_decomposition_identity(self, tmp_path):
        x, y, _ = make_informative_noise(90, 10, informative=2, seed=10)
        fm = FeatureMatrix(values=x.astype(np.float32),
                           sample_ids=[f"s{i}" for i in range(90)], labels=y)
        fmx = tmp_path / "f.fmx"
        write_matrix(fm, fmx)
        labels_csv = tmp_path / "labels.csv"
        labels_csv.write_text("".join(f"s{i},{c}\n" for i, c in zip(range(90), y)))
        plan = ExperimentPlan(pipeline="hybrid",
                              specs=[{"family": "knn", "k": 3},
                                     {"family": "logistic", "max_iter": 50}],
                              features=str(fmx), labels=str(labels_csv),
                              fe_ms_per_sample=1.25)
        records = timing_table(plan, reps=3)
        assert [r.model for r in records] == ["knn", "logistic"]
        for r in records:
            assert r.reps == 3
            assert r.fe_ms == 1.25
            assert r.infer_ms == r.fe_ms + r.clf_ms
            assert r.clf_ms > 0.0


class TestReports:
    def sample_reports(self):
        x, y, _, train_idx, test_idx = marker_data(seed=11)
        plan = deep_plan(selection={"method": "embedded", "k_list": [4, 9999]})
        return run_split_experiment(x, y, train_idx, test_idx, plan)

    def test_csv_layout(self, tmp_path):
        csv_path = write_reports(self.sample_reports(), tmp_path)
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(CSV_COLUMNS)
        assert len(rows[0]) == 15
        for row in rows[1:]:
            assert len(row) == 15
        by_k = {row[2]: row for row in rows[1:]}
        assert by_k["all"][4] != ""          # baseline has accuracy
        assert by_k["9999"][4] == ""         # failed cell: metrics blank
        assert by_k["9999"][14] != ""        # ... but the error is recorded

    def test_json_reports_written(self, tmp_path):
        write_reports(self.sample_reports(), tmp_path)
        names = sorted(p.name for p in tmp_path.glob("report_*.json"))
        assert names == [
            "report_deep_knn_all.json",
            "report_deep_knn_k4.json",
            "report_deep_knn_k9999.json",
        ]
        doc = json.loads((tmp_path / "report_deep_knn_k4.json").read_text())
        assert doc["metrics"]["accuracy"] == round(doc["metrics"]["accuracy"], 2)
        assert doc["reduction_pct"] == 80.0
        assert doc["timing"]["infer_ms"] is not None
