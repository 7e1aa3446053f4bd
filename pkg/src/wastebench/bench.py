"""Experiment grid: plans, per-cell train/eval reports, selection sweeps,
and the timing decomposition table."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import classifiers, selection
from .dataset import LabeledDataset, scan_directory, split_indices
from .deepfeat import align_labels, read_matrix
from .errors import ConfigError, IoError, WastebenchError
from .features import SEGMENT_MODES, extract_from_image
from .image import load_image, resize_bilinear
from .metrics import TimingRecord, confusion, round_report, summarize, time_stage

PIPELINES = ("handcrafted", "deep", "hybrid")
DEFAULT_K_LIST = (100, 90, 80, 70, 60, 50)

CSV_COLUMNS = (
    "pipeline", "model", "k_features", "reduction_pct", "accuracy",
    "precision_macro", "recall_macro", "f1_macro",
    "precision_weighted", "recall_weighted", "f1_weighted",
    "train_s", "fe_s", "infer_ms", "error",
)


@dataclass
class ExperimentPlan:
    """Declarative description of one experiment grid."""

    pipeline: str
    specs: list[dict]
    dataset: Optional[str] = None       # image corpus root (handcrafted)
    features: Optional[str] = None      # feature-matrix file (deep/hybrid)
    labels: Optional[str] = None        # labels CSV when the matrix has none
    selection: Optional[dict] = None    # {"method", "k_list", "baseline"}
    segment: str = "grabcut"
    resize: Optional[int] = None
    ratios: tuple = (0.8, 0.1, 0.1)
    seed: int = 0
    out_dir: Optional[str] = None
    fe_ms_per_sample: Optional[float] = None  # hybrid upstream-network stand-in

    def __post_init__(self) -> None:
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        if not self.specs:
            raise ConfigError("plan needs at least one classifier spec")
        self.specs = [classifiers.validate_spec(s) for s in self.specs]
        if self.pipeline == "handcrafted":
            if not self.dataset:
                raise ConfigError("handcrafted pipeline requires a dataset directory")
            if self.segment not in SEGMENT_MODES:
                raise ConfigError(f"segment must be one of {SEGMENT_MODES}")
        else:
            if not self.features:
                raise ConfigError(f"{self.pipeline} pipeline requires a feature-matrix file")
        if self.selection is not None:
            method = self.selection.get("method", "embedded")
            if method not in ("embedded", "wrapper"):
                raise ConfigError(f"unknown selection method {method!r}")
            k_list = self.selection.get("k_list", list(DEFAULT_K_LIST))
            if not k_list or any(int(k) < 1 for k in k_list):
                raise ConfigError(f"bad selection k_list {k_list!r}")
            self.selection = {
                "method": method,
                "k_list": [int(k) for k in k_list],
                "baseline": bool(self.selection.get("baseline", True)),
            }
        self.ratios = tuple(float(r) for r in self.ratios)

    @classmethod
    def from_json(cls, path) -> "ExperimentPlan":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise IoError(f"cannot read plan {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"plan {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("plan JSON must be an object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown plan fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class EvalReport:
    """Outcome of one (classifier, k) grid cell."""

    pipeline: str
    model: str
    k_features: Optional[int]
    d_total: int
    metrics: Optional[dict] = None      # unrounded percentage summary
    confusion: Optional[list] = None
    timing: Optional[TimingRecord] = None
    selected: Optional[list] = None
    error: Optional[str] = None
    model_bytes: Optional[bytes] = None

    @property
    def reduction_pct(self) -> Optional[float]:
        if self.k_features is None:
            return None
        return 100.0 * (1.0 - self.k_features / self.d_total)

    def to_json_dict(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "model": self.model,
            "k_features": self.k_features,
            "d_total": self.d_total,
            "reduction_pct": round(self.reduction_pct, 2) if self.k_features else None,
            "metrics": _nest_metrics(round_report(self.metrics)) if self.metrics else None,
            "confusion": self.confusion,
            "timing": self.timing.as_dict() if self.timing else None,
            "error": self.error,
        }


def _nest_metrics(m: dict) -> dict:
    """Regroup the flat summary into the report's {macro, weighted} shape."""
    return {
        "accuracy": m["accuracy"],
        "macro": {k: m[f"macro_{k}"] for k in ("precision", "recall", "f1")},
        "weighted": {k: m[f"weighted_{k}"] for k in ("precision", "recall", "f1")},
        "per_class": {
            k: m[f"per_class_{k}"] for k in ("precision", "recall", "f1")
        },
        "support": m.get("support"),
    }


def extract_dataset(ds: LabeledDataset, segment: str = "grabcut",
                    resize: Optional[int] = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Extract the 1305-dim vector for every sample, in dataset order.

    Returns (features, labels, seconds). Flagged blocks are kept as zeros.
    """
    rows = []
    start = time.perf_counter()
    for s in ds.samples:
        img = load_image(s.path)
        if resize is not None:
            img = resize_bilinear(img, resize)
        rows.append(extract_from_image(img, segment=segment).flat)
    elapsed = time.perf_counter() - start
    labels = np.array([s.class_id for s in ds.samples], dtype=np.int64)
    return np.stack(rows), labels, elapsed


def _load_plan_data(plan: ExperimentPlan) -> tuple[np.ndarray, np.ndarray, float]:
    """Feature matrix, labels, and per-sample FE milliseconds for the plan."""
    if plan.pipeline == "handcrafted":
        ds = scan_directory(plan.dataset)
        x, y, seconds = extract_dataset(ds, segment=plan.segment, resize=plan.resize)
        return x, y, 1000.0 * seconds / len(y)
    start = time.perf_counter()
    fm = read_matrix(plan.features)
    decode_s = time.perf_counter() - start
    if fm.labels is not None:
        y = np.asarray(fm.labels, dtype=np.int64)
    elif plan.labels:
        y, _ = align_labels(fm, plan.labels)
    else:
        raise ConfigError("feature matrix carries no labels and no --labels file given")
    if plan.pipeline == "deep":
        fe_ms = 0.0  # end-to-end rows have no separate FE stage
    elif plan.fe_ms_per_sample is not None:
        fe_ms = float(plan.fe_ms_per_sample)
    else:
        fe_ms = 1000.0 * decode_s / fm.n
    return np.asarray(fm.values, dtype=np.float64), y, fe_ms


def _split_arrays(y: np.ndarray, ratios, seed: int):
    parts = np.array(split_indices(y, ratios, seed))
    train = np.nonzero(parts == "train")[0]
    val = np.nonzero(parts == "val")[0]
    test = np.nonzero(parts == "test")[0]
    return train, val, test


def run_split_experiment(
    x: np.ndarray,
    y: np.ndarray,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    plan: ExperimentPlan,
    fe_ms: float = 0.0,
) -> list[EvalReport]:
    """Grid cells on a fixed split. Ranking, scaling, and fitting read only
    train rows; a failing cell is recorded and the rest proceed."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    d = x.shape[1]
    n_classes = int(y.max()) + 1
    x_train, y_train = x[train_idx], y[train_idx]
    x_test, y_test = x[test_idx], y[test_idx]

    ranking = None
    rank_error = None
    cells: list[tuple[dict, Optional[int]]] = []
    if plan.selection is not None:
        try:
            if plan.selection["method"] == "embedded":
                ranking = selection.rank_embedded_rf(x_train, y_train, seed=plan.seed)
            else:
                half = len(train_idx) // 2
                ranking = selection.wrapper_forward(
                    x_train[:half], y_train[:half], x_train[half:], y_train[half:],
                    max_k=max(plan.selection["k_list"]), seed=plan.seed,
                )
        except WastebenchError as exc:
            rank_error = f"{type(exc).__name__}: {exc}"
        for spec in plan.specs:
            if plan.selection["baseline"]:
                cells.append((spec, None))
            for k in plan.selection["k_list"]:
                cells.append((spec, k))
    else:
        cells = [(spec, None) for spec in plan.specs]

    reports = []
    for spec, k in cells:
        report = EvalReport(pipeline=plan.pipeline, model=spec["family"],
                            k_features=k, d_total=d)
        try:
            if k is None:
                cols = np.arange(d)
            elif rank_error is not None:
                raise ConfigError(f"selection failed: {rank_error}")
            else:
                cols = np.array(selection.select_top_k(ranking, k), dtype=np.int64)
            model = classifiers.train(spec, x_train[:, cols], y_train,
                                      seed=plan.seed, n_classes=n_classes)
            pred_start = time.perf_counter()
            y_pred = classifiers.predict(model, x_test[:, cols])
            clf_s = time.perf_counter() - pred_start
            conf = confusion(y_test, y_pred, n_classes)
            report.metrics = summarize(conf)
            report.confusion = conf.tolist()
            report.selected = cols.tolist() if k is not None else None
            report.model_bytes = classifiers.serialize(model)
            report.timing = TimingRecord(
                model=spec["family"],
                train_s=model.train_seconds,
                fe_s=fe_ms * len(y_test) / 1000.0,
                fe_ms=fe_ms,
                clf_ms=1000.0 * clf_s / max(1, len(y_test)),
                n_test=len(y_test),
                reps=1,
            )
        except WastebenchError as exc:
            report.error = f"{type(exc).__name__}: {exc}"
        reports.append(report)
    return reports


def run_experiment(plan: ExperimentPlan) -> list[EvalReport]:
    """Load plan data, split, run all grid cells, and write reports."""
    x, y, fe_ms = _load_plan_data(plan)
    train_idx, _, test_idx = _split_arrays(y, plan.ratios, plan.seed)
    reports = run_split_experiment(x, y, train_idx, test_idx, plan, fe_ms=fe_ms)
    if plan.out_dir:
        write_reports(reports, plan.out_dir)
    return reports


def sweep_selection(plan: ExperimentPlan, k_list=DEFAULT_K_LIST) -> list[EvalReport]:
    """Embedded-ranking sweep over k with a no-selection baseline; one ranking
    per experiment, so cells are nested truncations of each other."""
    plan.selection = {"method": "embedded", "k_list": [int(k) for k in k_list],
                      "baseline": True}
    return run_experiment(plan)


def timing_table(plan: ExperimentPlan, reps: int = 5) -> list[TimingRecord]:
    """Per-model timing decomposition on the plan's test split.

    clf_ms is a median over reps; fe_ms follows the pipeline convention
    (measured extraction for handcrafted, 0 for deep end-to-end rows, the
    plan's stand-in or file-decode time for hybrid).
    """
    x, y, fe_ms = _load_plan_data(plan)
    train_idx, _, test_idx = _split_arrays(y, plan.ratios, plan.seed)
    n_classes = int(y.max()) + 1
    x_train, y_train = x[train_idx], y[train_idx]
    x_test = x[test_idx]
    records = []
    for spec in plan.specs:
        model = classifiers.train(spec, x_train, y_train, seed=plan.seed,
                                  n_classes=n_classes)
        clf_s = time_stage(lambda: classifiers.predict(model, x_test), reps=reps)
        records.append(TimingRecord(
            model=spec["family"],
            train_s=model.train_seconds,
            fe_s=fe_ms * len(x_test) / 1000.0,
            fe_ms=fe_ms,
            clf_ms=1000.0 * clf_s / max(1, len(x_test)),
            n_test=len(x_test),
            reps=reps,
        ))
    return records


def _cell_csv_row(r: EvalReport) -> list:
    if r.error is not None or r.metrics is None:
        head = [r.pipeline, r.model, r.k_features if r.k_features else "all", "", "",
                "", "", "", "", "", ""]
        return head + ["", "", "", r.error or ""]
    m = round_report(r.metrics)
    red = round(r.reduction_pct, 2) if r.k_features else ""
    t = r.timing
    return [
        r.pipeline, r.model, r.k_features if r.k_features else "all", red,
        m["accuracy"],
        m["macro_precision"], m["macro_recall"], m["macro_f1"],
        m["weighted_precision"], m["weighted_recall"], m["weighted_f1"],
        round(t.train_s, 4), round(t.fe_s, 4), round(t.infer_ms, 4), "",
    ]


def write_reports(reports: list[EvalReport], out_dir) -> Path:
    """One JSON per cell plus a combined CSV; returns the CSV path."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for r in reports:
            k_tag = "all" if r.k_features is None else f"k{r.k_features}"
            name = f"report_{r.pipeline}_{r.model}_{k_tag}.json"
            (out / name).write_text(json.dumps(r.to_json_dict(), indent=2) + "\n")
        csv_path = out / "results.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in reports:
                w.writerow(_cell_csv_row(r))
    except OSError as exc:
        raise IoError(f"cannot write reports under {out}: {exc}") from exc
    return csv_path
