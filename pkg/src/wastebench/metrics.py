"""Evaluation metrics and the timing harness.

All rates are returned as percentages.  Values are kept at full precision
internally; report writers round to 2 decimals at the edge.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .errors import ConfigError, ValidationError


def confusion(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Confusion matrix with rows = true class, columns = predicted class."""
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ValidationError(f"label vectors must be 1-D and equal length, got {t.shape} vs {p.shape}")
    if n_classes < 1:
        raise ValidationError(f"n_classes must be >= 1, got {n_classes}")
    for name, v in (("true", t), ("predicted", p)):
        if len(v) and (v.min() < 0 or v.max() >= n_classes):
            raise ValidationError(f"{name} label out of range [0, {n_classes})")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (t, p), 1)
    return m


def summarize(m: np.ndarray) -> Dict[str, object]:
    """Precision/recall/F1 (macro and weighted) plus accuracy, in percent.

    Zero-denominator conventions: precision of a never-predicted class is 0,
    recall of an absent class is 0, F1 is 0 when precision + recall is 0.
    """
    m = np.asarray(m, dtype=np.int64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"confusion matrix must be square, got {m.shape}")
    total = int(m.sum())
    if total == 0:
        raise ValidationError("confusion matrix has zero total")
    tp = np.diag(m).astype(np.float64)
    col = m.sum(axis=0).astype(np.float64)
    row = m.sum(axis=1).astype(np.float64)
    precision = np.where(col > 0, tp / np.where(col > 0, col, 1.0), 0.0)
    recall = np.where(row > 0, tp / np.where(row > 0, row, 1.0), 0.0)
    pr = precision + recall
    f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    weights = row / total
    out: Dict[str, object] = {
        "accuracy": 100.0 * tp.sum() / total,
        "macro_precision": 100.0 * precision.mean(),
        "macro_recall": 100.0 * recall.mean(),
        "macro_f1": 100.0 * f1.mean(),
        "weighted_precision": 100.0 * float(weights @ precision),
        "weighted_recall": 100.0 * float(weights @ recall),
        "weighted_f1": 100.0 * float(weights @ f1),
        "per_class_precision": (100.0 * precision).tolist(),
        "per_class_recall": (100.0 * recall).tolist(),
        "per_class_f1": (100.0 * f1).tolist(),
        "support": row.astype(int).tolist(),
    }
    return out


def round_report(summary: Dict[str, object]) -> Dict[str, object]:
    """Round every percentage in a summary to 2 decimals for reporting."""
    out: Dict[str, object] = {}
    for k, v in summary.items():
        if isinstance(v, float):
            out[k] = round(v, 2)
        elif isinstance(v, list) and v and isinstance(v[0], float):
            out[k] = [round(x, 2) for x in v]
        else:
            out[k] = v
    return out


def time_stage(fn: Callable[[], object], reps: int = 5) -> float:
    """Median wall-clock seconds of ``fn`` over ``reps`` runs, after one warm-up."""
    if reps < 3:
        raise ConfigError(f"reps must be >= 3, got {reps}")
    fn()  # warm-up, excluded
    samples: List[float] = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


@dataclass
class TimingRecord:
    """Per-model timing: training, feature extraction, and inference decomposition.

    Per-sample inference cost is fe_ms + clf_ms by definition, so the
    decomposition always adds up exactly.
    """

    model: str
    train_s: float
    fe_s: float
    fe_ms: float
    clf_ms: float
    n_test: int
    reps: int

    @property
    def infer_ms(self) -> float:
        return self.fe_ms + self.clf_ms

    def as_dict(self) -> Dict[str, object]:
        return {
            "model": self.model,
            "train_s": self.train_s,
            "fe_s": self.fe_s,
            "fe_ms": self.fe_ms,
            "clf_ms": self.clf_ms,
            "infer_ms": self.infer_ms,
            "n_test": self.n_test,
            "reps": self.reps,
        }
