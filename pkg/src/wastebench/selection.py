"""Feature selection: embedded random-forest ranking and greedy wrapper search.

The embedded route scores every feature by mean Gini impurity decrease over
a forest and ranks all of them; sweeps then slice prefixes of one ranking so
k and k' < k always give nested feature sets.  The wrapper route grows a set
greedily by validation accuracy with an early-stop patience window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from . import classifiers
from .errors import ConfigError, FormatError, IoError


@dataclass
class SelectionResult:
    """Ranking produced by one selection method."""

    method: str
    ranked_indices: List[int]
    scores: List[float]
    k: Optional[int] = None
    meta: Dict = field(default_factory=dict)

    def to_json(self) -> bytes:
        doc = {
            "method": self.method,
            "k": self.k,
            "ranked_indices": [int(i) for i in self.ranked_indices],
            "scores": [float(s) for s in self.scores],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_json(cls, blob: bytes) -> "SelectionResult":
        try:
            doc = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"selection payload is not valid JSON: {exc}") from exc
        for key in ("method", "ranked_indices", "scores"):
            if not isinstance(doc, dict) or key not in doc:
                raise FormatError(f"selection payload missing {key!r}")
        return cls(
            method=doc["method"],
            ranked_indices=[int(i) for i in doc["ranked_indices"]],
            scores=[float(s) for s in doc["scores"]],
            k=doc.get("k"),
        )


def save_selection(result: SelectionResult, path: Union[str, Path]) -> None:
    try:
        Path(path).write_bytes(result.to_json())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_selection(path: Union[str, Path]) -> SelectionResult:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return SelectionResult.from_json(blob)


def rank_embedded_rf(
    x: np.ndarray,
    y: np.ndarray,
    trees: int = 200,
    seed: int = 0,
) -> SelectionResult:
    """Rank every feature by mean impurity decrease of a bagged forest.

    Scores are nonnegative and sum to the forest's mean total impurity
    decrease.  Ranking is by descending score with index order breaking ties,
    so an all-constant matrix ranks features 0, 1, 2, ...
    """
    model = classifiers.train({"family": "rforest", "trees": trees}, x, y, seed=seed)
    scores = np.asarray(model.params["importances"], dtype=np.float64)
    d = len(scores)
    ranked = np.lexsort((np.arange(d), -scores))
    return SelectionResult(
        method="embedded_rf",
        ranked_indices=[int(i) for i in ranked],
        scores=[float(scores[i]) for i in ranked],
        meta={"oob_accuracy": model.params.get("oob_accuracy"), "model": model},
    )


def select_top_k(result: SelectionResult, k: int) -> List[int]:
    """First k of the ranking, returned in ascending index order."""
    d = len(result.ranked_indices)
    if not 1 <= k <= d:
        raise ConfigError(f"k must be in [1, {d}], got {k}")
    return sorted(result.ranked_indices[:k])


def wrapper_forward(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    base_spec: Optional[Dict] = None,
    max_k: int = 10,
    patience: int = 5,
    seed: int = 0,
) -> SelectionResult:
    """Greedy forward selection driven by validation accuracy.

    Each round adds the candidate feature with the best validation accuracy
    (ties to the lowest index) and stops at max_k features or after
    ``patience`` rounds without improving on the best accuracy so far.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=np.float64)
    d = x_train.shape[1]
    if not 1 <= max_k <= d:
        raise ConfigError(f"max_k must be in [1, {d}], got {max_k}")
    if patience < 1:
        raise ConfigError(f"patience must be >= 1, got {patience}")
    spec = dict(base_spec or {"family": "logistic"})
    y_val = np.asarray(y_val, dtype=np.int64)
    chosen: List[int] = []
    accs: List[float] = []
    remaining = list(range(d))
    best_so_far = -np.inf
    stale = 0
    while remaining and len(chosen) < max_k and stale < patience:
        round_best = None  # (acc, feature)
        for f in remaining:
            cols = chosen + [f]
            model = classifiers.train(spec, x_train[:, cols], y_train, seed=seed)
            acc = float(np.mean(classifiers.predict(model, x_val[:, cols]) == y_val))
            if round_best is None or acc > round_best[0]:
                round_best = (acc, f)
        acc, f = round_best
        chosen.append(f)
        remaining.remove(f)
        accs.append(acc)
        if acc > best_so_far:
            best_so_far = acc
            stale = 0
        else:
            stale += 1
    return SelectionResult(
        method="wrapper_forward",
        ranked_indices=chosen,
        scores=accs,
        k=len(chosen),
    )
