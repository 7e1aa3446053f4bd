"""Six classifier families behind one train/predict/score/serialize interface.

Every model is trained on z-scored features; the scaler is fit on the
training matrix only and stored inside the model so evaluation cannot leak
test statistics.  Training is deterministic: same data, same seed, same
serialized bytes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..errors import ConfigError, FormatError, TrainingError, ValidationError
from . import gbdt, logistic, neighbors, svm, tree

FAMILIES = ("logistic", "knn", "svm", "dtree", "rforest", "gbdt")
MODEL_SCHEMA = 1

# family -> {option name: (default, validator)}
_SPEC_OPTIONS = {
    "logistic": {
        "loss": ("cross_entropy", lambda v: v in ("cross_entropy", "focal")),
        "gamma": (None, lambda v: v is None or float(v) >= 0.0),
        "alpha": (None, lambda v: v is None or float(v) > 0.0),
        "l2": (1e-4, lambda v: float(v) >= 0.0),
        "max_iter": (2000, lambda v: int(v) >= 1),
        "tol": (1e-6, lambda v: float(v) > 0.0),
    },
    "knn": {
        "k": (5, lambda v: int(v) >= 1),
    },
    "svm": {
        "c": (1.0, lambda v: float(v) > 0.0),
        "tol": (1e-3, lambda v: float(v) > 0.0),
        "max_steps": (1_000_000, lambda v: int(v) >= 1),
    },
    "dtree": {
        "max_depth": (32, lambda v: int(v) >= 1),
        "min_leaf": (1, lambda v: int(v) >= 1),
    },
    "rforest": {
        "trees": (200, lambda v: int(v) >= 1),
        "max_depth": (None, lambda v: v is None or int(v) >= 1),
        "min_leaf": (1, lambda v: int(v) >= 1),
    },
    "gbdt": {
        "rounds": (200, lambda v: int(v) >= 1),
        "learning_rate": (0.1, lambda v: float(v) > 0.0),
        "growth": ("level_wise", lambda v: v in ("level_wise", "leaf_wise")),
        "max_depth": (6, lambda v: int(v) >= 1),
        "max_leaves": (31, lambda v: int(v) >= 2),
        "bins": (256, lambda v: 2 <= int(v) <= 256),
        "reg_lambda": (1.0, lambda v: float(v) >= 0.0),
    },
}


def validate_spec(spec: Dict) -> Dict:
    """Fill family defaults and reject unknown families, options, and values."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"classifier spec must be a dict with a 'family' key, got {spec!r}")
    family = spec["family"]
    if family not in FAMILIES:
        raise ConfigError(f"unknown classifier family {family!r}, expected one of {FAMILIES}")
    options = _SPEC_OPTIONS[family]
    out: Dict = {"family": family}
    for key, value in spec.items():
        if key == "family":
            continue
        if key not in options:
            raise ConfigError(f"unknown option {key!r} for family {family!r}")
        if not options[key][1](value):
            raise ConfigError(f"bad value {value!r} for option {key!r} of family {family!r}")
        out[key] = value
    for key, (default, _) in options.items():
        out.setdefault(key, default)
    if family == "logistic":
        # focal with gamma 0 and alpha 1 is exactly cross-entropy; the
        # cross_entropy loss name is routed through the same code path.
        if out["loss"] == "cross_entropy":
            if out["gamma"] not in (None, 0, 0.0) or out["alpha"] not in (None, 1, 1.0):
                raise ConfigError("gamma/alpha only apply to the focal loss")
            out["gamma"], out["alpha"] = 0.0, 1.0
        else:
            out["gamma"] = 2.0 if out["gamma"] is None else float(out["gamma"])
            out["alpha"] = 0.25 if out["alpha"] is None else float(out["alpha"])
            if out["gamma"] < 0:
                raise ConfigError(f"focal gamma must be >= 0, got {out['gamma']}")
    return out


@dataclass
class Scaler:
    """Per-feature mean/std fitted on training rows; zero stds map to 1."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Scaler":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


@dataclass
class TrainedModel:
    """A fitted classifier: family tag, options, scaler, and learned parameters."""

    family: str
    hyper: Dict
    n_classes: int
    feature_dim: int
    scaler: Scaler
    params: Dict
    train_seconds: float = 0.0
    meta: Dict = field(default_factory=dict)


_FIT = {
    "logistic": logistic.fit,
    "knn": neighbors.fit,
    "svm": svm.fit,
    "dtree": tree.fit,
    "rforest": tree.fit_forest,
    "gbdt": gbdt.fit,
}

_SCORE = {
    "logistic": logistic.score,
    "knn": neighbors.score,
    "svm": svm.score,
    "dtree": tree.score,
    "rforest": tree.score_forest,
    "gbdt": gbdt.score,
}


def _check_matrix(x: np.ndarray, d: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-D, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValidationError("feature matrix contains non-finite values")
    if d is not None and x.shape[1] != d:
        raise ValidationError(f"expected {d} features, got {x.shape[1]}")
    return x


def train(
    spec: Dict,
    x: np.ndarray,
    y: np.ndarray,
    seed: int = 0,
    n_classes: Optional[int] = None,
) -> TrainedModel:
    """Fit one classifier family on (x, y) and wrap it in a TrainedModel."""
    spec = validate_spec(spec)
    x = _check_matrix(x)
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or len(y) != len(x):
        raise ValidationError(f"labels shape {y.shape} does not match {len(x)} rows")
    if len(x) < 2:
        raise TrainingError(f"need at least 2 training samples, got {len(x)}")
    if y.min() < 0:
        raise ValidationError("negative class label")
    c = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if y.max() >= c:
        raise ValidationError(f"label {int(y.max())} out of range [0, {c})")
    if len(np.unique(y)) < 2:
        raise TrainingError("training labels contain a single class")
    scaler = Scaler.fit(x)
    xz = scaler.transform(x)
    t0 = time.perf_counter()
    params = _FIT[spec["family"]](spec, xz, y, c, seed)
    elapsed = time.perf_counter() - t0
    return TrainedModel(
        family=spec["family"],
        hyper={k: v for k, v in spec.items() if k != "family"},
        n_classes=c,
        feature_dim=x.shape[1],
        scaler=scaler,
        params=params,
        train_seconds=elapsed,
    )


def score(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """(n, c) class scores; each row of a probabilistic family sums to 1."""
    x = _check_matrix(x, model.feature_dim)
    xz = model.scaler.transform(x)
    return _SCORE[model.family](model.params, xz, model.n_classes, model.hyper)


def predict(model: TrainedModel, x: np.ndarray) -> np.ndarray:
    """Class labels by argmax score, ties resolved to the lowest class id."""
    return np.argmax(score(model, x), axis=1)


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return {"__nd__": True, "shape": list(obj.shape), "dtype": str(obj.dtype),
                "data": obj.ravel().tolist()}
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if obj.get("__nd__"):
            arr = np.asarray(obj["data"], dtype=obj["dtype"])
            return arr.reshape([int(s) for s in obj["shape"]])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_from_jsonable(v) for v in obj]
    return obj


def serialize(model: TrainedModel) -> bytes:
    """Canonical JSON bytes; floats round-trip exactly (shortest repr).

    Wall-clock fields are excluded: two identical fits serialize identically.
    """
    doc = {
        "model_schema": MODEL_SCHEMA,
        "family": model.family,
        "hyper": _to_jsonable(model.hyper),
        "n_classes": model.n_classes,
        "feature_dim": model.feature_dim,
        "scaler": {"mean": model.scaler.mean.tolist(), "std": model.scaler.std.tolist()},
        "params": _to_jsonable(model.params),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def deserialize(blob: bytes) -> TrainedModel:
    """Inverse of serialize; malformed payloads raise FormatError."""
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"model payload is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("model_schema") != MODEL_SCHEMA:
        raise FormatError(f"unsupported model schema {doc.get('model_schema')!r}"
                          if isinstance(doc, dict) else "model payload is not an object")
    family = doc.get("family")
    if family not in FAMILIES:
        raise FormatError(f"unknown model family {family!r}")
    required = ("hyper", "n_classes", "feature_dim", "scaler", "params")
    for key in required:
        if key not in doc:
            raise FormatError(f"model payload missing {key!r}")
    scaler = Scaler(
        mean=np.asarray(doc["scaler"]["mean"], dtype=np.float64),
        std=np.asarray(doc["scaler"]["std"], dtype=np.float64),
    )
    return TrainedModel(
        family=family,
        hyper=_from_jsonable(doc["hyper"]),
        n_classes=int(doc["n_classes"]),
        feature_dim=int(doc["feature_dim"]),
        scaler=scaler,
        params=_from_jsonable(doc["params"]),
        train_seconds=0.0,
    )
