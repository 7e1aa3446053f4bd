"""Directory-tree dataset handling: scan, stratified split, manifests, label audit.

Layout convention: one subdirectory per class under the dataset root, class
ids assigned by lexicographic subdirectory order.  Sample order inside a
class is lexicographic file order, so a rescan of the same tree yields the
same ids.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, FormatError, IoError, StratificationError
from .image import load_image, resize_bilinear, seeded_rng

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp"}
SPLITS = ("train", "val", "test")
UNSPLIT = "unsplit"


@dataclass(frozen=True)
class SampleRef:
    """One labelled image: path, class id, and current split assignment."""

    path: Path
    class_id: int
    split: str = UNSPLIT


@dataclass
class LabeledDataset:
    """Scanned dataset: ordered samples, class names, and the scan skip list."""

    samples: List[SampleRef]
    class_names: List[str]
    root: Optional[Path] = None
    skipped: List[Path] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def class_counts(self) -> np.ndarray:
        counts = np.zeros(len(self.class_names), dtype=np.int64)
        for s in self.samples:
            counts[s.class_id] += 1
        return counts

    def subset(self, split: str) -> List[SampleRef]:
        return [s for s in self.samples if s.split == split]


def _decodable(path: Path) -> bool:
    """Header-level decode check; full pixel decode happens lazily later."""
    try:
        with Image.open(path) as im:
            im.verify()
        return True
    except (UnidentifiedImageError, OSError, ValueError):
        return False


def scan_directory(root: Path | str) -> LabeledDataset:
    """Scan a class-per-subdirectory tree into a LabeledDataset.

    Undecodable files with image suffixes land on the skip list instead of
    aborting the scan; other suffixes are ignored outright.
    """
    root = Path(root)
    if not root.is_dir():
        raise IoError(f"dataset root {root} is not a directory")
    class_dirs = sorted([d for d in root.iterdir() if d.is_dir()], key=lambda d: d.name)
    if not class_dirs:
        raise ConfigError(f"dataset root {root} has no class subdirectories")
    samples: List[SampleRef] = []
    skipped: List[Path] = []
    class_names = [d.name for d in class_dirs]
    for cid, cdir in enumerate(class_dirs):
        files = sorted(
            [f for f in cdir.iterdir() if f.is_file() and f.suffix.lower() in IMAGE_SUFFIXES],
            key=lambda f: f.name,
        )
        kept = 0
        for f in files:
            if _decodable(f):
                samples.append(SampleRef(path=f, class_id=cid))
                kept += 1
            else:
                skipped.append(f)
        if kept == 0:
            raise ConfigError(f"class directory {cdir} holds no decodable image")
    return LabeledDataset(samples=samples, class_names=class_names, root=root, skipped=skipped)


def load_and_resize(ref: "SampleRef | Path | str", side: int = 400) -> np.ndarray:
    """Decode one sample and bring it to side x side RGB (bilinear).

    Accepts a SampleRef or a bare path.  An already side x side image passes
    through bit-identically.
    """
    path = ref.path if isinstance(ref, SampleRef) else ref
    return resize_bilinear(load_image(path), side)


def _round_count(x: float) -> int:
    return int(np.rint(x))


def split_dataset(
    ds: LabeledDataset,
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> LabeledDataset:
    """Stratified train/val/test split.

    Per class: val and test sizes are round(ratio * n_c); whatever remains
    (the rounding remainder) goes to train.  Assignment is a seeded per-class
    shuffle, deterministic for a fixed (ds, ratios, seed).
    """
    if len(ratios) != 3:
        raise ConfigError(f"expected 3 ratios, got {len(ratios)}")
    ratios = tuple(float(r) for r in ratios)
    if any(r < 0 for r in ratios):
        raise ConfigError(f"ratios must be >= 0, got {ratios}")
    labels = np.array([s.class_id for s in ds.samples], dtype=np.int64)
    assignment = split_indices(labels, ratios, seed, names=ds.class_names)
    new_samples = [replace(s, split=assignment[i]) for i, s in enumerate(ds.samples)]
    return LabeledDataset(
        samples=new_samples, class_names=list(ds.class_names), root=ds.root, skipped=list(ds.skipped)
    )


def split_indices(
    labels: np.ndarray,
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    names: Optional[List[str]] = None,
) -> List[str]:
    """Per-sample split names for a label vector; same stratified rule as
    split_dataset (val/test sizes rounded per class, remainder to train)."""
    if len(ratios) != 3:
        raise ConfigError(f"expected 3 ratios, got {len(ratios)}")
    ratios = tuple(float(r) for r in ratios)
    if any(r < 0 for r in ratios):
        raise ConfigError(f"ratios must be >= 0, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1 within 1e-9, got sum {sum(ratios)!r}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or len(labels) == 0:
        raise ConfigError("labels must be a nonempty 1-D integer array")
    if labels.min() < 0:
        raise ConfigError("labels must be >= 0")
    nonzero_splits = sum(1 for r in ratios if r > 0)
    assignment = [""] * len(labels)
    for cid in range(int(labels.max()) + 1):
        idx = np.nonzero(labels == cid)[0]
        n_c = len(idx)
        if n_c == 0:
            continue
        tag = names[cid] if names is not None else str(cid)
        if n_c < nonzero_splits:
            raise StratificationError(
                f"class {tag!r} has {n_c} samples but {nonzero_splits} nonzero splits"
            )
        n_val = _round_count(ratios[1] * n_c) if ratios[1] > 0 else 0
        n_test = _round_count(ratios[2] * n_c) if ratios[2] > 0 else 0
        n_train = n_c - n_val - n_test  # remainder absorbed by train
        if n_train < 0 or (ratios[0] > 0 and n_train == 0):
            raise StratificationError(
                f"class {tag!r}: rounding left no train samples (n={n_c}, ratios={ratios})"
            )
        order = seeded_rng(seed, cid).permutation(n_c)
        for pos, j in enumerate(order):
            if pos < n_train:
                part = "train"
            elif pos < n_train + n_val:
                part = "val"
            else:
                part = "test"
            assignment[idx[j]] = part
    return assignment


def write_manifest(ds: LabeledDataset, path: Path | str) -> None:
    """Write the split manifest CSV with header ``path,class_id,split``."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "class_id", "split"])
            for s in ds.samples:
                w.writerow([str(s.path), s.class_id, s.split])
    except OSError as exc:
        raise IoError(f"cannot write manifest {path}: {exc}") from exc


def read_manifest(path: Path | str, class_names: Optional[Sequence[str]] = None) -> LabeledDataset:
    """Read a manifest CSV back into a LabeledDataset.

    Class names are taken from ``class_names`` when given, otherwise
    synthesised as class_<id> for the ids present.
    """
    rows: List[Tuple[str, int, str]] = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for ln, row in enumerate(reader, start=1):
                if ln == 1 and row == ["path", "class_id", "split"]:
                    continue
                if len(row) != 3:
                    raise FormatError(f"{path}: line {ln}: expected 3 columns, got {len(row)}")
                try:
                    cid = int(row[1])
                except ValueError as exc:
                    raise FormatError(f"{path}: line {ln}: bad class_id {row[1]!r}") from exc
                if row[2] not in SPLITS and row[2] != UNSPLIT:
                    raise FormatError(f"{path}: line {ln}: bad split {row[2]!r}")
                rows.append((row[0], cid, row[2]))
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: empty manifest")
    max_id = max(cid for _, cid, _ in rows)
    if any(cid < 0 for _, cid, _ in rows):
        raise FormatError(f"{path}: negative class_id")
    if class_names is None:
        names = [f"class_{i}" for i in range(max_id + 1)]
    else:
        names = list(class_names)
        if max_id >= len(names):
            raise FormatError(f"{path}: class_id {max_id} out of range for {len(names)} classes")
    samples = [SampleRef(path=Path(p), class_id=cid, split=sp) for p, cid, sp in rows]
    return LabeledDataset(samples=samples, class_names=names)


def stratified_folds(labels: np.ndarray, k_folds: int, seed: int = 0) -> np.ndarray:
    """Assign a fold id in [0, k) to every sample, stratified per class.

    Round-robin over a seeded per-class shuffle, so every class with >= 2
    samples appears in at least two folds and no training fold loses a class.
    """
    y = np.asarray(labels, dtype=np.int64)
    if k_folds < 2:
        raise ConfigError(f"k_folds must be >= 2, got {k_folds}")
    folds = np.empty(len(y), dtype=np.int64)
    for cid in np.unique(y):
        idx = np.flatnonzero(y == cid)
        if len(idx) < 2:
            raise StratificationError(
                f"class {int(cid)} has {len(idx)} sample(s); needs >= 2 for out-of-fold prediction"
            )
        order = seeded_rng(seed, int(cid)).permutation(len(idx))
        folds[idx[order]] = np.arange(len(idx)) % k_folds
    return folds


def audit_labels(
    features: np.ndarray,
    labels: np.ndarray,
    k_folds: int = 5,
    spec: Optional[dict] = None,
    seed: int = 0,
) -> List[Tuple[int, int, float]]:
    """Flag likely label errors by out-of-fold disagreement.

    Trains the given classifier spec (default logistic) on k-1 folds, predicts
    the held-out fold, and flags samples whose prediction disagrees with the
    stored label.  Returns (sample_index, predicted_class, confidence) sorted
    by descending confidence; confidence is the predicted-class score.
    """
    from . import classifiers  # local import: classifiers sits above dataset in the stack

    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ConfigError(f"features {X.shape} do not match {len(y)} labels")
    spec = dict(spec or {"family": "logistic"})
    folds = stratified_folds(y, k_folds, seed)
    n_classes = int(y.max()) + 1
    flagged: List[Tuple[int, int, float]] = []
    for f in range(k_folds):
        hold = folds == f
        if not hold.any():
            continue
        model = classifiers.train(spec, X[~hold], y[~hold], seed=seed, n_classes=n_classes)
        scores = classifiers.score(model, X[hold])
        preds = np.argmax(scores, axis=1)
        for local, idx in enumerate(np.flatnonzero(hold)):
            p = int(preds[local])
            if p != y[idx]:
                flagged.append((int(idx), p, float(scores[local, p])))
    flagged.sort(key=lambda t: (-t[2], t[0]))
    return flagged
