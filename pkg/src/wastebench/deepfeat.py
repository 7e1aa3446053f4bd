"""Feature-matrix container plus the FMX1 binary codec and CSV ingest.

FMX1 layout, all integers little-endian:

    magic "FMX1" | u32 n | u32 d | u16 tag_len | tag utf-8
    n x (u16 id_len | id utf-8)
    n*d float32, row-major

Feature values produced elsewhere in the package (or exported by an external
network) travel through this one format so training never depends on where
the features came from.
"""

from __future__ import annotations

import csv
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import FormatError, IoError, ValidationError

MAGIC = b"FMX1"


@dataclass
class FeatureMatrix:
    """(n, d) float32 feature rows with per-row sample ids and a source tag."""

    values: np.ndarray
    sample_ids: List[str]
    source_tag: str = ""
    labels: Optional[np.ndarray] = field(default=None)  # optional per-row int labels

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise ValidationError(f"feature matrix must be 2-D, got shape {v.shape}")
        self.values = v
        if len(self.sample_ids) != v.shape[0]:
            raise ValidationError(
                f"{len(self.sample_ids)} sample ids for {v.shape[0]} rows"
            )
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ValidationError("sample ids must be unique")
        if not np.isfinite(v).all():
            raise ValidationError("feature matrix contains non-finite values")
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64)
            if y.shape != (v.shape[0],):
                raise ValidationError(f"labels shape {y.shape} does not match {v.shape[0]} rows")
            self.labels = y

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])


def write_matrix(fm: FeatureMatrix, path: Union[str, Path]) -> None:
    """Serialize to FMX1.  The write is atomic: temp file in place, then rename."""
    path = Path(path)
    tag = fm.source_tag.encode("utf-8")
    if len(tag) > 0xFFFF:
        raise ValidationError(f"source tag too long ({len(tag)} bytes)")
    parts = [MAGIC, struct.pack("<II", fm.n, fm.d), struct.pack("<H", len(tag)), tag]
    for sid in fm.sample_ids:
        b = sid.encode("utf-8")
        if len(b) > 0xFFFF:
            raise ValidationError(f"sample id too long: {sid[:32]!r}...")
        parts.append(struct.pack("<H", len(b)))
        parts.append(b)
    parts.append(np.ascontiguousarray(fm.values, dtype="<f4").tobytes())
    blob = b"".join(parts)
    try:
        fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(blob)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


class _Reader:
    """Cursor over a byte blob that raises FormatError on truncation."""

    def __init__(self, blob: bytes, origin: str) -> None:
        self.blob = blob
        self.pos = 0
        self.origin = origin

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError(
                f"{self.origin}: truncated at byte {self.pos} (need {n} more, have {len(self.blob) - self.pos})"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out


def read_matrix(path: Union[str, Path]) -> FeatureMatrix:
    """Parse an FMX1 file, validating structure, byte count, and finiteness."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    r = _Reader(blob, str(path))
    if r.take(4) != MAGIC:
        raise FormatError(f"{path}: bad magic, not an FMX1 file")
    n, d = struct.unpack("<II", r.take(8))
    (tag_len,) = struct.unpack("<H", r.take(2))
    try:
        tag = r.take(tag_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: source tag is not valid utf-8") from exc
    ids: List[str] = []
    for i in range(n):
        (id_len,) = struct.unpack("<H", r.take(2))
        try:
            ids.append(r.take(id_len).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: sample id {i} is not valid utf-8") from exc
    values = np.frombuffer(r.take(n * d * 4), dtype="<f4").reshape(n, d).copy()
    if r.pos != len(blob):
        raise FormatError(f"{path}: {len(blob) - r.pos} trailing bytes after matrix payload")
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate sample ids")
    if not np.isfinite(values).all():
        raise FormatError(f"{path}: matrix contains non-finite values")
    return FeatureMatrix(values=values, sample_ids=ids, source_tag=tag)


def _parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise FormatError(f"{where}: cannot parse {token!r} as a number") from exc


def import_csv(
    path: Union[str, Path],
    has_header: bool = False,
    label_column: Union[str, bool] = "auto",
    source_tag: str = "csv_import",
) -> Tuple[FeatureMatrix, Optional[np.ndarray]]:
    """Ingest a numeric CSV as a feature matrix.

    ``label_column`` controls whether the last column is a label vector:
    True forces it, False forbids it, and "auto" treats it as labels when
    every entry is integer-valued.  Ragged rows fail with the 1-based line
    number.  Returns the matrix plus the label vector (or None).
    """
    path = Path(path)
    rows: List[List[str]] = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for ln, row in enumerate(reader, start=1):
                if not row:
                    continue
                if has_header and ln == 1:
                    continue
                rows.append(row)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    offset = 2 if has_header else 1
    for i, row in enumerate(rows):
        if len(row) != width:
            raise FormatError(f"{path}: line {i + offset}: expected {width} columns, got {len(row)}")
    data = np.empty((len(rows), width), dtype=np.float64)
    for i, row in enumerate(rows):
        for j, tok in enumerate(row):
            data[i, j] = _parse_float(tok, f"{path}: line {i + offset}, column {j + 1}")
    take_labels: bool
    if label_column == "auto":
        last = data[:, -1]
        take_labels = width >= 2 and bool(np.all(np.isfinite(last)) and np.all(last == np.rint(last)))
    elif label_column:
        if width < 2:
            raise FormatError(f"{path}: label column requested but only {width} column present")
        take_labels = True
    else:
        take_labels = False
    if take_labels:
        labels = data[:, -1].astype(np.int64)
        feats = data[:, :-1]
    else:
        labels = None
        feats = data
    if not np.isfinite(feats).all():
        raise FormatError(f"{path}: non-finite feature values")
    ids = [f"row{i:06d}" for i in range(len(rows))]
    fm = FeatureMatrix(values=feats.astype(np.float32), sample_ids=ids, source_tag=source_tag,
                       labels=labels)
    return fm, labels


def read_labels_csv(path: Union[str, Path]) -> Tuple[List[str], np.ndarray, List[str]]:
    """Read per-sample labels from CSV.

    Accepts either the 3-column split manifest (``path,class_id,split``) or a
    2-column ``id,label`` file.  Returns (sample_ids, labels, splits); splits
    is filled with "unsplit" for the 2-column form.
    """
    ids: List[str] = []
    labels: List[int] = []
    splits: List[str] = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for ln, row in enumerate(reader, start=1):
                if not row:
                    continue
                if len(row) not in (2, 3):
                    raise FormatError(f"{path}: line {ln}: expected 2 or 3 columns, got {len(row)}")
                try:
                    label = int(row[1])
                except ValueError as exc:
                    if ln == 1:
                        continue  # header row
                    raise FormatError(f"{path}: line {ln}: bad label {row[1]!r}") from exc
                ids.append(row[0])
                labels.append(label)
                splits.append(row[2] if len(row) == 3 else "unsplit")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not ids:
        raise FormatError(f"{path}: no label rows")
    return ids, np.asarray(labels, dtype=np.int64), splits


def align_labels(fm: FeatureMatrix, path: Union[str, Path]) -> Tuple[np.ndarray, List[str]]:
    """Match a labels CSV to a feature matrix by sample id.

    Every matrix row must be covered; returns (labels, splits) in row order.
    """
    ids, labels, splits = read_labels_csv(path)
    lookup = {sid: i for i, sid in enumerate(ids)}
    out_labels = np.empty(fm.n, dtype=np.int64)
    out_splits: List[str] = []
    for r, sid in enumerate(fm.sample_ids):
        if sid not in lookup:
            raise FormatError(f"{path}: no label row for sample id {sid!r}")
        j = lookup[sid]
        out_labels[r] = labels[j]
        out_splits.append(splits[j])
    return out_labels, out_splits
