"""Credit-card transaction schema: CSV I/O, cleaning, scaling and splitting."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    EmptyFile,
    HeaderMismatch,
    ParseError,
    SchemaMismatch,
    SingleClass,
)

KAGGLE_FEATURES = ["Time"] + [f"V{i}" for i in range(1, 29)] + ["Amount"]
LABEL_COLUMN = "Class"
SYNTHETIC_COLUMN = "synthetic"
DEFAULT_SCALED = ("Amount", "Time")


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    synthetic_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64).reshape(
            len(self.labels), len(self.feature_names)
        )
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.synthetic_mask is None:
            self.synthetic_mask = np.zeros(len(self.labels), dtype=bool)
        self.synthetic_mask = np.asarray(self.synthetic_mask, dtype=bool)
        if not (len(self.features) == len(self.labels) == len(self.synthetic_mask)):
            raise SchemaMismatch("features, labels and synthetic_mask lengths differ")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise SchemaMismatch("labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.features[idx], self.labels[idx], list(self.feature_names), self.synthetic_mask[idx]
        )

    def minority(self) -> np.ndarray:
        return self.features[self.labels == 1]


@dataclass
class ScalerParams:
    columns: list[str]
    minimum: list[float]
    maximum: list[float]

    def to_json(self) -> str:
        return json.dumps(
            {"columns": self.columns, "min": self.minimum, "max": self.maximum}, indent=2
        )

    @classmethod
    def from_json(cls, text: str) -> "ScalerParams":
        obj = json.loads(text)
        return cls(list(obj["columns"]), list(obj["min"]), list(obj["max"]))


@dataclass
class SplitIndices:
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int = 0


# -- CSV ---------------------------------------------------------------------
def _fmt(x: float) -> str:
    return repr(float(x))


def load_csv(path, feature_names: Optional[Sequence[str]] = KAGGLE_FEATURES) -> Dataset:
    """Parse a labelled transaction CSV.

    The header must be ``feature_names`` followed by ``Class``. Pass
    ``feature_names=None`` to accept any header whose last column is
    ``Class``. An optional trailing ``synthetic`` column marks generated rows.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        has_flag = header[-1] == SYNTHETIC_COLUMN
        body = header[:-1] if has_flag else header
        if not body or body[-1] != LABEL_COLUMN:
            raise HeaderMismatch(f"{path}: last column must be {LABEL_COLUMN!r}, got {header}")
        names = body[:-1]
        if feature_names is not None and names != list(feature_names):
            raise HeaderMismatch(f"{path}: header {names} does not match schema")
        width = len(header)
        n = len(names)
        feats, labels, flags = [], [], []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(r, len(row), f"expected {width} fields")
            vals = []
            for c in range(n):
                try:
                    vals.append(float(row[c]))
                except ValueError:
                    raise ParseError(r, c + 1, f"not a number: {row[c]!r}") from None
            try:
                label = int(float(row[n]))
            except ValueError:
                raise ParseError(r, n + 1, f"bad label {row[n]!r}") from None
            if label not in (0, 1):
                raise ParseError(r, n + 1, f"label must be 0/1, got {row[n]!r}")
            feats.append(vals)
            labels.append(label)
            flags.append(has_flag and row[n + 1].strip() not in ("0", ""))
    if not labels:
        raise EmptyFile(f"{path} has a header but no rows")
    return Dataset(np.array(feats), np.array(labels), names, np.array(flags, dtype=bool))


def write_csv(d: Dataset, path, with_flag: bool = False) -> None:
    path = Path(path)
    header = list(d.feature_names) + [LABEL_COLUMN] + ([SYNTHETIC_COLUMN] if with_flag else [])
    lines = [",".join(header)]
    for i in range(len(d)):
        cells = [_fmt(v) for v in d.features[i]]
        cells.append(str(int(d.labels[i])))
        if with_flag:
            cells.append("1" if d.synthetic_mask[i] else "0")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_synthetic_csv(rows: np.ndarray, feature_names: Sequence[str], path) -> None:
    """Synthetic rows: the feature columns plus ``synthetic=1``."""
    rows = np.asarray(rows, dtype=np.float64)
    lines = [",".join(list(feature_names) + [SYNTHETIC_COLUMN])]
    for r in rows:
        lines.append(",".join([_fmt(v) for v in r] + ["1"]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_synthetic_csv(path, feature_names: Sequence[str]) -> np.ndarray:
    """Read rows in the synthetic CSV layout, e.g. from an external generator.

    Raises SchemaMismatch when the header does not carry exactly the expected
    feature columns (a trailing ``synthetic`` and/or ``Class`` column is
    allowed and ignored).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        names = [h for h in header if h not in (SYNTHETIC_COLUMN, LABEL_COLUMN)]
        if names != list(feature_names):
            raise SchemaMismatch(
                f"{path}: expected {len(feature_names)} feature columns "
                f"{list(feature_names)[:3]}..., got {len(names)}"
            )
        keep = [i for i, h in enumerate(header) if h not in (SYNTHETIC_COLUMN, LABEL_COLUMN)]
        rows = []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaMismatch(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
            try:
                rows.append([float(row[i]) for i in keep])
            except ValueError as exc:
                raise ParseError(r, 0, str(exc)) from None
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))


# -- cleaning / scaling --------------------------------------------------------
def deduplicate(d: Dataset) -> Dataset:
    """Keep the first occurrence of rows identical on every feature and the label."""
    if len(d) == 0:
        return d
    full = np.column_stack([d.features, d.labels.astype(np.float64)])
    _, first = np.unique(full, axis=0, return_index=True)
    return d.subset(np.sort(first))


def class_counts(d: Dataset) -> tuple[int, int]:
    pos = int(d.labels.sum())
    return len(d) - pos, pos


def minmax_fit(d: Dataset, columns: Sequence[str]) -> ScalerParams:
    if len(d) == 0:
        raise EmptyDataset("cannot fit a scaler on an empty dataset")
    missing = [c for c in columns if c not in d.feature_names]
    if missing:
        raise SchemaMismatch(f"unknown columns {missing}")
    idx = [d.feature_names.index(c) for c in columns]
    block = d.features[:, idx]
    return ScalerParams(list(columns), block.min(axis=0).tolist(), block.max(axis=0).tolist())


def minmax_transform(d: Dataset, s: ScalerParams) -> Dataset:
    """Affine map to [0, 1] on the fitted range; constant columns become 0.0."""
    missing = [c for c in s.columns if c not in d.feature_names]
    if missing:
        raise SchemaMismatch(f"dataset lacks scaled columns {missing}")
    out = d.features.copy()
    for col, lo, hi in zip(s.columns, s.minimum, s.maximum):
        j = d.feature_names.index(col)
        span = hi - lo
        out[:, j] = 0.0 if span == 0 else (out[:, j] - lo) / span
    return Dataset(out, d.labels.copy(), list(d.feature_names), d.synthetic_mask.copy())


def stratified_split(d: Dataset, train_fraction: float = 0.8, seed: int = 0) -> SplitIndices:
    """Per-class seeded shuffle; each class puts floor((1 - f) * n) rows in test."""
    neg, pos = class_counts(d)
    if neg == 0 or pos == 0:
        raise SingleClass("stratified split needs both classes")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(d.labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(np.floor(round((1.0 - train_fraction) * len(idx), 9)))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return SplitIndices(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)), seed)


def row_digest(d: Dataset) -> str:
    """Order-sensitive hash of features + labels, used as a provenance check."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(d.features).tobytes())
    h.update(np.ascontiguousarray(d.labels).tobytes())
    return h.hexdigest()


def row_hashes(features: np.ndarray) -> set[bytes]:
    feats = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    return {hashlib.blake2b(r.tobytes(), digest_size=16).digest() for r in feats}
