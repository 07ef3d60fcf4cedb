"""Dataset loading (CSV / LIBSVM), normalization, deterministic splits, and the
benchmark-task registry.

Normalization is always fitted on the training split and applied unchanged to
the test split; transforms are recorded as (shift, divisor) stages so a saved
model can replay them exactly on raw data.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, ParameterError, ParseError
from .numerics import Rng


@dataclass
class FeatureStats:
    """Per-column summary captured from a training split."""

    min: np.ndarray
    max: np.ndarray
    mean: np.ndarray
    std: np.ndarray  # population (ddof=0)


@dataclass
class AffineStage:
    """One normalization stage: x' = (x - shift) / div, with div == 1 where a
    column was constant (the shift already maps such columns to 0)."""

    shift: np.ndarray
    div: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.shift) / self.div


def apply_stages(X: np.ndarray, stages) -> np.ndarray:
    for stage in stages:
        X = stage.apply(X)
    return X


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    class_count: int
    label_names: list[str] = field(default_factory=list)
    feature_stats: FeatureStats | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise DataError(f"feature matrix must be non-empty 2-D, got shape {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise DataError(f"labels shape {self.y.shape} does not match {self.X.shape[0]} rows")
        if not np.all(np.isfinite(self.X)):
            raise DataError("features contain NaN or Inf")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.class_count):
            raise DataError(f"labels must lie in [0, {self.class_count})")


@dataclass
class SplitSpec:
    mode: str = "random_half"  # or "provided"
    seed: int = 0


def compute_feature_stats(X: np.ndarray) -> FeatureStats:
    return FeatureStats(min=X.min(axis=0), max=X.max(axis=0),
                        mean=X.mean(axis=0), std=X.std(axis=0))


def _map_labels(tokens: list[str], label_map: dict | None):
    if label_map is None:
        label_map = {}
        extend = True
    else:
        label_map = dict(label_map)
        extend = False
    y = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        if tok not in label_map:
            if not extend:
                raise DataError(f"label {tok!r} not present in the training label map")
            label_map[tok] = len(label_map)
        y[i] = label_map[tok]
    names = [None] * len(label_map)
    for tok, idx in label_map.items():
        names[idx] = tok
    return y, names


def load_csv(path, label_column: int = -1, has_header: bool = False,
             label_map: dict | None = None) -> Dataset:
    """Read a rectangular numeric CSV; one column holds class labels, which are
    mapped to contiguous integers in first-appearance order."""
    rows = []
    label_tokens = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if has_header and not rows and not label_tokens and width is None:
                width = len(row)
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise ParseError(f"expected {width} columns, found {len(row)}", line=line_no)
            col = label_column if label_column >= 0 else len(row) + label_column
            if not 0 <= col < len(row):
                raise ParseError(f"label column {label_column} out of range for {len(row)} columns",
                                 line=line_no)
            label_tokens.append(row[col].strip())
            feats = []
            for j, cell in enumerate(row):
                if j == col:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise ParseError(f"non-numeric feature value {cell!r} in column {j}",
                                     line=line_no) from None
            rows.append(feats)
    if not rows:
        raise DataError(f"{path}: no data rows")
    X = np.array(rows, dtype=np.float64)
    y, names = _map_labels(label_tokens, label_map)
    return Dataset(X=X, y=y, class_count=len(names), label_names=names)


def save_csv(data: Dataset, path, header: bool = False) -> None:
    """Write features plus a trailing label column (original label tokens)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"x{j}" for j in range(data.d)] + ["label"])
        for i in range(data.n):
            writer.writerow([repr(float(v)) for v in data.X[i]] + [data.label_names[data.y[i]]])


def load_libsvm(path, label_map: dict | None = None, min_dim: int = 0) -> Dataset:
    """Parse 'label idx:val idx:val ...' lines with 1-based strictly increasing
    indices; absent indices are zeros and d is the largest index seen."""
    entries = []
    label_tokens = []
    d = min_dim
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            label_tokens.append(parts[0])
            pairs = []
            prev = 0
            for item in parts[1:]:
                try:
                    idx_str, val_str = item.split(":", 1)
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise ParseError(f"malformed feature entry {item!r}", line=line_no) from None
                if idx <= prev:
                    raise ParseError(f"feature index {idx} not strictly increasing (previous {prev})",
                                     line=line_no)
                prev = idx
                pairs.append((idx, val))
            d = max(d, prev)
            entries.append(pairs)
    if not entries:
        raise DataError(f"{path}: no data rows")
    X = np.zeros((len(entries), d))
    for i, pairs in enumerate(entries):
        for idx, val in pairs:
            X[i, idx - 1] = val
    y, names = _map_labels(label_tokens, label_map)
    return Dataset(X=X, y=y, class_count=len(names), label_names=names)


def minmax_stage(stats: FeatureStats) -> AffineStage:
    span = stats.max - stats.min
    div = np.where(span > 0, span, 1.0)
    return AffineStage(shift=stats.min.copy(), div=div)


def whiten_stage(stats: FeatureStats) -> AffineStage:
    return AffineStage(shift=stats.mean.copy(), div=np.maximum(stats.std, 1e-12))


def normalize_minmax(data: Dataset, stats: FeatureStats | None = None) -> Dataset:
    """Scale each column to [0, 1] using training-split min/max (constant columns
    map to 0); pass the training stats when transforming a test split."""
    if stats is None:
        stats = data.feature_stats or compute_feature_stats(data.X)
    X = minmax_stage(stats).apply(data.X)
    return replace(data, X=X, feature_stats=compute_feature_stats(X))


def whiten(data: Dataset, stats: FeatureStats | None = None) -> Dataset:
    """Standardize each column with training-split mean/std (std floored at 1e-12)."""
    if stats is None:
        stats = data.feature_stats or compute_feature_stats(data.X)
    X = whiten_stage(stats).apply(data.X)
    return replace(data, X=X, feature_stats=compute_feature_stats(X))


NORMALIZE_SCHEMES = ("none", "minmax", "whiten", "minmax+whiten")


def preprocess_pair(train: Dataset, test: Dataset | None, scheme: str = "minmax+whiten"):
    """Fit the scheme's stages on the training split, apply to both splits.

    Returns (train', test', stages)."""
    if scheme not in NORMALIZE_SCHEMES:
        raise ParameterError(f"unknown normalization scheme {scheme!r}, expected one of {NORMALIZE_SCHEMES}")
    stages: list[AffineStage] = []
    Xtr = train.X
    for name in [s for s in scheme.split("+") if s != "none"]:
        stats = compute_feature_stats(Xtr)
        stage = minmax_stage(stats) if name == "minmax" else whiten_stage(stats)
        stages.append(stage)
        Xtr = stage.apply(Xtr)
    train_out = replace(train, X=Xtr, feature_stats=compute_feature_stats(Xtr))
    test_out = None
    if test is not None:
        Xte = apply_stages(test.X, stages)
        test_out = replace(test, X=Xte)
    return train_out, test_out, stages


def split(data: Dataset, spec: SplitSpec):
    """Disjoint, exhaustive random-half partition (odd n puts the extra sample
    in training); membership depends only on the seed."""
    if spec.mode == "provided":
        raise ParameterError("provided-split tasks ship as separate train/test files; nothing to split")
    if spec.mode != "random_half":
        raise ParameterError(f"unknown split mode {spec.mode!r}")
    if data.n < 2:
        raise DataError(f"random_half split needs at least 2 samples, got {data.n}")
    perm = Rng(spec.seed).derive("split").permutation(data.n)
    n_train = math.ceil(data.n / 2)
    tr = np.sort(perm[:n_train])
    te = np.sort(perm[n_train:])
    train = replace(data, X=data.X[tr], y=data.y[tr], feature_stats=None)
    test = replace(data, X=data.X[te], y=data.y[te], feature_stats=None)
    return train, test


# --- task registry ----------------------------------------------------------


@dataclass
class TaskEntry:
    """One line of the registry manifest."""

    name: str
    fmt: str  # csv | libsvm
    label_column: int  # ignored for libsvm
    split_mode: str  # provided | random_half
    path: str
    test_path: str | None = None


def parse_registry(path) -> dict[str, TaskEntry]:
    """Manifest format: 'name format label_column split_mode path [test_path]'
    per line, '#' comments allowed. Relative data paths are resolved against
    the manifest's own directory."""
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    tasks = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (5, 6):
                raise ParseError(f"expected 5 or 6 fields, found {len(parts)}", line=line_no)
            name, fmt, label_col, split_mode, p = parts[:5]
            if fmt not in ("csv", "libsvm"):
                raise ParseError(f"unknown format {fmt!r}", line=line_no)
            if split_mode not in ("provided", "random_half"):
                raise ParseError(f"unknown split mode {split_mode!r}", line=line_no)
            label_column = 0 if label_col == "-" else int(label_col)
            test_path = resolve(parts[5]) if len(parts) == 6 else None
            if split_mode == "provided" and test_path is None:
                raise ParseError("provided split needs a test path", line=line_no)
            tasks[name] = TaskEntry(name=name, fmt=fmt, label_column=label_column,
                                    split_mode=split_mode, path=resolve(p), test_path=test_path)
    return tasks


def load_task(entry: TaskEntry, split_seed: int = 0):
    """Load a registry task as (train, test) with a shared label mapping."""
    if entry.fmt == "csv":
        train = load_csv(entry.path, label_column=entry.label_column)
    else:
        train = load_libsvm(entry.path)
    if entry.split_mode == "provided":
        label_map = {name: i for i, name in enumerate(train.label_names)}
        if entry.fmt == "csv":
            test = load_csv(entry.test_path, label_column=entry.label_column, label_map=label_map)
        else:
            test = load_libsvm(entry.test_path, label_map=label_map, min_dim=train.d)
            if test.d < train.d:  # pad: test file may never reach the max index
                pad = np.zeros((test.n, train.d - test.d))
                test = replace(test, X=np.hstack([test.X, pad]))
        return train, test
    return split(train, SplitSpec(mode="random_half", seed=split_seed))
