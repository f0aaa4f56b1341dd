"""Dataset ingestion and the preprocessing steps of the benchmark protocol.

Pipeline: ``parse_csv`` / ``parse_keel`` -> ``RawTable`` -> ``clean`` -> ``Dataset``. Inside the
protocol every training fold gets its own ``Scaler`` (fit on training rows only) and folds come
from ``stratified_kfold``. Variances are population variances (divide by m) throughout, so the
scaler and the heuristics agree on what "unit variance" means.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd

from ews_svm_heuristics.constants import MISSING_MARKERS
from ews_svm_heuristics.errors import DataError, StratificationError

Cell = float | str | None  # None is the missing marker


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RawTable:
    """Parsed rows before cleaning; numeric cells are floats, everything else text."""

    rows: tuple[tuple[Cell, ...], ...]
    column_names: tuple[str, ...]
    label_column: int

    def __post_init__(self):
        width = len(self.column_names)
        ragged = [i for i, row in enumerate(self.rows) if len(row) != width]
        if ragged:
            raise DataError(f"Ragged rows: row {ragged[0]} has {len(self.rows[ragged[0]])} cells")
        if not 0 <= self.label_column < width:
            raise DataError(f"label_column {self.label_column} out of range for {width} columns")

    @property
    def n_columns(self) -> int:
        return len(self.column_names)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Clean numeric matrix with class indices in ``[0, n_classes)``."""

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        x = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-D matrix, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise DataError(f"{y.shape[0]} labels for {x.shape[0]} examples")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite values")
        n_classes = len(self.class_names)
        if n_classes < 2:
            raise DataError(f"need at least 2 classes, got {n_classes}")
        if y.min() < 0 or y.max() >= n_classes:
            raise DataError("label index outside [0, n_classes)")
        absent = np.flatnonzero(np.bincount(y, minlength=n_classes) == 0)
        if absent.size:
            raise DataError(f"classes without examples: {absent.tolist()}")
        if np.any(np.all(x == x[0], axis=0)):
            raise DataError("features contain a zero-variance column")
        object.__setattr__(self, "features", _readonly(x))
        object.__setattr__(self, "labels", _readonly(y))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.class_names == other.class_names
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Scaler:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        if np.any(self.stds <= 0):
            raise DataError("scaler standard deviations must be positive")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold index per example; ``split(f)`` yields (train, test) row indices."""

    k: int
    assignments: np.ndarray
    seed: int

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.assignments == fold
        return np.flatnonzero(~test), np.flatnonzero(test)

    def splits(self):
        for fold in range(self.k):
            yield self.split(fold)


@dataclass(frozen=True, eq=False)
class LabeledSubset:
    labeled_indices: np.ndarray
    fraction: float
    min_per_class: int


@dataclass(frozen=True)
class DatasetSummary:
    name: str
    examples: int
    features: int
    classes: int
    balance: float
    zero_rule: float
    class_sizes: tuple[int, ...] = field(default=())

    def as_row(self) -> dict[str, object]:
        return {
            "Name": self.name,
            "Examples": self.examples,
            "Features": self.features,
            "Classes": self.classes,
            "Balance": f"{self.balance:.2f}",
            "OA(0R)": f"{self.zero_rule:.1f}",
        }


# --------------------------------------------------------------------------------------------
# Parsing


def _to_cell(token: object) -> Cell:
    if token is None or (isinstance(token, float) and math.isnan(token)):
        return None
    text = str(token).strip()
    if text.lower() in MISSING_MARKERS:
        return None
    try:
        return float(text)
    except ValueError:
        return text


def _is_numeric(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _read_string_frame(source: str | io.StringIO, origin: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(
            source,
            header=None,
            dtype=str,
            keep_default_na=False,
            na_values=[],
            skipinitialspace=True,
            skip_blank_lines=True,
        )
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{origin}: no data rows") from e
    except pd.errors.ParserError as e:
        raise DataError(f"{origin}: ragged rows ({e})") from e
    # with no NA markers configured, only the padding of short rows is NaN
    if frame.isna().to_numpy().any():
        row = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise DataError(f"{origin}: ragged rows (row {row} is short)")
    return frame


def parse_csv(path: str | Path, label_column: int | Literal["last"] = "last") -> RawTable:
    """Read a comma-separated file; a first row of only non-numeric cells is a header
    when the row after it has at least one numeric cell."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e

    frame = _read_string_frame(io.StringIO(text), str(path))
    values = frame.to_numpy(dtype=object)
    width = values.shape[1]

    has_header = (
        values.shape[0] >= 2
        and not any(_is_numeric(str(c).strip()) for c in values[0])
        and any(_is_numeric(str(c).strip()) for c in values[1])
    )
    if has_header:
        names = tuple(str(c).strip() for c in values[0])
        values = values[1:]
    else:
        names = tuple(f"col{j}" for j in range(width))

    label = width - 1 if label_column == "last" else int(label_column)
    rows = tuple(tuple(_to_cell(c) for c in row) for row in values)
    return RawTable(rows=rows, column_names=names, label_column=label)


_ATTRIBUTE = re.compile(r"@attribute\s+('[^']*'|\"[^\"]*\"|[^\s{\[]+)", re.IGNORECASE)


def _names(text: str) -> list[str]:
    return [n.strip().strip("'\"") for n in text.split(",") if n.strip()]


def parse_keel(path: str | Path) -> RawTable:
    """Read a KEEL ``.dat`` file (``@relation/@attribute/@inputs/@outputs/@data``)."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e

    attributes: list[str] = []
    outputs: list[str] = []
    data_start = None
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        lower = line.lower()
        if lower.startswith("@attribute"):
            match = _ATTRIBUTE.match(line)
            if match is None:
                raise DataError(f"{path}: malformed attribute line {i + 1}: {line!r}")
            attributes.append(match.group(1).strip("'\""))
        elif lower.startswith("@output"):
            parts = line.split(None, 1)
            outputs = _names(parts[1]) if len(parts) > 1 else []
        elif lower.startswith("@data"):
            data_start = i + 1
            break

    if data_start is None:
        raise DataError(f"{path}: missing @data section")
    if not outputs:
        raise DataError(f"{path}: no @outputs attribute declared")
    if outputs[0] not in attributes:
        raise DataError(f"{path}: output attribute {outputs[0]!r} not declared")

    body = "\n".join(ln for ln in lines[data_start:] if ln.strip() and not ln.startswith("%"))
    if not body:
        raise DataError(f"{path}: @data section is empty")
    frame = _read_string_frame(io.StringIO(body), str(path))
    if frame.shape[1] != len(attributes):
        raise DataError(
            f"{path}: ragged rows ({frame.shape[1]} cells, {len(attributes)} attributes)"
        )
    rows = tuple(tuple(_to_cell(c) for c in row) for row in frame.to_numpy(dtype=object))
    return RawTable(
        rows=rows, column_names=tuple(attributes), label_column=attributes.index(outputs[0])
    )


def _label_token(cell: Cell) -> str:
    if isinstance(cell, float) and cell.is_integer():
        return str(int(cell))
    return str(cell)


def clean(table: RawTable, name: str = "") -> Dataset:
    """Drop incomplete rows, then constant feature columns; integer-code the rest.

    Categorical feature columns and labels are coded in order of first appearance.
    """
    frame = pd.DataFrame(list(table.rows), columns=range(table.n_columns), dtype=object)
    keep = ~frame.isna().any(axis=1)
    for j in frame.columns:
        numeric = pd.to_numeric(frame[j], errors="coerce")
        keep &= ~(numeric.notna() & ~np.isfinite(numeric.astype(float)))
    frame = frame.loc[keep].reset_index(drop=True)
    if frame.empty:
        raise DataError(f"{name or 'table'}: every row has a missing value")

    label_codes, label_names = pd.factorize(frame[table.label_column].map(_label_token))
    if len(label_names) < 2:
        raise DataError(f"{name or 'table'}: fewer than 2 classes remain after cleaning")

    columns = []
    for j in frame.columns:
        if j == table.label_column:
            continue
        numeric = pd.to_numeric(frame[j], errors="coerce")
        if numeric.notna().all():
            col = numeric.to_numpy(dtype=np.float64)
        else:
            col = pd.factorize(frame[j].map(str))[0].astype(np.float64)
        if np.all(col == col[0]):
            continue
        columns.append(col)
    if not columns:
        raise DataError(f"{name or 'table'}: no feature column with non-zero variance")

    return Dataset(
        features=np.column_stack(columns),
        labels=label_codes.astype(np.int64),
        class_names=tuple(str(n) for n in label_names),
        name=name,
    )


def load_dataset(
    path: str | Path,
    fmt: Literal["csv", "keel"] = "keel",
    label_column: int | Literal["last"] = "last",
    name: str | None = None,
) -> Dataset:
    path = Path(path)
    if fmt == "keel":
        table = parse_keel(path)
    elif fmt == "csv":
        table = parse_csv(path, label_column)
    else:
        raise DataError(f"unknown dataset format {fmt!r} (expected 'csv' or 'keel')")
    return clean(table, name=name or path.stem)


# --------------------------------------------------------------------------------------------
# Standardization


def fit_scaler(features: np.ndarray, *, keep_constant: bool = False) -> Scaler:
    """Column means and population standard deviations of ``features``.

    A zero-variance column is an error unless ``keep_constant``, in which case it keeps
    std 1 and is only centred.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError(f"need at least 2 training rows to fit a scaler, got shape {x.shape}")
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    constant = np.flatnonzero(np.all(x == x[0], axis=0) | (stds <= 0))
    if constant.size and keep_constant:
        stds = stds.copy()
        stds[constant] = 1.0
    elif constant.size:
        raise DataError(f"training columns with zero variance: {constant.tolist()}")
    return Scaler(means=_readonly(means), stds=_readonly(stds))


def transform(scaler: Scaler, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != scaler.means.shape[0]:
        raise DataError(f"scaler fit on {scaler.means.shape[0]} columns, got shape {x.shape}")
    return (x - scaler.means) / scaler.stds


# --------------------------------------------------------------------------------------------
# Splitting


def class_counts(labels: np.ndarray, n_classes: int | None = None) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    return np.bincount(labels, minlength=n_classes or 0)


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> FoldPlan:
    """Shuffle each class with a seeded generator, then deal its members round-robin.

    The dealing pointer carries over from one class to the next so that total fold sizes,
    not only per-class counts, differ by at most one.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise StratificationError(f"k must be at least 2, got {k}")
    classes, counts = np.unique(labels, return_counts=True)
    small = classes[counts < k]
    if small.size:
        raise StratificationError(
            f"class {int(small[0])} has {int(counts[classes == small[0]][0])} < {k} members"
        )

    rng = np.random.default_rng(seed)
    assignments = np.empty(labels.shape[0], dtype=np.int64)
    pointer = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(labels == c))
        assignments[members] = (pointer + np.arange(members.size)) % k
        pointer = (pointer + members.size) % k
    return FoldPlan(k=k, assignments=_readonly(assignments), seed=seed)


def subsample_labeled(
    labels: np.ndarray, fraction: float, min_per_class: int, seed: int
) -> LabeledSubset:
    """Keep ``max(ceil(fraction*size), min(min_per_class, size))`` members of every class."""
    if not 0 < fraction <= 1:
        raise DataError(f"fraction must be in (0, 1], got {fraction}")
    if min_per_class < 1:
        raise DataError(f"min_per_class must be >= 1, got {min_per_class}")
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    chosen = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        size = members.size
        keep = min(size, max(math.ceil(fraction * size), min(min_per_class, size)))
        if keep == size:
            chosen.append(members)
        else:
            chosen.append(rng.choice(members, size=keep, replace=False))
    indices = np.sort(np.concatenate(chosen))
    return LabeledSubset(
        labeled_indices=_readonly(indices), fraction=fraction, min_per_class=min_per_class
    )


# --------------------------------------------------------------------------------------------
# Baselines


def zero_rule_accuracy(dataset: Dataset) -> float:
    """Accuracy (%) of always predicting the most frequent class."""
    counts = class_counts(dataset.labels, dataset.n_classes)
    return 100.0 * counts.max() / dataset.n_examples


def describe(dataset: Dataset) -> DatasetSummary:
    counts = class_counts(dataset.labels, dataset.n_classes)
    return DatasetSummary(
        name=dataset.name,
        examples=dataset.n_examples,
        features=dataset.n_features,
        classes=dataset.n_classes,
        balance=float(counts.min() / counts.max()),
        zero_rule=zero_rule_accuracy(dataset),
        class_sizes=tuple(int(c) for c in counts),
    )
