"""Column-named numeric tables: CSV ingestion, summaries, and seeded splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


class CsvFormatError(ValueError):
    """A CSV file violates the numeric-table format (ragged row, bad cell, ...)."""


@dataclass(frozen=True)
class DataTable:
    """Numeric matrix with named columns and a designated target column.

    ``values`` has shape (row_count, n_columns); all entries are finite
    float64.  Feature columns are every column except ``target_index``,
    kept in their original order.
    """

    column_names: tuple[str, ...]
    values: np.ndarray
    target_index: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if values.shape[1] != len(self.column_names):
            raise ValueError(
                f"{len(self.column_names)} column names for {values.shape[1]} columns"
            )
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError("column names must be unique")
        if not 0 <= self.target_index < len(self.column_names):
            raise ValueError(f"target_index {self.target_index} out of range")
        if values.size and not np.isfinite(values).all():
            raise ValueError("non-finite values are not allowed in a DataTable")

    @property
    def row_count(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    @property
    def target_name(self) -> str:
        return self.column_names[self.target_index]

    @property
    def columns(self) -> list[np.ndarray]:
        return [self.values[:, j] for j in range(self.n_columns)]

    @property
    def feature_indices(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.n_columns) if j != self.target_index)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(self.column_names[j] for j in self.feature_indices)

    def feature_matrix(self) -> np.ndarray:
        return self.values[:, list(self.feature_indices)]

    def target_values(self) -> np.ndarray:
        return self.values[:, self.target_index]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def take_rows(self, indices: np.ndarray) -> "DataTable":
        return DataTable(self.column_names, self.values[indices], self.target_index)

    def select_columns(self, names: list[str], target_name: str) -> "DataTable":
        idx = [self.column_names.index(n) for n in names]
        return DataTable(tuple(names), self.values[:, idx], names.index(target_name))


@dataclass(frozen=True)
class Split:
    train: DataTable
    test: DataTable
    seed: int


@dataclass(frozen=True)
class ColumnStats:
    mean: np.ndarray
    sd: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray


def load_csv(path, target_name: str) -> DataTable:
    """Load a comma-separated numeric file with one header row.

    Every body cell must parse as a finite decimal number; offenders are
    reported with their (1-based, header included) row and column name.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file, expected a header row") from None
        header = [name.strip() for name in header]
        if target_name not in header:
            raise CsvFormatError(f"{path}: target column {target_name!r} not in header {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # trailing blank line
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            parsed = []
            for name, cell in zip(header, row):
                try:
                    x = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {name!r}: {cell!r} is not a number"
                    ) from None
                if not math.isfinite(x):
                    raise CsvFormatError(
                        f"{path}: row {lineno}, column {name!r}: non-finite value {cell!r}"
                    )
                parsed.append(x)
            rows.append(parsed)
    values = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(header)))
    return DataTable(tuple(header), values, header.index(target_name))


def save_csv(table: DataTable, path) -> None:
    """Write a DataTable as CSV with full round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names)
        for row in table.values:
            writer.writerow([repr(float(x)) for x in row])


def column_stats(table: DataTable) -> ColumnStats:
    """Per-column mean, sample standard deviation (n-1 divisor), min and max."""
    if table.row_count == 0:
        raise ValueError("column_stats requires at least one row")
    values = table.values
    if table.row_count == 1:
        sd = np.zeros(table.n_columns)
    else:
        sd = values.std(axis=0, ddof=1)
    return ColumnStats(
        mean=values.mean(axis=0),
        sd=sd,
        minimum=values.min(axis=0),
        maximum=values.max(axis=0),
    )


def train_test_split(table: DataTable, test_fraction: float, seed: int) -> Split:
    """Seeded shuffle; the first ceil((1-f)*n) permuted rows become the train set."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = table.row_count
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.ceil((1.0 - test_fraction) * n)
    return Split(
        train=table.take_rows(perm[:n_train]),
        test=table.take_rows(perm[n_train:]),
        seed=seed,
    )
