"""Columnar dataset with typed numeric and factor columns.

A :class:`Dataset` is a small immutable table: every column is either
numeric (float64) or a factor (integer codes plus an ordered level list).
Factor levels are recorded in order of first appearance and stay fixed for
the life of the dataset, so counterfactual copies produced by
``set_variable`` keep the original contrast layout even when only one
level remains observed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Raised when raw data cannot be validated or parsed."""


#: cell values treated as missing when parsing text columns
NA_STRINGS = frozenset({"", "NA", "NaN", "nan", "na", "N/A", "null", "NULL"})

NUMERIC = "numeric"
FACTOR = "factor"


@dataclass(frozen=True)
class Column:
    """A single typed column.

    Parameters
    ----------
    kind : str
        Either ``"numeric"`` or ``"factor"``.
    values : ndarray
        float64 values for numeric columns, int64 level codes for factors.
    levels : tuple of str
        Ordered factor levels (first appearance order); empty for numeric.
    """

    kind: str
    values: np.ndarray
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, FACTOR):
            raise DataError(f"unknown column kind {self.kind!r}")
        if self.kind == FACTOR:
            if len(self.levels) == 0:
                raise DataError("factor column needs a level list")
            if self.values.min(initial=0) < 0 or (
                self.values.max(initial=-1) >= len(self.levels)
            ):
                raise DataError("factor codes out of range for level list")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def labels(self) -> np.ndarray:
        """Return the column as printable values (labels for factors)."""
        if self.kind == FACTOR:
            return np.asarray(self.levels, dtype=object)[self.values]
        return self.values


def _parse_numeric(name: str, raw: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Parse text cells to float64; returns (values, missing mask)."""
    out = np.empty(len(raw))
    missing = np.zeros(len(raw), dtype=bool)
    for i, cell in enumerate(raw):
        s = cell.strip()
        if s in NA_STRINGS:
            out[i] = np.nan
            missing[i] = True
            continue
        try:
            out[i] = float(s)
        except ValueError:
            raise DataError(
                f"column {name!r}, row {i + 1}: {cell!r} is not numeric"
            ) from None
    return out, missing


def _encode_factor(raw: list[str]) -> tuple[np.ndarray, tuple[str, ...], np.ndarray]:
    """Encode labels to codes with levels in first-appearance order."""
    levels: dict[str, int] = {}
    codes = np.empty(len(raw), dtype=np.int64)
    missing = np.zeros(len(raw), dtype=bool)
    for i, cell in enumerate(raw):
        s = cell.strip()
        if s in NA_STRINGS:
            codes[i] = -1
            missing[i] = True
            continue
        codes[i] = levels.setdefault(s, len(levels))
    return codes, tuple(levels), missing


@dataclass(frozen=True)
class Dataset:
    """Immutable columnar table.

    Attributes
    ----------
    columns : dict of str -> Column
        Insertion order is the column order.
    n_rows : int
        Number of rows shared by all columns.
    """

    columns: dict[str, Column] = field(default_factory=dict)
    n_rows: int = 0

    def __post_init__(self):
        for name, col in self.columns.items():
            if col.n != self.n_rows:
                raise DataError(
                    f"column {name!r} has {col.n} rows, expected {self.n_rows}"
                )

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    @classmethod
    def from_arrays(cls, data: dict[str, object], factors: tuple[str, ...] = ()) -> "Dataset":
        """Build a dataset from in-memory arrays / sequences.

        Columns named in `factors` (or containing non-numeric values) are
        encoded as factors with levels in first-appearance order; everything
        else is cast to float64.
        """
        cols: dict[str, Column] = {}
        n = None
        for name, values in data.items():
            arr = np.asarray(values)
            if n is None:
                n = arr.shape[0]
            if name in factors or arr.dtype.kind in ("U", "S", "O", "b"):
                labels = [str(v) for v in arr.tolist()]
                codes, levels, missing = _encode_factor(labels)
                if missing.any():
                    raise DataError(f"column {name!r} has missing values")
                cols[name] = Column(FACTOR, codes, levels)
            else:
                vals = arr.astype(float)
                if not np.all(np.isfinite(vals)):
                    raise DataError(f"column {name!r} has non-finite values")
                cols[name] = Column(NUMERIC, vals)
        return cls(cols, 0 if n is None else int(n))

    # ------------------------------------------------------------------
    # access
    # ------------------------------------------------------------------

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def column(self, name: str) -> Column:
        try:
            return self.columns[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}") from None

    def kind(self, name: str) -> str:
        return self.column(name).kind

    def numeric(self, name: str) -> np.ndarray:
        col = self.column(name)
        if col.kind != NUMERIC:
            raise DataError(f"column {name!r} is a factor, expected numeric")
        return col.values

    def codes(self, name: str) -> np.ndarray:
        col = self.column(name)
        if col.kind != FACTOR:
            raise DataError(f"column {name!r} is numeric, expected a factor")
        return col.values

    def levels(self, name: str) -> tuple[str, ...]:
        return self.column(name).levels

    def weights(self, name: str | None) -> np.ndarray:
        """Resolve a sampling-weight column (ones when `name` is None)."""
        if name is None:
            return np.ones(self.n_rows)
        w = self.numeric(name)
        if np.any(w < 0):
            raise DataError(f"weight column {name!r} has negative entries")
        if not np.any(w > 0):
            raise DataError(f"weight column {name!r} sums to zero")
        return w

    # ------------------------------------------------------------------
    # derived tables
    # ------------------------------------------------------------------

    def with_column(self, name: str, col: Column) -> "Dataset":
        """Copy of the dataset with one column replaced or appended."""
        cols = dict(self.columns)
        cols[name] = col
        return Dataset(cols, self.n_rows)

    def take(self, mask: np.ndarray) -> "Dataset":
        """Row subset by boolean mask or index array (levels preserved)."""
        cols = {
            name: Column(c.kind, c.values[mask], c.levels)
            for name, c in self.columns.items()
        }
        n = int(np.sum(mask)) if np.asarray(mask).dtype == bool else len(mask)
        return Dataset(cols, n)
