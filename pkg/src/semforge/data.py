"""Dataset container and CSV ingestion.

The on-disk format is a CSV with the first column acting as the row index
and one named column per observed variable. Every cell must be numeric;
missing or non-numeric values are rejected at load time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError


@dataclass
class Dataset:
    """Numeric sample: column names plus an (n, len(names)) value matrix."""

    names: list[str]
    rows: np.ndarray
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.names):
            raise DataError("rows must be a 2-d array with one column per name")
        if len(set(self.names)) != len(self.names):
            raise DataError("duplicate column names")
        if not np.isfinite(self.rows).all():
            raise DataError("dataset contains non-finite values")
        self._index = {name: k for k, name in enumerate(self.names)}

    @property
    def n(self) -> int:
        """Sample count."""
        return self.rows.shape[0]

    @property
    def S(self) -> np.ndarray:
        """Unbiased sample covariance over all columns, in column order."""
        return self.covariance(self.names)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.rows[:, self._index[name]]
        except KeyError:
            raise DataError(f"no data column named {name!r}") from None

    def subset(self, names) -> np.ndarray:
        missing = [v for v in names if v not in self._index]
        if missing:
            raise DataError(f"missing data columns: {', '.join(missing)}")
        return self.rows[:, [self._index[v] for v in names]]

    def covariance(self, names) -> np.ndarray:
        """Unbiased (n - 1 divisor) sample covariance of the given columns."""
        if self.n < 2:
            raise DataError("need at least 2 rows to form a sample covariance")
        cov = np.cov(self.subset(names), rowvar=False, ddof=1)
        return np.atleast_2d(cov)

    @classmethod
    def from_dataframe(cls, frame: pd.DataFrame) -> "Dataset":
        bad = [c for c in frame.columns if not np.issubdtype(frame[c].dtype, np.number)]
        if bad:
            raise DataError(f"non-numeric columns: {', '.join(map(str, bad))}")
        if frame.isna().any().any():
            raise DataError("dataset contains missing values")
        return cls([str(c) for c in frame.columns], frame.to_numpy(dtype=float))


def load_csv(path) -> Dataset:
    """Read a dataset from CSV, treating the first column as the row index."""
    try:
        frame = pd.read_csv(path, index_col=0)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return Dataset.from_dataframe(frame)
