"""Datasets, centering and empirical moments.

Every statistical module in modelkit consumes a :class:`Dataset`: an
``n x p`` predictor block plus a response ``n``-vector, both finite.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from modelkit.errors import CollinearDesignError, DataError

#: Gram matrices with reciprocal condition number below this are singular.
RCOND_THRESHOLD = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Predictor block ``x`` (n x p) and response ``y`` (n,).

    Arrays are copied and marked read-only on construction.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise DataError(f"x must be a matrix, got shape {x.shape}")
        y = y.reshape(-1)
        n, p = x.shape
        if n < 1 or p < 1:
            raise DataError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
        if y.shape[0] != n:
            raise DataError(f"x has {n} rows but y has {y.shape[0]} entries")
        if not np.all(np.isfinite(x)):
            raise DataError("x contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise DataError("y contains non-finite entries")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class Moments:
    """Sample means and second moments of a dataset."""

    mean_x: np.ndarray
    mean_y: float
    cov_xx: np.ndarray
    cov_xy: np.ndarray
    var_y: float


def load_csv(path) -> Dataset:
    """Read a comma-separated file whose last column is the response.

    The first row is a header. All remaining cells must parse as finite
    floats; the error message names the offending row and column.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file (no header row)")
    header = rows[0]
    if len(header) < 2:
        raise DataError(f"{path}: need at least 2 columns, got {len(header)}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path}: zero data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i} has {len(row)} cells, header has {len(header)}"
            )
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                v = float("nan")
            if not np.isfinite(v):
                raise DataError(
                    f"{path}: row {i}, column {j + 1} ({header[j]!r}): "
                    f"cannot parse {cell!r} as a finite number"
                )
            values[i - 2, j] = v
    return Dataset(values[:, :-1], values[:, -1])


def save_csv(d: Dataset, path, names=None) -> None:
    """Write ``d`` in the format read by :func:`load_csv`."""
    if names is None:
        names = [f"x{j + 1}" for j in range(d.p)] + ["y"]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for xi, yi in zip(d.x, d.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def center(d: Dataset) -> tuple[Dataset, np.ndarray, float]:
    """Subtract column means from ``x`` and the mean from ``y``.

    Returns the centered dataset and the means ``(mean_x, mean_y)``.
    """
    mean_x = d.x.mean(axis=0)
    mean_y = float(d.y.mean())
    return Dataset(d.x - mean_x, d.y - mean_y), mean_x, mean_y


def sample_moments(d: Dataset, ddof: int = 1) -> Moments:
    """Sample means and covariances with denominator ``n - ddof``."""
    if d.n < 2:
        raise DataError("insufficient rows for covariance (need n >= 2)")
    dc, mean_x, mean_y = center(d)
    denom = d.n - ddof
    c = dc.x.T @ dc.x / denom
    cov_xx = 0.5 * (c + c.T)
    cov_xy = dc.x.T @ dc.y / denom
    var_y = float(dc.y @ dc.y / denom)
    return Moments(mean_x, mean_y, cov_xx, cov_xy, var_y)


def ols_fit(d: Dataset) -> tuple[np.ndarray, float]:
    """Least squares coefficients and intercept, ``(X'X)^-1 X'y`` on centered data.

    Raises
    ------
    CollinearDesignError
        If the centered Gram matrix has reciprocal condition number below
        :data:`RCOND_THRESHOLD`.
    """
    dc, mean_x, mean_y = center(d)
    gram = dc.x.T @ dc.x
    if d.n < 2 or not np.any(gram):
        raise CollinearDesignError("collinear design; use pls_fit")
    rcond = 1.0 / np.linalg.cond(gram)
    if not np.isfinite(rcond) or rcond < RCOND_THRESHOLD:
        raise CollinearDesignError(
            f"collinear design; use pls_fit (rcond={rcond:.3g})"
        )
    beta = np.linalg.solve(gram, dc.x.T @ dc.y)
    intercept = mean_y - float(mean_x @ beta)
    return beta, intercept
