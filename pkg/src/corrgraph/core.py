"""Sample/correlation matrix types, pair indexing and empirical correlation.

Variable pairs (i, j) with ``1 <= i < j <= p`` are enumerated in
lexicographic order and addressed by a flat index in ``[0, m)`` with
``m = p(p-1)/2``.  Every module in the package uses this ordering, so the
rows/columns of pair-covariance matrices are unambiguous across modules and
file formats.

Moment conventions follow divisor ``n`` (not ``n-1``) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

__all__ = [
    "SampleMatrix",
    "CorrelationMatrix",
    "num_pairs",
    "pair_to_flat",
    "flat_to_pair",
    "pair_indices",
    "empirical_correlation",
    "standardize",
]


def num_pairs(p: int) -> int:
    """Number of unordered variable pairs, m = p(p-1)/2."""
    return p * (p - 1) // 2


def pair_to_flat(i: int, j: int, p: int) -> int:
    """Flat position of the 1-based pair (i, j), i < j, in lexicographic order.

    Raises IndexError when (i, j) is out of range or i >= j.
    """
    if not (1 <= i < j <= p):
        raise IndexError(f"pair ({i}, {j}) invalid for p={p}: need 1 <= i < j <= p")
    return (i - 1) * p - i * (i - 1) // 2 + (j - i - 1)


def flat_to_pair(flat: int, p: int) -> tuple[int, int]:
    """Inverse of :func:`pair_to_flat`; returns the 1-based pair (i, j)."""
    m = num_pairs(p)
    if not (0 <= flat < m):
        raise IndexError(f"flat index {flat} out of range [0, {m}) for p={p}")
    i = 1
    offset = flat
    while offset >= p - i:
        offset -= p - i
        i += 1
    return i, i + offset + 1


def pair_indices(p: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based index arrays (I, J) of all pairs in flat order, each length m."""
    iu = np.triu_indices(p, k=1)
    return iu[0], iu[1]


@dataclass(frozen=True)
class SampleMatrix:
    """n observations of p real-valued variables.

    Entries must be finite and every column must have strictly positive
    empirical variance; violations raise :class:`DegenerateInputError`
    naming the offending (1-based) column.
    """

    data: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError(f"sample matrix must be 2-d, got shape {data.shape}")
        n, p = data.shape
        if n < 2:
            raise ValueError(f"need at least 2 observations, got n={n}")
        if p < 2:
            raise ValueError(f"need at least 2 variables, got p={p}")
        if not np.all(np.isfinite(data)):
            raise ValueError("sample matrix contains non-finite entries")
        variances = data.var(axis=0)
        bad = np.flatnonzero(variances <= 0.0)
        if bad.size:
            col = int(bad[0]) + 1
            name = self.column_names[bad[0]] if self.column_names else str(col)
            raise DegenerateInputError(
                f"column {name} has zero empirical variance", column=col
            )
        if self.column_names is not None and len(self.column_names) != p:
            raise ValueError("column_names length does not match p")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    @property
    def m(self) -> int:
        return num_pairs(self.p)


@dataclass(frozen=True)
class CorrelationMatrix:
    """A p x p correlation matrix: symmetric, unit diagonal, entries in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"correlation matrix must be square, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("correlation matrix contains non-finite entries")
        if not np.allclose(values, values.T, atol=1e-10):
            raise ValueError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(values), 1.0, atol=1e-10):
            raise ValueError("correlation matrix diagonal is not 1")
        if np.any(np.abs(values) > 1.0 + 1e-10):
            raise ValueError("correlation matrix has entries outside [-1, 1]")
        # Canonicalize tiny asymmetries / overshoots from floating point.
        values = np.clip((values + values.T) / 2.0, -1.0, 1.0)
        np.fill_diagonal(values, 1.0)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return num_pairs(self.p)

    def pair_values(self) -> np.ndarray:
        """Off-diagonal entries as a flat length-m vector in pair order."""
        i, j = pair_indices(self.p)
        return self.values[i, j]


def empirical_correlation(samples: SampleMatrix) -> CorrelationMatrix:
    """Pearson correlation matrix of the sample columns.

    Cross-products of centered columns, normalized by the product of the
    centered column norms; diagonal exactly 1.
    """
    x = samples.data - samples.data.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", x, x))
    corr = (x.T @ x) / np.outer(norms, norms)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(corr)


def standardize(samples: SampleMatrix) -> SampleMatrix:
    """Center each column to mean 0 and scale to empirical variance 1.

    Uses divisor n in the variance.
    """
    x = samples.data - samples.data.mean(axis=0)
    sd = x.std(axis=0)
    return SampleMatrix(x / sd, column_names=samples.column_names)
