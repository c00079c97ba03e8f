"""Seeded Gaussian matrices, submatrix index sets and the two-way ANOVA split.

Indices are 1-based at the public surface (rows and columns run over
``1..n``); everything is converted to 0-based arrays exactly once, in
:meth:`SubmatrixIndex.zero_based`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

UINT64_MAX = 2**64 - 1


class InvalidDimensionError(ValueError):
    """Raised for a non-positive matrix side or a shape mismatch."""


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= UINT64_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def philox_generator(seed: int) -> np.random.Generator:
    """Counter-based stream keyed directly by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=_check_seed(seed)))


@dataclass(frozen=True, eq=False)
class GaussianMatrix:
    """Square real matrix with the seed it was drawn from.

    ``values`` is a read-only ``(n, n)`` float64 array. ``seed`` is ``None``
    for hand-built fixtures.
    """

    n: int
    values: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            if arr.size != self.n * self.n:
                raise InvalidDimensionError(
                    f"expected {self.n * self.n} values, got {arr.size}"
                )
            arr = arr.reshape(self.n, self.n)
        if arr.shape != (self.n, self.n):
            raise InvalidDimensionError(f"expected shape ({self.n}, {self.n}), got {arr.shape}")
        if arr is self.values:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_values(cls, values, seed: int | None = None) -> "GaussianMatrix":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise InvalidDimensionError(f"need a non-empty square matrix, got shape {arr.shape}")
        return cls(arr.shape[0], arr, seed)

    def __eq__(self, other):
        if not isinstance(other, GaussianMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and self.seed == other.seed
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.n, self.seed, self.values.tobytes()))

    def row_major(self) -> np.ndarray:
        """Flat view in the fixed row-major fill order."""
        return self.values.reshape(-1)


@dataclass(frozen=True, order=True)
class SubmatrixIndex:
    """Row and column index sets ``I x J`` of a k x k submatrix (1-based).

    Inputs may be given in any order; they are stored sorted, so equality
    is equality of the sorted sequences.
    """

    rows: tuple[int, ...]
    cols: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(sorted(int(i) for i in self.rows))
        cols = tuple(sorted(int(j) for j in self.cols))
        if len(rows) == 0 or len(rows) != len(cols):
            raise InvalidDimensionError(
                f"need |rows| = |cols| >= 1, got {len(rows)} and {len(cols)}"
            )
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise ValueError("row and column indices must be distinct")
        if rows[0] < 1 or cols[0] < 1:
            raise IndexError("indices are 1-based; got an index below 1")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def from_zero_based(cls, rows: Iterable[int], cols: Iterable[int]) -> "SubmatrixIndex":
        return cls(tuple(int(i) + 1 for i in rows), tuple(int(j) + 1 for j in cols))

    @property
    def k(self) -> int:
        return len(self.rows)

    def check_bounds(self, n: int) -> None:
        if self.rows[-1] > n or self.cols[-1] > n:
            raise IndexError(f"index set {self} out of bounds for n = {n}")

    def zero_based(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.rows, dtype=np.intp) - 1,
            np.asarray(self.cols, dtype=np.intp) - 1,
        )

    def overlap(self, other: "SubmatrixIndex") -> tuple[int, int]:
        """Number of shared rows and shared columns ``(s, t)``."""
        return len(set(self.rows) & set(other.rows)), len(set(self.cols) & set(other.cols))


@dataclass(frozen=True)
class AnovaDecomposition:
    grand_mean: float
    row_effects: np.ndarray
    col_effects: np.ndarray
    residual: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (
            self.grand_mean
            + self.row_effects[:, None]
            + self.col_effects[None, :]
            + self.residual
        )

    def components(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """The four additive matrices: mean, row-effect, column-effect, residual."""
        k = self.residual.shape[0]
        ones = np.ones((k, k))
        return (
            self.grand_mean * ones,
            self.row_effects[:, None] * ones,
            self.col_effects[None, :] * ones,
            self.residual,
        )


def sample_gaussian_matrix(n: int, seed: int) -> GaussianMatrix:
    """Draw an ``n x n`` matrix of i.i.d. N(0, 1) entries.

    The stream is Philox keyed by ``seed``; entries fill the matrix in
    row-major order, so ``sample_gaussian_matrix(n, s).row_major()`` is the
    first ``n*n`` normals of that stream.
    """
    n = int(n)
    if n < 1:
        raise InvalidDimensionError(f"n must be >= 1, got {n}")
    seed = _check_seed(seed)
    values = philox_generator(seed).standard_normal(n * n)
    return GaussianMatrix(n, values.reshape(n, n), seed)


def _as_array(W) -> np.ndarray:
    return W.values if isinstance(W, GaussianMatrix) else np.asarray(W, dtype=np.float64)


def extract(W, index: SubmatrixIndex) -> np.ndarray:
    arr = _as_array(W)
    index.check_bounds(arr.shape[0])
    rows, cols = index.zero_based()
    return arr[np.ix_(rows, cols)]


def submatrix_average(W, index: SubmatrixIndex) -> float:
    return float(extract(W, index).mean())


def cross_sums(W, index: SubmatrixIndex) -> tuple[np.ndarray, np.ndarray]:
    """Sums of every row over ``index.cols`` and every column over ``index.rows``."""
    arr = _as_array(W)
    index.check_bounds(arr.shape[0])
    rows, cols = index.zero_based()
    return arr[:, cols].sum(axis=1), arr[rows, :].sum(axis=0)


def anova_decompose(U) -> AnovaDecomposition:
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] == 0:
        raise InvalidDimensionError(f"need a non-empty square matrix, got shape {U.shape}")
    grand = U.mean()
    row_means = U.mean(axis=1)
    col_means = U.mean(axis=0)
    residual = U - row_means[:, None] - col_means[None, :] + grand
    return AnovaDecomposition(
        float(grand), row_means - grand, col_means - grand, residual
    )


def top_k_indices(v: Sequence[float], k: int) -> tuple[int, ...]:
    """1-based indices of the ``k`` largest entries, ties to the smallest index."""
    v = np.asarray(v, dtype=np.float64)
    k = int(k)
    if k < 1 or k > v.size:
        raise ValueError(f"need 1 <= k <= {v.size}, got k = {k}")
    order = np.argsort(-v, kind="stable")[:k]
    return tuple(sorted(int(i) + 1 for i in order))


def top_k_zero_based(v: np.ndarray, k: int) -> np.ndarray:
    return np.sort(np.argsort(-v, kind="stable")[:k])
