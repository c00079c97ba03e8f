"""LAS iteration, local/global optimality, and exhaustive census oracles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels
from .matrix import (
    SubmatrixIndex,
    _as_array,
    cross_sums,
    submatrix_average,
    top_k_zero_based,
)

CENSUS_BUDGET = 10**7
GLOBAL_BUDGET = 10**7
DEFAULT_MAX_ROUNDS = 1000


class BudgetError(RuntimeError):
    """Exhaustive enumeration would exceed the configured budget."""

    def __init__(self, n: int, k: int, count: int, budget: int):
        self.n, self.k, self.count, self.budget = n, k, count, budget
        super().__init__(
            f"exhaustive scan needs (n choose k) = C({n},{k}) = {count} row sets, "
            f"over the budget of {budget}"
        )


def _check_budget(n: int, k: int, budget: int) -> None:
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k = {k}, n = {n}")
    count = math.comb(n, k)
    if count > budget:
        raise BudgetError(n, k, count, budget)


@dataclass(frozen=True)
class LasResult:
    final_index: SubmatrixIndex
    final_average: float
    iterations: int
    trajectory_averages: tuple[float, ...]
    converged: bool = True

    @property
    def truncated(self) -> bool:
        """True when ``max_rounds`` ran out before a fixed point was reached."""
        return not self.converged


@dataclass(frozen=True)
class LocalOptimaCensus:
    k: int
    count: int
    optima: tuple[tuple[SubmatrixIndex, float], ...]

    def __post_init__(self):
        if self.count != len(self.optima):
            raise ValueError("count must equal the number of optima")

    @property
    def averages(self) -> np.ndarray:
        return np.array([avg for _, avg in self.optima], dtype=np.float64)

    def indices(self) -> set[SubmatrixIndex]:
        return {idx for idx, _ in self.optima}


@dataclass(frozen=True)
class LocalizationResult:
    tau: float
    k_observed: int
    per_k_max_average: tuple[tuple[int, float], ...]


def local_optimality_status(W, index: SubmatrixIndex) -> tuple[bool, bool]:
    """``(row_dominant, column_dominant)`` with ties counted as dominant."""
    arr = _as_array(W)
    n = arr.shape[0]
    row_sums, col_sums = cross_sums(arr, index)
    rows, cols = index.zero_based()

    def dominant(sums: np.ndarray, chosen: np.ndarray) -> bool:
        mask = np.zeros(n, dtype=bool)
        mask[chosen] = True
        if mask.all():
            return True
        return bool(sums[mask].min() >= sums[~mask].max())

    return dominant(row_sums, rows), dominant(col_sums, cols)


def is_locally_optimal(W, index: SubmatrixIndex) -> bool:
    row_dom, col_dom = local_optimality_status(W, index)
    return row_dom and col_dom


def _initial_columns(initial_cols) -> tuple[int, ...]:
    if isinstance(initial_cols, SubmatrixIndex):
        return initial_cols.cols
    return tuple(sorted(int(j) for j in initial_cols))


def las_search(
    W,
    k: int,
    initial_cols: Iterable[int] | SubmatrixIndex,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> LasResult:
    """Alternate best-rows / best-columns updates from a starting column set.

    A round is one row update followed by one column update. The search
    stops when a round reproduces the previous round's ``(I, J)``;
    ``iterations`` counts the rounds up to that fixed point, excluding the
    confirming round. If ``max_rounds`` runs out first the result has
    ``converged=False``.
    """
    arr = _as_array(W)
    n = arr.shape[0]
    k = int(k)
    cols0 = _initial_columns(initial_cols)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k = {k}, n = {n}")
    if len(cols0) != k or len(set(cols0)) != k or cols0[0] < 1 or cols0[-1] > n:
        raise ValueError(f"initial_cols must be {k} distinct indices in [1, {n}], got {cols0}")
    if max_rounds < 1:
        raise ValueError("max_rounds must be positive")

    J = np.asarray(cols0, dtype=np.intp) - 1
    prev: tuple[bytes, bytes] | None = None
    trajectory: list[float] = []
    I = J
    for rnd in range(1, max_rounds + 1):
        I = top_k_zero_based(arr[:, J].sum(axis=1), k)
        half_row = float(arr[np.ix_(I, J)].mean())
        J = top_k_zero_based(arr[I, :].sum(axis=0), k)
        half_col = float(arr[np.ix_(I, J)].mean())
        state = (I.tobytes(), J.tobytes())
        if state == prev:
            index = SubmatrixIndex.from_zero_based(I, J)
            return LasResult(index, half_col, rnd - 1, tuple(trajectory), True)
        trajectory.extend((half_row, half_col))
        prev = state
    index = SubmatrixIndex.from_zero_based(I, J)
    return LasResult(index, trajectory[-1], max_rounds, tuple(trajectory), False)


def las_restarts(W, k: int, starts: Iterable[Iterable[int]], max_rounds: int = DEFAULT_MAX_ROUNDS):
    return [las_search(W, k, cols, max_rounds) for cols in starts]


def all_column_starts(n: int, k: int):
    """Every k-subset of ``1..n`` in lexicographic order."""
    return itertools.combinations(range(1, n + 1), k)


def _resolve_tied_row_set(arr: np.ndarray, rows: np.ndarray, k: int):
    """All locally optimal ``I x J`` for a row set whose top-k columns are tied."""
    n = arr.shape[0]
    cs = arr[rows, :].sum(axis=0)
    kth = np.sort(cs)[::-1][k - 1]
    above = np.flatnonzero(cs > kth)
    level = np.flatnonzero(cs == kth)
    in_rows = np.zeros(n, dtype=bool)
    in_rows[rows] = True
    found = []
    for extra in itertools.combinations(level, k - above.size):
        J = np.sort(np.concatenate([above, np.asarray(extra, dtype=np.intp)]))
        rs = arr[:, J].sum(axis=1)
        if in_rows.all() or rs[in_rows].min() >= rs[~in_rows].max():
            found.append(J)
    return found


def local_optima_arrays(W, k: int, budget: int = CENSUS_BUDGET):
    """Census as 0-based arrays ``(rows, cols, averages)``, lexicographically ordered.

    Scans the ``C(n, k)`` row sets only: a column-dominant ``J`` for a
    given ``I`` must be a top-k column set of the column sums over ``I``.
    """
    arr = np.ascontiguousarray(_as_array(W), dtype=np.float64)
    n = arr.shape[0]
    k = int(k)
    _check_budget(n, k, budget)
    opt_r, opt_c, tied = kernels.census_scan(arr, k)
    rows = opt_r.astype(np.intp)
    cols = opt_c.astype(np.intp)
    if tied.shape[0]:
        extra_r, extra_c = [], []
        for I in tied.astype(np.intp):
            for J in _resolve_tied_row_set(arr, I, k):
                extra_r.append(I)
                extra_c.append(J)
        if extra_r:
            rows = np.vstack([rows, np.array(extra_r)])
            cols = np.vstack([cols, np.array(extra_c)])
            order = np.lexsort(np.hstack([rows, cols]).T[::-1])
            rows, cols = rows[order], cols[order]
    if rows.shape[0]:
        averages = arr[rows[:, :, None], cols[:, None, :]].mean(axis=(1, 2))
    else:
        averages = np.empty(0)
    return rows, cols, averages


def count_local_optima(W, k: int, budget: int = CENSUS_BUDGET) -> int:
    return int(local_optima_arrays(W, k, budget)[0].shape[0])


def enumerate_local_optima(W, k: int, budget: int = CENSUS_BUDGET) -> LocalOptimaCensus:
    rows, cols, averages = local_optima_arrays(W, k, budget)
    optima = tuple(
        (SubmatrixIndex.from_zero_based(r, c), float(a))
        for r, c, a in zip(rows, cols, averages)
    )
    return LocalOptimaCensus(int(k), len(optima), optima)


def naive_local_optima(W, k: int) -> LocalOptimaCensus:
    """Predicate scan over all ``C(n, k)^2`` index sets (test oracle)."""
    arr = _as_array(W)
    n = arr.shape[0]
    found = []
    for rows in itertools.combinations(range(1, n + 1), k):
        for cols in itertools.combinations(range(1, n + 1), k):
            index = SubmatrixIndex(rows, cols)
            if is_locally_optimal(arr, index):
                found.append((index, submatrix_average(arr, index)))
    return LocalOptimaCensus(int(k), len(found), tuple(found))


def global_optimum_exhaustive(W, k: int, budget: int = GLOBAL_BUDGET) -> tuple[SubmatrixIndex, float]:
    """Exact argmax and max of the submatrix average over all k x k index sets.

    For a fixed row set the best columns are the top-k column sums, so the
    scan visits ``C(n, k)`` row sets; ``budget`` bounds that count. Ties go
    to the lexicographically first ``(rows, cols)``.
    """
    arr = np.ascontiguousarray(_as_array(W), dtype=np.float64)
    n = arr.shape[0]
    k = int(k)
    _check_budget(n, k, budget)
    _, rows, cols = kernels.global_max_scan(arr, k)
    index = SubmatrixIndex.from_zero_based(rows, cols)
    return index, submatrix_average(arr, index)


def largest_threshold_submatrix_size(
    W, tau: float, k_horizon: int, budget: int = GLOBAL_BUDGET
) -> LocalizationResult:
    """Largest k within the horizon whose best k x k average reaches ``tau`` (0 if none)."""
    arr = _as_array(W)
    n = arr.shape[0]
    if tau <= 0:
        raise ValueError("tau must be positive")
    horizon = min(int(k_horizon), n)
    if horizon < 1:
        raise ValueError("k_horizon must be positive")
    per_k = []
    for k in range(1, horizon + 1):
        _, best = global_optimum_exhaustive(arr, k, budget)
        per_k.append((k, best))
    reached = [k for k, best in per_k if best >= tau]
    k_obs = max(reached, default=0)
    if reached != list(range(1, k_obs + 1)):
        raise AssertionError(f"threshold set {reached} is not an interval starting at 1")
    return LocalizationResult(float(tau), k_obs, tuple(per_k))


def count_local_optima_above(census: LocalOptimaCensus, c: float) -> int:
    return sum(1 for _, avg in census.optima if avg >= c)
