"""Empirical distributions: KS, Wasserstein-1 to N(0, 1), moments, QQ and histograms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .asymptotics import normal_quantile


class EmptySampleError(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalDistribution:
    sorted_values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.sorted_values, dtype=np.float64).reshape(-1)
        if values.size > 1 and np.any(np.diff(values) < 0):
            raise ValueError("sorted_values must be non-decreasing; use from_sample")
        object.__setattr__(self, "sorted_values", values)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
            if w.shape != values.shape:
                raise ValueError("weights must match values in length")
            if np.any(w < 0) or not w.sum() > 0:
                raise ValueError("weights must be non-negative with positive sum")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_sample(cls, values, weights=None) -> "EmpiricalDistribution":
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        order = np.argsort(values, kind="stable")
        w = None
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64).reshape(-1)
            if w.shape != values.shape:
                raise ValueError("weights must match values in length")
            w = w[order]
        return cls(values[order], w)

    def __len__(self):
        return self.sorted_values.size

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    def _atoms(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct support points with ECDF just below and at each point."""
        x = self.sorted_values
        w = np.ones_like(x) if self.weights is None else self.weights
        cum = np.cumsum(w) / w.sum()
        last = np.r_[x[1:] != x[:-1], True]
        upper = cum[last]
        lower = np.r_[0.0, upper[:-1]]
        return x[last], lower, np.minimum(upper, 1.0)

    def cdf(self, t) -> np.ndarray:
        x = self.sorted_values
        w = np.ones_like(x) if self.weights is None else self.weights
        cum = np.r_[0.0, np.cumsum(w) / w.sum()]
        return cum[np.searchsorted(x, np.asarray(t, dtype=np.float64), side="right")]


def _require_nonempty(sample: EmpiricalDistribution):
    if len(sample) == 0:
        raise EmptySampleError("sample is empty")


def ks_statistic(sample: EmpiricalDistribution, reference_cdf: Callable) -> float:
    """Sup distance between the (weighted) ECDF and a continuous reference CDF."""
    _require_nonempty(sample)
    pts, below, at = sample._atoms()
    F = np.asarray(reference_cdf(pts), dtype=np.float64)
    return float(max(np.abs(at - F).max(), np.abs(below - F).max()))


def ks_two_sample(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """Sup distance between two (possibly weighted) ECDFs."""
    _require_nonempty(a)
    _require_nonempty(b)
    grid = np.union1d(a.sorted_values, b.sorted_values)
    return float(np.abs(a.cdf(grid) - b.cdf(grid)).max())


def plotting_positions(m: int) -> np.ndarray:
    return (np.arange(1, m + 1) - 0.5) / m


def wasserstein_to_standard_normal(sample: EmpiricalDistribution) -> float:
    """Quantile-coupling estimate of W1 to N(0, 1) at plotting positions (i - 0.5)/m."""
    if sample.weighted:
        raise ValueError("quantile coupling needs an unweighted sample")
    m = len(sample)
    if m < 2:
        raise ValueError("need at least 2 points")
    q = normal_quantile(plotting_positions(m))
    return float(np.mean(np.abs(sample.sorted_values - q)))


@dataclass(frozen=True)
class Summary:
    mean: float
    variance: float
    stderr_of_mean: float
    count: int


def summarize(sample: EmpiricalDistribution) -> Summary:
    """Mean, variance and standard error; unbiased divisor when unweighted.

    Weighted samples use reliability weights: variance divisor
    ``V1 - V2/V1`` and effective size ``V1^2 / V2``.
    """
    m = len(sample)
    if m < 2:
        raise ValueError(f"variance needs at least 2 points, got {m}")
    x = sample.sorted_values
    if sample.weights is None:
        mean = float(x.mean())
        var = float(x.var(ddof=1))
        return Summary(mean, var, math.sqrt(var / m), m)
    w = sample.weights
    v1, v2 = w.sum(), (w * w).sum()
    mean = float(np.dot(w, x) / v1)
    var = float(np.dot(w, (x - mean) ** 2) / (v1 - v2 / v1))
    return Summary(mean, var, math.sqrt(var * v2) / v1, m)


def qq_points(sample: EmpiricalDistribution, reference_quantile: Callable = normal_quantile) -> np.ndarray:
    """``(m, 2)`` array of (theoretical, empirical) quantile pairs."""
    if sample.weighted:
        raise ValueError("QQ pairs need an unweighted sample")
    _require_nonempty(sample)
    m = len(sample)
    theo = np.asarray(reference_quantile(plotting_positions(m)), dtype=np.float64)
    return np.column_stack([theo, sample.sorted_values])


def qq_slope(pairs: np.ndarray) -> float:
    """Least-squares slope of empirical on theoretical quantiles."""
    x, y = pairs[:, 0], pairs[:, 1]
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def standardize(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    sd = v.std(ddof=1)
    if not sd > 0:
        raise ValueError("cannot standardize a constant sample")
    return (v - v.mean()) / sd


def histogram(values, bins: int | str = "auto") -> tuple[np.ndarray, np.ndarray]:
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins)
    return edges, counts
