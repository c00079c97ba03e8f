"""Scaling constants, special functions, limit-law samplers and the comparison sum."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .matrix import philox_generator

_LOG_FACTORIAL = tuple(math.log(math.factorial(i)) for i in range(21))
_SAMPLE_CHUNK = 1 << 20


class NoSolutionError(ValueError):
    """The k-tilde equation has no sign change on the search bracket."""


@dataclass(frozen=True)
class ScalingConstants:
    big_n: float
    a: float
    b: float


@dataclass(frozen=True)
class WeightedSample:
    """Draws with non-negative importance weights; statistics are self-normalized."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if points.shape[0] != weights.shape[0]:
            raise ValueError("points and weights must have equal length")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise ValueError("weights must be non-negative and not all zero")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.weights.shape[0]

    def normalized_weights(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def expectation(self, h: Callable[[np.ndarray], np.ndarray]) -> tuple[float, float]:
        """Self-normalized estimate of E[h] and its delta-method standard error."""
        values = np.asarray(h(self.points), dtype=np.float64)
        p = self.normalized_weights()
        mean = float(np.dot(p, values))
        stderr = float(np.sqrt(np.dot(p**2, (values - mean) ** 2)))
        return mean, stderr


@dataclass(frozen=True)
class ComparisonBoundReport:
    n: int
    k: int
    u: float
    total: float
    per_overlap_terms: dict[tuple[int, int], float] = field(default_factory=dict)


def scaling_constants(big_n: float) -> ScalingConstants:
    """``a_N = sqrt(2 log N)`` and ``b_N = a_N - log(4 pi log N) / (2 a_N)``."""
    big_n = float(big_n)
    if not big_n >= 2:
        raise ValueError(f"N must be >= 2, got {big_n}")
    return scaling_constants_from_log(math.log(big_n))


def scaling_constants_from_log(log_n: float) -> ScalingConstants:
    if not log_n >= math.log(2):
        raise ValueError(f"log N must be >= log 2, got {log_n}")
    a = math.sqrt(2.0 * log_n)
    b = a - math.log(4.0 * math.pi * log_n) / (2.0 * a)
    big_n = math.exp(log_n) if log_n < 700 else math.inf
    return ScalingConstants(big_n, a, b)


def normal_tail(x):
    """Standard normal upper tail via ``erfc``; scalar in, float out."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def log_normal_tail(x):
    out = special.log_ndtr(-np.asarray(x, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def normal_quantile(p):
    out = special.ndtri(np.asarray(p, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def log_gamma(x: float) -> float:
    """``log Gamma(x)``, exact table values at the integers 1..21."""
    if float(x).is_integer() and 1 <= x <= 21:
        return _LOG_FACTORIAL[int(x) - 1]
    return math.lgamma(x)


def log_binomial_real(n: int, x: float) -> float:
    """``log(n! / (Gamma(x+1) Gamma(n-x+1)))`` for real ``x`` in ``[0, n]``."""
    n = int(n)
    x = float(x)
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= x <= n:
        raise ValueError(f"x must lie in [0, {n}], got {x}")
    if x.is_integer():
        return math.log(math.comb(n, int(x)))
    return log_gamma(n + 1) - log_gamma(x + 1) - log_gamma(n - x + 1)


def log_k_tilde_objective(n: int, tau: float, x: float) -> float:
    """``log[(n choose x)^2 * upper_tail(x tau)]``; its root is k-tilde."""
    return 2.0 * log_binomial_real(n, x) + log_normal_tail(x * tau)


def solve_k_tilde(n: int, tau: float, tol: float = 1e-10) -> float:
    """Real root of ``(n choose x)^2 upper_tail(x tau) = 1`` on ``[1, n/2]`` by bisection.

    The objective is concave in ``x`` (log-Gamma is convex and the normal
    tail is log-concave), so a positive value at 1 and a negative value at
    ``n/2`` pin down a single crossing, where the objective is decreasing.
    """
    n = int(n)
    tau = float(tau)
    if tau <= 0:
        raise ValueError("tau must be positive")
    lo, hi = 1.0, n / 2.0
    if hi < lo:
        raise NoSolutionError(f"bracket [1, {hi}] is empty for n = {n}")
    f_lo = log_k_tilde_objective(n, tau, lo)
    f_hi = log_k_tilde_objective(n, tau, hi)
    if not (f_lo > 0.0 > f_hi):
        raise NoSolutionError(
            f"no sign change on [1, {hi}]: log f(1) = {f_lo:.6g}, log f(n/2) = {f_hi:.6g}"
        )
    mid = 0.5 * (lo + hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f_mid = log_k_tilde_objective(n, tau, mid)
        if abs(f_mid) <= tol:
            break
        if f_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    step = 1e-6 * max(1.0, mid)
    slope = log_k_tilde_objective(n, tau, min(mid + step, n / 2)) - log_k_tilde_objective(
        n, tau, max(mid - step, 1.0)
    )
    if not slope < 0:
        raise AssertionError(f"objective not decreasing at the root x = {mid}")
    return mid


def k_star(n: int, tau: float) -> int:
    """Integer nearest to k-tilde."""
    return int(math.floor(solve_k_tilde(n, tau) + 0.5))


def k_tilde_asymptotic(n: int, tau: float) -> float:
    """First two terms of the large-n expansion of k-tilde."""
    log_n = math.log(n)
    c = 4.0 / tau**2
    return c * math.log(math.e * tau**2 * n / (4.0 * log_n)) + (c - 1.0) * math.log(log_n) / log_n


def alpha_k(k: int) -> float:
    """Small-x coefficient of ``P(mean - min <= x) ~ alpha_k x^(k-1)`` for k normals."""
    k = int(k)
    if k < 1:
        raise ValueError("k must be positive")
    return math.exp(
        (k + 0.5) * math.log(k) - log_gamma(k + 1) - 0.5 * (k - 1) * math.log(2 * math.pi)
    )


def theta_k_prefactor(k: int) -> float:
    k = int(k)
    return math.exp(
        (2 * k + 0.5) * math.log(k)
        - (2 * k - 1) * math.log(2)
        - 0.5 * (k - 1) * math.log(math.pi)
        - 2 * log_gamma(k + 1)
    )


def _log_product_weight(k: int, g: np.ndarray, t: np.ndarray, t2: np.ndarray) -> np.ndarray:
    if k == 1:
        return np.ones_like(g)
    return (np.log1p(t / g) * np.log1p(t2 / g)) ** (k - 1)


def _draw_gamma_exp_exp(k: int, m: int, rng: np.random.Generator):
    g = rng.gamma(shape=k, scale=0.5, size=m)
    t = rng.exponential(size=m)
    t2 = rng.exponential(size=m)
    return g, t, t2


def theta_k_estimate(k: int, m: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of the local-optimality constant and its standard error.

    ``G ~ Gamma(k, rate 2)`` and ``Y, Y' ~ Exp(1)`` are drawn independently;
    the estimate is the closed-form prefactor times the sample mean of
    ``(log(1 + Y/G) log(1 + Y'/G))^(k-1)``.
    """
    k, m = int(k), int(m)
    if k < 1:
        raise ValueError("k must be positive")
    if m < 2:
        raise ValueError("need at least 2 samples")
    rng = philox_generator(seed)
    g, t, t2 = _draw_gamma_exp_exp(k, m, rng)
    h = _log_product_weight(k, g, t, t2)
    pref = theta_k_prefactor(k)
    return pref * float(h.mean()), pref * float(h.std(ddof=1)) / math.sqrt(m)


def sample_extreme_limit(ell: int, m: int, seed: int) -> np.ndarray:
    """``m x ell`` draws of ``V_i = -log(T_1 + ... + T_i)``, ``T_j ~ Exp(1)``."""
    ell, m = int(ell), int(m)
    if ell < 1:
        raise ValueError("ell must be positive")
    rng = philox_generator(seed)
    return -np.log(np.cumsum(rng.exponential(size=(m, ell)), axis=1))


def sample_gtt(k: int, m: int, seed: int) -> WeightedSample:
    """Importance sample of ``(G, T, T')``.

    Proposal ``G ~ Gamma(k, rate 2)``, ``T, T' ~ Exp(1)``; the weight is the
    log-product factor ``(log(1+T/G) log(1+T'/G))^(k-1)`` that the target
    density carries on top of the proposal.
    """
    k, m = int(k), int(m)
    if k < 1:
        raise ValueError("k must be positive")
    rng = philox_generator(seed)
    g, t, t2 = _draw_gamma_exp_exp(k, m, rng)
    return WeightedSample(np.column_stack([g, t, t2]), _log_product_weight(k, g, t, t2))


def sample_dirichlet_ones(k: int, m: int, seed: int) -> np.ndarray:
    """Uniform draws on the (k-1)-simplex from normalized Exp(1) variables."""
    k, m = int(k), int(m)
    if k < 1:
        raise ValueError("k must be positive")
    e = philox_generator(seed).exponential(size=(m, k))
    return e / e.sum(axis=1, keepdims=True)


def _log_comb(n: int, r: int) -> float:
    if r < 0 or r > n:
        return -math.inf
    return math.log(math.comb(n, r))


def comparison_bound(n: int, k: int, u: float) -> ComparisonBoundReport:
    """Finite-n Gaussian comparison sum over overlap patterns ``(s, t)``, ``s, t >= 1``.

    Every summand carries the common factor ``N^2 upper_tail(u)^2`` with
    ``N = C(n, k)^2``, so the terms add up to the total.
    """
    n, k, u = int(n), int(k), float(u)
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    if u < 1:
        raise ValueError(f"u must be >= 1, got {u}")
    log_cnk = _log_comb(n, k)
    log_prefix = 4.0 * log_cnk + 2.0 * log_normal_tail(u)
    k2 = k * k
    terms: dict[tuple[int, int], float] = {}
    for s in range(1, k + 1):
        for t in range(1, k + 1):
            st = s * t
            if st == k2:
                continue
            log_count = (
                _log_comb(k, s) + _log_comb(k, t)
                + _log_comb(n - k, k - s) + _log_comb(n - k, k - t)
                - 2.0 * log_cnk
            )
            if log_count == -math.inf:
                terms[(s, t)] = 0.0
                continue
            log_term = (
                log_prefix
                + log_count
                + 0.5 * math.log((k2 + st) / (k2 - st))
                + st * u * u / (k2 + st)
            )
            terms[(s, t)] = math.exp(log_term)
    return ComparisonBoundReport(n, k, u, math.fsum(terms.values()), terms)


def bivariate_tail_bounds(rho: float, x: float) -> tuple[float, float]:
    """Bracket for ``P(rho Z + sqrt(1 - rho^2) Z' > x | Z > x)``."""
    rho, x = float(rho), float(x)
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if x <= 0:
        raise ValueError("x must be positive")
    theta = math.sqrt((1.0 - rho) / (1.0 + rho))
    lower = normal_tail(theta * x)
    return lower, (1.0 + rho) * lower


def falling_factorial_ratio(n: int, k: int) -> float:
    """``n (n-1) ... (n-k+1) / n^k`` accumulated in log space."""
    n, k = int(n), int(k)
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    return math.exp(math.fsum(math.log1p(-i / n) for i in range(k)))


# Conditioned-normal and min-gap checks used by the diagnostics.

def exceedance_ratio(n: float, x: float, theta: float = 1.0) -> float:
    """``n^theta (sqrt(2 pi) b_n)^(1-theta) e^(x theta) P(Z >= sqrt(theta)(b_n + x/a_n))``.

    Tends to ``theta^(-1/2)``.
    """
    sc = scaling_constants(n)
    log_val = (
        theta * math.log(n)
        + (1.0 - theta) * math.log(math.sqrt(2 * math.pi) * sc.b)
        + x * theta
        + log_normal_tail(math.sqrt(theta) * (sc.b + x / sc.a))
    )
    return math.exp(log_val)


def sample_normal_above(c: float, m: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Exact draws of ``Z | Z >= c`` (c > 0) by rejection from a shifted exponential.

    Returns the accepted draws and the number of proposals used.
    """
    lam = 0.5 * (c + math.sqrt(c * c + 4.0))
    out = np.empty(0)
    proposed = 0
    while out.size < m:
        batch = max(1024, int(1.3 * (m - out.size)))
        z = c + rng.exponential(scale=1.0 / lam, size=batch)
        u = rng.random(batch)
        proposed += batch
        out = np.concatenate([out, z[u <= np.exp(-0.5 * (z - lam) ** 2)]])
    return out[:m], proposed


def sample_conditional_exceedance(n: float, m: int, seed: int) -> np.ndarray:
    """``a_n (Z - b_n)`` given ``Z >= b_n``; limit law Exp(1)."""
    sc = scaling_constants(n)
    z, _ = sample_normal_above(sc.b, int(m), philox_generator(seed))
    return sc.a * (z - sc.b)


def _gap_batches(k: int, m: int, rng: np.random.Generator):
    left = m
    while left > 0:
        size = min(left, _SAMPLE_CHUNK)
        yield rng.standard_normal((size, k))
        left -= size


def min_gap_cdf_ratio(k: int, x: float, m: int, seed: int) -> tuple[float, float]:
    """Monte Carlo ``P(mean - min <= x) / x^(k-1)`` for k normals, with standard error."""
    k, m = int(k), int(m)
    rng = philox_generator(seed)
    hits = 0
    for z in _gap_batches(k, m, rng):
        hits += int(np.count_nonzero(z.mean(axis=1) - z.min(axis=1) <= x))
    p = hits / m
    scale = x ** (k - 1)
    return p / scale, math.sqrt(p * (1 - p) / m) / scale


def sample_gap_conditional(k: int, eps: float, m: int, seed: int) -> np.ndarray:
    """Rows ``(mean - Z_i) / eps`` conditional on ``mean - min <= eps`` (rejection)."""
    k, m = int(k), int(m)
    rng = philox_generator(seed)
    rate = max(alpha_k(k) * eps ** (k - 1), 1e-6)
    kept: list[np.ndarray] = []
    have = 0
    while have < m:
        z = rng.standard_normal((min(_SAMPLE_CHUNK, int(1.2 * (m - have) / rate) + 1024), k))
        zbar = z.mean(axis=1, keepdims=True)
        ok = (zbar[:, 0] - z.min(axis=1)) <= eps
        kept.append((zbar[ok] - z[ok]) / eps)
        have += int(ok.sum())
    return np.concatenate(kept)[:m]


def gap_tail_exponent(k: int) -> float:
    """Coefficient c in ``P(mean - min >= x) ~ (g_k / x) exp(-c x^2)``."""
    if k < 2:
        raise ValueError("needs k >= 2")
    return k / (2.0 * (k - 1))
