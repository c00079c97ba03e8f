"""Experiments E1-E7: each checks one limit statement at desk scale.

All tolerances are calibrated desk-scale defaults (the limit statements
carry no finite-n error terms) and can be overridden through
``ExperimentConfig.thresholds``.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import special

from .. import asymptotics as asy
from ..matrix import GaussianMatrix, anova_decompose, philox_generator, sample_gaussian_matrix
from ..search import (
    CENSUS_BUDGET,
    GLOBAL_BUDGET,
    global_optimum_exhaustive,
    largest_threshold_submatrix_size,
    las_search,
    local_optima_arrays,
)
from ..stats import (
    EmpiricalDistribution,
    ks_statistic,
    ks_two_sample,
    qq_points,
    qq_slope,
    standardize,
    summarize,
    wasserstein_to_standard_normal,
)
from .harness import Check, ExperimentConfig, ExperimentReport, derive_seed, flatten, run_ordered

MatrixFactory = Callable[[int, int], GaussianMatrix]

# Offsets for auxiliary streams derived from the master seed, kept clear of
# replicate indices.
_AUX = 1 << 62


def _gumbel_cdf(x):
    return np.exp(-np.exp(-np.asarray(x, dtype=np.float64)))


def _budget(config: ExperimentConfig, default: int) -> int:
    return int(config.budget) if config.budget is not None else default


def _seeds(config: ExperimentConfig, *extra: int) -> list[tuple[int, int]]:
    return [(r, config.replicate_seed(r, *extra)) for r in range(config.replicates)]


def _mean_se(values) -> dict[str, float]:
    s = summarize(EmpiricalDistribution.from_sample(values))
    return {"value": s.mean, "stderr": s.stderr_of_mean}


def run_E1_global_max_limit(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Rescaled global maximum ``a_N (k M - b_N)`` against the standard Gumbel law."""
    n, k = config.n, config.k
    budget = _budget(config, GLOBAL_BUDGET)
    sc = asy.scaling_constants_from_log(2.0 * math.log(math.comb(n, k)))
    bound = asy.comparison_bound(n, k, sc.b).total if sc.b >= 1 else math.nan

    def task(item):
        r, seed = item
        W = sample_gaussian_matrix(n, seed)
        _, best = global_optimum_exhaustive(W, k, budget)
        return {"replicate": r, "seed": seed, "max_average": best,
                "score": sc.a * (k * best - sc.b), "comparison_bound": bound}

    records = run_ordered(task, _seeds(config), threads)
    scores = np.array([rec["score"] for rec in records])
    ks = ks_statistic(EmpiricalDistribution.from_sample(scores), _gumbel_cdf)
    summary = {
        "log_N": 2.0 * math.log(math.comb(n, k)), "a_N": sc.a, "b_N": sc.b,
        "gumbel_ks": ks, "score_mean": _mean_se(scores),
        "gumbel_mean": float(np.euler_gamma), "comparison_bound_at_b_N": bound,
    }
    checks = []
    if k == 1:
        checks.append(Check.at_most(
            "gumbel_ks", ks, config.threshold("gumbel_ks", 0.10),
            "calibrated: exact law of the maximum of n^2 i.i.d. normals is within 0.05 of Gumbel at n=60"))
        checks.append(Check.at_most("comparison_bound_k1_zero", abs(bound), 0.0,
                                    "k=1 averages are independent entries"))
    return ExperimentReport("E1", config.echo(), list(records[0]), records, summary, checks, scores)


def _oracle_centered_cov(k: int, m: int, seed: int) -> dict[str, tuple[float, float]]:
    rng = philox_generator(seed)
    Z = rng.standard_normal((m, k, k))
    C = Z - Z.mean(axis=(1, 2), keepdims=True)
    return {
        "11_12": _cov_se(C[:, 0, 0], C[:, 0, 1]),
        "11_22": _cov_se(C[:, 0, 0], C[:, 1, 1]),
    }


def _cov_se(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    p = (a - a.mean()) * (b - b.mean())
    return float(p.sum() / (p.size - 1)), float(p.std(ddof=1) / math.sqrt(p.size))


def run_E2_global_structure(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Centered global optimum against a centered k x k Gaussian matrix."""
    n, k = config.n, config.k
    budget = _budget(config, GLOBAL_BUDGET)

    def task(item):
        r, seed = item
        W = sample_gaussian_matrix(n, seed)
        idx, best = global_optimum_exhaustive(W, k, budget)
        rows, cols = idx.zero_based()
        C = W.values[np.ix_(rows, cols)] - best
        rec = {"replicate": r, "seed": seed, "max_average": best, "c11": C[0, 0]}
        if k >= 2:
            rec.update(c12=C[0, 1], c21=C[1, 0], c22=C[1, 1])
        return rec

    records = run_ordered(task, _seeds(config), threads)
    c11 = np.array([rec["c11"] for rec in records])
    summary: dict = {"c11_mean": _mean_se(c11)}
    checks = []
    if k == 1:
        summary["c11_max_abs"] = float(np.abs(c11).max())
        checks.append(Check.at_most("centered_is_zero", float(np.abs(c11).max()), 0.0,
                                    "1x1 centered matrix vanishes"))
    else:
        var = 1.0 - 1.0 / k**2
        ks = ks_statistic(EmpiricalDistribution.from_sample(c11),
                          lambda x: special.ndtr(np.asarray(x) / math.sqrt(var)))
        summary.update(c11_ks=ks, c11_reference_variance=var,
                       c11_variance=float(c11.var(ddof=1)))
        checks.append(Check.at_most("c11_ks", ks, config.threshold("c11_ks", 0.05),
                                    "calibrated desk-scale KS tolerance"))
        m_oracle = int(config.options.get("oracle_draws", 10**6))
        oracle = _oracle_centered_cov(k, m_oracle, derive_seed(config.master_seed, 2, _AUX))
        for key, other in (("11_12", "c12"), ("11_22", "c22")):
            emp, se = _cov_se(c11, np.array([rec[other] for rec in records]))
            ref, ref_se = oracle[key]
            tol = config.threshold("cov_sigmas", 4.0) * math.hypot(se, ref_se)
            summary[f"cov_{key}"] = {"value": emp, "stderr": se,
                                     "oracle": ref, "oracle_stderr": ref_se,
                                     "exact": -1.0 / k**2}
            checks.append(Check.at_most(f"cov_{key}_deviation", abs(emp - ref), tol,
                                        "4 combined standard errors vs i.i.d. oracle"))
    return ExperimentReport("E2", config.echo(), list(records[0]), records, summary, checks, c11)


def run_E3_two_point_localization(
    config: ExperimentConfig, threads: int = 1, matrix_factory: MatrixFactory | None = None
) -> ExperimentReport:
    """Largest size with best average >= tau, against ``{k* - 1, k*}``."""
    n = config.n
    if config.tau is None:
        raise ValueError("E3 needs tau")
    tau = float(config.tau)
    budget = _budget(config, GLOBAL_BUDGET)
    k_tilde = asy.solve_k_tilde(n, tau)
    k_star = int(math.floor(k_tilde + 0.5))
    horizon = int(config.options.get("k_horizon", min(n, k_star + 2)))
    factory = matrix_factory or sample_gaussian_matrix

    def task(item):
        r, seed = item
        res = largest_threshold_submatrix_size(factory(n, seed), tau, horizon, budget)
        rec = {"replicate": r, "seed": seed, "K": res.k_observed}
        rec.update({f"M_{kk}": m for kk, m in res.per_k_max_average})
        return rec

    records = run_ordered(task, _seeds(config), threads)
    K = np.array([rec["K"] for rec in records])
    freq = float(np.isin(K, (k_star - 1, k_star)).mean())
    values, counts = np.unique(K, return_counts=True)
    summary = {"k_tilde": k_tilde, "k_star": k_star, "k_horizon": horizon,
               "two_point_frequency": freq,
               "K_histogram": {str(int(v)): int(c) for v, c in zip(values, counts)}}
    checks = [Check.at_least("two_point_frequency", freq,
                             config.threshold("two_point_frequency", 0.80),
                             "soft desk-scale threshold; the localization statement is asymptotic")]
    return ExperimentReport("E3", config.echo(), list(records[0]), records, summary, checks,
                            K.astype(float))


def run_E4_local_optimum_structure(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Rescaled averages and row/column effects of local optima against the limit triple."""
    n, k = config.n, config.k
    budget = _budget(config, CENSUS_BUDGET)
    sc = asy.scaling_constants(n)
    rk = math.sqrt(k)

    def task(item):
        r, seed = item
        W = sample_gaussian_matrix(n, seed)
        rows, cols, avgs = local_optima_arrays(W, k, budget)
        out = []
        for I, J, avg in zip(rows, cols, avgs):
            dec = anova_decompose(W.values[np.ix_(I, J)])
            rec = {"replicate": r, "seed": seed, "census_count": len(avgs),
                   "average": float(avg), "score": sc.a * (rk * avg - sc.b)}
            rec.update({f"row_effect_{i + 1}": rk * sc.a * e for i, e in enumerate(dec.row_effects)})
            rec.update({f"col_effect_{j + 1}": rk * sc.a * e for j, e in enumerate(dec.col_effects)})
            out.append(rec)
        return out

    records = flatten(run_ordered(task, _seeds(config), threads))
    scores = np.array([rec["score"] for rec in records])
    avgs = np.array([rec["average"] for rec in records])
    counts = np.array([grp[0]["census_count"] for grp in _by_replicate(records)])
    score_dist = EmpiricalDistribution.from_sample(scores)
    summary: dict = {"a_n": sc.a, "b_n": sc.b, "pooled_optima": len(records),
                     "census_count": _mean_se(counts)}
    if k == 1:
        ks = ks_statistic(score_dist, lambda x: np.exp(-2.0 * np.exp(-np.asarray(x))))
        ks_ref = "closed form: -log G with G ~ Exp(2)"
    else:
        m_ref = int(config.options.get("gtt_samples", 200_000))
        gtt = asy.sample_gtt(k, m_ref, derive_seed(config.master_seed, 4, _AUX))
        ref = EmpiricalDistribution.from_sample(-np.log(gtt.points[:, 0]), gtt.weights)
        ks = ks_two_sample(score_dist, ref)
        ks_ref = f"weighted two-sample KS against {m_ref} importance draws of -log G"
        if k == 2:
            u = asy.sample_dirichlet_ones(2, m_ref, derive_seed(config.master_seed, 4, _AUX + 1))[:, 0]
            g, t = gtt.points[:, 0], gtt.points[:, 1]
            ref_row = EmpiricalDistribution.from_sample(np.log1p(t / g) * (2 * u - 1), gtt.weights)
            row1 = np.array([rec["row_effect_1"] for rec in records])
            summary["row_effect_ks"] = ks_two_sample(EmpiricalDistribution.from_sample(row1), ref_row)
    summary.update(score_ks=ks, score_reference=ks_ref)
    ratio = float(avgs.mean() / math.sqrt(2.0 * math.log(n) / k))
    summary["average_over_sqrt_2logn_over_k"] = ratio
    lo, hi = config.threshold("average_ratio_lo", 0.85), config.threshold("average_ratio_hi", 1.15)
    checks = [Check.within("average_ratio", ratio, lo, hi,
                           "calibrated band; convergence is logarithmic in n")]
    # For k >= 2 the finite-n score law is still far from the limit at
    # census-feasible n, so the KS value is reported but not gated.
    if k == 1 or "score_ks" in config.thresholds:
        checks.insert(0, Check.at_most("score_ks", ks, config.threshold("score_ks", 0.05), ks_ref))
    if k == 1:
        exact = n * n / (2 * n - 1)
        cm = summary["census_count"]
        summary["census_count_exact"] = exact
        checks.append(Check.at_most("census_mean_deviation", abs(cm["value"] - exact),
                                    4.0 * cm["stderr"], "exact E L_n(1) = n^2/(2n-1); 4 stderr"))
    return ExperimentReport("E4", config.echo(), list(records[0]), records, summary, checks, scores)


def _by_replicate(records):
    groups: dict[int, list] = {}
    for rec in records:
        groups.setdefault(rec["replicate"], []).append(rec)
    return [groups[r] for r in sorted(groups)]


def exact_k1_moments(n: int) -> tuple[float, float]:
    """Mean and variance of the number of entries that are row and column maxima.

    With p = 1/(2n-1), two entries sharing a line are never both optimal,
    and two entries sharing no line are both optimal with probability
    1/((2n-2)(2n-1)).  Summing the covariances leaves n^2 (n-1) / (2 (2n-1)^2).
    """
    return n * n / (2 * n - 1), n * n * (n - 1) / (2 * (2 * n - 1) ** 2)


def published_k1_variance(n: int) -> float:
    """The literature's closed form n^2 (n-3) / (2 (2n-1)^2); negative at n = 2, kept for comparison."""
    return n * n * (n - 3) / (2 * (2 * n - 1) ** 2)


def run_E5_mean_variance_scaling(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Mean and variance of the local-optima count across an n-grid."""
    k = config.k
    budget = _budget(config, CENSUS_BUDGET)
    grid = config.n_grid or (config.n,)

    records: list[dict] = []
    per_n: dict[int, dict] = {}
    for g, n in enumerate(grid):
        if k > n:
            raise ValueError(f"k = {k} exceeds grid size n = {n}")

        def task(item, n=n):
            r, seed = item
            L = local_optima_arrays(sample_gaussian_matrix(n, seed), k, budget)[0].shape[0]
            return {"n": n, "replicate": r, "seed": seed, "L": L}

        # A single-size grid uses the plain (master, experiment, replicate) seeds.
        extra = () if len(grid) == 1 else (g,)
        rows = run_ordered(task, _seeds(config, *extra), threads)
        records.extend(rows)
        L = np.array([rec["L"] for rec in rows], dtype=float)
        s = summarize(EmpiricalDistribution.from_sample(L))
        per_n[n] = {"mean": s.mean, "mean_stderr": s.stderr_of_mean, "variance": s.variance,
                    "variance_stderr": s.variance * math.sqrt(2.0 / (s.count - 1))}

    checks = []
    summary: dict = {"per_n": {str(n): v for n, v in per_n.items()}}
    if k == 1:
        for n, st in per_n.items():
            mean, var = exact_k1_moments(n)
            pub = published_k1_variance(n)
            st.update(exact_mean=mean, exact_variance=var, published_variance=pub,
                      published_variance_rel_error=abs(st["variance"] / pub - 1) if pub else math.nan)
            checks.append(Check.at_most(f"mean_deviation_n{n}", abs(st["mean"] - mean),
                                        config.threshold("mean_sigmas", 4.0) * st["mean_stderr"],
                                        "exact k=1 mean; 4 stderr"))
            checks.append(Check.at_most(f"variance_rel_error_n{n}", abs(st["variance"] / var - 1),
                                        config.threshold("variance_rel_tol", 0.05),
                                        "exact k=1 variance; 5% relative"))
    else:
        m = int(config.options.get("theta_samples", 10**6))
        theta, theta_se = asy.theta_k_estimate(k, m, derive_seed(config.master_seed, 5, _AUX))
        summary["theta_hat"] = {"value": theta, "stderr": theta_se, "samples": m}
        for n, st in per_n.items():
            pred = theta * math.comb(n, k) / math.log(n) ** ((k - 1) / 2)
            st.update(predicted_mean=pred, ratio=st["mean"] / pred)
        if len(grid) >= 2:
            lo_n, hi_n = min(grid), max(grid)
            gap_big = abs(per_n[hi_n]["ratio"] - 1)
            gap_small = abs(per_n[lo_n]["ratio"] - 1)
            slack = config.threshold("ratio_trend_slack", 0.05)
            checks.append(Check.at_most("ratio_trend", gap_big, gap_small + slack,
                                        f"|ratio(n={hi_n}) - 1| vs |ratio(n={lo_n}) - 1| + {slack}"))
    plot = np.array([rec["L"] for rec in records if rec["n"] == grid[-1]], dtype=float)
    return ExperimentReport("E5", config.echo(), ["n", "replicate", "seed", "L"], records,
                            summary, checks, plot)


def run_E6_clt(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Standardized local-optima count against N(0, 1), with histogram and QQ data."""
    n, k = config.n, config.k
    budget = _budget(config, CENSUS_BUDGET)

    def task(item):
        r, seed = item
        L = local_optima_arrays(sample_gaussian_matrix(n, seed), k, budget)[0].shape[0]
        return {"replicate": r, "seed": seed, "L": L}

    records = run_ordered(task, _seeds(config), threads)
    L = np.array([rec["L"] for rec in records], dtype=float)
    z = standardize(L)
    for rec, zi in zip(records, z):
        rec["L_standardized"] = float(zi)
    dist = EmpiricalDistribution.from_sample(z)
    ks = ks_statistic(dist, special.ndtr)
    w1 = wasserstein_to_standard_normal(dist)
    slope = qq_slope(qq_points(dist))
    zs = summarize(dist)
    raw = summarize(EmpiricalDistribution.from_sample(L))
    summary = {"L_mean": raw.mean, "L_variance": raw.variance, "L_mean_stderr": raw.stderr_of_mean,
               "ks": ks, "wasserstein": w1, "qq_slope": slope,
               "standardized_mean": zs.mean, "standardized_variance": zs.variance}
    checks = [
        Check.at_most("ks", ks, config.threshold("ks", 0.05), "calibrated desk-scale KS tolerance"),
        Check.within("qq_slope", slope, config.threshold("qq_slope_lo", 0.95),
                     config.threshold("qq_slope_hi", 1.05), "QQ linearity band"),
        Check.at_most("standardization", max(abs(zs.mean), abs(zs.variance - 1)), 1e-9,
                      "mean 0 and variance 1 by construction"),
    ]
    return ExperimentReport("E6", config.echo(), ["replicate", "seed", "L", "L_standardized"],
                            records, summary, checks, z)


def run_E7_local_vs_global(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Typical local optimum against the global one; LAS rounds to convergence."""
    n, k = config.n, config.k
    census_budget = _budget(config, CENSUS_BUDGET)
    global_budget = _budget(config, GLOBAL_BUDGET)
    restarts = int(config.options.get("restarts", 10))
    sc = asy.scaling_constants(n)
    c_n = math.log(math.log(n)) / sc.a
    cut = sc.b / math.sqrt(k) - c_n

    def task(item):
        r, seed = item
        W = sample_gaussian_matrix(n, seed)
        _, _, avgs = local_optima_arrays(W, k, census_budget)
        _, best = global_optimum_exhaustive(W, k, global_budget)
        rng = philox_generator(derive_seed(seed, 7))
        runs = [las_search(W, k, rng.choice(n, size=k, replace=False) + 1) for _ in range(restarts)]
        rounds = [res.iterations for res in runs]
        L = len(avgs)
        above = int(np.count_nonzero(avgs >= cut))
        return {"replicate": r, "seed": seed, "L": L, "L_above": above, "frac_above": above / L,
                "global_max": best, "mean_local_average": float(avgs.mean()),
                "ratio": float(avgs.mean()) / best,
                "las_best": max(res.final_average for res in runs),
                "las_rounds_mean": float(np.mean(rounds)), "las_rounds_max": int(max(rounds)),
                "las_truncated": sum(res.truncated for res in runs)}

    records = run_ordered(task, _seeds(config), threads)
    ratio = np.array([rec["ratio"] for rec in records])
    frac = np.array([rec["frac_above"] for rec in records])
    rounds_max = np.array([rec["las_rounds_max"] for rec in records])
    summary = {"a_n": sc.a, "b_n": sc.b, "c_n": c_n, "average_cut": cut,
               "ratio": _mean_se(ratio), "ratio_limit": 1 / math.sqrt(2),
               "frac_above": _mean_se(frac),
               "las_rounds_mean": float(np.mean([rec["las_rounds_mean"] for rec in records])),
               "las_rounds_max": int(rounds_max.max()),
               "las_rounds_quantiles": {str(q): float(np.quantile(rounds_max, q))
                                        for q in (0.5, 0.9, 0.99)}}
    checks = [
        Check.within("ratio_band", float(ratio.mean()), config.threshold("ratio_lo", 0.60),
                     config.threshold("ratio_hi", 0.80), "band around the 1/sqrt(2) limit"),
        Check.at_least("frac_above", float(frac.mean()), config.threshold("frac_above", 0.9),
                       "c_n = log log n / a_n"),
        Check.at_most("las_truncated", sum(rec["las_truncated"] for rec in records), 0,
                      "every LAS restart reaches a fixed point"),
    ]
    return ExperimentReport("E7", config.echo(), list(records[0]), records, summary, checks, ratio)


RUNNERS = {
    "E1": run_E1_global_max_limit,
    "E2": run_E2_global_structure,
    "E3": run_E3_two_point_localization,
    "E4": run_E4_local_optimum_structure,
    "E5": run_E5_mean_variance_scaling,
    "E6": run_E6_clt,
    "E7": run_E7_local_vs_global,
}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    return RUNNERS[config.experiment_id](config, threads=threads)
