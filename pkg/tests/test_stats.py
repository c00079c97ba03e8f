import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from submx.matrix import philox_generator
from submx.stats import (
    EmpiricalDistribution,
    EmptySampleError,
    histogram,
    ks_statistic,
    ks_two_sample,
    plotting_positions,
    qq_points,
    qq_slope,
    standardize,
    summarize,
    wasserstein_to_standard_normal,
)

Phi = special.ndtr
ED = EmpiricalDistribution.from_sample


class TestKS:
    def test_exact_quantiles(self):
        q = special.ndtri(plotting_positions(100))
        assert ks_statistic(ED(q), Phi) == pytest.approx(0.005, abs=1e-12)

    def test_single_point_at_median(self):
        assert ks_statistic(ED([0.0]), Phi) == 0.5

    def test_normal_draws(self):
        x = philox_generator(1).standard_normal(10**5)
        assert ks_statistic(ED(x), Phi) <= 0.006

    def test_matches_scipy(self):
        x = philox_generator(2).standard_normal(500)
        assert ks_statistic(ED(x), Phi) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-14)

    def test_ties_use_atoms(self):
        # Three copies of 0: the ECDF jumps from 0 to 1 at the median.
        assert ks_statistic(ED([0.0, 0.0, 0.0]), Phi) == 0.5

    def test_monotone_transform_invariance(self):
        x = philox_generator(3).standard_normal(300)
        a = ks_statistic(ED(x), Phi)
        b = ks_statistic(ED(np.exp(x)), lambda t: Phi(np.log(t)))
        assert a == pytest.approx(b, abs=1e-12)

    def test_weighted_equals_duplicated(self):
        x = np.array([-1.0, 0.2, 1.5])
        a = ks_statistic(ED(x, weights=[1, 2, 1]), Phi)
        b = ks_statistic(ED([-1.0, 0.2, 0.2, 1.5]), Phi)
        assert a == pytest.approx(b, abs=1e-15)

    def test_two_sample_matches_scipy(self):
        rng = philox_generator(4)
        x, y = rng.standard_normal(400), rng.standard_normal(300) + 0.2
        assert ks_two_sample(ED(x), ED(y)) == pytest.approx(stats.ks_2samp(x, y).statistic, abs=1e-14)

    def test_empty(self):
        with pytest.raises(EmptySampleError):
            ks_statistic(ED([]), Phi)
        with pytest.raises(EmptySampleError):
            ks_two_sample(ED([]), ED([1.0]))

    def test_validation(self):
        with pytest.raises(ValueError):
            EmpiricalDistribution(np.array([2.0, 1.0]))
        with pytest.raises(ValueError):
            ED([1.0, 2.0], weights=[0.0, 0.0])
        with pytest.raises(ValueError):
            ED([1.0, 2.0], weights=[1.0])


class TestWasserstein:
    def test_exact_quantiles(self):
        q = special.ndtri(plotting_positions(200))
        assert wasserstein_to_standard_normal(ED(q)) == pytest.approx(0.0, abs=1e-15)

    def test_translation(self):
        q = special.ndtri(plotting_positions(200))
        assert wasserstein_to_standard_normal(ED(q + 0.3)) == pytest.approx(0.3, abs=1e-12)

    def test_normal_draws(self):
        x = philox_generator(5).standard_normal(10**4)
        assert wasserstein_to_standard_normal(ED(x)) <= 0.03

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=50), st.floats(-2, 2))
    def test_translation_covariance(self, xs, c):
        x = np.array(xs)
        d0 = wasserstein_to_standard_normal(ED(x))
        d1 = wasserstein_to_standard_normal(ED(x + c))
        assert abs(d1 - d0) <= abs(c) + 1e-9

    def test_rejects(self):
        with pytest.raises(ValueError):
            wasserstein_to_standard_normal(ED([1.0, 2.0], weights=[1, 1]))
        with pytest.raises(ValueError):
            wasserstein_to_standard_normal(ED([1.0]))


class TestSummary:
    def test_examples(self):
        s = summarize(ED([1.0, 2.0, 3.0]))
        assert (s.mean, s.variance, s.count) == (2.0, 1.0, 3)
        assert s.stderr_of_mean == pytest.approx(math.sqrt(1 / 3))
        assert summarize(ED([4.0] * 5)).variance == 0.0
        assert summarize(ED([0.0, 0.0, 3.0], weights=[1, 1, 2])).mean == 1.5

    def test_needs_two(self):
        with pytest.raises(ValueError):
            summarize(ED([1.0]))

    def test_duplication_keeps_mean(self):
        x = philox_generator(6).standard_normal(50)
        assert summarize(ED(np.r_[x, x])).mean == pytest.approx(summarize(ED(x)).mean, rel=1e-14)

    def test_weighted_unit_weights_match_unweighted(self):
        x = philox_generator(7).standard_normal(40)
        a, b = summarize(ED(x)), summarize(ED(x, weights=np.ones(40)))
        assert a.mean == pytest.approx(b.mean) and a.variance == pytest.approx(b.variance)
        assert a.stderr_of_mean == pytest.approx(b.stderr_of_mean)


class TestQQ:
    def test_diagonal(self):
        q = special.ndtri(plotting_positions(50))
        pairs = qq_points(ED(q))
        assert np.allclose(pairs[:, 0], pairs[:, 1])
        assert qq_slope(pairs) == pytest.approx(1.0)

    def test_single(self):
        assert np.array_equal(qq_points(ED([3.0])), [[0.0, 3.0]])

    def test_standardized_gaussian_slope(self):
        z = standardize(philox_generator(8).standard_normal(1000))
        assert abs(qq_slope(qq_points(ED(z))) - 1) <= 0.05

    def test_weighted_rejected(self):
        with pytest.raises(ValueError):
            qq_points(ED([1.0, 2.0], weights=[1, 1]))


def test_standardize():
    z = standardize([1.0, 2.0, 3.0, 10.0])
    assert abs(z.mean()) < 1e-15 and z.std(ddof=1) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        standardize([2.0, 2.0])


def test_histogram_counts():
    x = philox_generator(9).standard_normal(1000)
    edges, counts = histogram(x)
    assert counts.sum() == 1000 and edges.size == counts.size + 1
    assert np.all(np.diff(edges) > 0)
