import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import trapezoid

from purisk.alpha import (DCurve, _second_derivative, build_d_curve, calibrate, density_ratio,
                          estimate_kde, find_alpha_star, rolling_median, silverman_bandwidth,
                          threshold_from_alpha)
from purisk.errors import FlatCurve, NonPositiveBandwidth, TooFewScores, ValidationError

POS, NEG = stats.beta(5, 2), stats.beta(2, 5)


def mixture_sample(rng, alpha, n):
    is_pos = rng.random(n) < alpha
    return np.where(is_pos, POS.rvs(n, random_state=rng), NEG.rvs(n, random_state=rng))


def true_ratio(y, alpha):
    fp = POS.pdf(y)
    return fp / (alpha * fp + (1 - alpha) * NEG.pdf(y))


class _Fixed:
    """Stand-in density returning preset values at the query points."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def __call__(self, y):
        return self.values


class TestKDE:
    def test_uniform_density(self):
        x = np.random.default_rng(0).random(1000)
        f = estimate_kde(x)
        grid = np.linspace(0.1, 0.9, 81)
        assert np.all(np.abs(f(grid) - 1.0) <= 0.15)

    @pytest.mark.parametrize("seed", range(5))
    def test_integrates_to_one(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.beta(rng.uniform(0.3, 5), rng.uniform(0.3, 5), size=rng.integers(5, 500))
        f = estimate_kde(x)
        grid = np.linspace(0, 1, 1024)
        assert abs(trapezoid(f(grid), grid) - 1.0) <= 1e-3

    def test_identical_scores_fall_back(self):
        f = estimate_kde([0.4] * 30)
        assert f.bandwidth > 0
        assert np.all(np.isfinite(f(np.linspace(0, 1, 11))))

    def test_fixed_bandwidth(self):
        assert estimate_kde(np.linspace(0, 1, 10), 0.05).bandwidth == 0.05
        with pytest.raises(NonPositiveBandwidth):
            estimate_kde(np.linspace(0, 1, 10), 0.0)

    def test_too_few(self):
        with pytest.raises(TooFewScores):
            estimate_kde([0.1, 0.2])

    def test_silverman_formula(self):
        x = np.random.default_rng(3).normal(0.5, 0.1, 400)
        sd, iqr = x.std(ddof=1), np.subtract(*np.percentile(x, [75, 25]))
        assert silverman_bandwidth(x) == pytest.approx(0.9 * min(sd, iqr / 1.34) * 400 ** -0.2)

    def test_grid_path_matches_direct(self):
        rng = np.random.default_rng(1)
        f = estimate_kde(rng.random(20000))
        y = np.sort(rng.random(3000))
        np.testing.assert_allclose(f(y), f._direct(y), atol=1e-4)


class TestDensityRatio:
    def test_identical_samples(self):
        y = np.sort(np.random.default_rng(2).random(1000))
        f = estimate_kde(y)
        r = density_ratio(f, f, y)
        np.testing.assert_allclose(r.smoothed, 1.0, atol=0.2)

    def test_running_maximum(self):
        r = density_ratio(_Fixed([1, 3, 2, 5]), _Fixed([1, 1, 1, 1]), [0.1, 0.2, 0.3, 0.4], 1)
        np.testing.assert_array_equal(r.monotone, [1, 3, 3, 5])

    def test_window_one_is_identity(self):
        rng = np.random.default_rng(5)
        y = np.sort(rng.random(200))
        r = density_ratio(estimate_kde(rng.random(100) ** 0.5), estimate_kde(y), y, 1)
        np.testing.assert_array_equal(r.smoothed, r.monotone)

    def test_epsilon_guard_reuses_last_ratio(self):
        r = density_ratio(_Fixed([1.0, 2.0, 4.0]), _Fixed([1.0, 1.0, 0.0]), [0.1, 0.2, 0.3], 1)
        np.testing.assert_array_equal(r.raw, [1.0, 2.0, 2.0])

    def test_unsorted_rejected(self):
        with pytest.raises(ValidationError):
            density_ratio(_Fixed([1, 1]), _Fixed([1, 1]), [0.5, 0.1])

    def test_rolling_median_edges(self):
        a = np.array([5.0, 1.0, 3.0, 2.0, 4.0])
        np.testing.assert_array_equal(rolling_median(a, 3), [3.0, 3.0, 2.0, 3.0, 3.0])


class TestDCurve:
    def test_ratio_zero(self):
        c = build_d_curve(np.zeros(500))
        assert np.max(np.abs(c.d - c.alpha)) <= 1e-9

    def test_ratio_one(self):
        c = build_d_curve(np.ones(500))
        assert np.max(np.abs(c.d)) <= 1e-9

    def test_monte_carlo_oracle(self):
        alpha = 0.3
        rng = np.random.default_rng(0)
        y = mixture_sample(rng, alpha, 20000)
        curve = build_d_curve(true_ratio(y, alpha), 0.01)
        draws = true_ratio(mixture_sample(np.random.default_rng(1), alpha, 100_000), alpha)
        mc = np.array([a - np.mean(np.minimum(a * draws, 1.0)) for a in curve.alpha])
        np.testing.assert_allclose(curve.d_raw, mc, atol=0.01)
        below = curve.alpha <= alpha
        assert np.all(curve.d[below] <= 0.01)
        assert curve.d[np.isclose(curve.alpha, 0.6)][0] > 0.1

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=300))
    def test_bounded_and_non_decreasing(self, r):
        c = build_d_curve(np.array(r), 0.01)
        assert np.all(c.d >= 0) and np.all(c.d <= c.alpha + 1e-15)
        assert np.all(np.diff(c.d) >= 0)


def _curve(d, step=0.001):
    alpha = step * np.arange(1, len(d) + 1)
    return DCurve(alpha, d, d, _second_derivative(d, step, 5, 5), 5, 5)


class TestAlphaStar:
    def test_piecewise_linear_bend(self):
        alpha = 0.001 * np.arange(1, 1001)
        a = find_alpha_star(_curve(np.maximum(0.0, alpha - 0.3)))
        assert abs(a - 0.3) <= 0.001

    def test_flat_curve(self):
        with pytest.raises(FlatCurve):
            find_alpha_star(_curve(np.zeros(1000)))

    def test_straight_line_is_flat(self):
        with pytest.raises(FlatCurve):
            find_alpha_star(_curve(0.5 * 0.001 * np.arange(1, 1001)))

    def test_calibrate_on_beta_mixture(self):
        rng = np.random.default_rng(4)
        yp = POS.rvs(1500, random_state=rng)
        yu = mixture_sample(rng, 0.3, 3000)
        cal = calibrate(yp, yu, np.concatenate([yp, yu]))
        assert 0.25 <= cal.alpha_star <= 0.45
        js = cal.to_json()
        assert js["bandwidths"]["positive"] == js["bandwidths"]["unlabeled"]
        assert len(js["d_curve"]) == 1000

    def test_calibrate_flat_allowed(self):
        # identical samples: the ratio is exactly 1, so D is identically 0
        y = np.random.default_rng(0).random(400)
        cal = calibrate(y, y, y, allow_flat=True)
        assert cal.alpha_star is None and cal.threshold is None
        assert cal.diagnostics and cal.to_json()["d_curve"]
        with pytest.raises(FlatCurve):
            calibrate(y, y, y)


class TestThreshold:
    def test_zero_alpha(self):
        s = np.random.default_rng(0).random(100)
        t = threshold_from_alpha(0.0, s)
        assert t >= s.max() and np.sum(s > t) == 0

    def test_uniform_quarter(self):
        s = np.random.default_rng(1).permutation(np.arange(1, 1001) / 1001)
        assert np.sum(s > threshold_from_alpha(0.25, s)) == 250

    def test_reference_count(self):
        n, k = 107381, 29734
        s = np.random.default_rng(2).random(n)
        t = threshold_from_alpha(k / n, s)
        assert np.sum(s > t) == k
        # the rounded 0.28 would give 30067 instead
        assert np.sum(s > threshold_from_alpha(0.28, s)) == round(0.28 * n)

    def test_count_within_one(self):
        s = np.random.default_rng(3).random(777)
        for a in np.linspace(0, 1, 41):
            assert abs(np.sum(s > threshold_from_alpha(a, s)) / 777 - a) <= 1 / 777

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=200),
           st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, s, a1, a2):
        lo, hi = sorted((a1, a2))
        assert threshold_from_alpha(hi, s) <= threshold_from_alpha(lo, s)
