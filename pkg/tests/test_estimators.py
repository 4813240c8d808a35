import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from covroc.errors import EvaluationError, InvalidInputError
from covroc.estimators import (
    Curve,
    KernelSpec,
    MarkerSample,
    PairedSample,
    aroc_estimate,
    auc,
    conditional_roc,
    default_grid,
    default_variance_floor,
    ecdf_eval,
    empirical_quantile,
    nw_fit,
    pooled_roc,
    standardized_residuals,
)
from covroc.simulation import generate_scenario, scenario_c_analytic_roc

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestTypes:
    def test_marker_sample_rejects_empty_and_nonfinite(self):
        with pytest.raises(InvalidInputError):
            MarkerSample([])
        with pytest.raises(InvalidInputError, match="non-finite"):
            MarkerSample([1.0, np.nan])

    def test_paired_sample_length_mismatch(self):
        with pytest.raises(InvalidInputError, match="lengths differ"):
            PairedSample([1.0, 2.0], [1.0])

    def test_curve_invariants(self):
        with pytest.raises(InvalidInputError):
            Curve([0.0, 0.5], [0.1, 0.2])
        with pytest.raises(InvalidInputError):
            Curve([0.5, 0.4], [0.1, 0.2])
        with pytest.raises(InvalidInputError):
            Curve([0.2, 0.4], [0.1, 1.2])

    def test_default_grid(self):
        g = default_grid(500)
        assert g.size == 500
        assert g[0] == pytest.approx(1 / 501) and g[-1] == pytest.approx(500 / 501)
        np.testing.assert_allclose(g + g[::-1], 1.0, atol=1e-15)

    def test_samples_are_read_only(self):
        s = MarkerSample([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    @pytest.mark.parametrize("family", ["gaussian", "epanechnikov"])
    def test_kernels_are_densities(self, family):
        from scipy.integrate import quad

        k = KernelSpec(family)
        area, _ = quad(lambda u: float(k(np.array(u))), -40, 40, points=[-1, 0, 1])
        assert area == pytest.approx(1.0, abs=1e-8)
        u = np.linspace(-3, 3, 61)
        np.testing.assert_array_equal(k(u), k(-u))
        assert np.all(k(u) >= 0)

    def test_unknown_kernel(self):
        with pytest.raises(InvalidInputError):
            KernelSpec("triweight")


class TestEcdfQuantile:
    def test_ecdf_direct_count(self):
        s = MarkerSample([1, 2, 3])
        assert ecdf_eval(s, 2) == pytest.approx(2 / 3)
        assert ecdf_eval(s, 0) == 0.0
        assert ecdf_eval(s, 5) == 1.0

    def test_ecdf_normal_draws(self, rng):
        draws = rng.standard_normal(100)
        value = ecdf_eval(MarkerSample(draws), 0.0)
        assert value == oracles.ecdf_count(draws, 0.0)
        assert abs(value - 0.5) <= 0.15

    def test_ecdf_with_ties(self):
        s = MarkerSample([1, 1, 2, 2, 2])
        assert ecdf_eval(s, 1) == pytest.approx(0.4)
        assert ecdf_eval(s, 1.999) == pytest.approx(0.4)

    def test_quantile_order_statistics(self):
        s = MarkerSample([30, 10, 20])
        assert empirical_quantile(s, 0.5) == 20
        assert empirical_quantile(s, 1.0) == 30
        assert empirical_quantile(s, 1 / 3) == 10
        assert empirical_quantile(s, 0.34) == 20

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5, np.nan])
    def test_quantile_rejects_levels(self, p):
        with pytest.raises(InvalidInputError):
            empirical_quantile(MarkerSample([1.0, 2.0]), p)

    @settings(max_examples=300, deadline=None)
    @given(arrays(np.float64, st.integers(1, 25), elements=finite),
           st.floats(1e-6, 1.0))
    def test_quantile_matches_bruteforce(self, values, p):
        assert empirical_quantile(MarkerSample(values), p) == oracles.quantile_bruteforce(values, p)

    @settings(max_examples=300, deadline=None)
    @given(arrays(np.float64, st.integers(1, 25), elements=st.integers(-5, 5).map(float)),
           st.integers(1, 50))
    def test_galois_connection(self, values, k):
        # quantile(p) <= t  <=>  ecdf(t) >= p, for every t in the sample
        s = MarkerSample(values)
        p = k / 50
        q = empirical_quantile(s, p)
        assert ecdf_eval(s, q) >= p
        for t in values:
            assert (q <= t) == (ecdf_eval(s, t) >= p)


class TestPooledRoc:
    def test_identical_samples(self):
        c = pooled_roc(MarkerSample([1, 2, 3]), MarkerSample([1, 2, 3]), [0.25, 0.5, 0.75])
        assert c.values[1] == pytest.approx(1 / 3)

    def test_perfect_separation(self):
        c = pooled_roc(MarkerSample([10, 11, 12]), MarkerSample([1, 2, 3]), [0.1, 0.5, 0.9])
        np.testing.assert_array_equal(c.values, 1.0)

    def test_empty_sample(self):
        with pytest.raises(InvalidInputError):
            pooled_roc(MarkerSample([1.0]), [], default_grid(10))

    def test_binormal_large_sample(self, rng):
        y_f = rng.normal(2.5, 1.3, 5000)
        y_g = rng.normal(1.0, 1.0, 5000)
        c = pooled_roc(MarkerSample(y_f), MarkerSample(y_g))
        truth = oracles.binormal_roc(c.grid, 2.5, 1.3, 1.0, 1.0)
        assert np.max(np.abs(c.values - truth)) <= 0.05

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(1, 30), elements=st.integers(-20, 20).map(float)),
           arrays(np.float64, st.integers(1, 30), elements=st.integers(-20, 20).map(float)))
    def test_invariant_under_increasing_transform(self, y_f, y_g):
        # integer-valued markers keep the transform strictly increasing in floats
        def h(y):
            return np.exp(y / 3) + y ** 3

        grid = default_grid(50)
        base = pooled_roc(MarkerSample(y_f), MarkerSample(y_g), grid)
        moved = pooled_roc(MarkerSample(h(y_f)), MarkerSample(h(y_g)), grid)
        np.testing.assert_array_equal(base.values, moved.values)
        assert np.all(np.diff(base.values) >= 0)


class TestNadarayaWatson:
    def test_constant_marker(self, rng):
        x = rng.uniform(0, 1, 30)
        fit = nw_fit(PairedSample(x, np.full(30, 4.2)), 0.2)
        xs = np.linspace(-1, 2, 7)
        np.testing.assert_allclose(fit.mean(xs), 4.2, rtol=1e-14)
        np.testing.assert_array_equal(fit.sd(xs), fit.variance_floor)
        assert fit.variance_floor == default_variance_floor(np.full(30, 4.2)) == 1e-8

    def test_huge_bandwidth_gives_global_moments(self, rng):
        x = rng.uniform(0, 3, 60)
        y = rng.normal(size=60)
        fit = nw_fit(PairedSample(x, y), 1e6 * np.ptp(x))
        xs = np.linspace(0, 3, 11)
        np.testing.assert_allclose(fit.mean(xs), y.mean(), atol=1e-6)
        np.testing.assert_allclose(fit.sd(xs), y.std(), atol=1e-6)

    def test_two_point_symmetry(self):
        fit = nw_fit(PairedSample([0.0, 1.0], [0.0, 1.0]), 0.5)
        assert fit.mean(0.5) == pytest.approx(0.5, abs=1e-15)

    def test_matches_explicit_summation(self, rng):
        x = rng.uniform(0, 1, 25)
        y = np.sin(3 * x) + rng.normal(scale=0.2, size=25)
        fit = nw_fit(PairedSample(x, y), 0.15)
        for x0 in (-0.2, 0.0, 0.37, 1.0, 1.4):
            assert fit.mean(x0) == pytest.approx(oracles.nw_loop(x0, x, y, 0.15), rel=1e-12)
        # variance uses the fitted mean at the training points, not at x
        dev = (y - np.array([oracles.nw_loop(xi, x, y, 0.15) for xi in x])) ** 2
        assert fit.sd(0.5) == pytest.approx(np.sqrt(oracles.nw_loop(0.5, x, dev, 0.15)), rel=1e-10)

    def test_gaussian_far_outside_data(self):
        fit = nw_fit(PairedSample([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]), 0.01)
        assert fit.mean(100.0) == pytest.approx(3.0)

    def test_compact_kernel_reports_x(self):
        fit = nw_fit(PairedSample([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]), 0.5, KernelSpec("epanechnikov"))
        with pytest.raises(EvaluationError) as info:
            fit.mean(10.0)
        assert info.value.x == 10.0

    @pytest.mark.parametrize("g", [0.0, -1.0, np.inf])
    def test_bad_bandwidth(self, g):
        with pytest.raises(InvalidInputError):
            nw_fit(PairedSample([0.0, 1.0], [0.0, 1.0]), g)

    def test_needs_two_points(self):
        with pytest.raises(InvalidInputError):
            nw_fit(PairedSample([0.0], [1.0]), 1.0)

    def test_refit_reuses_design(self, rng):
        x = rng.uniform(0, 1, 20)
        fit = nw_fit(PairedSample(x, rng.normal(size=20)), 0.3)
        y2 = rng.normal(size=20)
        fresh = nw_fit(PairedSample(x, y2), 0.3, variance_floor=fit.variance_floor)
        again = fit.refit(y2)
        np.testing.assert_array_equal(again.fitted_mean, fresh.fitted_mean)
        np.testing.assert_array_equal(again.fitted_sd, fresh.fitted_sd)


class TestResiduals:
    def test_constant_marker(self, rng):
        fit = nw_fit(PairedSample(rng.uniform(size=15), np.full(15, -2.0)), 0.3)
        np.testing.assert_array_equal(standardized_residuals(fit).residuals, 0.0)

    def test_moments_under_location_scale_model(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 1, 2000)
        y = np.sin(2 * np.pi * x) + (0.5 + x) * rng.standard_normal(2000)
        res = standardized_residuals(nw_fit(PairedSample(x, y), 0.05)).residuals
        assert abs(res.mean()) <= 0.1
        assert abs(res.std() - 1.0) <= 0.15

    def test_reconstruction(self, rng):
        x = rng.uniform(0, 1, 50)
        y = x ** 2 + rng.normal(scale=0.3, size=50)
        fit = nw_fit(PairedSample(x, y), 0.1)
        eps = standardized_residuals(fit).residuals
        np.testing.assert_allclose(fit.fitted_mean + fit.fitted_sd * eps, y, rtol=1e-13, atol=1e-13)


class TestAroc:
    def test_perfect_separation(self, rng):
        x = rng.uniform(0, 1, 20)
        healthy = PairedSample(x, rng.normal(scale=0.01, size=20))
        diseased = PairedSample(x, np.full(20, 100.0))
        c = aroc_estimate(diseased, healthy, 0.2, grid=default_grid(50))
        np.testing.assert_array_equal(c.values, 1.0)

    def test_matches_double_loop(self, rng):
        x_f, x_g = rng.uniform(0, 1, 17), rng.uniform(0, 1, 23)
        diseased = PairedSample(x_f, x_f + rng.normal(size=17))
        healthy = PairedSample(x_g, rng.normal(size=23))
        grid = default_grid(97)
        fit = nw_fit(healthy, 0.25)
        c = aroc_estimate(diseased, healthy, 0.25, grid=grid)
        z = (diseased.marker - fit.mean(x_f)) / fit.sd(x_f)
        expected = oracles.aroc_double_loop(z, standardized_residuals(fit).residuals, grid)
        np.testing.assert_array_equal(c.values, expected)

    def test_scenario_c_close_to_analytic(self):
        from covroc.bandwidth import select_bandwidth

        # single draws exceed 0.08 at the smallest p about 40% of the time;
        # the typical draw and the Monte Carlo mean are what stay close
        sups, errs = [], []
        for seed in range(20):
            data = generate_scenario("C", 500, 500, seed)
            g = select_bandwidth(data.healthy)
            c = aroc_estimate(data.diseased, data.healthy, g)
            err = c.values - scenario_c_analytic_roc(c.grid)
            sups.append(np.max(np.abs(err)))
            errs.append(err)
        assert np.median(sups) <= 0.08
        assert np.max(np.abs(np.mean(errs, axis=0))) <= 0.02


@pytest.fixture(scope="module")
def scenario_c_fits():
    from covroc.bandwidth import select_bandwidth

    out = []
    for seed in range(10):
        data = generate_scenario("C", 2000, 2000, seed)
        out.append(TestConditionalRoc._fits(data, select_bandwidth(data.diseased),
                                            select_bandwidth(data.healthy)))
    return out


class TestConditionalRoc:
    @staticmethod
    def _fits(data, g_f, g_g):
        fit_f, fit_g = nw_fit(data.diseased, g_f), nw_fit(data.healthy, g_g)
        return fit_f, fit_g, standardized_residuals(fit_f), standardized_residuals(fit_g)

    def test_same_population_is_near_diagonal(self, rng):
        x = rng.uniform(0, 1, 40)
        s = PairedSample(x, x + rng.normal(size=40))
        fit = nw_fit(s, 0.2)
        res = standardized_residuals(fit)
        c = conditional_roc(0.5, fit, fit, res, res, default_grid(99))
        assert np.all(np.abs(c.values - c.grid) <= 1 / 40 + 1e-12)

    @pytest.mark.slow
    @pytest.mark.parametrize("x", [2.0, 5.0, 8.0, 11.0, 14.0])
    def test_scenario_c_any_x(self, x, scenario_c_fits):
        # pointwise SD near p = 0.01 is about 0.05, so the sup bound is a
        # statement about the typical draw, and the curve must be unbiased
        errs = []
        for fits in scenario_c_fits:
            c = conditional_roc(x, *fits)
            errs.append(c.values - scenario_c_analytic_roc(c.grid))
        errs = np.array(errs)
        assert np.median(np.max(np.abs(errs), axis=1)) <= 0.08
        assert np.max(np.abs(errs.mean(axis=0))) <= 0.04

    def test_perfect_separation(self, rng):
        x = rng.uniform(0, 1, 30)
        data_f = PairedSample(x, 50 + rng.normal(size=30))
        data_g = PairedSample(x, rng.normal(size=30))
        fit_f, fit_g = nw_fit(data_f, 0.2), nw_fit(data_g, 0.2)
        c = conditional_roc(0.5, fit_f, fit_g, standardized_residuals(fit_f),
                            standardized_residuals(fit_g), default_grid(20))
        np.testing.assert_array_equal(c.values, 1.0)


class TestAuc:
    def test_diagonal(self):
        g = default_grid(500)
        assert auc(Curve(g, g)) == pytest.approx(0.5, abs=1e-12)

    def test_perfect_curve(self):
        g = default_grid(500)
        value = auc(Curve(g, np.ones_like(g)))
        # the endpoint at (0, 0) costs half the first grid cell
        assert value == pytest.approx(1.0 - g[0] / 2, abs=1e-12)
        assert value == pytest.approx(1.0, abs=1 / 500)

    def test_matches_mann_whitney(self, rng):
        y_f, y_g = rng.normal(1, 1, 60), rng.normal(0, 1, 80)
        c = pooled_roc(MarkerSample(y_f), MarkerSample(y_g), default_grid(4000))
        assert auc(c) == pytest.approx(oracles.mann_whitney(y_f, y_g), abs=0.01)
