"""Adjustment factors and the sw-TLE variants built on them."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swtle.adjust import (
    BandwidthPair,
    BasisSpec,
    GuardPolicy,
    SourceSpec,
    alpha_hat_semiparam,
    basis_adjust_fixed,
    basis_adjust_random,
    basis_coefficients_fixed,
    basis_coefficients_random,
    eta_hat_random,
    select_simplex_weights,
    simplex_grid,
    sw_tle_fixed,
    sw_tle_multi,
    sw_tle_random,
    sw_tle_semiparam,
    xi_hat_fixed,
)
from swtle.errors import DegenerateBasisError, OrthogonalAtXError, ParameterError
from swtle.kernel_core import (
    GAUSSIAN,
    FixedDesignSample,
    RandomDesignSample,
    function_curve,
    gm_estimate,
    nw_estimate,
)
from swtle.nls import ParametricModel


def _piecewise(u):
    return np.where(u < 0.4, 1 + u, 1.4 + 2 * (u - 0.4))


PIECEWISE = function_curve(_piecewise, (0.0, 1.0), "piecewise")
# midpoints 0.3125 and 0.6875 fall on cell edges of both quadrature grids
THREE_SEGMENTS = FixedDesignSample([0.125, 0.5, 0.875], [1.0, 3.0, 2.0])


def exponential_model():
    return ParametricModel(
        lambda x, th: th[0] * np.exp(th[1] * x),
        2,
        lambda x, th: np.column_stack([np.exp(th[1] * x), th[0] * x * np.exp(th[1] * x)]),
        "exponential",
    )


def _random_pair(seed=0, n_p=120, n_q=40, noise=0.1):
    rng = np.random.default_rng(seed)
    xp, xq = rng.uniform(-2, 2, n_p), rng.uniform(-2, 2, n_q)
    source = RandomDesignSample(xp, 1 + xp**2 + noise * rng.standard_normal(n_p))
    target = RandomDesignSample(xq, np.cosh(xq) + noise * rng.standard_normal(n_q))
    return source, target


class TestFixedFactor:
    def test_fine_grid_oracle(self):
        # independent 1e5-cell midpoint sum of the two weighted integrals
        got = xi_hat_fixed(PIECEWISE, THREE_SEGMENTS, GAUSSIAN, 0.25, 0.5)
        assert got == pytest.approx(1.3868004003040468, abs=1e-6)

    def test_constant_ratio_is_one(self):
        c = 3.0
        target = FixedDesignSample(np.linspace(0.05, 0.95, 10), np.full(10, c))
        curve = function_curve(lambda u: np.full_like(u, c), (0.0, 1.0))
        np.testing.assert_allclose(
            xi_hat_fixed(curve, target, GAUSSIAN, 0.2, np.linspace(0, 1, 11)), 1.0, rtol=1e-12)

    def test_zero_source_is_orthogonal(self):
        zero = function_curve(np.zeros_like, (0.0, 1.0))
        with pytest.raises(OrthogonalAtXError, match="shift_a"):
            xi_hat_fixed(zero, THREE_SEGMENTS, GAUSSIAN, 0.25, 0.5)

    def test_scale_equivariance(self):
        scaled = function_curve(lambda u: -2.5 * _piecewise(u), (0.0, 1.0))
        x = np.linspace(0, 1, 9)
        base = xi_hat_fixed(PIECEWISE, THREE_SEGMENTS, GAUSSIAN, 0.2, x)
        np.testing.assert_allclose(
            xi_hat_fixed(scaled, THREE_SEGMENTS, GAUSSIAN, 0.2, x), base / -2.5, rtol=1e-12)


class TestFixedEstimator:
    def test_constants(self):
        # the G-M source loses mass near 0 and 1, so only the interior is exact
        x = np.linspace(0.02, 0.98, 25)
        src = FixedDesignSample(x, np.full(25, 5.0))
        est = sw_tle_fixed(src, src, GAUSSIAN, BandwidthPair(0.03, 0.05))
        np.testing.assert_allclose(est(np.linspace(0.25, 0.75, 11)), 5.0, rtol=1e-4)

    def test_noiseless_linear_not_worse_than_gm(self):
        x = (np.arange(50) + 0.5) / 50
        y = 2 * x + 1
        sample = FixedDesignSample(x, y)
        h = 0.08
        est = sw_tle_fixed(sample, sample, GAUSSIAN, BandwidthPair(h, h))
        grid = np.linspace(0.1, 0.9, 81)
        err_tle = np.max(np.abs(est(grid) - (2 * grid + 1)))
        err_gm = np.max(np.abs(gm_estimate(sample, GAUSSIAN, h)(grid) - (2 * grid + 1)))
        assert err_tle <= err_gm

    def test_scale_of_source_cancels(self):
        rng = np.random.default_rng(3)
        x = np.sort(rng.uniform(0.01, 0.99, 40))
        src = FixedDesignSample(x, 1 + x + 0.05 * rng.standard_normal(40))
        tgt = FixedDesignSample(np.sort(rng.uniform(0.01, 0.99, 15)), rng.uniform(1, 3, 15))
        bw = BandwidthPair(0.1, 0.2)
        grid = np.linspace(0, 1, 21)
        a = sw_tle_fixed(src, tgt, GAUSSIAN, bw)(grid)
        b = sw_tle_fixed(src.with_responses(4 * src.y), tgt, GAUSSIAN, bw)(grid)
        np.testing.assert_allclose(a, b, rtol=1e-10)

    def test_needs_source_bandwidth(self):
        with pytest.raises(ParameterError):
            sw_tle_fixed(THREE_SEGMENTS, THREE_SEGMENTS, GAUSSIAN, BandwidthPair(None, 0.2))


class TestFixedBasis:
    def test_fine_grid_normal_equations_oracle(self):
        coefs = basis_coefficients_fixed(PIECEWISE, THREE_SEGMENTS, GAUSSIAN, 0.25,
                                         BasisSpec(2), 0.5)
        np.testing.assert_allclose(coefs[0], [2.652847751023218, -0.6962651601756972],
                                   atol=1e-5)

    def test_k1_reduces_to_linear(self):
        rng = np.random.default_rng(5)
        x = np.sort(rng.uniform(0.01, 0.99, 30))
        src = FixedDesignSample(x, 1 + x**2 + 0.05 * rng.standard_normal(30))
        tgt = FixedDesignSample(np.sort(rng.uniform(0.01, 0.99, 12)), rng.uniform(1, 2, 12))
        bw = BandwidthPair(0.1, 0.15)
        grid = np.linspace(0, 1, 31)
        lin = sw_tle_fixed(src, tgt, GAUSSIAN, bw)(grid)
        k1 = basis_adjust_fixed(src, tgt, GAUSSIAN, bw, BasisSpec(1))(grid)
        np.testing.assert_allclose(k1, lin, rtol=1e-8, atol=1e-8)

    def test_constant_source_is_degenerate(self):
        flat = function_curve(lambda u: np.full_like(u, 2.0), (0.0, 1.0))
        with pytest.raises(DegenerateBasisError, match="smaller k"):
            basis_coefficients_fixed(flat, THREE_SEGMENTS, GAUSSIAN, 0.25, BasisSpec(2), 0.5)


class TestRandomFactor:
    def test_three_term_oracle(self):
        curve = function_curve(lambda u: u + 2, (-2.0, 2.0))
        target = RandomDesignSample([-1.0, 0.0, 1.0], [1.5, 2.0, 2.5])
        assert eta_hat_random(curve, target, GAUSSIAN, 0.5, 0.0) == pytest.approx(
            0.9747195285880689, abs=1e-14)

    def test_responses_on_source_give_one(self):
        curve = function_curve(lambda u: u + 2, (-2.0, 2.0))
        target = RandomDesignSample([-1.0, 0.0, 1.0], [1.0, 2.0, 3.0])
        assert eta_hat_random(curve, target, GAUSSIAN, 0.5, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_zero_at_targets_is_orthogonal(self):
        curve = function_curve(lambda u: np.sin(np.pi * u), (-2.0, 2.0))
        target = RandomDesignSample([-1.0, 0.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(OrthogonalAtXError):
            eta_hat_random(curve, target, GAUSSIAN, 0.5, 0.2)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), h=st.floats(0.1, 2.0))
    def test_noiseless_identity(self, seed, h):
        rng = np.random.default_rng(seed)
        source = RandomDesignSample(rng.uniform(-2, 2, 30), rng.uniform(1, 3, 30))
        fit = nw_estimate(source, GAUSSIAN, 0.4)
        xq = rng.uniform(-2, 2, 15)
        target = RandomDesignSample(xq, fit(xq))
        x = np.linspace(-2, 2, 9)
        np.testing.assert_allclose(eta_hat_random(fit, target, GAUSSIAN, h, x), 1.0, rtol=1e-12)
        est = sw_tle_random(source, target, GAUSSIAN, BandwidthPair(0.4, h))
        np.testing.assert_allclose(est(x), fit(x), rtol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000),
           c=st.floats(0.1, 50).flatmap(lambda v: st.sampled_from([v, -v])))
    def test_scale_equivariance(self, seed, c):
        source, target = _random_pair(seed, 60, 20)
        fit = nw_estimate(source, GAUSSIAN, 0.3)
        scaled = function_curve(lambda u: c * fit(u), fit.domain)
        x = np.linspace(-2, 2, 7)
        eta = eta_hat_random(fit, target, GAUSSIAN, 0.5, x)
        eta_c = eta_hat_random(scaled, target, GAUSSIAN, 0.5, x)
        np.testing.assert_allclose(eta_c, eta / c, rtol=1e-10)
        np.testing.assert_allclose(scaled(x) * eta_c, fit(x) * eta, rtol=1e-10)


class TestRandomEstimators:
    def test_identical_linear_noiseless(self):
        x = np.linspace(-2, 2, 60)
        sample = RandomDesignSample(x, 0.5 * x + 3)
        est = sw_tle_random(sample, sample, GAUSSIAN, BandwidthPair(0.15, 0.3))
        grid = np.linspace(-1.5, 1.5, 31)
        np.testing.assert_allclose(est(grid), 0.5 * grid + 3, atol=1e-2)

    def test_shift_keeps_identity(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(-2, 2, 40)
        source = RandomDesignSample(x, np.sin(x))
        shift = 2.0
        guard = GuardPolicy(shift_a=shift)
        fit = nw_estimate(source.with_responses(source.y + shift), GAUSSIAN, 0.3)
        target = RandomDesignSample(x[:20], fit(x[:20]))
        est = sw_tle_random(source, target, GAUSSIAN, BandwidthPair(0.3, 0.4), guard)
        grid = np.linspace(-2, 2, 11)
        np.testing.assert_allclose(est.source_curve(grid), fit(grid), rtol=1e-12)
        np.testing.assert_allclose(est.factor(grid), 1.0, rtol=1e-12)

    def test_basis_normal_equations_oracle(self):
        curve = function_curve(lambda u: 1 + u * u, (-2.0, 2.0))
        target = RandomDesignSample([-1.0, -0.3, 0.4, 1.2], [2.0, 1.1, 1.7, 3.2])
        coefs = basis_coefficients_random(curve, target, GAUSSIAN, 0.6, BasisSpec(2), 0.1)
        np.testing.assert_allclose(coefs[0], [1.236743049679247, -0.005801132515804351],
                                   atol=1e-8)

    def test_basis_k1_reduces_to_linear(self):
        source, target = _random_pair(11)
        bw = BandwidthPair(0.25, 0.4)
        grid = np.linspace(-2, 2, 41)
        np.testing.assert_allclose(
            basis_adjust_random(source, target, GAUSSIAN, bw, BasisSpec(1))(grid),
            sw_tle_random(source, target, GAUSSIAN, bw)(grid), rtol=1e-8, atol=1e-8)

    def test_basis_exact_span(self):
        curve_fn = lambda u: 1 + u * u
        xq = np.linspace(-2, 2, 25)
        y = 0.7 * curve_fn(xq) - 0.2 * curve_fn(xq) ** 2
        coefs = basis_coefficients_random(function_curve(curve_fn, (-2.0, 2.0)),
                                          RandomDesignSample(xq, y), GAUSSIAN, 0.5,
                                          BasisSpec(2), np.linspace(-1.5, 1.5, 7))
        np.testing.assert_allclose(coefs, np.tile([0.7, -0.2], (7, 1)), atol=1e-9)

    def test_basis_k_bounds(self):
        with pytest.raises(ParameterError):
            BasisSpec(0)
        with pytest.raises(ParameterError):
            BasisSpec(9)


class TestSemiparametric:
    def test_three_term_oracle(self):
        target = RandomDesignSample([-0.5, 0.2, 0.9], [0.9, 1.3, 1.4])
        got = alpha_hat_semiparam([1.0, 0.5], exponential_model(), target, GAUSSIAN, 0.4, 0.3)
        assert got == pytest.approx(1.065767369819628, abs=1e-14)

    def test_responses_on_model_give_one(self):
        model = exponential_model()
        xq = np.linspace(-1, 1, 9)
        target = RandomDesignSample(xq, model.value(xq, [1.0, 0.5]))
        np.testing.assert_allclose(
            alpha_hat_semiparam([1.0, 0.5], model, target, GAUSSIAN, 0.3, np.linspace(-1, 1, 5)),
            1.0, rtol=1e-14)

    def test_zero_model_is_orthogonal(self):
        target = RandomDesignSample([-0.5, 0.2, 0.9], [0.9, 1.3, 1.4])
        with pytest.raises(OrthogonalAtXError):
            alpha_hat_semiparam([0.0, 0.5], exponential_model(), target, GAUSSIAN, 0.4, 0.3)

    def test_noiseless_recovery(self):
        model = exponential_model()
        xp = np.linspace(-2, 2, 80)
        source = RandomDesignSample(xp, np.exp(0.5 * xp))
        xq = np.linspace(-2, 2, 30)
        target = RandomDesignSample(xq, np.exp(0.5 * xq))
        est = sw_tle_semiparam(source, model, target, GAUSSIAN, 0.3, theta0=[1.2, 0.1])
        np.testing.assert_allclose(est.extras["fit"].theta_hat, [1.0, 0.5], atol=1e-6)
        grid = np.linspace(-1.5, 1.5, 13)
        np.testing.assert_allclose(est(grid), np.exp(0.5 * grid), rtol=1e-6)
        np.testing.assert_allclose(est.factor(grid), 1.0, atol=1e-6)

    def test_linear_model_warns(self):
        line = ParametricModel(lambda x, th: th[0] + th[1] * x, 2, name="line")
        x = np.linspace(0, 1, 20)
        source = RandomDesignSample(x, 1 + 2 * x)
        with pytest.warns(UserWarning, match="linear"):
            est = sw_tle_semiparam(source, line, source, GAUSSIAN, 0.2)
        assert np.isfinite(est(0.5))

    def test_beats_target_only_fit(self):
        # n_p / n_q = 10 at noise sd 0.2, CV-free bandwidths held fixed
        model = exponential_model()
        truth = lambda u: 1.3 * np.exp(0.4 * u) * (1 + 0.1 * u)
        grid = np.linspace(-2, 2, 201)
        ise_tle, ise_nw = [], []
        for rep in range(60):
            rng = np.random.default_rng([17, rep])
            xp, xq = rng.uniform(-2, 2, 200), rng.uniform(-2, 2, 20)
            source = RandomDesignSample(xp, np.exp(0.4 * xp) + 0.2 * rng.standard_normal(200))
            target = RandomDesignSample(xq, truth(xq) + 0.2 * rng.standard_normal(20))
            est = sw_tle_semiparam(source, model, target, GAUSSIAN, 1.0)
            ise_tle.append(np.trapezoid((est(grid) - truth(grid)) ** 2, grid))
            nw = nw_estimate(target, GAUSSIAN, 0.35)
            ise_nw.append(np.trapezoid((nw(grid) - truth(grid)) ** 2, grid))
        assert np.mean(ise_tle) < np.mean(ise_nw)


class TestMultiSource:
    def test_needs_two_sources(self):
        source, target = _random_pair(1)
        with pytest.raises(ParameterError):
            sw_tle_multi([SourceSpec(source, h_p=0.3)], target, GAUSSIAN, 0.4)

    def test_identical_sources_tie_to_uniform(self):
        source, target = _random_pair(2)
        spec = SourceSpec(source, h_p=0.3)
        est = sw_tle_multi([spec, spec], target, GAUSSIAN, 0.4)
        np.testing.assert_array_equal(est.weights, [0.5, 0.5])

    def test_exact_source_gets_full_weight(self):
        preds = np.column_stack([np.linspace(0, 1, 8), np.linspace(3, -1, 8)])
        w, _, crit = select_simplex_weights(preds, preds[:, 1].copy(), 0.01)
        np.testing.assert_array_equal(w, [0.0, 1.0])
        assert crit.min() == 0.0

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), m=st.integers(2, 3))
    def test_weights_attain_grid_minimum(self, seed, m):
        rng = np.random.default_rng(seed)
        preds = rng.normal(size=(12, m))
        y = rng.normal(size=12)
        w, grid, crit = select_simplex_weights(preds, y, 0.1)
        assert np.all(w >= 0) and w.sum() == pytest.approx(1.0, abs=1e-12)
        rescan = [np.sum((y - preds @ g) ** 2) for g in simplex_grid(m, 0.1)]
        assert np.sum((y - preds @ w) ** 2) == pytest.approx(min(rescan), rel=1e-12)
        assert len(grid) == len(crit) == len(rescan)

    def test_size_weighting(self):
        source, target = _random_pair(4)
        small = source.subset(np.arange(30))
        est = sw_tle_multi([SourceSpec(small, h_p=0.3), SourceSpec(source, h_p=0.3)],
                           target, GAUSSIAN, 0.4, weighting="size")
        np.testing.assert_allclose(est.weights, [30 / 150, 120 / 150])

    def test_parametric_and_nonparametric_mix(self):
        model = exponential_model()
        rng = np.random.default_rng(6)
        xp = rng.uniform(-2, 2, 100)
        para = SourceSpec(RandomDesignSample(xp, np.exp(0.5 * xp) + 0.05 * rng.standard_normal(100)),
                          model=model, theta0=(1.0, 0.1))
        source, target = _random_pair(6)
        est = sw_tle_multi([para, SourceSpec(source, h_p=0.3)], target, GAUSSIAN, 0.4)
        assert est(np.linspace(-2, 2, 5)).shape == (5,)
        assert est.weights.sum() == pytest.approx(1.0)
