"""Tests for exact matching weights, feasibility checks, and effect estimates."""

import numpy as np
import pytest

from scbalance import (
    DgpMode,
    FeasibilityError,
    RngSeed,
    WeightSource,
    check_feasibility,
    check_simplex,
    estimate_effect,
    fit_weights,
    naive_difference,
    oracle_weights,
    plant_oracle,
    simulate_panel,
)

from helpers import make_params


class TestOracleWeights:
    def test_symmetric_interior_point(self):
        w = oracle_weights([0.5, 0.0, 1.0], 0)
        assert np.allclose(w.values, [0.5, 0.5], atol=1e-12)

    def test_hull_boundary_forces_vertex(self):
        w = oracle_weights([1.0, 1.0, 5.0], 0)
        assert np.allclose(w.values, [1.0, 0.0], atol=1e-9)

    def test_min_norm_matches_constrained_grid(self):
        # frozen from min_norm_on_constrained_grid([0, 0.5, 1], 0.25, 1e-4):
        # grid argmin [0.5831, 0.3333, 0.0836]; analytic KKT gives
        # [7/12, 1/3, 1/12]
        w = oracle_weights([0.25, 0.0, 0.5, 1.0], 0)
        assert np.allclose(w.values, [7 / 12, 1 / 3, 1 / 12], atol=1e-3)
        assert np.allclose(w.values, [7 / 12, 1 / 3, 1 / 12], atol=1e-9)

    def test_treated_index_not_first(self):
        w = oracle_weights([0.0, 0.5, 1.0], 1)
        assert np.allclose(w.values, [0.5, 0.5], atol=1e-12)

    def test_infeasible_names_hull_bounds(self):
        with pytest.raises(FeasibilityError) as err:
            oracle_weights([2.0, 0.0, 1.0], 0)
        assert "[0.0, 1.0]" in str(err.value)

    def test_random_feasible_targets_hit_exactly(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            d = int(rng.integers(2, 15))
            donors = rng.normal(size=d) * rng.uniform(0.1, 5)
            lam = rng.dirichlet(np.ones(d))
            target = float(lam @ donors)
            w = oracle_weights(np.concatenate([[target], donors]), 0)
            assert abs(float(w.values @ donors) - target) <= 1e-12 * (1 + abs(target))

    def test_minimum_norm_among_feasible(self):
        # any other feasible simplex point has no smaller norm
        rng = np.random.default_rng(9)
        donors = np.array([-1.0, -0.2, 0.4, 1.0])
        target = 0.1
        w = oracle_weights(np.concatenate([[target], donors]), 0)
        norm = float(w.values @ w.values)
        for _ in range(2000):
            lam = rng.dirichlet(np.ones(4))
            if abs(float(lam @ donors) - target) < 1e-3:
                assert norm <= lam @ lam + 1e-2 * 1e-3

    def test_degenerate_pool_returns_uniform(self):
        w = oracle_weights([2.0, 2.0, 2.0], 0)
        assert np.allclose(w.values, [0.5, 0.5], atol=1e-12)


class TestCheckFeasibility:
    def test_noiseless_planted_residuals_zero(self):
        planted = plant_oracle(4, [-0.5, 0.3, 1.1], weights=[0.2, 0.5, 0.3])
        p = make_params(n=4, unit_factor=planted.unit_factor,
                        trend=[1.0, 2.0, -1.0, 0.0, 0.0], loading=[0.5, 1.5, 1.0, 1.0, 1.0])
        panel, _, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        report = check_feasibility(panel, planted.weights)
        assert report.max_abs_residual <= 1e-12

    def test_wrong_weights_mean_matches_mismatch(self):
        # noiseless: residual_t = loading_t * (mu_treated - w . mu_donors)
        p = make_params(loading=[1.0, 2.0, 3.0, 1.0, 1.0])
        panel, _, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        wrong = check_simplex([0.9, 0.1])
        report = check_feasibility(panel, wrong)
        mismatch = 0.5 - (0.9 * 0.0 + 0.1 * 1.0)
        expected_mean = np.mean([1.0, 2.0, 3.0]) * mismatch
        assert report.mean_residual == pytest.approx(expected_mean, abs=1e-12)

    def test_noisy_mean_within_clt_bound(self):
        # sd of the mean residual, computed at run time from noise and weights
        t0 = 999
        planted = plant_oracle(3, [0.0, 1.0], weights=[0.5, 0.5])
        p = make_params(t0=t0, t_max=t0 + 1, unit_factor=planted.unit_factor,
                        trend=np.zeros(t0 + 2), loading=np.ones(t0 + 2),
                        noise=1.0, effect=[0.0])
        panel, beta, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 17)
        report = check_feasibility(panel, beta)
        per_period_sd = np.sqrt(1.0 + float(beta.values @ beta.values))
        assert abs(report.mean_residual) < 4 * per_period_sd / np.sqrt(t0 + 1)

    def test_shape_mismatch(self):
        p = make_params()
        panel, _, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        with pytest.raises(ValueError, match="expected 2 weights"):
            check_feasibility(panel, check_simplex([0.5, 0.3, 0.2]))


class TestEstimateEffect:
    def test_noiseless_identification(self):
        p = make_params()  # mu=[0.5,0,1], effect [2,2]
        panel, beta, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        series = estimate_effect(panel, beta, WeightSource.ORACLE)
        assert np.array_equal(series.effects, [2.0, 2.0])
        assert series.source is WeightSource.ORACLE

    def test_common_trend_cancels(self):
        p = make_params(trend=7.0)
        panel, beta, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        series = estimate_effect(panel, beta, WeightSource.ORACLE)
        assert np.allclose(series.effects, [2.0, 2.0], atol=1e-14)

    def test_monte_carlo_unbiased(self):
        p = make_params(noise=0.5)
        reps = 10_000
        effects = np.empty((reps, 2))
        for r in range(reps):
            panel, beta, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, RngSeed(13, r))
            effects[r] = estimate_effect(panel, beta, WeightSource.ORACLE).effects
        err = effects - 2.0
        se = err.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(err.mean(axis=0)) < 3 * se)

    def test_oracle_exactness_to_machine_precision(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n = int(rng.integers(3, 8))
            donors = rng.normal(size=n - 1) * 3
            planted = plant_oracle(n, donors, seed=int(rng.integers(1 << 30)))
            p = make_params(
                n=n, unit_factor=planted.unit_factor,
                trend=rng.normal(size=5) * 5, loading=rng.normal(size=5) * 2,
                effect=rng.normal(size=2),
            )
            panel, beta, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 1)
            series = estimate_effect(panel, beta, WeightSource.ORACLE)
            assert np.abs(series.effects - p.effect).max() <= 1e-10

    def test_trend_shift_invariance(self):
        p = make_params(noise=0.3)
        panel, beta, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 5)
        shift = np.array([3.0, -11.0])
        shifted = type(panel)(x=panel.x, y=panel.y + shift, z=panel.z)
        a = estimate_effect(panel, beta, WeightSource.ORACLE).effects
        b = estimate_effect(shifted, beta, WeightSource.ORACLE).effects
        assert np.allclose(a, b, atol=1e-12)

    def test_scale_equivariance(self):
        p = make_params(noise=0.3)
        panel, beta, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 5)
        base = estimate_effect(panel, beta, WeightSource.ORACLE).effects
        # powers of two scale without rounding: bitwise equality
        doubled = type(panel)(x=panel.x * 4.0, y=panel.y * 4.0, z=panel.z)
        assert np.array_equal(estimate_effect(doubled, beta, WeightSource.ORACLE).effects,
                              base * 4.0)
        # general scale: exact up to rounding
        scaled = type(panel)(x=panel.x * 3.7, y=panel.y * 3.7, z=panel.z)
        assert np.allclose(estimate_effect(scaled, beta, WeightSource.ORACLE).effects,
                           base * 3.7, rtol=1e-12)

    def test_oracle_and_fitted_predictions_agree_noiseless(self):
        # collinear donors: weight vectors may differ, predictions must not
        donors = np.array([0.0, 0.5, 1.0, 0.5])
        planted = plant_oracle(5, donors, weights=[0.25, 0.25, 0.25, 0.25])
        p = make_params(n=5, unit_factor=planted.unit_factor)
        panel, beta, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        fit = fit_weights(panel)
        a = estimate_effect(panel, beta, WeightSource.ORACLE).effects
        b = estimate_effect(panel, fit.weights, WeightSource.FITTED).effects
        assert np.allclose(a, b, atol=1e-6)


class TestNaiveDifference:
    def test_uniform_coincides_with_oracle_here(self):
        p = make_params(effect=[2.0, 2.0])
        panel, _, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        series = naive_difference(panel)
        assert np.allclose(series.effects, [2.0, 2.0], atol=1e-14)
        assert series.source is WeightSource.FITTED
        assert np.allclose(series.weights_used.values, 0.5)

    def test_confounding_bias_surfaces(self):
        # treated factor 1 vs donor mean 0.5: bias 0.5 with zero true effect
        p = make_params(unit_factor=[1.0, 0.0, 1.0], effect=[0.0, 0.0])
        panel, _, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        series = naive_difference(panel)
        assert np.allclose(series.effects, [0.5, 0.5], atol=1e-14)
