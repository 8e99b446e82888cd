"""Tests for the balance matrix, its audit, and the bias diagnostics."""

import numpy as np
import pytest

from scbalance import (
    BVariant,
    DgpMode,
    RngSeed,
    build_b_matrix,
    check_simplex,
    conditional_bias_experiment,
    eigen_audit,
    naive_difference,
    placebo_test,
    simulate_panel,
    Panel,
)

from helpers import make_params


def feasible_pair(rng, n):
    """Random (weights, factors) with the treated factor an exact mixture."""
    beta = rng.dirichlet(np.ones(n - 1))
    donors = rng.normal(size=n - 1) * 5
    mu = np.concatenate([[beta @ donors], donors])
    return check_simplex(beta), mu


class TestBuildBMatrix:
    def test_verbatim_rows(self):
        m = build_b_matrix(check_simplex([0.4, 0.6]), BVariant.VERBATIM)
        expected = [[0.0, 0.4, 0.6], [1.0, 0.0, -0.6], [1.0, -0.4, 0.0]]
        assert np.array_equal(m.b, expected)

    def test_corrected_rows(self):
        m = build_b_matrix(check_simplex([0.4, 0.6]), BVariant.CORRECTED)
        expected = [[0.0, 0.4, 0.6], [1.0, 0.6, -0.6], [1.0, -0.4, 0.4]]
        assert np.allclose(m.b, expected, atol=1e-15)

    def test_single_donor(self):
        m = build_b_matrix(check_simplex([1.0]), BVariant.VERBATIM)
        assert np.array_equal(m.b, [[0.0, 1.0], [1.0, 0.0]])


class TestEigenAudit:
    def test_corrected_feasible_pair_is_eigenvector(self):
        # 1.6 = 0.4 * 1 + 0.6 * 2
        m = build_b_matrix(check_simplex([0.4, 0.6]), BVariant.CORRECTED)
        audit = eigen_audit(m, [1.6, 1.0, 2.0])
        assert audit.residual_inf_norm <= 1e-12

    def test_verbatim_row1_holds_donor_rows_scaled(self):
        m = build_b_matrix(check_simplex([0.4, 0.6]), BVariant.VERBATIM)
        audit = eigen_audit(m, [1.6, 1.0, 2.0])
        assert audit.row1_residual <= 1e-12
        assert np.allclose(audit.per_row_factor, [0.4, 0.6], atol=1e-12)

    def test_verbatim_single_donor_unit_weight(self):
        m = build_b_matrix(check_simplex([1.0]), BVariant.VERBATIM)
        audit = eigen_audit(m, [3.5, 3.5])
        assert audit.residual_inf_norm == 0.0

    def test_corrected_property_random_feasible_pairs(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            beta, mu = feasible_pair(rng, int(rng.integers(3, 25)))
            audit = eigen_audit(build_b_matrix(beta, BVariant.CORRECTED), mu)
            assert audit.residual_inf_norm <= 1e-12 * (1 + np.abs(mu).max())

    def test_verbatim_property_random_feasible_pairs(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            beta, mu = feasible_pair(rng, int(rng.integers(3, 25)))
            m = build_b_matrix(beta, BVariant.VERBATIM)
            audit = eigen_audit(m, mu)
            bound = 1e-12 * (1 + np.abs(mu).max())
            assert audit.row1_residual <= bound
            image = m.b @ mu
            assert np.abs(image[1:] - beta.values * mu[1:]).max() <= bound

    def test_verbatim_donor_rows_exact_on_dyadic_inputs(self):
        # dyadic weights and factors: every product and sum is exact, so the
        # donor-row identity holds bitwise
        beta = check_simplex([0.25, 0.5, 0.25])
        mu = np.array([1.375, 0.5, 1.5, 2.0])  # 1.375 = 0.25*0.5+0.5*1.5+0.25*2
        m = build_b_matrix(beta, BVariant.VERBATIM)
        image = m.b @ mu
        assert np.array_equal(image[1:], beta.values * mu[1:])

    def test_zero_factor_rows_reported_nan(self):
        m = build_b_matrix(check_simplex([0.5, 0.5]), BVariant.VERBATIM)
        audit = eigen_audit(m, [0.5, 0.0, 1.0])
        assert np.isnan(audit.per_row_factor[0])
        assert audit.per_row_factor[1] == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        m = build_b_matrix(check_simplex([0.5, 0.5]), BVariant.VERBATIM)
        with pytest.raises(ValueError, match="expected 3 factors"):
            eigen_audit(m, [1.0, 2.0])


class TestConditionalBias:
    def test_noiseless_sc_exact_naive_biased_every_rep(self):
        p = make_params(n=5, unit_factor=[0.3, -1.0, 0.0, 0.5, 1.0],
                        effect=[1.0, 1.0], sharpness=2.0, loading=1.5)
        diag = conditional_bias_experiment(p, reps=128, seed=3)
        assert np.abs(diag.sc_summary.mean_bias_per_period).max() <= 1e-12
        assert diag.sc_summary.rmse_per_period.max() <= 1e-12
        # per-rep naive bias equals loading * (mu_treated - mean donor mu)
        for r in range(16):
            panel, _, treated = simulate_panel(
                p, DgpMode.CONFOUNDED_ASSIGNMENT, RngSeed(3, r)
            )
            mu = np.asarray(p.unit_factor)
            gap = mu[treated] - np.delete(mu, treated).mean()
            expected = 1.5 * gap
            got = naive_difference(panel).effects - p.effect
            assert np.allclose(got, expected, atol=1e-12)

    def test_randomized_assignment_unbiased_both(self):
        p = make_params(n=6, unit_factor=[0.1, -1.0, -0.5, 0.2, 0.6, 1.0],
                        noise=0.3, effect=[1.0, 1.0], sharpness=0.0)
        diag = conditional_bias_experiment(p, reps=2000, seed=1)
        for s in (diag.sc_summary, diag.naive_summary):
            assert np.all(np.abs(s.mean_bias_per_period) < 3 * s.se_per_period)

    def test_naive_bias_nondecreasing_in_sharpness(self):
        summaries = []
        for sharp in (0.0, 1.0, 2.0, 4.0):
            p = make_params(n=6, t0=5, t_max=7,
                            unit_factor=[0.0, -1.0, -0.6, 0.1, 0.6, 1.0],
                            trend=np.zeros(8), loading=np.ones(8),
                            noise=0.2, effect=[1.0, 1.0], sharpness=sharp)
            diag = conditional_bias_experiment(p, reps=10_000, seed=2)
            summaries.append(diag.naive_summary)
        bias = [np.abs(s.mean_bias_per_period).mean() for s in summaries]
        se = [s.se_per_period.mean() for s in summaries]
        for k in range(3):
            assert bias[k + 1] >= bias[k] - 3 * (se[k] + se[k + 1])

    def test_paired_replications_share_panels(self):
        p = make_params(n=5, unit_factor=[0.3, -1.0, 0.0, 0.5, 1.0],
                        noise=0.4, effect=[1.0, 1.0], sharpness=1.0)
        diag = conditional_bias_experiment(p, reps=100, seed=7)
        # recompute both estimators on the same seeds; summaries must match
        from scbalance import estimate_effect, WeightSource, summarize
        sc = np.empty((100, 2))
        naive = np.empty((100, 2))
        for r in range(100):
            panel, beta, _ = simulate_panel(p, DgpMode.CONFOUNDED_ASSIGNMENT, RngSeed(7, r))
            sc[r] = estimate_effect(panel, beta, WeightSource.ORACLE).effects
            naive[r] = naive_difference(panel).effects
        assert np.array_equal(summarize(sc, p.effect).mean_bias_per_period,
                              diag.sc_summary.mean_bias_per_period)
        assert np.array_equal(summarize(naive, p.effect).mean_bias_per_period,
                              diag.naive_summary.mean_bias_per_period)

    def test_too_few_reps_rejected(self):
        with pytest.raises(ValueError, match="at least 100"):
            conditional_bias_experiment(make_params(sharpness=1.0), reps=50)


class TestPlacebo:
    def test_noiseless_residuals_vanish(self):
        p = make_params(n=4, t0=8, t_max=10,
                        unit_factor=[0.25, -0.5, 0.5, 1.0],
                        trend=np.linspace(0, 2, 11), loading=np.linspace(1, 2, 11),
                        effect=[3.0, 3.0])
        panel, _, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        result = placebo_test(panel)
        assert result.split == 4
        assert np.abs(result.residuals).max() <= 1e-8

    def test_noisy_mean_residual_near_zero(self):
        p = make_params(n=4, t0=9, t_max=11, trend=np.zeros(12), loading=np.ones(12),
                        unit_factor=[0.25, -0.5, 0.5, 1.0], noise=0.5,
                        effect=[0.0, 0.0])
        reps = 300
        means = np.empty(reps)
        for r in range(reps):
            panel, _, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, RngSeed(19, r))
            means[r] = placebo_test(panel).residuals.mean()
        se = means.std(ddof=1) / np.sqrt(reps)
        assert abs(means.mean()) < 3 * se

    def test_infeasible_treated_unit_leaves_systematic_residuals(self):
        # treated factor above every donor: no exact match exists; noiseless
        # residuals equal loading * (mu_treated - fitted mixture) != 0
        mu = np.array([2.0, -1.0, 0.0, 1.0])
        loading = np.linspace(1.0, 2.0, 11)
        base = np.zeros(11) + np.outer(mu, loading)
        panel = Panel(x=base[:, :9], y=base[:, 9:], z=[1, 0, 0, 0])
        result = placebo_test(panel)
        fitted_mix = float(result.fit.weights.values @ mu[1:])
        expected = loading[result.split + 1 : 9] * (2.0 - fitted_mix)
        assert np.allclose(result.residuals, expected, atol=1e-8)
        assert np.abs(result.residuals).min() > 0.5  # systematic, not noise

    def test_split_validation(self):
        p = make_params()
        panel, _, _ = simulate_panel(p, DgpMode.DESIGNATED_TREATED, 0)
        with pytest.raises(ValueError, match="split"):
            placebo_test(panel, split=0)
        with pytest.raises(ValueError, match="split"):
            placebo_test(panel, split=panel.t0)
