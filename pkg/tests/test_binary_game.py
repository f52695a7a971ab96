"""Tests for the finite binary regret game"""

import math
from dataclasses import replace

import numpy as np
import pytest

from robust_beliefs.binary_game import (
    BeliefVector,
    DoubleOracleSolver,
    NatureMixtureFinite,
    count_probabilities,
    dm_best_response,
    exante_regret,
    marginal_count_prob,
    n1_regret_curves,
    n3_first_order_beliefs,
    n3_system_residuals,
    nature_best_response,
    oracle_beliefs,
    oracle_posterior_binary,
    regret_curve,
    regret_slope,
    solve_double_oracle,
    solve_finite,
    solve_structural,
    solve_trend,
    verify_global_optimality,
)
from robust_beliefs.bregman import LOG, MSE
from robust_beliefs.errors import DomainError, IterationLimit, RangeError, ZeroMassCount


def symmetric_beliefs(upper):
    """Belief vector from its upper half (a_k for k >= n/2)"""
    upper = list(upper)
    n = 2 * len(upper) - 1
    return BeliefVector(n=n, a=np.array([1.0 - x for x in reversed(upper)] + upper))


class TestCountProbabilities:

    def test_examples(self):
        assert marginal_count_prob(1, 0.9, 1) == pytest.approx(0.5, abs=1e-15)
        assert marginal_count_prob(2, 1.0, 1) == 0.0
        assert marginal_count_prob(2, 0.5, 1) == pytest.approx(0.5, abs=1e-15)

    def test_out_of_range(self):
        with pytest.raises(RangeError):
            marginal_count_prob(2, 0.7, 3)
        with pytest.raises(RangeError):
            oracle_posterior_binary(2, 0.7, -1)

    @pytest.mark.parametrize("n", [1, 7, 60, 61, 500, 10_000])
    def test_sums_to_one(self, n):
        for pi in (0.5, 0.63, 0.9, 1.0):
            assert math.fsum(count_probabilities(n, pi)) == pytest.approx(1.0, abs=1e-12)

    def test_count_symmetry(self):
        p = count_probabilities(9, 0.7)
        np.testing.assert_allclose(p, p[::-1], rtol=1e-14)


class TestOraclePosterior:

    def test_uninformative_returns_prior(self):
        for n in (1, 4, 9):
            for k in range(n + 1):
                assert oracle_posterior_binary(n, 0.5, k) == 0.5

    def test_single_signal_equals_precision(self):
        for pi in (0.55, 0.7, 0.95):
            assert oracle_posterior_binary(1, pi, 1) == pytest.approx(pi, abs=1e-15)

    def test_direct_bayes(self):
        assert oracle_posterior_binary(2, 0.75, 2) == pytest.approx(0.9, abs=1e-15)

    def test_full_revelation(self):
        assert oracle_posterior_binary(3, 1.0, 3) == 1.0
        assert oracle_posterior_binary(3, 1.0, 0) == 0.0
        assert oracle_posterior_binary(3, 1.0, 1) == 0.5

    def test_log_complement_is_exact_in_tail(self):
        b = oracle_beliefs(400, 0.9)
        assert b.a[-1] == 1.0
        assert b.log_complement[-1] == pytest.approx(-400 * math.log(9.0), rel=1e-12)


class TestExanteRegret:

    @pytest.mark.parametrize("pi", [0.5, 0.6, 0.8, 1.0])
    def test_zero_at_truth(self, pi):
        assert exante_regret(oracle_beliefs(5, pi), pi, MSE) == 0.0
        if pi < 1.0:
            assert exante_regret(oracle_beliefs(5, pi), pi, LOG) == pytest.approx(0.0, abs=1e-15)

    def test_n1_indifference(self):
        b = BeliefVector(n=1, a=np.array([0.25, 0.75]))
        assert exante_regret(b, 1.0) == pytest.approx(0.0625, abs=1e-15)
        assert exante_regret(b, 0.5) == pytest.approx(0.0625, abs=1e-15)

    def test_log_boundary_beliefs_rejected(self):
        b = BeliefVector(n=1, a=np.array([0.0, 1.0]))
        with pytest.raises(DomainError):
            exante_regret(b, 0.7, LOG)

    def test_convex_in_beliefs(self):
        rng = np.random.default_rng(42)
        n = 4
        for _ in range(200):
            a, a2 = rng.uniform(size=n + 1), rng.uniform(size=n + 1)
            lam = rng.uniform()
            pi = rng.uniform(0.5, 1.0)
            mixed = BeliefVector(n=n, a=lam * a + (1 - lam) * a2)
            lhs = exante_regret(mixed, pi)
            rhs = lam * exante_regret(BeliefVector(n=n, a=a), pi) + (1 - lam) * exante_regret(BeliefVector(n=n, a=a2), pi)
            assert lhs <= rhs + 1e-12

    def test_regret_curve_matches_pointwise(self):
        b = symmetric_beliefs([0.6, 0.86])
        pis = np.linspace(0.5, 1.0, 11)
        np.testing.assert_allclose(regret_curve(b, pis), [exante_regret(b, p) for p in pis], atol=1e-15)

    def test_slope_matches_finite_difference(self):
        b = symmetric_beliefs([0.6, 0.86])
        h = 1e-6
        for pi in (0.55, 0.7, 0.9):
            fd = (exante_regret(b, pi + h) - exante_regret(b, pi - h)) / (2 * h)
            assert regret_slope(b, pi) == pytest.approx(fd, abs=1e-7)

    def test_log_domain_matches_direct(self):
        b = oracle_beliefs(61, 0.7)
        direct = sum(p * (q - a) ** 2 for p, q, a in
                     zip(count_probabilities(61, 0.8), oracle_beliefs(61, 0.8).a, b.a))
        assert exante_regret(b, 0.8) == pytest.approx(direct, rel=1e-10)


class TestDMBestResponse:

    def test_n1_equilibrium_beliefs(self):
        b = dm_best_response(NatureMixtureFinite.two_point(1.0, 0.5), 1)
        np.testing.assert_allclose(b.a, [0.25, 0.75], atol=1e-15)

    def test_prior_only(self):
        mix = NatureMixtureFinite.from_precisions([0.5], [1.0])
        for n in (1, 6, 80):
            np.testing.assert_allclose(dm_best_response(mix, n).a, 0.5, rtol=0.0, atol=1e-12)

    def test_matches_first_order_condition(self):
        for pi, w in [(0.6, 0.3), (0.75, 0.5), (0.9, 0.8)]:
            b = dm_best_response(NatureMixtureFinite.two_point(pi, w), 3)
            np.testing.assert_allclose(b.a, n3_first_order_beliefs(pi, w), atol=1e-12)

    def test_generator_independence(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            m = rng.integers(1, 5)
            pis = np.sort(rng.uniform(0.5, 1.0, size=m))
            mix = NatureMixtureFinite.from_precisions(pis, rng.dirichlet(np.ones(m)))
            n = int(rng.integers(1, 12))
            np.testing.assert_allclose(dm_best_response(mix, n, MSE).a,
                                       dm_best_response(mix, n, LOG).a, atol=1e-10)

    def test_symmetric_and_monotone(self):
        mix = NatureMixtureFinite.from_precisions([0.5, 0.62, 0.8], [0.3, 0.5, 0.2])
        b = dm_best_response(mix, 9)
        assert b.symmetry_error < 1e-12
        assert b.is_monotone

    def test_zero_mass_counts_flagged(self):
        mix = NatureMixtureFinite.from_precisions([1.0], [1.0])
        b = dm_best_response(mix, 2)
        assert b.flagged == (1,)
        assert b.a[1] == 0.5
        with pytest.raises(ZeroMassCount):
            dm_best_response(mix, 2, strict=True)


class TestNatureBestResponse:

    def test_prior_beliefs_pick_full_revelation(self):
        b = BeliefVector(n=1, a=np.array([0.5, 0.5]))
        pi, regret = nature_best_response(b, 1)
        assert pi == 1.0
        assert regret == pytest.approx(0.25, abs=1e-15)

    def test_tie_breaks_to_smallest_precision(self):
        b = BeliefVector(n=1, a=np.array([0.25, 0.75]))
        pi, regret = nature_best_response(b, 1)
        assert pi == 0.5
        assert regret == pytest.approx(0.0625, abs=1e-15)

    def test_oracle_beliefs_are_exploitable_elsewhere(self):
        pi, regret = nature_best_response(oracle_beliefs(4, 0.8), 4)
        assert abs(pi - 0.8) > 1e-3
        assert regret > 0.0

    def test_refined_maximum_beats_grid(self):
        b = symmetric_beliefs([0.55, 0.7, 0.9])
        pi, regret = nature_best_response(b, 5)
        grid = np.linspace(0.5, 1.0, 4001)
        assert regret >= regret_curve(b, grid).max() - 1e-9

    def test_mismatched_size(self):
        with pytest.raises(RangeError):
            nature_best_response(BeliefVector(n=1, a=np.array([0.25, 0.75])), 2)


class TestStructuralSolver:

    def test_n1(self):
        eq = solve_structural(1)
        assert eq.pi_star == 1.0
        assert eq.w == pytest.approx(0.5, abs=1e-10)
        np.testing.assert_allclose(eq.beliefs.a, [0.25, 0.75], atol=1e-10)
        assert eq.value == pytest.approx(0.0625, abs=1e-10)
        assert eq.residuals.boundary

    def test_n2_weights(self):
        eq = solve_structural(2)
        assert eq.pi_star == 1.0
        assert eq.w == pytest.approx(math.sqrt(2) - 1, abs=1e-8)
        weights = dict(zip(eq.mixture.precisions, eq.mixture.weights))
        assert weights[0.5] == pytest.approx(2 - math.sqrt(2), abs=1e-8)

    def test_n3_beliefs(self, n3_equilibrium):
        eq = n3_equilibrium
        assert 0.5 < eq.pi_star < 1.0
        assert not eq.residuals.boundary
        assert eq.beliefs.a[2] == pytest.approx(0.60, abs=0.01)
        assert eq.beliefs.a[3] == pytest.approx(0.86, abs=0.01)

    def test_n3_residuals(self, n3_equilibrium):
        r = n3_equilibrium.residuals
        assert r.foc_max_abs < 1e-8
        assert r.indifference_abs < 1e-8
        assert r.local_opt_abs < 1e-8
        assert r.duality_gap <= 1e-7

    def test_n3_closed_form_system(self, n3_equilibrium):
        g1, g2 = n3_system_residuals(n3_equilibrium.pi_star, n3_equilibrium.w)
        assert abs(g1) < 1e-8
        assert abs(g2) < 1e-8

    def test_symmetry(self, n3_equilibrium, n4_equilibrium):
        assert n3_equilibrium.beliefs.symmetry_error < 1e-8
        assert n4_equilibrium.beliefs.symmetry_error < 1e-8

    def test_saddle_certificate(self, n4_equilibrium):
        diag = verify_global_optimality(n4_equilibrium, 4)
        assert diag.max_excess <= 1e-6
        assert diag.is_saddle

    @pytest.mark.slow
    def test_trend_decreasing(self):
        equilibria = solve_trend(range(3, 19))
        pis = np.array([eq.pi_star for eq in equilibria])
        values = np.array([eq.value for eq in equilibria])
        assert np.all(np.diff(pis) < 0)
        assert np.all(np.diff(values) < 0)


class TestDoubleOracle:

    def test_n1(self):
        eq = solve_double_oracle(1)
        assert eq.value == pytest.approx(0.0625, abs=1e-8)
        weights = dict(zip(eq.mixture.precisions, eq.mixture.weights))
        assert weights[0.5] == pytest.approx(0.5, abs=1e-6)
        assert weights[1.0] == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.slow
    def test_n3_agrees_with_structural(self, n3_equilibrium):
        eq = solve_double_oracle(3)
        assert eq.pi_star == pytest.approx(n3_equilibrium.pi_star, abs=1e-6)
        assert eq.w == pytest.approx(n3_equilibrium.w, abs=1e-6)
        assert eq.value == pytest.approx(n3_equilibrium.value, abs=1e-6)
        assert eq.residuals.duality_gap <= 1e-7

    @pytest.mark.slow
    def test_log_loss_run_uses_mean_beliefs(self):
        solver = DoubleOracleSolver(2, LOG, tol=1e-6, max_outer=20)
        try:
            solver.solve()
        except IterationLimit:
            pass
        assert solver.history
        for mix in solver.history:
            np.testing.assert_allclose(dm_best_response(mix, 2, LOG).a,
                                       dm_best_response(mix, 2, MSE).a, atol=1e-10)

    def test_solve_finite_both(self):
        results = solve_finite(1, method='both')
        assert set(results) == {'structural', 'double-oracle'}
        assert results['structural'].value == pytest.approx(results['double-oracle'].value, abs=1e-6)

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            DoubleOracleSolver(2, tol=0.0)


class TestGlobalOptimality:

    def test_n1_envelope(self):
        diag = verify_global_optimality(solve_structural(1), 1)
        assert diag.n_local_maxima == 2
        assert diag.peak_locations == [0.5, 1.0]
        assert diag.regrets.max() == pytest.approx(0.0625, abs=1e-12)

    def test_n4_two_peaks(self, n4_equilibrium):
        diag = verify_global_optimality(n4_equilibrium, 4)
        assert diag.n_local_maxima == 2
        assert diag.peak_locations[0] == 0.5
        assert diag.peak_locations[1] == pytest.approx(n4_equilibrium.pi_star, abs=1e-3)
        assert diag.indifference_deviation < 1e-8

    def test_perturbed_beliefs_detected(self, n3_equilibrium):
        a = n3_equilibrium.beliefs.a.copy()
        a[3] += 0.05
        perturbed = replace(n3_equilibrium, beliefs=BeliefVector(n=3, a=a))
        diag = verify_global_optimality(perturbed, 3)
        assert diag.excess_over_support > 1e-6
        assert not diag.is_saddle


class TestClosedForms:

    def test_n1_curves_cross_at_three_quarters(self):
        a1 = np.linspace(0.5, 1.0, 501)
        curves = n1_regret_curves([0.5, 1.0], a1)
        envelope = curves.max(axis=0)
        i = int(np.argmin(envelope))
        assert a1[i] == pytest.approx(0.75, abs=1e-12)
        assert envelope[i] == pytest.approx(0.0625, abs=1e-12)
        assert curves[0, i] == pytest.approx(curves[1, i], abs=1e-15)

    @pytest.mark.parametrize("form", ["derived", "printed"])
    @pytest.mark.parametrize("pi", [0.6, 0.75, 0.9])
    def test_indifference_signs(self, pi, form):
        assert n3_system_residuals(pi, 1.0, form)[0] > 0
        assert n3_system_residuals(pi, 0.0, form)[0] < 0

    def test_local_optimality_values(self):
        assert n3_system_residuals(0.5, 0.5)[1] == pytest.approx(2.0, abs=1e-12)
        assert n3_system_residuals(1.0, 1 / 3)[1] == pytest.approx(-2 / 3, abs=1e-12)

    def test_forms_share_local_optimality(self):
        for pi, w in [(0.6, 0.2), (0.8, 0.7)]:
            assert n3_system_residuals(pi, w, 'derived')[1] == n3_system_residuals(pi, w, 'printed')[1]

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            n3_system_residuals(0.7, 0.5, 'typeset')
