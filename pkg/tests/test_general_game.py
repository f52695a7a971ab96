"""Tests for the general multinomial game"""

import math

import numpy as np
import pytest
from scipy import optimize
from scipy.special import comb

from robust_beliefs.binary_game import BeliefVector, NatureMixtureFinite, dm_best_response, exante_regret, oracle_posterior_binary
from robust_beliefs.bregman import LOG, MSE, bregman_mean_minimizer, divergence, generator_from_task_density
from robust_beliefs.errors import DomainError, IdentificationError, ImpossibleEvent, SimplexViolation, SizeLimit
from robust_beliefs.general_game import (
    CountVector,
    GeneralMixture,
    MultinomialExperiment,
    clip_rate_constant,
    dm_rule_general,
    enumerate_count_vectors,
    general_regret,
    kl_divergence,
    lemma_checks,
    log_multinomial_likelihood,
    oracle_posterior_general,
    quadratic_expansion_check,
    rate_experiment,
    validate_experiment_set,
)


def single(exp, mu=0.5):
    return GeneralMixture(support=(exp,), weights=(1.0,), prior_mu=mu)


def random_mixture(rng, signals=3):
    experiments = tuple(
        MultinomialExperiment(tuple(rng.dirichlet(np.full(signals, 3.0))), tuple(rng.dirichlet(np.full(signals, 3.0))))
        for _ in range(2)
    )
    weights = rng.dirichlet(np.ones(2))
    return GeneralMixture(support=experiments, weights=(float(weights[0]), 1.0 - float(weights[0])),
                          prior_mu=float(rng.uniform(0.3, 0.7)))


class TestTypes:

    def test_simplex_checked(self):
        with pytest.raises(SimplexViolation):
            MultinomialExperiment((0.6, 0.6), (0.5, 0.5))

    def test_signal_sets_match(self):
        with pytest.raises(ValueError):
            MultinomialExperiment((0.5, 0.5), (0.2, 0.3, 0.5))

    def test_binary_convention(self):
        exp = MultinomialExperiment.binary(0.8)
        assert exp.pi1 == (0.8, pytest.approx(0.2))
        assert MultinomialExperiment.binary(0.5).is_uninformative

    def test_count_vector(self):
        assert CountVector((2, 0, 3)).n == 5
        with pytest.raises(ValueError):
            CountVector((1, -1))


class TestEnumeration:

    @pytest.mark.parametrize("n, signals", [(0, 2), (6, 3), (10, 4)])
    def test_stars_and_bars(self, n, signals):
        K = enumerate_count_vectors(n, signals)
        assert K.shape == (comb(n + signals - 1, signals - 1, exact=True), signals)
        assert np.all(K.sum(axis=1) == n)
        assert len({tuple(row) for row in K}) == K.shape[0]


class TestLikelihood:

    def test_uniform(self):
        assert log_multinomial_likelihood((0.5, 0.5), (3, 1)) == pytest.approx(4 * math.log(0.5), abs=1e-15)

    def test_impossible_signal(self):
        assert log_multinomial_likelihood((1.0, 0.0), (0, 1)) == -math.inf

    def test_arithmetic(self):
        expected = 2 * math.log(0.7) + math.log(0.3)
        assert log_multinomial_likelihood((0.7, 0.3), CountVector((2, 1))) == pytest.approx(expected, abs=1e-15)


class TestOraclePosterior:

    def test_uninformative_returns_prior(self):
        exp = MultinomialExperiment.uninformative((0.2, 0.3, 0.5))
        assert oracle_posterior_general(CountVector((4, 0, 1)), exp, 0.37) == 0.37

    def test_matches_binary(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            pi = float(rng.uniform(0.5, 0.99))
            n = int(rng.integers(1, 16))
            k = int(rng.integers(0, n + 1))
            assert oracle_posterior_general(CountVector((k, n - k)), MultinomialExperiment.binary(pi), 0.5) == pytest.approx(
                oracle_posterior_binary(n, pi, k), abs=1e-12)

    def test_revealing_signal(self):
        exp = MultinomialExperiment((0.5, 0.5), (0.0, 1.0))
        assert oracle_posterior_general(CountVector((2, 1)), exp, 0.3) == 1.0

    def test_impossible_counts(self):
        exp = MultinomialExperiment((1.0, 0.0, 0.0), (0.0, 1.0, 0.0))
        with pytest.raises(ImpossibleEvent):
            oracle_posterior_general(CountVector((0, 0, 2)), exp, 0.5)


class TestMixtureRule:

    def test_single_experiment_is_oracle(self):
        exp = MultinomialExperiment((0.5, 0.3, 0.2), (0.2, 0.3, 0.5))
        rule = dm_rule_general(single(exp, 0.4), 5)
        for row in enumerate_count_vectors(5, 3):
            cv = CountVector(tuple(row))
            assert rule(cv) == pytest.approx(oracle_posterior_general(cv, exp, 0.4), abs=1e-12)

    def test_matches_binary_best_response(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            n = int(rng.integers(1, 13))
            pis = rng.uniform(0.5, 0.99, size=2)
            w = float(rng.uniform(0.05, 0.95))
            mix = GeneralMixture(
                support=tuple(MultinomialExperiment.binary(float(p)) for p in pis),
                weights=(w, 1.0 - w),
            )
            rule = dm_rule_general(mix, n)
            expected = dm_best_response(NatureMixtureFinite.from_precisions(pis, [w, 1.0 - w]), n).a
            got = [rule(CountVector((k, n - k))) for k in range(n + 1)]
            np.testing.assert_allclose(got, expected, rtol=0.0, atol=1e-12)

    @pytest.mark.parametrize("G", [MSE, LOG, generator_from_task_density(lambda p: 1.0 + p)],
                             ids=["mse", "log", "task-density"])
    def test_same_rule_for_every_loss(self, G):
        rng = np.random.default_rng(19)
        for _ in range(100):
            mix = random_mixture(rng)
            n = int(rng.integers(1, 9))
            K = enumerate_count_vectors(n, 3)
            cv = CountVector(tuple(K[rng.integers(0, K.shape[0])]))
            mu = mix.prior_mu
            ps = np.array([oracle_posterior_general(cv, e, mu) for e in mix.support])
            masses = np.array([
                w * (mu * math.exp(log_multinomial_likelihood(e.pi1, cv))
                     + (1.0 - mu) * math.exp(log_multinomial_likelihood(e.pi0, cv)))
                for e, w in zip(mix.support, mix.weights)
            ])
            expected = dm_rule_general(mix, n)(cv)
            assert bregman_mean_minimizer(G, ps, masses) == pytest.approx(expected, abs=1e-10)

            def expected_loss(a):
                return float(np.dot(masses, divergence(G, ps, np.full(2, a))))

            if ps.max() - ps.min() > 1e-9:
                best = optimize.minimize_scalar(expected_loss, bounds=(ps.min(), ps.max()), method='bounded',
                                                options={'xatol': 1e-12})
                assert best.x == pytest.approx(expected, abs=1e-6)

    def test_relabeling_symmetry(self):
        mix = GeneralMixture(
            support=(
                MultinomialExperiment.uninformative((0.4, 0.4, 0.2)),
                MultinomialExperiment((0.5, 0.2, 0.3), (0.2, 0.5, 0.3)),
            ),
            weights=(0.3, 0.7),
        )
        K = enumerate_count_vectors(6, 3)
        rule = dm_rule_general(mix, 6)
        swapped = K[:, [1, 0, 2]]
        np.testing.assert_allclose(rule.evaluate(K) + rule.evaluate(swapped), 1.0, atol=1e-12)


class TestGeneralRegret:

    def test_oracle_rule_has_zero_regret(self):
        exp = MultinomialExperiment((0.5, 0.3, 0.2), (0.2, 0.3, 0.5))
        oracle = lambda cv: oracle_posterior_general(cv, exp, 0.5)
        assert general_regret(single(exp), oracle, 6).value == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("G", [MSE, LOG], ids=["mse", "log"])
    def test_matches_binary_regret(self, G):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(1, 11))
            pi = float(rng.uniform(0.5, 0.99))
            beliefs = BeliefVector(n=n, a=rng.uniform(0.02, 0.98, size=n + 1))
            rule = lambda cv: float(beliefs.a[cv.counts[0]])
            est = general_regret(single(MultinomialExperiment.binary(pi)), rule, n, G)
            assert est.mode == 'exact'
            assert est.stderr == 0.0
            assert est.value == pytest.approx(exante_regret(beliefs, pi, G), abs=1e-12)

    def test_monte_carlo_agrees_with_exact(self):
        mix = GeneralMixture(
            support=(
                MultinomialExperiment.uninformative((1 / 3, 1 / 3, 1 / 3)),
                MultinomialExperiment((0.4, 0.3, 0.3), (0.3, 0.4, 0.3)),
            ),
            weights=(0.5, 0.5),
        )
        rule = dm_rule_general(mix, 50)
        exact = general_regret(mix, rule, 50, mode='exact')
        mc = general_regret(mix, rule, 50, mode='mc', samples=200_000, seed=42)
        assert mc.stderr > 0.0
        assert abs(mc.value - exact.value) <= 3 * mc.stderr

    def test_monte_carlo_agrees_on_random_mixtures(self):
        rng = np.random.default_rng(23)
        for case in range(100):
            mix = random_mixture(rng)
            n = int(rng.integers(2, 13))
            G = MSE if case % 2 == 0 else LOG
            rule = dm_rule_general(mix, n)
            exact = general_regret(mix, rule, n, G, mode='exact')
            mc = general_regret(mix, rule, n, G, mode='mc', samples=20_000, seed=case)
            assert mc.stderr > 0.0
            assert abs(mc.value - exact.value) <= 5 * mc.stderr

    def test_boundary_report_fails_in_both_modes(self):
        mix = single(MultinomialExperiment.binary(0.7))
        for mode in ('exact', 'mc'):
            with pytest.raises(DomainError):
                general_regret(mix, lambda cv: 0.0, 6, LOG, mode=mode, samples=2000, seed=1)
        assert general_regret(mix, lambda cv: 0.0, 6, MSE, mode='mc', samples=2000, seed=1).value > 0.0

    def test_monte_carlo_is_seeded(self):
        mix = single(MultinomialExperiment.binary(0.7))
        rule = dm_rule_general(mix, 30)
        a = general_regret(mix, lambda cv: 0.5, 30, mode='mc', samples=5000, seed=3)
        b = general_regret(mix, lambda cv: 0.5, 30, mode='mc', samples=5000, seed=3)
        assert a == b
        assert general_regret(mix, rule, 30, mode='mc', samples=5000, seed=3).value >= 0.0

    def test_size_limit(self):
        mix = single(MultinomialExperiment.binary(0.7))
        with pytest.raises(SizeLimit):
            general_regret(mix, lambda cv: 0.5, 201, mode='exact')
        assert general_regret(mix, dm_rule_general(mix, 201), 201, samples=2000).mode == 'mc'


class TestRateExperiment:

    @pytest.fixture(params=[((0.5, 0.5), (1.0, -1.0)), ((1 / 3, 1 / 3, 1 / 3), (1.0, -1.0, 0.0))],
                    ids=["two-signals", "three-signals"])
    def design(self, request):
        return request.param

    def _regrets(self, design, alpha):
        base, direction = design
        points = rate_experiment(base, direction, c=1.0, alpha=alpha, n_list=[25, 50, 100, 200])
        return {p.n: p.regret for p in points}

    def test_fast_shrinkage_collapses_to_prior(self, design):
        r = self._regrets(design, 1.0)
        assert r[200] / r[25] < 0.5

    def test_root_n_shrinkage_plateaus(self, design):
        r = self._regrets(design, 0.5)
        assert abs(r[200] - r[100]) / r[100] < 0.15
        assert r[200] > 0.3 * r[25]

    def test_slow_shrinkage_is_learned(self, design):
        r = self._regrets(design, 0.25)
        assert r[200] < r[25]

    def test_simplex_violation(self):
        with pytest.raises(SimplexViolation):
            rate_experiment((0.5, 0.5), (1.0, -1.0), c=3.0, alpha=0.5, n_list=[1])

    def test_direction_must_balance(self):
        with pytest.raises(ValueError):
            rate_experiment((0.5, 0.5), (1.0, 1.0))

    def test_clip_constant(self):
        assert clip_rate_constant((0.5, 0.5), (1.0, -1.0), 3.0, 0.5, 1) == pytest.approx(1.0)
        assert clip_rate_constant((0.5, 0.5), (1.0, -1.0), 0.5, 0.5, 1) == 0.5


class TestIdentification:

    def test_valid_set(self):
        validate_experiment_set([MultinomialExperiment.binary(0.5), MultinomialExperiment.binary(0.8)])

    def test_needs_one_uninformative(self):
        with pytest.raises(IdentificationError):
            validate_experiment_set([MultinomialExperiment.binary(0.8)])
        with pytest.raises(IdentificationError):
            validate_experiment_set([
                MultinomialExperiment.uninformative((0.5, 0.5)),
                MultinomialExperiment.uninformative((0.3, 0.7)),
            ])

    def test_flipped_experiment(self):
        flipped = MultinomialExperiment((0.2, 0.8), (0.8, 0.2))
        with pytest.raises(IdentificationError):
            validate_experiment_set([MultinomialExperiment.binary(0.5), MultinomialExperiment.binary(0.8), flipped])


class TestLemmaChecks:

    def test_kl(self):
        assert kl_divergence((0.5, 0.5), (0.5, 0.5)) == 0.0
        expected = 0.6 * math.log(1.5) + 0.4 * math.log(0.4 / 0.6)
        assert kl_divergence((0.6, 0.4), (0.4, 0.6)) == pytest.approx(expected, abs=1e-15)

    def test_uninformative_llr(self):
        check = lemma_checks(MultinomialExperiment.uninformative((0.3, 0.7)), (0.3, 0.7), 100)
        assert check.llr_mean == 0.0
        assert check.kl_target == 0.0
        assert check.llr_within_3se

    def test_llr_concentration(self):
        exp = MultinomialExperiment((0.6, 0.4), (0.4, 0.6))
        check = lemma_checks(exp, (0.6, 0.4), 5000, samples=10_000, seed=0)
        assert check.kl_target == pytest.approx(kl_divergence((0.6, 0.4), (0.4, 0.6)), abs=1e-15)
        assert check.llr_within_3se
        assert check.quad_bounded

    def test_quadratic_expansion_bounded(self):
        ratios = quadratic_expansion_check((1 / 3, 1 / 3, 1 / 3), (1.0, -0.5, -0.5))
        assert len(ratios) == 3
        assert max(ratios) / min(ratios) < 1.5

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            lemma_checks(MultinomialExperiment.binary(0.7), (0.7, 0.3), 10, samples=100)
