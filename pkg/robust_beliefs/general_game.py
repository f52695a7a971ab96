"""
General Game Module

Finite signal sets, general priors and general Bregman losses:
multinomial experiments, oracle and mixture-Bayes rules over count
vectors, exact and Monte Carlo regret, the local-alternative rate
experiment, and checks of the likelihood-ratio and KL expansions.
"""

import math
import logging
import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .bregman import MSE, BregmanGenerator, divergence
from .errors import (
    DomainError,
    IdentificationError,
    ImpossibleEvent,
    SimplexViolation,
    SizeLimit,
    ZeroMassCount,
)

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12
EXACT_MAX_SIGNALS = 4
EXACT_MAX_N = 200
DEFAULT_MC_SAMPLES = 200_000
MIN_LEMMA_SAMPLES = 10_000
DEFAULT_EPS_LIST = (0.02, 0.01, 0.005)


# ============================================================================
# Domain types
# ============================================================================

def _as_distribution(values: Sequence[float], label: str) -> Tuple[float, ...]:
    dist = np.asarray(values, dtype=float)
    if dist.ndim != 1 or dist.size < 2:
        raise ValueError(f"{label} must be a distribution over at least 2 signals")
    if np.any(dist < 0.0) or abs(dist.sum() - 1.0) > SIMPLEX_TOL:
        raise SimplexViolation(f"{label} is not in the simplex: {dist.tolist()}")
    return tuple(float(x) for x in dist)


@dataclass(frozen=True)
class MultinomialExperiment:
    """Signal distributions pi1 (state 1) and pi0 (state 0) over a finite set"""
    pi1: Tuple[float, ...]
    pi0: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'pi1', _as_distribution(self.pi1, 'pi1'))
        object.__setattr__(self, 'pi0', _as_distribution(self.pi0, 'pi0'))
        if len(self.pi1) != len(self.pi0):
            raise ValueError("pi1 and pi0 must share the signal set")

    @classmethod
    def uninformative(cls, dist: Sequence[float]) -> 'MultinomialExperiment':
        return cls(tuple(dist), tuple(dist))

    @classmethod
    def binary(cls, pi: float) -> 'MultinomialExperiment':
        """Symmetric binary experiment: signal 0 is 'high'"""
        return cls((pi, 1.0 - pi), (1.0 - pi, pi))

    @property
    def signals(self) -> int:
        return len(self.pi1)

    @property
    def is_uninformative(self) -> bool:
        return bool(np.max(np.abs(np.subtract(self.pi1, self.pi0))) <= SIMPLEX_TOL)

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {'pi1': list(self.pi1), 'pi0': list(self.pi0)}


@dataclass(frozen=True)
class GeneralMixture:
    """Nature's finitely supported mixture over experiments, with the state prior"""
    support: Tuple[MultinomialExperiment, ...]
    weights: Tuple[float, ...]
    prior_mu: float = 0.5

    def __post_init__(self):
        if len(self.support) != len(self.weights) or not self.support:
            raise ValueError("Support and weights must be non-empty and of equal length")
        if any(w < 0.0 for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"Invalid mixture weights {self.weights}")
        if not 0.0 < self.prior_mu < 1.0:
            raise ValueError(f"prior_mu must lie in (0, 1), got {self.prior_mu}")
        if len({e.signals for e in self.support}) != 1:
            raise ValueError("All experiments must share the signal set")

    @property
    def signals(self) -> int:
        return self.support[0].signals

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'support': [e.to_dict() for e in self.support],
            'weights': list(self.weights),
            'prior_mu': self.prior_mu,
        }


@dataclass(frozen=True)
class CountVector:
    """Signal counts K_s; n is their total"""
    counts: Tuple[int, ...]

    def __post_init__(self):
        if any(int(k) != k or k < 0 for k in self.counts):
            raise ValueError(f"Counts must be nonnegative integers: {self.counts}")
        object.__setattr__(self, 'counts', tuple(int(k) for k in self.counts))

    @property
    def n(self) -> int:
        return sum(self.counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=float)


@dataclass(frozen=True)
class RegretEstimate:
    """Regret value with its Monte Carlo standard error (0 when exact)"""
    value: float
    stderr: float
    mode: str
    samples: int = 0

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {'value': self.value, 'stderr': self.stderr, 'mode': self.mode, 'samples': self.samples}


@dataclass(frozen=True)
class RateExperimentPoint:
    alpha: float
    n: int
    regret: float
    stderr: float
    mode: str

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {'alpha': self.alpha, 'n': self.n, 'regret': self.regret, 'stderr': self.stderr, 'mode': self.mode}


@dataclass
class LemmaCheck:
    """Log-likelihood-ratio concentration and KL quadratic-expansion diagnostics"""
    llr_mean: float
    llr_stderr: float
    kl_target: float
    llr_within_3se: bool
    quad_ratios: List[float] = field(default_factory=list)
    quad_bounded: bool = True

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'llr_mean': self.llr_mean,
            'llr_stderr': self.llr_stderr,
            'kl_target': self.kl_target,
            'llr_within_3se': self.llr_within_3se,
            'quad_ratios': self.quad_ratios,
            'quad_bounded': self.quad_bounded,
        }


# ============================================================================
# Likelihoods and posteriors
# ============================================================================

def enumerate_count_vectors(n: int, signals: int) -> np.ndarray:
    """
    All count vectors with the given total, one per row.

    Stars and bars: each choice of signals-1 bar positions among
    n + signals - 1 slots is one vector.
    """
    if n < 0 or signals < 1:
        raise ValueError(f"Need n >= 0 and at least one signal, got n={n}, signals={signals}")
    slots = n + signals - 1
    rows = []
    for bars in itertools.combinations(range(slots), signals - 1):
        edges = (-1,) + bars + (slots,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(signals)])
    return np.array(rows, dtype=np.int64)


def log_multinomial_coefficient(counts) -> np.ndarray:
    """log(n! / prod_s K_s!) for one count vector or a matrix of them"""
    k = np.asarray(counts, dtype=float)
    return special.gammaln(k.sum(axis=-1) + 1.0) - special.gammaln(k + 1.0).sum(axis=-1)


def log_multinomial_likelihood(dist: Sequence[float], counts) -> float:
    """
    Likelihood kernel sum_s K_s log dist(s), without the multinomial coefficient.

    Returns -inf when a signal with positive count has zero probability.
    """
    k = counts.as_array() if isinstance(counts, CountVector) else np.asarray(counts, dtype=float)
    result = special.xlogy(k, np.asarray(dist, dtype=float)).sum(axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def _log_odds_general(K: np.ndarray, exp: MultinomialExperiment, mu: float):
    l1 = np.atleast_1d(log_multinomial_likelihood(exp.pi1, K))
    l0 = np.atleast_1d(log_multinomial_likelihood(exp.pi0, K))
    return l1, l0, math.log(mu) - math.log1p(-mu)


def _oracle_vector(K: np.ndarray, exp: MultinomialExperiment, mu: float) -> np.ndarray:
    """Oracle posteriors for each row of K; nan on rows impossible in both states"""
    if exp.is_uninformative:
        return np.full(K.shape[0], mu)
    l1, l0, prior = _log_odds_general(K, exp, mu)
    with np.errstate(invalid='ignore'):
        q = special.expit(prior + l1 - l0)
    q = np.where(np.isneginf(l0) & np.isfinite(l1), 1.0, q)
    q = np.where(np.isneginf(l1) & np.isfinite(l0), 0.0, q)
    return np.where(np.isneginf(l1) & np.isneginf(l0), np.nan, q)


def oracle_posterior_general(counts: CountVector, exp: MultinomialExperiment, mu: float) -> float:
    """
    Posterior of state 1 for an oracle who knows the experiment.

    Raises:
        ImpossibleEvent: If the counts have zero likelihood in both states
    """
    q = _oracle_vector(counts.as_array()[None, :], exp, mu)[0]
    if math.isnan(q):
        raise ImpossibleEvent(f"Counts {counts.counts} are impossible under both states")
    return float(q)


def kl_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """D_KL(p || q) over a finite signal set"""
    return float(np.sum(special.rel_entr(np.asarray(p, dtype=float), np.asarray(q, dtype=float))))


# ============================================================================
# Mixture-Bayes rule
# ============================================================================

@dataclass(frozen=True)
class GeneralBeliefRule:
    """
    Mixture-Bayes posterior over count vectors.

    a(K) = sum_i w_i m_i(K) q_i(K) / sum_i w_i m_i(K), with m_i the
    state-averaged likelihood of experiment i. Counts with zero mass under
    every experiment get the prior.
    """
    mixture: GeneralMixture
    n: int
    strict: bool = False

    def evaluate(self, K) -> np.ndarray:
        """Beliefs for each row of a count matrix"""
        K = np.atleast_2d(np.asarray(K, dtype=float))
        mix = self.mixture
        log_mu, log_1mu = math.log(mix.prior_mu), math.log1p(-mix.prior_mu)
        with np.errstate(divide='ignore'):
            log_w = np.log(np.asarray(mix.weights))[:, None]
        l1 = np.stack([np.atleast_1d(log_multinomial_likelihood(e.pi1, K)) for e in mix.support])
        l0 = np.stack([np.atleast_1d(log_multinomial_likelihood(e.pi0, K)) for e in mix.support])

        with np.errstate(invalid='ignore', divide='ignore'):
            num = special.logsumexp(log_w + log_mu + l1, axis=0)
            alt = special.logsumexp(log_w + log_1mu + l0, axis=0)
        den = np.logaddexp(num, alt)

        dead = ~np.isfinite(den)
        if np.any(dead):
            if self.strict:
                raise ZeroMassCount(f"{int(dead.sum())} count vectors have zero mass under the mixture")
            logger.debug(f"{int(dead.sum())} zero-mass count vectors set to the prior")
        with np.errstate(invalid='ignore'):
            return np.where(dead, mix.prior_mu, np.exp(num - den))

    def __call__(self, counts: CountVector) -> float:
        return float(self.evaluate(counts.as_array())[0])


def dm_rule_general(mix: GeneralMixture, n: int, strict: bool = False) -> GeneralBeliefRule:
    """
    DM best response to a general mixture; identical for every Bregman loss.

    Args:
        mix: Nature's mixture
        n: Sample size
        strict: Raise on zero-mass count vectors instead of using the prior

    Returns:
        Immutable rule
    """
    return GeneralBeliefRule(mixture=mix, n=n, strict=strict)


# ============================================================================
# Regret
# ============================================================================

def _exact_regret(mix: GeneralMixture, rule, n: int, G: BregmanGenerator) -> float:
    K = enumerate_count_vectors(n, mix.signals)
    beliefs = rule.evaluate(K) if isinstance(rule, GeneralBeliefRule) else np.array([rule(CountVector(tuple(k))) for k in K])
    log_coef = log_multinomial_coefficient(K)
    mu = mix.prior_mu

    total = 0.0
    for exp, w in zip(mix.support, mix.weights):
        if w == 0.0:
            continue
        l1 = np.atleast_1d(log_multinomial_likelihood(exp.pi1, K))
        l0 = np.atleast_1d(log_multinomial_likelihood(exp.pi0, K))
        with np.errstate(invalid='ignore'):
            prob = np.exp(log_coef + np.logaddexp(math.log(mu) + l1, math.log1p(-mu) + l0))
        live = prob > 0.0
        q = _oracle_vector(K, exp, mu)
        d = divergence(G, q[live], beliefs[live])
        if np.any(np.isinf(d)):
            raise DomainError("Infinite divergence on a count vector with positive probability")
        total += w * float(np.sum(prob[live] * d))
    return total


def _mc_regret(mix: GeneralMixture, rule, n: int, G: BregmanGenerator, samples: int, seed: int) -> Tuple[float, float]:
    groups = [(i, theta) for i in range(len(mix.support)) for theta in (1, 0)]
    probs = [mix.weights[i] * (mix.prior_mu if theta else 1.0 - mix.prior_mu) for i, theta in groups]

    streams = np.random.SeedSequence(seed).spawn(len(groups) + 1)
    sizes = np.random.default_rng(streams[0]).multinomial(samples, probs)

    losses = []
    for (i, theta), size, stream in zip(groups, sizes, streams[1:]):
        if size == 0:
            continue
        exp = mix.support[i]
        K = np.random.default_rng(stream).multinomial(n, exp.pi1 if theta else exp.pi0, size=size)
        beliefs = rule.evaluate(K) if isinstance(rule, GeneralBeliefRule) else np.array([rule(CountVector(tuple(k))) for k in K])
        d = divergence(G, _oracle_vector(K, exp, mix.prior_mu), beliefs)
        if np.any(np.isinf(d)):
            raise DomainError("Infinite divergence on a sampled count vector")
        losses.append(d)

    draws = np.concatenate(losses)
    return float(draws.mean()), float(draws.std(ddof=1) / math.sqrt(draws.size))


def general_regret(
    mix: GeneralMixture,
    rule,
    n: int,
    G: BregmanGenerator = MSE,
    mode: str = 'auto',
    samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0
) -> RegretEstimate:
    """
    Ex-ante regret E[B_G(q_oracle(K; pi) || a(K))] under the mixture.

    Args:
        mix: Nature's mixture
        rule: GeneralBeliefRule or any callable CountVector -> [0, 1]
        n: Sample size
        G: Generator
        mode: 'exact', 'mc' or 'auto' (exact when the enumeration is small)
        samples: Monte Carlo sample count
        seed: Monte Carlo seed

    Returns:
        RegretEstimate

    Raises:
        SizeLimit: If exact mode is requested beyond the enumeration limits
        DomainError: If a count with positive probability has infinite divergence
    """
    too_big = mix.signals > EXACT_MAX_SIGNALS or n > EXACT_MAX_N
    if mode == 'auto':
        mode = 'mc' if too_big else 'exact'
    if mode == 'exact':
        if too_big:
            raise SizeLimit(
                f"Exact enumeration limited to {EXACT_MAX_SIGNALS} signals and n <= {EXACT_MAX_N} "
                f"(got {mix.signals} signals, n={n}); use mode='mc'"
            )
        return RegretEstimate(value=_exact_regret(mix, rule, n, G), stderr=0.0, mode='exact')
    if mode == 'mc':
        value, stderr = _mc_regret(mix, rule, n, G, samples, seed)
        return RegretEstimate(value=value, stderr=stderr, mode='mc', samples=samples)
    raise ValueError(f"Unknown regret mode {mode!r}")


# ============================================================================
# Rate experiment
# ============================================================================

def _check_direction(base: np.ndarray, direction: np.ndarray) -> None:
    if base.shape != direction.shape:
        raise ValueError("base and direction must have the same length")
    if abs(direction.sum()) > SIMPLEX_TOL:
        raise ValueError(f"direction must sum to 0, got {direction.sum()!r}")


def clip_rate_constant(base: Sequence[float], direction: Sequence[float], c: float,
                       alpha: float, n_min: int) -> float:
    """Largest constant <= c keeping base +- (c/2) n_min^-alpha direction in the simplex"""
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    _check_direction(base, direction)
    step = 0.5 * n_min ** (-alpha)
    moving = np.abs(direction) > 0
    if not np.any(moving):
        return c
    # Both base + delta and base - delta must stay nonnegative
    limit = float(np.min(base[moving] / (step * np.abs(direction[moving]))))
    if c > limit:
        logger.warning(f"Rate constant {c} clipped to {limit:.6g} to stay in the simplex at n={n_min}")
        return limit
    return c


def rate_experiment(
    base: Sequence[float],
    direction: Sequence[float],
    c: float = 1.0,
    alpha: float = 0.5,
    n_list: Sequence[int] = (25, 50, 100, 200),
    G: BregmanGenerator = MSE,
    mu: float = 0.5,
    mode: str = 'auto',
    samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0
) -> List[RateExperimentPoint]:
    """
    Regret of the mixture-Bayes rule against the local two-point mixture.

    For each n Nature mixes equally between (base, base) and
    (base + delta_n, base - delta_n), delta_n = (c/2) n^-alpha direction.

    Raises:
        SimplexViolation: If a perturbed distribution leaves the simplex
    """
    base_arr = _as_distribution(base, 'base')
    direction_arr = np.asarray(direction, dtype=float)
    _check_direction(np.asarray(base_arr), direction_arr)

    points = []
    for n in n_list:
        delta = 0.5 * c * n ** (-alpha) * direction_arr
        up, down = np.asarray(base_arr) + delta, np.asarray(base_arr) - delta
        if np.any(up < -SIMPLEX_TOL) or np.any(down < -SIMPLEX_TOL):
            raise SimplexViolation(f"Perturbation at n={n} leaves the simplex (c={c}, alpha={alpha})")
        informative = MultinomialExperiment(tuple(np.clip(up, 0.0, None)), tuple(np.clip(down, 0.0, None)))
        mix = GeneralMixture(
            support=(MultinomialExperiment.uninformative(base_arr), informative),
            weights=(0.5, 0.5),
            prior_mu=mu,
        )
        estimate = general_regret(mix, dm_rule_general(mix, n), n, G, mode=mode, samples=samples, seed=seed)
        logger.debug(f"alpha={alpha} n={n}: regret={estimate.value:.6g} ({estimate.mode})")
        points.append(RateExperimentPoint(alpha=alpha, n=n, regret=estimate.value,
                                          stderr=estimate.stderr, mode=estimate.mode))
    return points


# ============================================================================
# Identification and lemma checks
# ============================================================================

class ExperimentSetValidator:
    """Checks that an experiment set is identified"""

    @staticmethod
    def validate(experiments: Sequence[MultinomialExperiment]) -> Tuple[bool, Optional[str]]:
        """
        Require a unique uninformative experiment and, for every pair, that
        each state's own distribution is KL-closer than the opposite one.

        Returns:
            (is_valid, error_message)
        """
        uninformative = [e for e in experiments if e.is_uninformative]
        if len(uninformative) != 1:
            return False, f"Expected exactly one uninformative experiment, found {len(uninformative)}"

        for e in experiments:
            for other in experiments:
                if kl_divergence(e.pi1, other.pi1) > kl_divergence(e.pi1, other.pi0) + SIMPLEX_TOL:
                    return False, f"State-1 distribution {e.pi1} is closer to state 0 of {other.to_dict()}"
                if kl_divergence(e.pi0, other.pi0) > kl_divergence(e.pi0, other.pi1) + SIMPLEX_TOL:
                    return False, f"State-0 distribution {e.pi0} is closer to state 1 of {other.to_dict()}"
        return True, None


def validate_experiment_set(experiments: Sequence[MultinomialExperiment]) -> None:
    """
    Convenience function for identification checks.

    Raises:
        IdentificationError: If the set is not identified
    """
    ok, message = ExperimentSetValidator.validate(experiments)
    if not ok:
        raise IdentificationError(message)


def quadratic_expansion_check(
    center: Sequence[float],
    direction: Sequence[float],
    eps_list: Sequence[float] = DEFAULT_EPS_LIST
) -> List[float]:
    """
    |KL(center || center + eps d) - chi-square/2| / ||eps d||_1^3 for each eps.

    A bounded sequence confirms the cubic remainder of the expansion.
    """
    center = np.asarray(center, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if np.any(center <= 0.0):
        raise ValueError("Expansion center must be strictly positive")
    ratios = []
    for eps in eps_list:
        moved = center + eps * direction
        quad = 0.5 * float(np.sum((moved - center) ** 2 / center))
        size = float(np.sum(np.abs(moved - center)))
        if size == 0.0:
            continue
        ratios.append(abs(kl_divergence(center, moved) - quad) / size ** 3)
    return ratios


def lemma_checks(
    exp: MultinomialExperiment,
    pi_true: Sequence[float],
    n: int,
    samples: int = MIN_LEMMA_SAMPLES,
    seed: int = 0
) -> LemmaCheck:
    """
    Monte Carlo check of LLR concentration plus the KL expansion check.

    The normalized log-likelihood ratio (1/n) log L(pi1; K)/L(pi0; K)
    under K ~ Multinomial(n, pi_true) should average
    KL(pi_true || pi0) - KL(pi_true || pi1).
    """
    if samples < MIN_LEMMA_SAMPLES:
        raise ValueError(f"lemma_checks needs at least {MIN_LEMMA_SAMPLES} samples, got {samples}")
    truth = np.asarray(_as_distribution(pi_true, 'pi_true'))
    target = kl_divergence(truth, exp.pi0) - kl_divergence(truth, exp.pi1)

    K = np.random.default_rng(seed).multinomial(n, truth, size=samples)
    llr = (special.xlogy(K, np.asarray(exp.pi1)) - special.xlogy(K, np.asarray(exp.pi0))).sum(axis=1) / n
    mean = float(llr.mean())
    stderr = float(llr.std(ddof=1) / math.sqrt(samples))
    within = abs(mean - target) <= max(3.0 * stderr, 1e-12)

    direction = np.subtract(exp.pi1, exp.pi0)
    ratios = quadratic_expansion_check(truth, direction) if np.all(truth > 0) else []
    bounded = all(r <= 2.0 * ratios[0] + 1e-12 for r in ratios) if ratios else True

    return LemmaCheck(
        llr_mean=mean,
        llr_stderr=stderr,
        kl_target=target,
        llr_within_3se=bool(within),
        quad_ratios=ratios,
        quad_bounded=bool(bounded),
    )
