"""
Asymptotics Module

Learning under a fixed true precision: loss of the robust rule against
the oracle, misspecified regret, over/under-inference probabilities,
decay-rate fits, and the finite-to-limit convergence table.

All loss sums run in log space. Tail posteriors near 1 are handled
through their complements so nothing cancels catastrophically.
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
from scipy import special, stats
from sklearn.linear_model import LinearRegression

from .binary_game import BeliefVector, log_count_probabilities, oracle_posteriors, solve_structural
from .errors import DegenerateFit, RangeError
from .limit_game import DEFAULT_QUAD, LimitParams, QuadratureSpec, equilibrium_value, limit_posterior
from .utils import parallel_map

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
TIE_RTOL = 1e-12
EMBEDDING_GRID = 2001


class FitMode(str, Enum):
    SQRT_N = 'sqrt_n'
    LINEAR_N = 'linear_n'


@dataclass(frozen=True)
class TrueDGP:
    """Fixed data-generating precision"""
    pi_true: float

    def __post_init__(self):
        if not 0.5 < self.pi_true <= 1.0:
            raise RangeError(f"pi_true must lie in (1/2, 1], got {self.pi_true}")


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log(loss) against sqrt(n) or n"""
    slope: float
    intercept: float
    r_squared: float
    x_mode: FitMode

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'slope': self.slope,
            'intercept': self.intercept,
            'r_squared': self.r_squared,
            'x_mode': self.x_mode.value,
        }


@dataclass(frozen=True)
class InferenceRecord:
    """Probabilities of under-, over- and exact inference relative to the oracle"""
    p_under: float
    p_over: float
    p_tie: float

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {'p_under': self.p_under, 'p_over': self.p_over, 'p_tie': self.p_tie}


@dataclass
class MisspecificationRow:
    """One sample size of the misspecification sweep"""
    n: int
    L_n: float
    log_L_n: float
    L_oracle: float
    log_L_oracle: float
    R_mis: float
    p_under: float
    p_over: float

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'n': self.n,
            'L_n': self.L_n,
            'log_L_n': self.log_L_n,
            'L_oracle': self.L_oracle,
            'log_L_oracle': self.log_L_oracle,
            'R_mis': self.R_mis,
            'p_under': self.p_under,
            'p_over': self.p_over,
        }


@dataclass
class ConvergenceRow:
    """Finite equilibrium at n next to its limit targets"""
    n: int
    pi_star: float
    scaled_precision: float
    w: float
    value: float
    c_star: float
    w_star: float
    limit_value: float
    sup_distance: float

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'n': self.n,
            'pi_star': self.pi_star,
            'scaled_precision': self.scaled_precision,
            'w': self.w,
            'value': self.value,
            'c_star': self.c_star,
            'w_star': self.w_star,
            'limit_value': self.limit_value,
            'sup_distance': self.sup_distance,
        }


# ============================================================================
# Rules
# ============================================================================

def standardized_counts(n: int) -> np.ndarray:
    """x_k = (2k - n) / sqrt(n) for k = 0..n"""
    return (2.0 * np.arange(n + 1) - n) / math.sqrt(n)


def _limit_log_parts(z: np.ndarray, c: float, w: float):
    """(log a*(z), log(1 - a*(z))) without forming 1 - a*"""
    up = 2.0 * c * z - 2.0 * c * c
    down = -2.0 * c * z - 2.0 * c * c
    zero = np.zeros_like(z)
    den = special.logsumexp(np.stack([zero, up, down]), axis=0,
                            b=np.array([2.0 * (1.0 - w), w, w])[:, None])
    log_a = special.logsumexp(np.stack([zero, up]), axis=0, b=np.array([1.0 - w, w])[:, None]) - den
    log_c = special.logsumexp(np.stack([zero, down]), axis=0, b=np.array([1.0 - w, w])[:, None]) - den
    return log_a, log_c


def robust_rule_large_n(n: int, params: LimitParams) -> BeliefVector:
    """
    Limit-game rule at sample size n: a_k = a*((2k - n)/sqrt(n)).

    Args:
        n: Sample size (>= 1)
        params: Limit equilibrium

    Returns:
        BeliefVector with exact log complements
    """
    if n < 1:
        raise RangeError(f"Sample size must be >= 1, got {n}")
    z = standardized_counts(n)
    log_a, log_c = _limit_log_parts(z, params.c_star, params.w_star)
    return BeliefVector(n=n, a=np.clip(np.exp(log_a), 0.0, 1.0), log_complement=log_c)


def _oracle_logs(n: int, pi: float):
    """(log q_k, log(1 - q_k)) of the oracle posterior"""
    if pi >= 1.0:
        q = oracle_posteriors(n, pi)
        with np.errstate(divide='ignore'):
            return np.log(q), np.log(1.0 - q)
    llr = (2.0 * np.arange(n + 1) - n) * special.logit(pi)
    return -np.logaddexp(0.0, -llr), -np.logaddexp(0.0, llr)


def _rule_logs(rule: BeliefVector):
    with np.errstate(divide='ignore'):
        log_a = np.log(rule.a)
        log_c = rule.log_complement if rule.log_complement is not None else np.log1p(-rule.a)
    return log_a, log_c


def _log_abs_diff(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """log|e^x - e^y|"""
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    with np.errstate(invalid='ignore', divide='ignore'):
        out = hi + np.log(-np.expm1(lo - hi))
    return np.where(np.isneginf(hi) | (hi == lo), -np.inf, out)


def _check_rule(n: int, rule: BeliefVector) -> None:
    if rule.n != n:
        raise RangeError(f"Rule has {rule.n + 1} entries, sample size n={n} needs {n + 1}")


# ============================================================================
# Losses
# ============================================================================

def dm_loss_log(n: int, dgp: TrueDGP, rule: BeliefVector) -> float:
    """log of sum_k Binom(k; n, pi_true) (1 - a_k)^2"""
    _check_rule(n, rule)
    log_pmf = stats.binom.logpmf(np.arange(n + 1), n, dgp.pi_true)
    _, log_c = _rule_logs(rule)
    return float(special.logsumexp(log_pmf + 2.0 * log_c))


def dm_loss(n: int, dgp: TrueDGP, rule: BeliefVector) -> float:
    """
    Mean squared loss of the rule given theta = 1.

    Raises:
        RangeError: If the rule does not have n + 1 entries
    """
    return math.exp(dm_loss_log(n, dgp, rule))


def oracle_loss_log(n: int, dgp: TrueDGP) -> float:
    """log of the oracle's mean squared loss given theta = 1"""
    log_pmf = stats.binom.logpmf(np.arange(n + 1), n, dgp.pi_true)
    _, log_c = _oracle_logs(n, dgp.pi_true)
    with np.errstate(invalid='ignore'):
        return float(special.logsumexp(log_pmf + 2.0 * log_c))


def oracle_loss(n: int, dgp: TrueDGP) -> float:
    """Mean squared loss of the oracle posterior given theta = 1"""
    return math.exp(oracle_loss_log(n, dgp))


def misspec_regret_log(n: int, dgp: TrueDGP, rule: BeliefVector) -> float:
    """log of sum_k Pr(k | pi_true) (q_k - a_k)^2 with the state-symmetric marginal"""
    _check_rule(n, rule)
    log_q, log_cq = _oracle_logs(n, dgp.pi_true)
    log_a, log_ca = _rule_logs(rule)
    upper = np.arange(n + 1) > n / 2
    log_diff = np.where(upper, _log_abs_diff(log_ca, log_cq), _log_abs_diff(log_a, log_q))
    return float(special.logsumexp(log_count_probabilities(n, dgp.pi_true) + 2.0 * log_diff))


def misspec_regret(n: int, dgp: TrueDGP, rule: BeliefVector) -> float:
    """Regret of the rule when Nature's precision is pi_true"""
    return math.exp(misspec_regret_log(n, dgp, rule))


# ============================================================================
# Rates
# ============================================================================

def kl_bernoulli(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q)"""
    return float(special.rel_entr(p, q) + special.rel_entr(1.0 - p, 1.0 - q))


def robust_rate(params: LimitParams, dgp: TrueDGP) -> float:
    """Exponent Xi = 4 c* (2 pi_true - 1) of the robust loss in sqrt(n)"""
    return 4.0 * params.c_star * (2.0 * dgp.pi_true - 1.0)


def misspec_limit_constant(params: LimitParams, dgp: TrueDGP) -> float:
    """Limit of exp(Xi sqrt(n)) L_n"""
    c, w, pi = params.c_star, params.w_star, dgp.pi_true
    return ((1.0 - w) / w * math.exp(2.0 * c * c)) ** 2 * math.exp(32.0 * c * c * pi * (1.0 - pi))


def fit_decay_rate(
    ns: Sequence[int],
    losses: Optional[Sequence[float]] = None,
    mode: FitMode = FitMode.SQRT_N,
    log_losses: Optional[Sequence[float]] = None
) -> RateFit:
    """
    Fit log(loss) = intercept + slope * x with x = sqrt(n) or n.

    Pass ``log_losses`` for series that would underflow as plain floats.

    Args:
        ns: Sample sizes (at least 4)
        losses: Positive losses
        mode: sqrt_n or linear_n
        log_losses: Log losses, used instead of losses when given

    Returns:
        RateFit

    Raises:
        DegenerateFit: If a loss is zero, negative or not finite
    """
    mode = FitMode(mode)
    ns = np.asarray(ns, dtype=float)
    if ns.size < MIN_FIT_POINTS:
        raise ValueError(f"Rate fit needs at least {MIN_FIT_POINTS} points, got {ns.size}")

    if log_losses is not None:
        y = np.asarray(log_losses, dtype=float)
    else:
        values = np.asarray(losses, dtype=float)
        if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
            raise DegenerateFit("Losses must be positive and finite; pass log_losses for tiny values")
        y = np.log(values)
    if y.shape != ns.shape or np.any(~np.isfinite(y)):
        raise DegenerateFit("Log losses must be finite and match the sample sizes")

    x = np.sqrt(ns) if mode is FitMode.SQRT_N else ns
    model = LinearRegression().fit(x[:, None], y)
    r2 = float(np.clip(model.score(x[:, None], y), 0.0, 1.0))
    return RateFit(slope=float(model.coef_[0]), intercept=float(model.intercept_), r_squared=r2, x_mode=mode)


# ============================================================================
# Inference direction
# ============================================================================

def inference_classification(n: int, dgp: TrueDGP, rule: BeliefVector) -> InferenceRecord:
    """
    Probability, given theta = 1, that the rule moves less (under), more
    (over) or exactly as far from 1/2 as the oracle.

    Above n/2 the distances are compared through the complements, below
    through the raw posteriors, so tails that round to 0 or 1 still order.
    """
    _check_rule(n, rule)
    k = np.arange(n + 1)
    log_pmf = stats.binom.logpmf(k, n, dgp.pi_true)
    pmf = np.exp(log_pmf - special.logsumexp(log_pmf))
    log_q, log_cq = _oracle_logs(n, dgp.pi_true)
    log_a, log_ca = _rule_logs(rule)
    q = np.exp(log_q)
    a = rule.a

    # Signed: positive when the rule is closer to 1/2 than the oracle
    closer = np.abs(q - 0.5) - np.abs(a - 0.5)
    scale = np.maximum(np.abs(q - 0.5), np.abs(a - 0.5))

    upper = (k > n / 2) & (a > 0.5) & (q > 0.5)
    lower = (k < n / 2) & (a < 0.5) & (q < 0.5)
    with np.errstate(invalid='ignore'):
        closer = np.where(upper, np.exp(log_ca) - np.exp(log_cq), closer)
        closer = np.where(upper & (closer == 0.0), np.sign(log_ca - log_cq), closer)
        closer = np.where(lower, a - q, closer)
        closer = np.where(lower & (closer == 0.0), np.sign(log_a - log_q), closer)
    scale = np.where(upper, np.maximum(np.exp(log_ca), np.exp(log_cq)), scale)
    scale = np.where(lower, np.maximum(a, q), scale)

    tie = np.abs(closer) <= TIE_RTOL * scale
    under = ~tie & (closer > 0)
    over = ~tie & (closer < 0)
    return InferenceRecord(
        p_under=math.fsum(pmf[under]),
        p_over=math.fsum(pmf[over]),
        p_tie=math.fsum(pmf[tie]),
    )


# ============================================================================
# Sweeps
# ============================================================================

def misspecification_table(
    dgp: TrueDGP,
    n_list: Sequence[int],
    params: LimitParams,
    max_workers: Optional[int] = None
) -> List[MisspecificationRow]:
    """Loss, oracle loss, misspecified regret and inference direction per n"""
    def row(n: int) -> MisspecificationRow:
        rule = robust_rule_large_n(n, params)
        log_l = dm_loss_log(n, dgp, rule)
        log_o = oracle_loss_log(n, dgp)
        inference = inference_classification(n, dgp, rule)
        return MisspecificationRow(
            n=n,
            L_n=math.exp(log_l),
            log_L_n=log_l,
            L_oracle=math.exp(log_o),
            log_L_oracle=log_o,
            R_mis=misspec_regret(n, dgp, rule),
            p_under=inference.p_under,
            p_over=inference.p_over,
        )

    return parallel_map(row, n_list, max_workers=max_workers)


def _quantile_fraction(z: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """
    Position of z inside [lo, hi] on the Phi scale.

    Intervals on one side of zero use log tail masses measured from the end
    nearer zero, so nodes whose Phi rounds to 0 or 1 still separate.
    """
    upper = lo >= 0.0
    lower = hi <= 0.0
    near = np.where(upper, lo, np.where(lower, -hi, 0.0))
    far = np.where(upper, hi, np.where(lower, -lo, 1.0))
    mid = np.where(upper, z, np.where(lower, -z, 0.5))
    log_near = stats.norm.logsf(near)
    with np.errstate(invalid='ignore', divide='ignore'):
        frac = np.expm1(stats.norm.logsf(mid) - log_near) / np.expm1(stats.norm.logsf(far) - log_near)
        frac = np.where(lower, 1.0 - frac, frac)
        straddle = (stats.norm.cdf(z) - stats.norm.cdf(lo)) / (stats.norm.cdf(hi) - stats.norm.cdf(lo))
    return np.where(upper | lower, frac, straddle)


def embedding_distance(beliefs: BeliefVector, params: LimitParams, grid_size: int = EMBEDDING_GRID) -> float:
    """
    Sup distance between embedded finite beliefs and the limit posterior.

    Count k sits at the quantile Phi(z_k), z_k = (2k - n)/sqrt(n). Between
    adjacent counts the beliefs are interpolated linearly in that quantile
    and compared with a*(z) at interior points of each interval.
    """
    n = beliefs.n
    z_nodes = standardized_counts(n)
    per_interval = max(4, grid_size // n)
    s = np.linspace(0.0, 1.0, per_interval + 2)

    lo, hi = z_nodes[:-1, None], z_nodes[1:, None]
    z = lo + s[None, :] * (hi - lo)
    t = np.clip(_quantile_fraction(z, lo, hi), 0.0, 1.0)
    a = np.asarray(beliefs.a, dtype=float)
    finite = a[:-1, None] + t * (a[1:, None] - a[:-1, None])
    limit = limit_posterior(z, params.c_star, params.w_star)
    return float(np.max(np.abs(finite - limit)))


def convergence_table(
    n_list: Sequence[int],
    params: LimitParams,
    quad: QuadratureSpec = DEFAULT_QUAD,
    max_workers: Optional[int] = None
) -> List[ConvergenceRow]:
    """
    Structural finite equilibria for each n next to their limit targets.

    Args:
        n_list: Ascending sample sizes
        params: Limit equilibrium
        quad: Quadrature for the limit value
        max_workers: Worker cap for the sweep

    Returns:
        One ConvergenceRow per n
    """
    n_list = list(n_list)
    if n_list != sorted(n_list):
        raise ValueError(f"n_list must be ascending, got {n_list}")

    limit_value = equilibrium_value(params, quad)
    equilibria = parallel_map(solve_structural, n_list, max_workers=max_workers)

    rows = []
    for n, eq in zip(n_list, equilibria):
        rows.append(ConvergenceRow(
            n=n,
            pi_star=eq.pi_star,
            scaled_precision=math.sqrt(n) * (eq.pi_star - 0.5),
            w=eq.w,
            value=eq.value,
            c_star=params.c_star,
            w_star=params.w_star,
            limit_value=limit_value,
            sup_distance=embedding_distance(eq.beliefs, params),
        ))
        logger.debug(f"n={n}: sqrt(n)(pi*-1/2)={rows[-1].scaled_precision:.6f} value={eq.value:.6g}")
    return rows
