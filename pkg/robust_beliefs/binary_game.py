"""
Binary Game Module

Finite-sample regret game with symmetric binary signals and a uniform
prior over the state. Provides count probabilities, oracle posteriors,
ex-ante regret, best responses for both players, the structural and
double-oracle equilibrium solvers, and closed-form checks for n = 1, 2, 3.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special, stats

from .bregman import MSE, BregmanGenerator, GeneratorKind, divergence
from .errors import DomainError, IterationLimit, RangeError, ZeroMassCount
from .utils import bisect_root, local_maxima, parallel_map

logger = logging.getLogger(__name__)

# Counts above this size are handled in log space
LOG_DOMAIN_THRESHOLD = 60

NATURE_GRID_SIZE = 256
REFINE_XTOL = 1e-10
TIE_TOL = 1e-12

# Structural solver
WEIGHT_XTOL = 1e-15
PRECISION_XTOL = 1e-13
PRECISION_FLOOR = 1e-4
BOUNDARY_STEP = 1e-6

# Double oracle
DO_MAX_OUTER = 200
MW_ITERATIONS = 300
NEW_ATOM_WEIGHT = 1e-2
SUPPORT_MERGE_TOL = 1e-12
ACTIVE_WEIGHT = 1e-9

VERIFY_GRID_SIZE = 2001


# ============================================================================
# Domain types
# ============================================================================

@dataclass(frozen=True)
class BinaryExperiment:
    """Symmetric binary experiment with precision pi in [1/2, 1]"""
    pi: float

    def __post_init__(self):
        if not 0.5 <= self.pi <= 1.0:
            raise RangeError(f"Precision must lie in [1/2, 1], got {self.pi}")


@dataclass(frozen=True)
class NatureMixtureFinite:
    """Finitely supported mixed strategy of Nature over binary experiments"""
    support: Tuple[BinaryExperiment, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.weights) or not self.support:
            raise ValueError("Support and weights must be non-empty and of equal length")
        if any(w < 0.0 for w in self.weights):
            raise ValueError(f"Mixture weights must be nonnegative: {self.weights}")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"Mixture weights must sum to 1, got {math.fsum(self.weights)!r}")
        pis = [e.pi for e in self.support]
        if len(set(pis)) != len(pis):
            raise ValueError(f"Support entries must be distinct: {pis}")

    @classmethod
    def from_precisions(cls, pis: Sequence[float], weights: Sequence[float]) -> 'NatureMixtureFinite':
        """Build a mixture from raw precisions, normalizing the weights"""
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        w = w / w.sum()
        return cls(
            support=tuple(BinaryExperiment(float(p)) for p in pis),
            weights=tuple(float(x) for x in w),
        )

    @classmethod
    def two_point(cls, pi: float, w: float) -> 'NatureMixtureFinite':
        """Uninformative experiment with weight 1-w, precision pi with weight w"""
        return cls.from_precisions([0.5, pi], [1.0 - w, w])

    @property
    def precisions(self) -> np.ndarray:
        return np.array([e.pi for e in self.support])

    @property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights)

    @property
    def informative_weight(self) -> float:
        """Total mass on informative experiments"""
        return float(sum(w for e, w in zip(self.support, self.weights) if e.pi > 0.5))

    @property
    def informative_precision(self) -> float:
        """Weighted mean precision of the informative atoms (nan when there are none)"""
        mass = self.informative_weight
        if mass <= 0.0:
            return float('nan')
        return float(sum(w * e.pi for e, w in zip(self.support, self.weights) if e.pi > 0.5) / mass)

    def pruned(self, threshold: float = ACTIVE_WEIGHT) -> 'NatureMixtureFinite':
        """Drop atoms whose weight is below threshold"""
        keep = [(e.pi, w) for e, w in zip(self.support, self.weights) if w > threshold]
        return NatureMixtureFinite.from_precisions([p for p, _ in keep], [w for _, w in keep])

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'support': [e.pi for e in self.support],
            'weights': list(self.weights),
        }


@dataclass(frozen=True, eq=False)
class BeliefVector:
    """
    DM strategy in the finite game: one posterior per high-signal count.

    ``log_complement`` optionally carries log(1 - a_k) computed without
    cancellation, for tails where a_k rounds to 1.
    """
    n: int
    a: np.ndarray
    log_complement: Optional[np.ndarray] = None
    flagged: Tuple[int, ...] = ()

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape != (self.n + 1,):
            raise RangeError(f"Belief vector for n={self.n} needs {self.n + 1} entries, got {a.shape}")
        if np.any((a < 0.0) | (a > 1.0)):
            raise RangeError("Beliefs must lie in [0, 1]")
        object.__setattr__(self, 'a', a)

    @property
    def complement(self) -> np.ndarray:
        """1 - a_k, exact in the upper tail when log_complement is known"""
        if self.log_complement is not None:
            return np.exp(self.log_complement)
        return 1.0 - self.a

    @property
    def symmetry_error(self) -> float:
        """max_k |a_k + a_{n-k} - 1|"""
        return float(np.max(np.abs(self.a + self.a[::-1] - 1.0)))

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.a) >= -1e-15))

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        result = {'n': self.n, 'a': self.a.tolist()}
        if self.flagged:
            result['zero_mass_counts'] = list(self.flagged)
        return result


@dataclass
class EquilibriumResiduals:
    """Residuals of the equilibrium conditions; all nonnegative"""
    foc_max_abs: float
    indifference_abs: float
    local_opt_abs: float
    duality_gap: float
    boundary: bool = False

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'foc_max_abs': self.foc_max_abs,
            'indifference_abs': self.indifference_abs,
            'local_opt_abs': self.local_opt_abs,
            'duality_gap': self.duality_gap,
            'boundary': self.boundary,
        }


@dataclass
class FiniteEquilibrium:
    """Solved finite game: Nature's mixture, DM beliefs, value and residuals"""
    mixture: NatureMixtureFinite
    beliefs: BeliefVector
    value: float
    residuals: EquilibriumResiduals
    method: str
    iterations: int = 0

    @property
    def n(self) -> int:
        return self.beliefs.n

    @property
    def pi_star(self) -> float:
        return self.mixture.informative_precision

    @property
    def w(self) -> float:
        return self.mixture.informative_weight

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'n': self.n,
            'method': self.method,
            'pi_star': self.pi_star,
            'w': self.w,
            'value': self.value,
            'mixture': self.mixture.to_dict(),
            'beliefs': self.beliefs.to_dict(),
            'residuals': self.residuals.to_dict(),
            'iterations': self.iterations,
        }


@dataclass
class OptimalityDiagnostics:
    """Grid verification of an equilibrium from Nature's side"""
    grid: np.ndarray
    regrets: np.ndarray
    peak_locations: List[float]
    max_excess: float
    support_regret: float
    excess_over_support: float
    indifference_deviation: float

    @property
    def n_local_maxima(self) -> int:
        return len(self.peak_locations)

    @property
    def is_saddle(self) -> bool:
        return self.max_excess <= 1e-6 and self.excess_over_support <= 1e-6

    def to_dict(self):
        """Convert to dictionary for JSON serialization (grid omitted)"""
        return {
            'n_local_maxima': self.n_local_maxima,
            'peak_locations': self.peak_locations,
            'max_excess': self.max_excess,
            'support_regret': self.support_regret,
            'excess_over_support': self.excess_over_support,
            'indifference_deviation': self.indifference_deviation,
            'is_saddle': self.is_saddle,
        }


# ============================================================================
# Count probabilities and oracle posteriors
# ============================================================================

def _check_count(n: int, k: int) -> None:
    if n < 1:
        raise RangeError(f"Sample size must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise RangeError(f"Count k={k} outside [0, {n}]")


def log_count_probabilities(n: int, pi: float) -> np.ndarray:
    """log Pr(k | pi) for k = 0..n under the uniform state prior"""
    k = np.arange(n + 1)
    log_p = np.logaddexp(stats.binom.logpmf(k, n, pi), stats.binom.logpmf(k, n, 1.0 - pi))
    # logpmf drifts by ~1e-12 at large n; the masses must sum to one
    return log_p - special.logsumexp(log_p)


def count_probabilities(n: int, pi: float) -> np.ndarray:
    """Pr(k | pi) for k = 0..n"""
    if n > LOG_DOMAIN_THRESHOLD:
        return np.exp(log_count_probabilities(n, pi))
    k = np.arange(n + 1)
    return 0.5 * (stats.binom.pmf(k, n, pi) + stats.binom.pmf(k, n, 1.0 - pi))


def marginal_count_prob(n: int, pi: float, k: int) -> float:
    """
    Probability of observing k high signals out of n.

    Pr(k|pi) = 1/2 C(n,k) [pi^k (1-pi)^(n-k) + (1-pi)^k pi^(n-k)]

    Raises:
        RangeError: If k is outside [0, n]
    """
    _check_count(n, k)
    return float(count_probabilities(n, pi)[k])


def _log_odds(n: int, pis: np.ndarray) -> np.ndarray:
    """Oracle log-odds matrix (len(pis), n+1); nan where pi = 1 and 0 < k < n"""
    k = np.arange(n + 1)
    with np.errstate(invalid='ignore', divide='ignore'):
        return np.outer(special.logit(pis), 2 * k - n)


def _oracle_matrix(n: int, pis: np.ndarray) -> np.ndarray:
    q = special.expit(_log_odds(n, pis))
    full = pis >= 1.0
    if np.any(full):
        # Counts strictly inside (0, n) never occur under full revelation
        q[full, :] = 0.5
        q[full, 0] = 0.0
        q[full, n] = 1.0
    return q


def oracle_posteriors(n: int, pi: float) -> np.ndarray:
    """Oracle posterior Pr(theta=1 | pi, k) for k = 0..n"""
    return _oracle_matrix(n, np.array([float(pi)]))[0]


def oracle_posterior_binary(n: int, pi: float, k: int) -> float:
    """
    Oracle posterior for count k when the precision is known.

    Returns 1/2 by convention for 0 < k < n under pi = 1 (a null event).

    Raises:
        RangeError: If k is outside [0, n]
    """
    _check_count(n, k)
    return float(oracle_posteriors(n, pi)[k])


def oracle_beliefs(n: int, pi: float) -> BeliefVector:
    """Oracle posterior vector as a BeliefVector with exact upper tails"""
    q = oracle_posteriors(n, pi)
    if pi >= 1.0:
        with np.errstate(divide='ignore'):
            log_c = np.log(1.0 - q)
    else:
        log_c = -np.logaddexp(0.0, _log_odds(n, np.array([float(pi)]))[0])
    return BeliefVector(n=n, a=q, log_complement=log_c)


# ============================================================================
# Regret
# ============================================================================

def regret_curve(
    beliefs: BeliefVector,
    pis: Sequence[float],
    G: BregmanGenerator = MSE
) -> np.ndarray:
    """
    Ex-ante regret of a fixed belief vector at each precision in pis.

    Raises:
        DomainError: If a divergence is infinite on a count with positive mass
    """
    n = beliefs.n
    pis = np.atleast_1d(np.asarray(pis, dtype=float))
    k = np.arange(n + 1)
    if n > LOG_DOMAIN_THRESHOLD:
        probs = np.exp(np.log(0.5) + np.logaddexp(
            stats.binom.logpmf(k[None, :], n, pis[:, None]),
            stats.binom.logpmf(k[None, :], n, 1.0 - pis[:, None]),
        ))
    else:
        probs = 0.5 * (stats.binom.pmf(k[None, :], n, pis[:, None])
                       + stats.binom.pmf(k[None, :], n, 1.0 - pis[:, None]))

    q = _oracle_matrix(n, pis)
    d = divergence(G, q, np.broadcast_to(beliefs.a, q.shape))
    live = probs > 0.0
    if np.any(np.isinf(d) & live):
        raise DomainError(
            f"Infinite divergence on a count with positive probability (n={n}); "
            "beliefs must be interior under the log generator"
        )
    return np.where(live, probs * np.where(live, d, 0.0), 0.0).sum(axis=1)


def exante_regret(beliefs: BeliefVector, pi: float, G: BregmanGenerator = MSE) -> float:
    """
    Expected divergence between the oracle posterior and the beliefs.

    R(a, pi) = sum_k Pr(k|pi) B_G(q(k; pi) || a_k)

    Args:
        beliefs: DM belief vector
        pi: Nature's precision
        G: Bregman generator

    Returns:
        Nonnegative regret
    """
    return float(regret_curve(beliefs, [pi], G)[0])


def regret_slope(beliefs: BeliefVector, pi: float, G: BregmanGenerator = MSE) -> float:
    """
    Derivative of R(a, pi) in pi at fixed beliefs.

    Closed form in the interior. At pi = 1 a second-order one-sided
    difference is used because the count probabilities vanish there.
    """
    n = beliefs.n
    if pi >= 1.0:
        h = BOUNDARY_STEP
        r = regret_curve(beliefs, [1.0, 1.0 - h, 1.0 - 2 * h], G)
        return float((3 * r[0] - 4 * r[1] + r[2]) / (2 * h))

    k = np.arange(n + 1)
    joint1 = 0.5 * np.exp(stats.binom.logpmf(k, n, pi))
    joint0 = 0.5 * np.exp(stats.binom.logpmf(k, n, 1.0 - pi))
    probs = joint1 + joint0
    d_probs = (joint1 * (k / pi - (n - k) / (1.0 - pi))
               + joint0 * ((n - k) / pi - k / (1.0 - pi)))

    q = oracle_posteriors(n, pi)
    d_q = q * (1.0 - q) * (2 * k - n) / (pi * (1.0 - pi))

    a = beliefs.a
    div = divergence(G, q, a)
    if G.kind is GeneratorKind.MSE:
        d_div = 2.0 * (q - a)
    else:
        d_div = G.g_prime(q) - G.g_prime(a)
    return float(np.sum(d_probs * div + probs * d_div * d_q))


# ============================================================================
# Best responses
# ============================================================================

def dm_best_response(
    mix: NatureMixtureFinite,
    n: int,
    G: BregmanGenerator = MSE,
    strict: bool = False
) -> BeliefVector:
    """
    DM best response to a Nature mixture: the mixture-Bayes posterior.

    a_k = sum_i w_i Pr(k, theta=1 | pi_i) / sum_i w_i Pr(k | pi_i)

    The minimizer of an expected Bregman divergence is the mean for every
    generator, so G does not enter the computation.

    Args:
        mix: Nature's mixture
        n: Sample size
        G: Generator (accepted for interface symmetry)
        strict: Raise on counts with zero marginal mass instead of flagging

    Returns:
        BeliefVector with exact log complements

    Raises:
        ZeroMassCount: In strict mode, if some count cannot occur
    """
    k = np.arange(n + 1)
    pis = mix.precisions[:, None]
    with np.errstate(divide='ignore'):
        log_w = np.log(mix.weight_array)[:, None]
    log_j1 = np.log(0.5) + stats.binom.logpmf(k[None, :], n, pis)
    log_j0 = np.log(0.5) + stats.binom.logpmf(k[None, :], n, 1.0 - pis)

    with np.errstate(divide='ignore', invalid='ignore'):
        num1 = special.logsumexp(log_w + log_j1, axis=0)
        num0 = special.logsumexp(log_w + log_j0, axis=0)
    den = np.logaddexp(num1, num0)

    dead = ~np.isfinite(den)
    flagged = tuple(int(i) for i in np.flatnonzero(dead))
    if flagged:
        if strict:
            raise ZeroMassCount(f"Counts {list(flagged)} have zero marginal mass under the mixture (n={n})")
        logger.warning(f"Zero-mass counts {list(flagged)} set to 1/2 (n={n})")

    with np.errstate(invalid='ignore'):
        a = np.where(dead, 0.5, np.exp(num1 - den))
        log_c = np.where(dead, np.log(0.5), num0 - den)
    return BeliefVector(n=n, a=np.clip(a, 0.0, 1.0), log_complement=log_c, flagged=flagged)


def nature_best_response(
    beliefs: BeliefVector,
    n: int,
    G: BregmanGenerator = MSE,
    grid_size: int = NATURE_GRID_SIZE
) -> Tuple[float, float]:
    """
    Precision maximizing the regret of fixed beliefs.

    Scans a uniform grid on [1/2, 1], refines every grid peak by bounded
    Brent search, and breaks ties toward the smallest precision.

    Args:
        beliefs: DM beliefs
        n: Sample size (must match beliefs)
        G: Generator
        grid_size: Number of grid points (>= 64)

    Returns:
        (precision, regret)
    """
    if beliefs.n != n:
        raise RangeError(f"Beliefs are for n={beliefs.n}, evaluation requested at n={n}")
    if grid_size < 64:
        raise ValueError(f"grid_size must be >= 64, got {grid_size}")

    grid = np.linspace(0.5, 1.0, grid_size)
    values = regret_curve(beliefs, grid, G)

    candidates = [(float(grid[i]), float(values[i])) for i in range(grid_size)]
    for i in local_maxima(values):
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
        res = optimize.minimize_scalar(
            lambda p: -exante_regret(beliefs, p, G),
            bounds=(lo, hi), method='bounded', options={'xatol': REFINE_XTOL},
        )
        if -res.fun > values[i] + TIE_TOL:
            candidates.append((float(res.x), float(-res.fun)))

    best = max(r for _, r in candidates)
    pi_best = min(p for p, r in candidates if r >= best - TIE_TOL)
    regret = max(r for p, r in candidates if p == pi_best)
    return pi_best, regret


# ============================================================================
# Structural solver
# ============================================================================

def _two_point_beliefs(n: int, pi: float, w: float) -> BeliefVector:
    return dm_best_response(NatureMixtureFinite.two_point(pi, w), n)


def _indifference_gap(n: int, pi: float, w: float, G: BregmanGenerator = MSE) -> float:
    b = _two_point_beliefs(n, pi, w)
    r = regret_curve(b, [pi, 0.5], G)
    return float(r[0] - r[1])


def indifference_weight(n: int, pi: float, G: BregmanGenerator = MSE) -> float:
    """
    Mass on precision pi making Nature indifferent between pi and 1/2.

    The indifference gap is positive at w = 0 and negative at w = 1.
    """
    return bisect_root(
        lambda w: _indifference_gap(n, pi, w, G), 0.0, 1.0,
        xtol=WEIGHT_XTOL, label=f'indifference weight (n={n}, pi={pi:.6g})',
    )


def _residuals_for(
    n: int,
    mix: NatureMixtureFinite,
    beliefs: BeliefVector,
    G: BregmanGenerator,
    boundary: bool
) -> Tuple[float, EquilibriumResiduals]:
    pis = mix.precisions
    w = mix.weight_array
    support_regrets = regret_curve(beliefs, pis, G)
    value = float(np.dot(w, support_regrets))

    br = dm_best_response(mix, n, G)
    foc = float(np.max(np.abs(br.a - beliefs.a)))

    active = w > ACTIVE_WEIGHT
    indif = float(np.ptp(support_regrets[active])) if active.sum() > 1 else 0.0

    slopes = []
    for p in pis[active]:
        if p <= 0.5:
            continue
        s = regret_slope(beliefs, p, G)
        slopes.append(max(0.0, -s) if p >= 1.0 else abs(s))
    local_opt = max(slopes) if slopes else 0.0

    _, top = nature_best_response(beliefs, n, G)
    gap = max(0.0, top - value)
    return value, EquilibriumResiduals(
        foc_max_abs=foc,
        indifference_abs=indif,
        local_opt_abs=local_opt,
        duality_gap=gap,
        boundary=boundary,
    )


def solve_structural(n: int, G: BregmanGenerator = MSE) -> FiniteEquilibrium:
    """
    Solve the two-point equilibrium {1/2, pi*} from its structural conditions.

    For each candidate precision the weight w solves Nature's indifference
    condition; pi* then solves local optimality dR/dpi = 0. When the slope
    at pi = 1 is nonnegative the informative atom sits on the boundary.

    Args:
        n: Sample size
        G: Generator; only MSE has the structural form, others go to the
            double oracle

    Returns:
        FiniteEquilibrium

    Raises:
        NoBracket: If local optimality has no sign change on (1/2, 1]
    """
    if G.kind is not GeneratorKind.MSE:
        logger.info(f"Structural conditions are stated for MSE; using double oracle for {G.name}")
        return solve_double_oracle(n, G)

    def slope_at(pi: float) -> float:
        w = indifference_weight(n, pi)
        return regret_slope(_two_point_beliefs(n, pi, w), pi)

    boundary_slope = slope_at(1.0)
    if boundary_slope >= 0.0:
        pi_star = 1.0
        boundary = True
        logger.debug(f"n={n}: slope at pi=1 is {boundary_slope:.3e}; boundary equilibrium")
    else:
        pi_star = bisect_root(slope_at, 0.5 + PRECISION_FLOOR, 1.0,
                              xtol=PRECISION_XTOL, label=f'local optimality (n={n})')
        boundary = False

    w_star = indifference_weight(n, pi_star)
    mix = NatureMixtureFinite.two_point(pi_star, w_star)
    beliefs = dm_best_response(mix, n)
    value, residuals = _residuals_for(n, mix, beliefs, G, boundary)

    logger.info(f"Structural n={n}: pi*={pi_star:.10f} w={w_star:.10f} value={value:.10g}")
    return FiniteEquilibrium(
        mixture=mix, beliefs=beliefs, value=value,
        residuals=residuals, method='structural',
    )


# ============================================================================
# Double oracle
# ============================================================================

class DoubleOracleSolver:
    """
    Support-enlargement solver for the finite game.

    Keeps a finite set of precisions for Nature. The inner step maximizes
    the concave value V(sigma) = min_a R(a, sigma) over mixtures on the
    current support; the outer step adds Nature's best response to the DM
    best response until the duality gap drops below tol.
    """

    def __init__(
        self,
        n: int,
        G: BregmanGenerator = MSE,
        tol: float = 1e-8,
        grid_size: int = NATURE_GRID_SIZE,
        max_outer: int = DO_MAX_OUTER,
        mw_iterations: int = MW_ITERATIONS
    ):
        """
        Initialize the solver.

        Args:
            n: Sample size
            G: Bregman generator
            tol: Duality-gap tolerance
            grid_size: Grid for Nature's best response
            max_outer: Cap on support enlargements
            mw_iterations: Multiplicative-weights warm-start iterations per inner step
        """
        if tol <= 0:
            raise ValueError(f"tol must be positive, got {tol}")
        self.n = n
        self.G = G
        self.tol = tol
        self.grid_size = grid_size
        self.max_outer = max_outer
        self.mw_iterations = mw_iterations
        self.history: List[NatureMixtureFinite] = []

    def _gradient(self, pis: np.ndarray, sigma: np.ndarray) -> Tuple[BeliefVector, np.ndarray]:
        mix = NatureMixtureFinite.from_precisions(pis, sigma)
        beliefs = dm_best_response(mix, self.n, self.G)
        return beliefs, regret_curve(beliefs, pis, self.G)

    def _multiplicative_weights(self, pis: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        log_sigma = np.log(np.clip(sigma, 1e-300, None))
        for t in range(1, self.mw_iterations + 1):
            _, grad = self._gradient(pis, np.exp(log_sigma))
            log_sigma = log_sigma + grad / math.sqrt(t)
            log_sigma -= special.logsumexp(log_sigma)
        return np.exp(log_sigma)

    def _equalize(self, pis: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        """Newton polish: equal regrets across the active atoms"""
        active = np.flatnonzero(sigma > ACTIVE_WEIGHT)
        if active.size < 2:
            return sigma

        def expand(x: np.ndarray) -> np.ndarray:
            full = np.zeros_like(sigma)
            full[active[:-1]] = x
            full[active[-1]] = 1.0 - x.sum()
            return full

        def equations(x: np.ndarray) -> np.ndarray:
            full = expand(x)
            if np.any(full < 0.0):
                return np.full(x.shape, 1e3)
            _, grad = self._gradient(pis, full)
            return grad[active[:-1]] - grad[active[-1]]

        res = optimize.root(equations, sigma[active[:-1]], method='hybr', options={'xtol': 1e-14})
        candidate = expand(res.x)
        if not res.success or np.any(candidate < 0.0):
            return sigma

        def restricted_gap(s: np.ndarray) -> float:
            _, grad = self._gradient(pis, s)
            return float(grad.max() - np.dot(s, grad))

        return candidate if restricted_gap(candidate) <= restricted_gap(sigma) else sigma

    def _solve_restricted(self, pis: np.ndarray, sigma0: np.ndarray) -> np.ndarray:
        m = pis.size
        if m == 1:
            return np.ones(1)

        sigma = self._multiplicative_weights(pis, sigma0)

        def neg_value(s):
            _, grad = self._gradient(pis, np.clip(s, 0.0, None))
            return -float(np.dot(np.clip(s, 0.0, None), grad))

        def neg_grad(s):
            _, grad = self._gradient(pis, np.clip(s, 0.0, None))
            return -grad

        res = optimize.minimize(
            neg_value, sigma, jac=neg_grad, method='SLSQP',
            bounds=[(0.0, 1.0)] * m,
            constraints=[{'type': 'eq', 'fun': lambda s: s.sum() - 1.0, 'jac': lambda s: np.ones(m)}],
            options={'ftol': 1e-16, 'maxiter': 500},
        )
        sigma = np.clip(res.x, 0.0, None)
        sigma /= sigma.sum()
        return self._equalize(pis, sigma)

    def _consolidate(self, mix: NatureMixtureFinite) -> NatureMixtureFinite:
        """Merge the informative atoms into one at their weighted mean"""
        informative = [(e.pi, w) for e, w in zip(mix.support, mix.weights) if e.pi > 0.5 and w > ACTIVE_WEIGHT]
        if len(informative) < 2:
            return mix
        pi_bar = mix.informative_precision
        pis = np.array([0.5, pi_bar])
        sigma = self._solve_restricted(pis, np.array([1.0 - mix.informative_weight, mix.informative_weight]))
        return NatureMixtureFinite.from_precisions(pis, sigma)

    def _gap(self, mix: NatureMixtureFinite) -> Tuple[BeliefVector, float, float]:
        beliefs = dm_best_response(mix, self.n, self.G)
        value = float(np.dot(mix.weight_array, regret_curve(beliefs, mix.precisions, self.G)))
        _, top = nature_best_response(beliefs, self.n, self.G, self.grid_size)
        return beliefs, value, top - value

    def _report(self, mix: NatureMixtureFinite, iterations: int) -> FiniteEquilibrium:
        mix = mix.pruned()
        beliefs = dm_best_response(mix, self.n, self.G)
        boundary = bool(np.any(mix.precisions >= 1.0))
        value, residuals = _residuals_for(self.n, mix, beliefs, self.G, boundary)
        return FiniteEquilibrium(
            mixture=mix, beliefs=beliefs, value=value, residuals=residuals,
            method='double-oracle', iterations=iterations,
        )

    def solve(self) -> FiniteEquilibrium:
        """
        Run support enlargement to a duality gap below tol.

        Returns:
            FiniteEquilibrium

        Raises:
            IterationLimit: If max_outer enlargements do not close the gap
        """
        pis = np.array([0.5, 1.0])
        sigma = np.array([0.5, 0.5])
        mix = NatureMixtureFinite.from_precisions(pis, sigma)

        for iteration in range(1, self.max_outer + 1):
            sigma = self._solve_restricted(pis, sigma)
            mix = NatureMixtureFinite.from_precisions(pis, sigma)
            self.history.append(mix)

            beliefs, value, gap = self._gap(mix)
            pi_new, top = nature_best_response(beliefs, self.n, self.G, self.grid_size)
            logger.debug(f"DO n={self.n} iter={iteration}: support={len(pis)} value={value:.12g} gap={gap:.3e}")

            if gap <= self.tol:
                merged = self._consolidate(mix)
                if merged is not mix:
                    _, _, merged_gap = self._gap(merged)
                    if merged_gap <= max(gap, self.tol):
                        mix = merged
                        self.history.append(mix)
                logger.info(f"Double oracle n={self.n} converged in {iteration} iterations (gap {gap:.2e})")
                return self._report(mix, iteration)

            if np.min(np.abs(pis - pi_new)) < SUPPORT_MERGE_TOL:
                logger.warning(f"DO n={self.n}: best response {pi_new} already in support; gap {gap:.3e} stalls")
                break

            keep = (sigma > ACTIVE_WEIGHT) | (pis == 0.5)
            pis = np.append(pis[keep], pi_new)
            sigma = np.append(sigma[keep] * (1.0 - NEW_ATOM_WEIGHT), NEW_ATOM_WEIGHT)

        best = self._report(mix, self.max_outer)
        raise IterationLimit(
            f"Double oracle for n={self.n} did not reach gap {self.tol} "
            f"(best gap {best.residuals.duality_gap:.3e})",
            best=best,
        )


def solve_double_oracle(n: int, G: BregmanGenerator = MSE, tol: float = 1e-8) -> FiniteEquilibrium:
    """Convenience wrapper around DoubleOracleSolver"""
    return DoubleOracleSolver(n, G, tol).solve()


def solve_finite(n: int, G: BregmanGenerator = MSE, method: str = 'structural',
                 tol: float = 1e-8) -> Dict[str, FiniteEquilibrium]:
    """
    Solve the finite game with one or both solvers.

    With method 'both', a disagreement beyond 1e-6 in value or in the
    informative atom is logged and both results are returned.
    """
    results = {}
    if method in ('structural', 'both'):
        results['structural'] = solve_structural(n, G)
    if method in ('double-oracle', 'both'):
        results['double-oracle'] = solve_double_oracle(n, G, tol)
    if not results:
        raise ValueError(f"Unknown method {method!r}")

    if len(results) == 2:
        s, d = results['structural'], results['double-oracle']
        drift = max(abs(s.value - d.value), abs(s.pi_star - d.pi_star), abs(s.w - d.w))
        if drift > 1e-6:
            logger.warning(f"n={n}: structural and double-oracle solutions differ by {drift:.3e}")
    return results


def solve_trend(ns: Sequence[int], max_workers: Optional[int] = None) -> List[FiniteEquilibrium]:
    """Structural equilibria for each n, computed in parallel"""
    return parallel_map(solve_structural, ns, max_workers=max_workers)


# ============================================================================
# Verification
# ============================================================================

def verify_global_optimality(
    eq: FiniteEquilibrium,
    n: int,
    grid_size: int = VERIFY_GRID_SIZE,
    G: BregmanGenerator = MSE
) -> OptimalityDiagnostics:
    """
    Tabulate pi -> R(a*, pi) and check that no precision beats the value.

    Args:
        eq: Equilibrium from either solver
        n: Sample size
        grid_size: Number of grid points on [1/2, 1]
        G: Generator

    Returns:
        OptimalityDiagnostics
    """
    grid = np.linspace(0.5, 1.0, grid_size)
    regrets = regret_curve(eq.beliefs, grid, G)
    peaks = [float(grid[i]) for i in local_maxima(regrets, atol=1e-14)]

    mix = eq.mixture
    support_regrets = regret_curve(eq.beliefs, mix.precisions, G)
    support_regret = float(np.dot(mix.weight_array, support_regrets))
    active = mix.weight_array > ACTIVE_WEIGHT
    deviation = float(np.ptp(support_regrets[active])) if active.sum() > 1 else 0.0

    top = float(regrets.max())
    return OptimalityDiagnostics(
        grid=grid,
        regrets=regrets,
        peak_locations=peaks,
        max_excess=top - eq.value,
        support_regret=support_regret,
        excess_over_support=top - support_regret,
        indifference_deviation=deviation,
    )


# ============================================================================
# Closed forms for small n
# ============================================================================

def n1_regret_curves(pi_values: Sequence[float], a1_grid: Sequence[float]) -> np.ndarray:
    """
    Regret of symmetric n=1 beliefs (1-a1, a1) for each precision.

    Returns:
        Array of shape (len(pi_values), len(a1_grid))
    """
    a1_grid = np.asarray(a1_grid, dtype=float)
    curves = np.empty((len(pi_values), a1_grid.size))
    for j, a1 in enumerate(a1_grid):
        beliefs = BeliefVector(n=1, a=np.array([1.0 - a1, a1]))
        curves[:, j] = regret_curve(beliefs, pi_values)
    return curves


def n3_first_order_beliefs(pi: float, w: float) -> np.ndarray:
    """Closed-form n=3 best response to {1/2: 1-w, pi: w}"""
    k = np.arange(4)
    like1 = pi ** k * (1.0 - pi) ** (3 - k)
    like0 = (1.0 - pi) ** k * pi ** (3 - k)
    return (8 * w * like1 + 1.0 - w) / (8 * w * (like1 + like0) + 2 * (1.0 - w))


def n3_system_residuals(pi: float, w: float, form: str = 'derived') -> Tuple[float, float]:
    """
    Closed-form n=3 equilibrium system (indifference G1, local optimality G2).

    Both vanish at the n=3 equilibrium. The printed indifference expression
    carries (pi^2 - pi + 1) in its first term where substitution of the
    first-order beliefs gives its square; ``form='printed'`` evaluates the
    former.

    Args:
        pi: Precision in [1/2, 1]
        w: Weight on pi
        form: 'derived' or 'printed'

    Returns:
        (G1, G2)
    """
    if form not in ('derived', 'printed'):
        raise ValueError(f"form must be 'derived' or 'printed', got {form!r}")
    t2 = (2 * pi - 1) ** 2
    m = pi * pi - pi + 1
    s = 3 * pi * pi - 3 * pi + 1
    p = pi * (1 - pi)
    d3 = 3 * w * t2 + 1
    d2 = -w * t2 + 1
    power = 2 if form == 'derived' else 1

    g1 = (m ** power * (4 * w * w * s - (1 - w) ** 2) / (s * d3 ** 2)
          + 3 * p * (4 * w * w * p - (1 - w) ** 2) / d2 ** 2)
    g2 = (m / (s ** 2 * d3) * ((1 - w) * t2 * m / (2 * d3) + 2 * p * p)
          - 1 / d2 * ((1 - w) * t2 / (2 * d2) - 2 * p))
    return float(g1), float(g2)


def n3_regret_derivative_polynomial(a2, a3) -> List:
    """
    Coefficients (highest degree first) of R'(pi) (3 pi^2 - 3 pi + 1)^2 for n=3.

    Works with floats or exact rationals for a2 and a3.
    """
    return [
        -96,
        282 + 162 * a2 - 54 * a3,
        -336 - 432 * a2 + 108 * a3 - 54 * a2 ** 2 + 54 * a3 ** 2,
        207 + 486 * a2 - 90 * a3 + 135 * a2 ** 2 - 135 * a3 ** 2,
        -66 - 288 * a2 + 36 * a3 - 144 * a2 ** 2 + 144 * a3 ** 2,
        9 + 90 * a2 - 6 * a3 + 81 * a2 ** 2 - 81 * a3 ** 2,
        -12 * a2 - 24 * a2 ** 2 + 24 * a3 ** 2,
        3 * a2 ** 2 - 3 * a3 ** 2,
    ]
