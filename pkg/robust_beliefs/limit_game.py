"""
Limit Game Module

Gaussian limit of the binary game under local precision scaling. The
standardized count is normal with mean +-2c under the two states; Nature
mixes between c = 0 and one informative c*. This module provides the
limit posterior, limit regret by quadrature, the nested-bisection
fixed-point solver for (c*, w*), and the saddle-shape diagnostics.
"""

import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .errors import NoBracket, QuadratureDisagreement, ShapeViolation
from .utils import bisect_root, local_maxima, parallel_map

logger = logging.getLogger(__name__)

LimitBeliefFn = Callable[[np.ndarray], np.ndarray]

MIN_NODES = 64
MIN_HALFWIDTH = 8.0
GL_POINTS_PER_PANEL = 20

DISAGREEMENT_TOL = 1e-6

OUTER_BRACKET = (0.2, 1.0)
WIDE_BRACKET = (0.05, 2.0)
WEIGHT_XTOL = 1e-15
PRECISION_XTOL = 1e-13

PROFILE_STEP = 0.01
PROFILE_MAX = 3.0
SLOPE_PROBE = 0.005
SLOPE_STEP = 1e-4


class QuadratureRule(str, Enum):
    GAUSS_HERMITE = 'gauss_hermite'
    GAUSS_LEGENDRE = 'gauss_legendre'
    ADAPTIVE = 'adaptive'


@dataclass(frozen=True)
class QuadratureSpec:
    """
    How Gaussian expectations E[f(Z)], Z ~ N(mean, 1), are computed.

    gauss_hermite uses ``nodes`` Hermite nodes centered at the mean.
    gauss_legendre splits [mean - T, mean + T] into ``panels`` panels of
    20-point Legendre rules. adaptive runs QUADPACK on the same window.
    """
    rule: QuadratureRule = QuadratureRule.GAUSS_HERMITE
    nodes: int = 200
    truncation_halfwidth: float = 10.0
    panels: int = 160

    def __post_init__(self):
        object.__setattr__(self, 'rule', QuadratureRule(parse_rule(self.rule)))
        if self.nodes < MIN_NODES:
            raise ValueError(f"Quadrature needs at least {MIN_NODES} nodes, got {self.nodes}")
        if self.truncation_halfwidth < MIN_HALFWIDTH:
            raise ValueError(f"Truncation half-width must be >= {MIN_HALFWIDTH}, got {self.truncation_halfwidth}")
        if self.panels < 1:
            raise ValueError(f"panels must be positive, got {self.panels}")

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'rule': self.rule.value,
            'nodes': self.nodes,
            'truncation_halfwidth': self.truncation_halfwidth,
            'panels': self.panels,
        }


def parse_rule(rule) -> str:
    """Accept rule names and the adaptive_simpson alias"""
    value = rule.value if isinstance(rule, Enum) else str(rule).lower()
    return 'adaptive' if value == 'adaptive_simpson' else value


DEFAULT_QUAD = QuadratureSpec()
CROSS_CHECK_QUAD = QuadratureSpec(rule=QuadratureRule.GAUSS_LEGENDRE)


@dataclass(frozen=True)
class LimitParams:
    """Limit equilibrium: informative precision c* and its weight w*"""
    c_star: float
    w_star: float
    residuals: Tuple[float, float] = field(default=(math.nan, math.nan), compare=False)

    def __post_init__(self):
        if not self.c_star > 0.0:
            raise ValueError(f"c_star must be positive, got {self.c_star}")
        if not 0.0 < self.w_star < 1.0:
            raise ValueError(f"w_star must lie in (0, 1), got {self.w_star}")

    def belief(self) -> LimitBeliefFn:
        """Equilibrium limit posterior z -> a*(z)"""
        return lambda z: limit_posterior(z, self.c_star, self.w_star)

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'c_star': self.c_star,
            'w_star': self.w_star,
            'residuals': {'indifference': self.residuals[0], 'stationarity': self.residuals[1]},
        }


@dataclass
class RegretProfile:
    """Tabulated b -> R(a*, b) with shape diagnostics"""
    grid: np.ndarray
    regrets: np.ndarray
    peak_locations: List[float]
    slope_near_zero: float
    peak_gap: float
    grid_excess: float

    @property
    def n_peaks(self) -> int:
        return len(self.peak_locations)

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'b': self.grid.tolist(),
            'regret': self.regrets.tolist(),
            'peak_locations': self.peak_locations,
            'slope_near_zero': self.slope_near_zero,
            'peak_gap': self.peak_gap,
            'grid_excess': self.grid_excess,
        }


@dataclass
class PosteriorSpread:
    """Monte Carlo spread of the equilibrium limit posterior"""
    delta: float
    mass_inside: float
    variance: float
    draws: int
    seed: int

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'delta': self.delta,
            'mass_inside': self.mass_inside,
            'variance': self.variance,
            'draws': self.draws,
            'seed': self.seed,
        }


# ============================================================================
# Posteriors
# ============================================================================

def limit_posterior(z, c: float, w: float):
    """
    Limit DM posterior under Nature's mixture {0: 1-w, c: w}.

    a*(z) = (1-w + w e^{2cz-2c^2}) / (2(1-w) + w (e^{2cz-2c^2} + e^{-2cz-2c^2}))

    Exponentials are combined with logsumexp so large |z| never overflows.
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    up = 2.0 * c * z - 2.0 * c * c
    down = -2.0 * c * z - 2.0 * c * c
    zero = np.zeros_like(z)

    num = special.logsumexp(np.stack([zero, up]), axis=0,
                            b=np.array([1.0 - w, w]).reshape(2, *([1] * z.ndim)))
    den = special.logsumexp(np.stack([zero, up, down]), axis=0,
                            b=np.array([2.0 * (1.0 - w), w, w]).reshape(3, *([1] * z.ndim)))
    a = np.exp(num - den)
    return float(a) if scalar else a


def limit_oracle_posterior(z, c: float):
    """Oracle posterior when c is known: 1 / (1 + e^{-4cz})"""
    return special.expit(4.0 * c * np.asarray(z, dtype=float))


# ============================================================================
# Quadrature
# ============================================================================

def gaussian_expectation(f: Callable[[np.ndarray], np.ndarray], mean: float,
                         quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """
    E[f(Z)] for Z ~ N(mean, 1).

    Args:
        f: Vectorized integrand
        mean: Mean of Z
        quad: Quadrature settings

    Returns:
        The expectation
    """
    if quad.rule is QuadratureRule.GAUSS_HERMITE:
        x, wts = _hermite(quad.nodes)
        return float(np.dot(wts, f(mean + math.sqrt(2.0) * x)) / math.sqrt(math.pi))

    lo, hi = mean - quad.truncation_halfwidth, mean + quad.truncation_halfwidth

    def integrand(z):
        return f(z) * np.exp(-0.5 * (z - mean) ** 2) / math.sqrt(2.0 * math.pi)

    if quad.rule is QuadratureRule.GAUSS_LEGENDRE:
        x, wts = _legendre(GL_POINTS_PER_PANEL)
        edges = np.linspace(lo, hi, quad.panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * wts[None, :]).ravel()
        return float(np.dot(weights, integrand(nodes)))

    value, _ = integrate.quad(lambda z: float(integrand(np.array(z))), lo, hi,
                              epsabs=1e-13, epsrel=1e-12, limit=400)
    return float(value)


_HERMITE_CACHE = {}
_LEGENDRE_CACHE = {}


def _hermite(n: int):
    if n not in _HERMITE_CACHE:
        _HERMITE_CACHE[n] = hermgauss(n)
    return _HERMITE_CACHE[n]


def _legendre(n: int):
    if n not in _LEGENDRE_CACHE:
        _LEGENDRE_CACHE[n] = leggauss(n)
    return _LEGENDRE_CACHE[n]


def _state_average(h_plus, h_minus, c: float, quad: QuadratureSpec) -> float:
    return 0.5 * gaussian_expectation(h_plus, 2.0 * c, quad) + 0.5 * gaussian_expectation(h_minus, -2.0 * c, quad)


# ============================================================================
# Regret
# ============================================================================

def limit_regret(
    belief: LimitBeliefFn,
    c: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    cross_check: Optional[QuadratureSpec] = None
) -> float:
    """
    Limit regret of a belief function against local precision c.

    R(a, c) = 1/2 E_{N(2c,1)}[(q_c - a)^2] + 1/2 E_{N(-2c,1)}[(q_c - a)^2]

    Args:
        belief: Vectorized map z -> [0, 1]
        c: Local precision (>= 0)
        quad: Primary quadrature
        cross_check: Optional second rule; both must agree

    Returns:
        Regret in [0, 1]

    Raises:
        QuadratureDisagreement: If the two rules differ by more than 1e-6
    """
    if c < 0:
        raise ValueError(f"Local precision must be nonnegative, got {c}")

    def sq_error(z):
        return (limit_oracle_posterior(z, c) - belief(z)) ** 2

    value = _state_average(sq_error, sq_error, c, quad)
    if cross_check is not None:
        other = _state_average(sq_error, sq_error, c, cross_check)
        if abs(other - value) > DISAGREEMENT_TOL:
            raise QuadratureDisagreement(
                f"Limit regret at c={c}: {quad.rule.value} gives {value!r}, "
                f"{cross_check.rule.value} gives {other!r}"
            )
    return value


def limit_regret_slope(belief: LimitBeliefFn, c: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Closed-form dR(a, b)/db at b = c for a fixed belief function"""
    def h_plus(z):
        q = limit_oracle_posterior(z, c)
        gap = belief(z) - q
        return gap * ((z - 2 * c) * gap - 4 * z * q * (1 - q))

    def h_minus(z):
        q = limit_oracle_posterior(z, c)
        gap = belief(z) - q
        return gap * (-(z + 2 * c) * gap - 4 * z * q * (1 - q))

    return gaussian_expectation(h_plus, 2 * c, quad) + gaussian_expectation(h_minus, -2 * c, quad)


def stationarity_residuals(c: float, w: float, quad: QuadratureSpec = DEFAULT_QUAD) -> Tuple[float, float]:
    """
    Equilibrium conditions of the limit game at (c, w).

    F1 is Nature's payoff from c minus her payoff from 0 when the DM plays
    the mixture posterior; F2 is the slope of the regret profile at c.

    Returns:
        (F1, F2)
    """
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"w must lie in [0, 1], got {w}")

    shrink = w * math.exp(-2 * c * c)

    def informative_gap(z):
        t = np.tanh(2 * c * z)
        return (-(1 - w) * t / (2 * (1 - w) + 2 * shrink * np.cosh(2 * c * z))) ** 2

    def null_gap(z):
        t = np.tanh(2 * c * z)
        return (shrink * t / (2 * (1 - w) / np.cosh(2 * c * z) + 2 * shrink)) ** 2

    f1 = gaussian_expectation(informative_gap, 2 * c, quad) - gaussian_expectation(null_gap, 0.0, quad)
    f2 = limit_regret_slope(lambda z: limit_posterior(z, c, w), c, quad)
    return float(f1), float(f2)


# ============================================================================
# Fixed point
# ============================================================================

def indifference_weight(c: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Unique w in [0, 1] with F1(c, w) = 0 (F1 is decreasing in w)"""
    return bisect_root(lambda w: stationarity_residuals(c, w, quad)[0], 0.0, 1.0,
                       xtol=WEIGHT_XTOL, label=f'limit indifference (c={c:.6g})')


def stationarity_gap(c: float, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """J(c) = F2(c, w1(c))"""
    return stationarity_residuals(c, indifference_weight(c, quad), quad)[1]


def solve_limit_equilibrium(quad: QuadratureSpec = DEFAULT_QUAD, tol: float = 1e-9) -> LimitParams:
    """
    Solve for (c*, w*) by nested bisection.

    The inner root gives w1(c) from indifference; the outer root solves
    J(c) = 0 on [0.2, 1], widened once to [0.05, 2] if needed.

    Args:
        quad: Quadrature settings
        tol: Residual tolerance (at most 1e-8)

    Returns:
        LimitParams with residuals attached

    Raises:
        NoBracket: If J has no sign change on the widened bracket
    """
    if tol > 1e-8:
        raise ValueError(f"tol must be <= 1e-8, got {tol}")

    lo, hi = OUTER_BRACKET
    j_lo, j_hi = stationarity_gap(lo, quad), stationarity_gap(hi, quad)
    logger.debug(f"J({lo})={j_lo:.6f}, J({hi})={j_hi:.6f}")
    if j_lo * j_hi >= 0:
        logger.warning(f"No sign change of J on [{lo}, {hi}]; widening to {WIDE_BRACKET}")
        lo, hi = WIDE_BRACKET
        if stationarity_gap(lo, quad) * stationarity_gap(hi, quad) >= 0:
            raise NoBracket(f"J(c) keeps its sign on {WIDE_BRACKET}; check the quadrature settings")

    c_star = bisect_root(lambda c: stationarity_gap(c, quad), lo, hi,
                         xtol=PRECISION_XTOL, label='limit stationarity')
    w_star = indifference_weight(c_star, quad)
    f1, f2 = stationarity_residuals(c_star, w_star, quad)
    if max(abs(f1), abs(f2)) > tol:
        logger.warning(f"Limit residuals ({f1:.3e}, {f2:.3e}) exceed tol={tol:.1e}")

    logger.info(f"Limit equilibrium: c*={c_star:.10f} w*={w_star:.10f}")
    return LimitParams(c_star=c_star, w_star=w_star, residuals=(abs(f1), abs(f2)))


def equilibrium_value(params: LimitParams, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """w* R(a*, c*) + (1 - w*) R(a*, 0)"""
    belief = params.belief()
    return (params.w_star * limit_regret(belief, params.c_star, quad)
            + (1.0 - params.w_star) * limit_regret(belief, 0.0, quad))


def profile_grid(b_max: float = PROFILE_MAX, step: float = PROFILE_STEP) -> np.ndarray:
    """Uniform grid 0, step, ..., b_max"""
    count = int(round(b_max / step))
    return np.linspace(0.0, count * step, count + 1)


def regret_profile(
    params: LimitParams,
    c_grid: Optional[Sequence[float]] = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    strict: bool = True
) -> RegretProfile:
    """
    Tabulate b -> R(a*, b) for the equilibrium belief and check its shape.

    Expected: decreasing at 0+, exactly two local maxima (at 0 and near
    c*), and equal regret at 0 and c*.

    Raises:
        ShapeViolation: In strict mode, if the peak count is not 2
    """
    grid = profile_grid() if c_grid is None else np.asarray(c_grid, dtype=float)
    if grid.size > 1 and np.max(np.diff(grid)) > PROFILE_STEP + 1e-12:
        logger.warning(f"Profile grid spacing {np.max(np.diff(grid)):.4g} is coarser than {PROFILE_STEP}")

    belief = params.belief()
    regrets = np.array(parallel_map(lambda b: limit_regret(belief, float(b), quad), grid))
    peaks = [float(grid[i]) for i in local_maxima(regrets, atol=1e-13)]

    slope = (limit_regret(belief, SLOPE_PROBE + SLOPE_STEP, quad)
             - limit_regret(belief, SLOPE_PROBE - SLOPE_STEP, quad)) / (2 * SLOPE_STEP)
    at_zero = limit_regret(belief, 0.0, quad)
    at_star = limit_regret(belief, params.c_star, quad)

    profile = RegretProfile(
        grid=grid,
        regrets=regrets,
        peak_locations=peaks,
        slope_near_zero=float(slope),
        peak_gap=abs(at_zero - at_star),
        grid_excess=float(regrets.max() - max(at_zero, at_star)),
    )
    if strict and profile.n_peaks != 2:
        raise ShapeViolation(f"Regret profile has {profile.n_peaks} local maxima at {peaks}; expected 2")
    return profile


def posterior_spread(params: LimitParams, draws: int = 10 ** 6, seed: int = 0) -> PosteriorSpread:
    """
    Monte Carlo spread of a*(Z) under the equilibrium mixture.

    delta is the smaller of the 0.5% quantile and one minus the 99.5%
    quantile, so at least 99% of the draws lie in [delta, 1 - delta].
    """
    rng = np.random.default_rng(seed)
    informative = rng.random(draws) < params.w_star
    state = np.where(rng.random(draws) < 0.5, 1.0, -1.0)
    z = rng.standard_normal(draws) + np.where(informative, 2.0 * params.c_star * state, 0.0)
    a = limit_posterior(z, params.c_star, params.w_star)

    lo, hi = np.quantile(a, [0.005, 0.995])
    delta = float(min(lo, 1.0 - hi))
    inside = float(np.mean((a >= delta) & (a <= 1.0 - delta)))
    return PosteriorSpread(delta=delta, mass_inside=inside, variance=float(a.var()), draws=draws, seed=seed)
