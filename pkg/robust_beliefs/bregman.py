"""
Bregman Module

Strictly proper scoring rules, Bregman divergences, and generators built
from a density of decision thresholds.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate, interpolate, optimize, special

from .errors import ConfigError, DegenerateDensity, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Integration window and resolution for generator_from_task_density
TASK_DENSITY_EPS = 1e-6
TASK_DENSITY_PANELS = 10_000


class GeneratorKind(str, Enum):
    MSE = 'mse'
    LOG = 'log'
    CUSTOM = 'custom'


@dataclass(frozen=True)
class BregmanGenerator:
    """
    Strictly convex generator G with its first two derivatives.

    All three callables must accept numpy arrays.
    """
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Callable[[np.ndarray], np.ndarray]
    g_double_prime: Callable[[np.ndarray], np.ndarray]
    kind: GeneratorKind = GeneratorKind.CUSTOM
    name: str = field(default='custom', compare=False)

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {'kind': self.kind.value, 'name': self.name}


@dataclass(frozen=True)
class TaskDensity:
    """Density of decision thresholds on (0, 1)"""
    lam: Callable[[np.ndarray], np.ndarray]

    def __call__(self, p: ArrayLike) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        values = np.asarray(self.lam(p), dtype=float)
        if values.shape != p.shape:
            values = np.broadcast_to(values, p.shape).copy()
        return values


def _neg_entropy(p):
    p = np.asarray(p, dtype=float)
    return special.xlogy(p, p) + special.xlogy(1.0 - p, 1.0 - p)


MSE = BregmanGenerator(
    g=lambda p: np.square(np.asarray(p, dtype=float)),
    g_prime=lambda p: 2.0 * np.asarray(p, dtype=float),
    g_double_prime=lambda p: np.full_like(np.asarray(p, dtype=float), 2.0),
    kind=GeneratorKind.MSE,
    name='mse',
)

LOG = BregmanGenerator(
    g=_neg_entropy,
    g_prime=lambda p: special.logit(np.asarray(p, dtype=float)),
    g_double_prime=lambda p: 1.0 / (np.asarray(p, dtype=float) * (1.0 - np.asarray(p, dtype=float))),
    kind=GeneratorKind.LOG,
    name='log',
)

GENERATORS = {
    'mse': MSE,
    'log': LOG,
}


def builtin_generator(name: str) -> BregmanGenerator:
    """
    Look up a built-in generator by its CLI name.

    Raises:
        ConfigError: If the name is unknown
    """
    try:
        return GENERATORS[name.lower()]
    except KeyError:
        raise ConfigError(f"Unknown loss {name!r}; choose from {sorted(GENERATORS)}")


def _check_unit_interval(x: np.ndarray, label: str) -> None:
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise DomainError(f"{label} must lie in [0, 1]")


def _scalar_or_array(x: np.ndarray, scalar: bool):
    return float(x) if scalar else x


def divergence(G: BregmanGenerator, p: ArrayLike, a: ArrayLike) -> ArrayLike:
    """
    Bregman divergence B_G(p || a) = G(p) - G(a) - (p - a) G'(a).

    Under LOG a report on the boundary that misses p gives +inf. Callers
    that aggregate decide whether that event carries weight.

    Args:
        G: Generator
        p: Target probability (scalar or array)
        a: Reported probability (scalar or array, broadcastable with p)

    Returns:
        Nonnegative divergence, same shape as the broadcast inputs

    Raises:
        DomainError: If p or a lies outside [0, 1]
    """
    scalar = np.ndim(p) == 0 and np.ndim(a) == 0
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    _check_unit_interval(p, 'p')
    _check_unit_interval(a, 'a')

    if G.kind is GeneratorKind.MSE:
        d = np.square(p - a)
    elif G.kind is GeneratorKind.LOG:
        d = special.rel_entr(p, a) + special.rel_entr(1.0 - p, 1.0 - a)
    else:
        with np.errstate(invalid='ignore'):
            d = G.g(p) - G.g(a) - (p - a) * G.g_prime(a)
        d = np.where(p == a, 0.0, d)

    return _scalar_or_array(np.maximum(d, 0.0), scalar)


def expected_score(G: BregmanGenerator, a: ArrayLike, p: ArrayLike) -> ArrayLike:
    """
    Savage-form expected score G(a) + (p - a) G'(a), maximized at a = p.

    Args:
        G: Generator
        a: Reported probability
        p: True probability

    Returns:
        Expected score (may be -inf for LOG at the boundary)
    """
    scalar = np.ndim(p) == 0 and np.ndim(a) == 0
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    _check_unit_interval(p, 'p')
    _check_unit_interval(a, 'a')

    if G.kind is GeneratorKind.LOG:
        # Closed form of the expected log score, finite whenever p is attainable
        score = special.xlogy(p, a) + special.xlogy(1.0 - p, 1.0 - a)
    else:
        score = G.g(a) + (p - a) * G.g_prime(a)
    return _scalar_or_array(score, scalar)


def bregman_mean_minimizer(
    G: BregmanGenerator,
    ps: Sequence[float],
    weights: Sequence[float]
) -> float:
    """
    Numerically minimize a -> sum_i w_i B_G(p_i || a).

    The first-order condition is sum_i w_i (a - p_i) G''(a) = 0, solved
    by Brent's method on the hull of the p_i.

    Args:
        G: Generator
        ps: Target probabilities
        weights: Nonnegative weights (normalized internally)

    Returns:
        The minimizing report
    """
    ps = np.asarray(ps, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    lo, hi = float(ps.min()), float(ps.max())
    if hi - lo < 1e-15:
        return lo

    def first_order(a: float) -> float:
        return float(np.sum(w * (a - ps)) * G.g_double_prime(np.asarray(a)))

    return float(optimize.brentq(first_order, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def generator_from_task_density(
    lam: Union[TaskDensity, Callable],
    eps: float = TASK_DENSITY_EPS,
    panels: int = TASK_DENSITY_PANELS
) -> BregmanGenerator:
    """
    Build a generator whose curvature equals the given task density.

    G' and G are cumulative Simpson antiderivatives of lam on [eps, 1-eps],
    interpolated with cubic Hermite splines. The two integration constants
    are arbitrary; they cancel in every divergence.

    Args:
        lam: Density of decision thresholds
        eps: Distance of the integration window from the boundary
        panels: Number of Simpson panels (two intervals each)

    Returns:
        CUSTOM generator with g_double_prime equal to lam

    Raises:
        DegenerateDensity: If lam vanishes on the grid or is negative
    """
    density = lam if isinstance(lam, TaskDensity) else TaskDensity(lam)
    x = np.linspace(eps, 1.0 - eps, 2 * panels + 1)
    lam_x = density(x)

    if not np.all(np.isfinite(lam_x)):
        raise DegenerateDensity("Task density is not finite on the integration grid")
    if np.any(lam_x < 0.0):
        raise DegenerateDensity("Task density takes negative values")
    if not np.any(lam_x > 0.0):
        raise DegenerateDensity("Task density vanishes on the grid; no strictly convex generator")

    slope = integrate.cumulative_simpson(lam_x, x=x, initial=0.0)
    level = integrate.cumulative_simpson(slope, x=x, initial=0.0)

    g_spline = interpolate.CubicHermiteSpline(x, level, slope)
    g_prime_spline = interpolate.CubicHermiteSpline(x, slope, lam_x)

    logger.debug(f"Built generator from task density on {x.size} nodes")
    return BregmanGenerator(
        g=lambda p: g_spline(np.asarray(p, dtype=float)),
        g_prime=lambda p: g_prime_spline(np.asarray(p, dtype=float)),
        g_double_prime=density,
        kind=GeneratorKind.CUSTOM,
        name='task-density',
    )


def task_portfolio_loss(lam: Union[TaskDensity, Callable], q: float) -> float:
    """
    Expected decision loss of acting on belief q across a threshold portfolio.

    Each threshold c in (0, 1) is a binary decision with loss
    min{q(1-c), (1-q)c}; lam weights the thresholds. The negative of this
    loss is a generator whose curvature is lam.

    Args:
        lam: Density of decision thresholds
        q: Belief in [0, 1]

    Returns:
        Weighted expected loss
    """
    density = lam if isinstance(lam, TaskDensity) else TaskDensity(lam)
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q}")

    def below(c):
        return float(c * density(c))

    def above(c):
        return float((1.0 - c) * density(c))

    lower = integrate.quad(below, 0.0, q, limit=200)[0] if q > 0.0 else 0.0
    upper = integrate.quad(above, q, 1.0, limit=200)[0] if q < 1.0 else 0.0
    return (1.0 - q) * lower + q * upper
