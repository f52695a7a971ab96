"""
Error Types

Exception hierarchy shared by every solver module.
"""


class RobustBeliefsError(Exception):
    """Base class for all library errors"""
    pass


class ConfigError(RobustBeliefsError, ValueError):
    """Raised when a run configuration has unknown keys or out-of-range values"""
    pass


class DomainError(RobustBeliefsError, ValueError):
    """Raised when a divergence is infinite on an event with positive weight"""
    pass


class DegenerateDensity(RobustBeliefsError):
    """Raised when a task density cannot generate a strictly convex function"""
    pass


class RangeError(RobustBeliefsError, ValueError):
    """Raised when a count or dimension is outside its admissible range"""
    pass


class ZeroMassCount(RobustBeliefsError):
    """Raised (in strict mode) when a count has zero marginal mass under a mixture"""
    pass


class NoBracket(RobustBeliefsError):
    """Raised when a root-finder cannot find a sign change"""
    pass


class IterationLimit(RobustBeliefsError):
    """
    Raised when an iterative solver runs out of iterations.

    The best result found so far is attached as ``best``.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class NotSquareFree(RobustBeliefsError):
    """Raised when a polynomial shares a factor with its derivative"""
    pass


class QuadratureDisagreement(RobustBeliefsError):
    """Raised when two quadrature rules disagree beyond tolerance"""
    pass


class ShapeViolation(RobustBeliefsError):
    """Raised when a regret profile does not have the expected two peaks"""
    pass


class DegenerateFit(RobustBeliefsError):
    """Raised when a decay-rate fit receives non-positive or non-finite losses"""
    pass


class ImpossibleEvent(RobustBeliefsError):
    """Raised when a count vector has zero likelihood in both states"""
    pass


class SizeLimit(RobustBeliefsError):
    """Raised when exact enumeration would be too large; use Monte Carlo instead"""
    pass


class SimplexViolation(RobustBeliefsError, ValueError):
    """Raised when a perturbed distribution leaves the probability simplex"""
    pass


class IdentificationError(RobustBeliefsError):
    """Raised when an experiment set breaks the KL identification ordering"""
    pass
