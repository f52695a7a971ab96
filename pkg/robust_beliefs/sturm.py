"""
Sturm Root Counting

Exact count of the real roots of a polynomial on an interval, using
rational arithmetic so float rounding cannot move a root across an
endpoint.
"""

import logging
from fractions import Fraction
from typing import List, Sequence

import sympy

from .errors import NotSquareFree

logger = logging.getLogger(__name__)

_X = sympy.Symbol('x')


def _exact(value) -> sympy.Rational:
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(value, float):
        # Exact binary value of the float, not a decimal approximation
        return sympy.Rational(value)
    return sympy.Rational(sympy.sympify(value))


def _sign_changes(sequence: List[sympy.Poly], at: sympy.Rational) -> int:
    signs = [sympy.sign(p.eval(at)) for p in sequence]
    signs = [s for s in signs if s != 0]
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def sturm_root_count(coeffs: Sequence, lo, hi) -> int:
    """
    Number of distinct real roots in (lo, hi].

    Args:
        coeffs: Coefficients, highest degree first (floats, ints, Fractions
            or sympy rationals)
        lo: Left end of the interval
        hi: Right end of the interval

    Returns:
        Root count

    Raises:
        NotSquareFree: If the polynomial shares a factor with its derivative
        ValueError: If all coefficients are zero or lo >= hi
    """
    exact = [_exact(c) for c in coeffs]
    while exact and exact[0] == 0:
        exact.pop(0)
    if not exact:
        raise ValueError("Zero polynomial has no finite root count")

    a, b = _exact(lo), _exact(hi)
    if a >= b:
        raise ValueError(f"Empty interval [{lo}, {hi}]")

    poly = sympy.Poly(exact, _X, domain='QQ')
    if poly.degree() == 0:
        return 0

    common = sympy.gcd(poly, poly.diff(_X))
    if common.degree() > 0:
        raise NotSquareFree(f"Polynomial has a repeated factor {common.as_expr()}")

    sequence = sympy.sturm(poly)
    count = _sign_changes(sequence, a) - _sign_changes(sequence, b)
    logger.debug(f"Sturm count on ({lo}, {hi}]: {count} (degree {poly.degree()})")
    return count
