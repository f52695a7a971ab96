"""Shared fixtures for the solver test suites"""

import pytest

from robust_beliefs.binary_game import solve_structural
from robust_beliefs.limit_game import DEFAULT_QUAD, solve_limit_equilibrium


@pytest.fixture(scope="session")
def limit_params():
    """Limit equilibrium (c*, w*) under the default quadrature"""
    return solve_limit_equilibrium(DEFAULT_QUAD, tol=1e-9)


@pytest.fixture(scope="session")
def n3_equilibrium():
    return solve_structural(3)


@pytest.fixture(scope="session")
def n4_equilibrium():
    return solve_structural(4)
