"""
Robust Beliefs

Minimax-regret learning games: a decision maker reports beliefs about a
binary state while Nature picks the informativeness of the signals. The
package solves the finite-sample game, its Gaussian limit, the rates of
learning under a fixed true precision, and general finite-signal checks.
"""

__version__ = "1.0.0"
__author__ = "Robust Beliefs Developers"

from .bregman import GENERATORS, LOG, MSE, BregmanGenerator, divergence, generator_from_task_density
from .binary_game import (
    BeliefVector,
    DoubleOracleSolver,
    FiniteEquilibrium,
    NatureMixtureFinite,
    exante_regret,
    solve_double_oracle,
    solve_structural,
)
from .limit_game import LimitParams, QuadratureSpec, equilibrium_value, solve_limit_equilibrium
from .asymptotics import TrueDGP, dm_loss, fit_decay_rate, oracle_loss
from .general_game import GeneralMixture, MultinomialExperiment, dm_rule_general, general_regret
from .errors import RobustBeliefsError
from .cli import main

__all__ = [
    "BeliefVector",
    "BregmanGenerator",
    "DoubleOracleSolver",
    "FiniteEquilibrium",
    "GENERATORS",
    "GeneralMixture",
    "LOG",
    "LimitParams",
    "MSE",
    "MultinomialExperiment",
    "NatureMixtureFinite",
    "QuadratureSpec",
    "RobustBeliefsError",
    "TrueDGP",
    "divergence",
    "dm_loss",
    "dm_rule_general",
    "equilibrium_value",
    "exante_regret",
    "fit_decay_rate",
    "general_regret",
    "generator_from_task_density",
    "main",
    "oracle_loss",
    "solve_double_oracle",
    "solve_limit_equilibrium",
    "solve_structural",
]
