"""
Validation Module

Checks a RunConfig before anything is computed. Every violation raises
ConfigError, which the CLI maps to exit code 2.
"""

import logging
from typing import Any, Dict

from .bregman import GENERATORS
from .config import RunConfig
from .errors import ConfigError

logger = logging.getLogger(__name__)

# Accepted parameters per command
COMMAND_PARAMS = {
    'solve-finite': {'n', 'method', 'tol'},
    'solve-limit': {'tol', 'rule', 'nodes'},
    'limit-profile': {'b_max', 'step', 'rule', 'nodes'},
    'trend': {'n_min', 'n_max'},
    'asymptotics': {'pi_true', 'n_list'},
    'convergence': {'n_list'},
    'general-rate': {'signals', 'alpha', 'c', 'n_list', 'mode', 'samples'},
    'reproduce': {'figure'},
}

TABLE_COMMANDS = {'limit-profile', 'trend', 'asymptotics', 'convergence', 'general-rate'}
FORMATS = {'json', 'csv'}
METHODS = {'structural', 'double-oracle', 'both'}
RULES = {'gauss_hermite', 'gauss_legendre', 'adaptive', 'adaptive_simpson'}
REGRET_MODES = {'auto', 'exact', 'mc'}
FIGURES = {'fig1', 'fig2', 'fig3', 'fig4'}

MAX_SEED = 2 ** 64
MAX_FINITE_N = 1000


class ConfigValidator:
    """
    Run configuration validator.

    Checks the command name, rejects unknown keys, and keeps each numeric
    parameter inside the range its operation accepts.
    """

    @staticmethod
    def validate(config: RunConfig) -> None:
        """
        Validate a run configuration.

        Args:
            config: Parsed run configuration

        Raises:
            ConfigError: On unknown commands or keys, or out-of-range values
        """
        if config.command not in COMMAND_PARAMS:
            raise ConfigError(f"Unknown command {config.command!r}; choose from {sorted(COMMAND_PARAMS)}")

        unknown = set(config.params) - COMMAND_PARAMS[config.command]
        if unknown:
            raise ConfigError(f"Unknown parameters for {config.command}: {sorted(unknown)}")

        if not 0 <= config.seed < MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {config.seed}")
        if config.format not in FORMATS:
            raise ConfigError(f"format must be one of {sorted(FORMATS)}, got {config.format!r}")
        if config.format == 'csv' and config.command not in TABLE_COMMANDS and config.command != 'reproduce':
            raise ConfigError(f"{config.command} reports a record, not a table; use --format json")
        if config.loss not in GENERATORS:
            raise ConfigError(f"loss must be one of {sorted(GENERATORS)}, got {config.loss!r}")
        if config.threads is not None and config.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {config.threads}")
        if config.command == 'reproduce' and not config.output_path:
            raise ConfigError("reproduce needs --out <directory>")

        ConfigValidator._validate_params(config.command, config.params)

    @staticmethod
    def _validate_params(command: str, p: Dict[str, Any]) -> None:
        if 'n' in p and not 1 <= p['n'] <= MAX_FINITE_N:
            raise ConfigError(f"n must lie in [1, {MAX_FINITE_N}], got {p['n']}")
        if 'method' in p and p['method'] not in METHODS:
            raise ConfigError(f"method must be one of {sorted(METHODS)}, got {p['method']!r}")
        if 'tol' in p:
            if not p['tol'] > 0:
                raise ConfigError(f"tol must be positive, got {p['tol']}")
            if command == 'solve-limit' and p['tol'] > 1e-8:
                raise ConfigError(f"solve-limit needs tol <= 1e-8, got {p['tol']}")
        if 'rule' in p and p['rule'] not in RULES:
            raise ConfigError(f"rule must be one of {sorted(RULES)}, got {p['rule']!r}")
        if 'nodes' in p and p['nodes'] < 64:
            raise ConfigError(f"nodes must be >= 64, got {p['nodes']}")
        if 'b_max' in p and not p['b_max'] > 0:
            raise ConfigError(f"b_max must be positive, got {p['b_max']}")
        if 'step' in p and not 0 < p['step'] <= 0.01:
            raise ConfigError(f"step must lie in (0, 0.01], got {p['step']}")
        if 'n_min' in p and p['n_min'] < 1:
            raise ConfigError(f"n_min must be >= 1, got {p['n_min']}")
        if 'n_max' in p and p['n_max'] < p.get('n_min', 1):
            raise ConfigError(f"n_max must be >= n_min, got {p['n_max']}")
        if 'pi_true' in p and not 0.5 < p['pi_true'] <= 1.0:
            raise ConfigError(f"pi_true must lie in (1/2, 1], got {p['pi_true']}")
        if 'n_list' in p:
            ns = p['n_list']
            if not ns or any(n < 1 for n in ns):
                raise ConfigError(f"n_list must be non-empty positive integers, got {ns}")
            if command == 'convergence' and list(ns) != sorted(ns):
                raise ConfigError(f"convergence needs an ascending n_list, got {ns}")
        if 'signals' in p and not 2 <= p['signals'] <= 16:
            raise ConfigError(f"signals must lie in [2, 16], got {p['signals']}")
        if 'alpha' in p and (not p['alpha'] or any(a <= 0 for a in p['alpha'])):
            raise ConfigError(f"alpha must be a non-empty list of positive values, got {p['alpha']}")
        if 'c' in p and not p['c'] > 0:
            raise ConfigError(f"c must be positive, got {p['c']}")
        if 'mode' in p and p['mode'] not in REGRET_MODES:
            raise ConfigError(f"mode must be one of {sorted(REGRET_MODES)}, got {p['mode']!r}")
        if 'samples' in p and p['samples'] < 100:
            raise ConfigError(f"samples must be >= 100, got {p['samples']}")
        if 'figure' in p and p['figure'] not in FIGURES:
            raise ConfigError(f"figure must be one of {sorted(FIGURES)}, got {p['figure']!r}")


def validate_config(config: RunConfig) -> None:
    """
    Convenience function for run configuration validation.

    Args:
        config: Parsed run configuration

    Raises:
        ConfigError: If the configuration is invalid
    """
    ConfigValidator.validate(config)
