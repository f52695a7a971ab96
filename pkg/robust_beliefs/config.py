"""
Configuration Module

Environment-backed settings. Values come from the process environment,
optionally populated from a .env file by the CLI entry point.
"""

import os
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from .errors import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = 'ROBUST_BELIEFS_THREADS'
LOG_LEVEL_ENV = 'ROBUST_BELIEFS_LOG_LEVEL'


@dataclass(frozen=True)
class Settings:
    """Process-wide settings"""
    threads: int
    log_level: str = 'INFO'

    @classmethod
    def from_env(cls, threads_override: Optional[int] = None) -> 'Settings':
        """
        Build settings from environment variables.

        Args:
            threads_override: Explicit worker cap (e.g. from --threads); wins over env

        Returns:
            Settings instance

        Raises:
            ConfigError: If ROBUST_BELIEFS_THREADS is not a positive integer
        """
        raw = os.getenv(THREADS_ENV)
        if threads_override is not None:
            threads = threads_override
        elif raw:
            try:
                threads = int(raw)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
        else:
            threads = os.cpu_count() or 1

        if threads < 1:
            raise ConfigError(f"Worker count must be >= 1, got {threads}")

        level = os.getenv(LOG_LEVEL_ENV, 'INFO').upper()
        if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            logger.warning(f"Unknown log level {level!r}, falling back to INFO")
            level = 'INFO'

        return cls(threads=threads, log_level=level)


def get_settings() -> Settings:
    """Convenience accessor used by sweep helpers"""
    return Settings.from_env()


@dataclass(frozen=True)
class RunConfig:
    """
    One CLI invocation: the command, its numeric parameters and output options.

    ``params`` holds the command-specific values keyed by their long-option
    names with underscores (``n_list``, ``pi_true``, ...).
    """
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    output_path: Optional[str] = None
    format: str = 'json'
    loss: str = 'mse'
    quiet: bool = False
    record_timing: bool = True
    threads: Optional[int] = None

    def to_dict(self):
        """Echo used in report envelopes; excludes process-local options"""
        return {
            'command': self.command,
            'params': dict(self.params),
            'seed': self.seed,
            'format': self.format,
            'loss': self.loss,
        }
