"""
Package entry point for the command-line interface.

Usage:
    python -m robust_beliefs <command> [options]
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
