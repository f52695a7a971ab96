"""
Command-Line Interface

Parses a command into a RunConfig, dispatches it to the solvers, and
writes a deterministic JSON report or CSV table. Failures print a JSON
error record on stderr and leave the output path untouched.

Usage:
    python -m robust_beliefs solve-finite --n 3
    python -m robust_beliefs solve-limit --tol 1e-9 --out limit.json
    python -m robust_beliefs reproduce --figure fig4 --out figures/
"""

import os
import sys
import json
import time
import logging
import argparse
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from .asymptotics import (
    FitMode,
    TrueDGP,
    convergence_table,
    fit_decay_rate,
    kl_bernoulli,
    misspec_limit_constant,
    misspecification_table,
    robust_rate,
)
from .binary_game import solve_finite, solve_trend, verify_global_optimality
from .bregman import builtin_generator
from .config import RunConfig, Settings
from .errors import ConfigError
from .figures import render_csv, reproduce_figure
from .general_game import clip_rate_constant, rate_experiment
from .limit_game import (
    QuadratureSpec,
    equilibrium_value,
    parse_rule,
    profile_grid,
    regret_profile,
    solve_limit_equilibrium,
)
from .utils import atomic_write_text, format_time_duration, to_jsonable
from .validation import validate_config

logger = logging.getLogger(__name__)

SCHEMA_VERSION = '1.0'
RATE_FIT_MIN_N = 400

DEFAULT_FORMATS = {
    'solve-finite': 'json',
    'solve-limit': 'json',
    'limit-profile': 'csv',
    'trend': 'csv',
    'asymptotics': 'csv',
    'convergence': 'csv',
    'general-rate': 'csv',
    'reproduce': 'json',
}

Table = Tuple[List[str], List[Sequence]]


@dataclass
class ReportEnvelope:
    """Versioned report: config echo, results and provenance"""
    config_echo: Dict[str, Any]
    results: Any
    provenance: Dict[str, Any] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    table: Optional[Table] = field(default=None, repr=False)

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {
            'schema_version': self.schema_version,
            'config_echo': self.config_echo,
            'results': self.results,
            'provenance': self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(to_jsonable(self), indent=2, ensure_ascii=False, sort_keys=True) + '\n'


# ============================================================================
# Argument parsing
# ============================================================================

class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises ConfigError instead of exiting"""

    def error(self, message):
        raise ConfigError(message)


def parse_int_list(text: str) -> List[int]:
    """Parse '3..18' (inclusive range) or '100,200,400'"""
    try:
        if '..' in text:
            lo, hi = text.split('..', 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise ConfigError(f"Cannot parse integer list {text!r}")


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise ConfigError(f"Cannot parse number list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--out', default=None, help='Output path (stdout when omitted)')
    common.add_argument('--format', default=None, help='json or csv')
    common.add_argument('--loss', default='mse', help='mse or log')
    common.add_argument('--quiet', action='store_true')
    common.add_argument('--no-timing', action='store_true', help='Omit wall time for byte-stable reports')
    common.add_argument('--threads', type=int, default=None)

    parser = _Parser(prog='robust_beliefs', description='Minimax-regret learning games')
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)

    p = sub.add_parser('solve-finite', parents=[common], help='Finite-sample binary game')
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--method', default='structural')
    p.add_argument('--tol', type=float, default=1e-8)

    p = sub.add_parser('solve-limit', parents=[common], help='Gaussian limit game')
    p.add_argument('--tol', type=float, default=1e-9)
    p.add_argument('--rule', default='gauss_hermite')
    p.add_argument('--nodes', type=int, default=200)

    p = sub.add_parser('limit-profile', parents=[common], help='Limit regret profile b -> R(b)')
    p.add_argument('--b-max', type=float, default=3.0)
    p.add_argument('--step', type=float, default=0.01)
    p.add_argument('--rule', default='gauss_hermite')
    p.add_argument('--nodes', type=int, default=200)

    p = sub.add_parser('trend', parents=[common], help='Finite equilibria over a range of n')
    p.add_argument('--n-min', type=int, default=3)
    p.add_argument('--n-max', type=int, default=18)

    p = sub.add_parser('asymptotics', parents=[common], help='Loss and regret under a fixed true precision')
    p.add_argument('--pi-true', type=float, default=0.75)
    p.add_argument('--n-list', type=parse_int_list, default=list(range(400, 4001, 400)))

    p = sub.add_parser('convergence', parents=[common], help='Finite-to-limit convergence table')
    p.add_argument('--n-list', type=parse_int_list, default=list(range(3, 19)))

    p = sub.add_parser('general-rate', parents=[common], help='Local-alternative rate experiment')
    p.add_argument('--signals', type=int, default=3)
    p.add_argument('--alpha', type=parse_float_list, default=[0.25, 0.5, 1.0])
    p.add_argument('--c', type=float, default=1.0)
    p.add_argument('--n-list', type=parse_int_list, default=[25, 50, 100, 200])
    p.add_argument('--mode', default='auto')
    p.add_argument('--samples', type=int, default=200_000)

    p = sub.add_parser('reproduce', parents=[common], help='Plot-ready CSVs for a figure')
    p.add_argument('--figure', required=True)
    return parser


GLOBAL_KEYS = {'command', 'seed', 'out', 'format', 'loss', 'quiet', 'no_timing', 'threads'}


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    if not args.command:
        raise ConfigError("No command given")
    params = {k: v for k, v in vars(args).items() if k not in GLOBAL_KEYS}
    if 'figure' in params and str(params['figure']).isdigit():
        params['figure'] = f"fig{params['figure']}"

    fmt = args.format
    if fmt is None:
        fmt = 'csv' if args.out and args.out.endswith('.csv') else DEFAULT_FORMATS[args.command]

    return RunConfig(
        command=args.command,
        params=params,
        seed=args.seed,
        output_path=args.out,
        format=fmt,
        loss=args.loss,
        quiet=args.quiet,
        record_timing=not args.no_timing,
        threads=args.threads,
    )


# ============================================================================
# Command handlers
# ============================================================================

def _quad(params: Dict[str, Any]) -> QuadratureSpec:
    return QuadratureSpec(rule=parse_rule(params.get('rule', 'gauss_hermite')), nodes=params.get('nodes', 200))


def _solve_finite(config: RunConfig):
    p = config.params
    G = builtin_generator(config.loss)
    solved = solve_finite(p['n'], G, p.get('method', 'structural'), p.get('tol', 1e-8))

    results, residuals = {}, {}
    for name, eq in solved.items():
        record = eq.to_dict()
        record['verification'] = verify_global_optimality(eq, p['n'], G=G).to_dict()
        results[name] = record
        residuals[name] = eq.residuals.to_dict()
    if len(solved) == 2:
        s, d = solved['structural'], solved['double-oracle']
        results['disagreement'] = {
            'value': abs(s.value - d.value),
            'pi_star': abs(s.pi_star - d.pi_star),
            'w': abs(s.w - d.w),
        }
    return results, {'residuals': residuals}, None


def _solve_limit(config: RunConfig):
    quad = _quad(config.params)
    params = solve_limit_equilibrium(quad, config.params.get('tol', 1e-9))
    value = equilibrium_value(params, quad)
    results = {
        'c_star': params.c_star,
        'w_star': params.w_star,
        'value': value,
        'residuals': params.to_dict()['residuals'],
    }
    return results, {'quadrature': quad.to_dict(), 'residuals': results['residuals']}, None


def _limit_profile(config: RunConfig):
    quad = _quad(config.params)
    params = solve_limit_equilibrium(quad)
    b_max = config.params.get('b_max', 3.0)
    grid = profile_grid(b_max, config.params.get('step', 0.01))
    profile = regret_profile(params, grid, quad, strict=b_max >= 3.0)

    results = params.to_dict()
    results['profile'] = profile.to_dict()
    table = (['b', 'regret'], [(float(b), float(r)) for b, r in zip(profile.grid, profile.regrets)])
    return results, {'quadrature': quad.to_dict()}, table


def _trend(config: RunConfig):
    ns = list(range(config.params.get('n_min', 3), config.params.get('n_max', 18) + 1))
    equilibria = solve_trend(ns)
    results = [eq.to_dict() for eq in equilibria]
    width = max(ns) + 1
    # Belief columns a_0..a_{n_max}; shorter rows are padded with blanks
    rows = [(eq.n, eq.pi_star, eq.w, eq.value) + tuple(float(a) for a in eq.beliefs.a) + (None,) * (width - eq.n - 1)
            for eq in equilibria]
    header = ['n', 'pi_star', 'w', 'value'] + [f'a_{k}' for k in range(width)]
    provenance = {'residuals': {str(eq.n): eq.residuals.to_dict() for eq in equilibria}}
    return results, provenance, (header, rows)


def _asymptotics(config: RunConfig):
    quad = _quad(config.params)
    params = solve_limit_equilibrium(quad)
    dgp = TrueDGP(config.params.get('pi_true', 0.75))
    n_list = config.params['n_list']
    rows = misspecification_table(dgp, n_list, params)

    results = {'rows': rows, 'robust_rate': robust_rate(params, dgp),
               'oracle_rate': kl_bernoulli(0.5, dgp.pi_true),
               'limit_constant': misspec_limit_constant(params, dgp)}
    window = [r for r in rows if r.n >= RATE_FIT_MIN_N]
    if len(window) >= 4:
        ns = [r.n for r in window]
        results['robust_fit'] = fit_decay_rate(ns, mode=FitMode.SQRT_N, log_losses=[r.log_L_n for r in window])
        results['oracle_fit'] = fit_decay_rate(ns, mode=FitMode.LINEAR_N, log_losses=[r.log_L_oracle for r in window])

    header = ['n', 'L_n', 'log_L_n', 'L_oracle', 'R_mis', 'p_under', 'p_over']
    table = (header, [(r.n, r.L_n, r.log_L_n, r.L_oracle, r.R_mis, r.p_under, r.p_over) for r in rows])
    return results, {'quadrature': quad.to_dict(), 'limit': params.to_dict()}, table


def _convergence(config: RunConfig):
    quad = _quad(config.params)
    params = solve_limit_equilibrium(quad)
    rows = convergence_table(config.params['n_list'], params, quad)
    header = ['n', 'pi_star', 'scaled_precision', 'w', 'value', 'c_star', 'w_star', 'sup_distance']
    table = (header, [(r.n, r.pi_star, r.scaled_precision, r.w, r.value, r.c_star, r.w_star, r.sup_distance)
                      for r in rows])
    return rows, {'quadrature': quad.to_dict(), 'limit': params.to_dict()}, table


def default_direction(signals: int) -> np.ndarray:
    """Move mass from all other signals onto signal 0"""
    direction = np.full(signals, -1.0 / (signals - 1))
    direction[0] = 1.0
    return direction


def _general_rate(config: RunConfig):
    p = config.params
    signals = p.get('signals', 3)
    base = np.full(signals, 1.0 / signals)
    direction = default_direction(signals)
    n_list = p['n_list']
    G = builtin_generator(config.loss)

    points = []
    for alpha in p['alpha']:
        c = clip_rate_constant(base, direction, p.get('c', 1.0), alpha, min(n_list))
        points.extend(rate_experiment(base, direction, c, alpha, n_list, G,
                                      mode=p.get('mode', 'auto'), samples=p.get('samples', 200_000),
                                      seed=config.seed))
    table = (['alpha', 'n', 'regret', 'stderr'], [(pt.alpha, pt.n, pt.regret, pt.stderr) for pt in points])
    return points, {'base': base, 'direction': direction}, table


def _reproduce(config: RunConfig):
    figure = config.params['figure']
    output = reproduce_figure(figure, config.output_path)
    return output, {}, None


def dispatch(config: RunConfig) -> ReportEnvelope:
    """
    Run the named computation and wrap its results in a report.

    Args:
        config: Validated run configuration

    Returns:
        ReportEnvelope (the caller writes it)

    Raises:
        ConfigError: For an unknown command
    """
    start = time.perf_counter()
    name = config.command

    if name == 'solve-finite':
        results, provenance, table = _solve_finite(config)
    elif name == 'solve-limit':
        results, provenance, table = _solve_limit(config)
    elif name == 'limit-profile':
        results, provenance, table = _limit_profile(config)
    elif name == 'trend':
        results, provenance, table = _trend(config)
    elif name == 'asymptotics':
        results, provenance, table = _asymptotics(config)
    elif name == 'convergence':
        results, provenance, table = _convergence(config)
    elif name == 'general-rate':
        results, provenance, table = _general_rate(config)
    elif name == 'reproduce':
        results, provenance, table = _reproduce(config)
    else:
        raise ConfigError(f"Unknown command: {name}")

    elapsed = time.perf_counter() - start
    if config.record_timing:
        provenance['wall_time_ms'] = round(elapsed * 1000.0, 3)
    logger.info(f"{name} finished in {format_time_duration(elapsed)}")
    return ReportEnvelope(config_echo=config.to_dict(), results=results, provenance=provenance, table=table)


def write_report(envelope: ReportEnvelope, config: RunConfig) -> None:
    """Write the report as JSON or CSV, atomically when a path is given"""
    if config.command == 'reproduce':
        text = envelope.to_json()
        atomic_write_text(os.path.join(config.output_path, 'manifest.json'), text)
        return

    if config.format == 'csv':
        header, rows = envelope.table
        text = render_csv(header, rows)
    else:
        text = envelope.to_json()

    if config.output_path:
        atomic_write_text(config.output_path, text)
        logger.info(f"Wrote {config.output_path}")
    else:
        sys.stdout.write(text)


def _error_record(e: Exception, command: Optional[str]) -> str:
    return json.dumps({'error': type(e).__name__, 'message': str(e), 'command': command}, indent=2)


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        stream=sys.stderr,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    load_dotenv()
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        config = run_config_from_args(args)
        validate_config(config)
        settings = Settings.from_env(threads_override=config.threads)
        if config.threads is not None:
            os.environ['ROBUST_BELIEFS_THREADS'] = str(config.threads)
    except ConfigError as e:
        sys.stderr.write(_error_record(e, command) + '\n')
        return 2

    _configure_logging('WARNING' if config.quiet else settings.log_level)

    try:
        envelope = dispatch(config)
        write_report(envelope, config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        sys.stderr.write(_error_record(e, command) + '\n')
        return 2
    except Exception as e:
        logger.error(f"{command} failed: {type(e).__name__}: {e}")
        sys.stderr.write(_error_record(e, command) + '\n')
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
