"""
Figure Data

Plot-ready CSV series for the four reference figures. Each panel is
computed independently; a failing panel is logged and recorded while the
others are still written.
"""

import os
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .binary_game import n1_regret_curves, solve_structural, solve_trend, verify_global_optimality
from .limit_game import DEFAULT_QUAD, QuadratureSpec, profile_grid, regret_profile, solve_limit_equilibrium
from .utils import atomic_write_text, format_float

logger = logging.getLogger(__name__)

Table = Tuple[List[str], List[Sequence]]

FIG1_GRID = 501
FIG2_SIZES = (3, 4, 5)
FIG4_SIZES = range(3, 19)


@dataclass
class FigureOutput:
    """Files written for one figure and the panels that failed"""
    figure: str
    files: List[str] = field(default_factory=list)
    failures: List[Dict[str, str]] = field(default_factory=list)

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {'figure': self.figure, 'files': self.files, 'failures': self.failures}


def render_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    """CSV text with LF line endings; floats in shortest round-trip form"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow(['' if v is None else format_float(v) if isinstance(v, (float, np.floating)) else v
                         for v in row])
    return buffer.getvalue()


def _fig1() -> Dict[str, Table]:
    a1 = np.linspace(0.5, 1.0, FIG1_GRID)
    curves = n1_regret_curves([0.5, 1.0], a1)
    envelope = curves.max(axis=0)
    rows = [(float(x), float(lo), float(hi), float(top))
            for x, lo, hi, top in zip(a1, curves[0], curves[1], envelope)]
    return {'fig1_envelope.csv': (['a1', 'regret_pi_half', 'regret_pi_one', 'envelope'], rows)}


def _fig2_panel(n: int) -> Callable[[], Dict[str, Table]]:
    def panel() -> Dict[str, Table]:
        eq = solve_structural(n)
        diagnostics = verify_global_optimality(eq, n)
        if diagnostics.n_local_maxima != 2:
            logger.warning(f"fig2 n={n}: {diagnostics.n_local_maxima} local maxima")
        rows = [(float(p), float(r)) for p, r in zip(diagnostics.grid, diagnostics.regrets)]
        return {f'fig2_n{n}.csv': (['pi', 'regret'], rows)}
    return panel


def _fig3(quad: QuadratureSpec) -> Dict[str, Table]:
    params = solve_limit_equilibrium(quad)
    profile = regret_profile(params, profile_grid(), quad)
    rows = [(float(b), float(r)) for b, r in zip(profile.grid, profile.regrets)]
    return {'fig3_profile.csv': (['b', 'regret'], rows)}


def _fig4() -> Dict[str, Table]:
    ns = list(FIG4_SIZES)
    equilibria = solve_trend(ns)
    beliefs = [(n, k, float(a)) for n, eq in zip(ns, equilibria) for k, a in enumerate(eq.beliefs.a)]
    return {
        'fig4_pi_star.csv': (['n', 'pi_star'], [(n, eq.pi_star) for n, eq in zip(ns, equilibria)]),
        'fig4_value.csv': (['n', 'value'], [(n, eq.value) for n, eq in zip(ns, equilibria)]),
        'fig4_weight.csv': (['n', 'w'], [(n, eq.w) for n, eq in zip(ns, equilibria)]),
        'fig4_beliefs.csv': (['n', 'k', 'a'], beliefs),
    }


def figure_panels(figure: str, quad: QuadratureSpec = DEFAULT_QUAD) -> Dict[str, Callable[[], Dict[str, Table]]]:
    """Named panel builders for a figure id"""
    if figure == 'fig1':
        return {'envelope': _fig1}
    elif figure == 'fig2':
        return {f'n{n}': _fig2_panel(n) for n in FIG2_SIZES}
    elif figure == 'fig3':
        return {'profile': lambda: _fig3(quad)}
    elif figure == 'fig4':
        return {'trend': _fig4}
    raise ValueError(f"Unknown figure {figure!r}")


def reproduce_figure(figure: str, out_dir: str, quad: QuadratureSpec = DEFAULT_QUAD) -> FigureOutput:
    """
    Write the CSV series of one figure into out_dir.

    Args:
        figure: fig1, fig2, fig3 or fig4
        out_dir: Target directory (created if missing)
        quad: Quadrature for the limit-game panels

    Returns:
        FigureOutput listing written files and failed panels
    """
    output = FigureOutput(figure=figure)
    for name, build in figure_panels(figure, quad).items():
        try:
            tables = build()
        except Exception as e:
            logger.warning(f"{figure} panel {name} failed: {type(e).__name__}: {e}")
            output.failures.append({'panel': name, 'error': type(e).__name__, 'message': str(e)})
            continue
        for filename, (header, rows) in tables.items():
            atomic_write_text(os.path.join(out_dir, filename), render_csv(header, rows))
            output.files.append(filename)
            logger.info(f"Wrote {filename} ({len(rows)} rows)")
    return output
