"""
Utility Functions

Helpers for root bracketing, peak counting, parallel sweeps, and
deterministic serialization of results.
"""

import os
import math
import logging
import tempfile
import dataclasses
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any, Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np
from scipy import optimize

from .errors import NoBracket

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

# Bisection defaults shared by the nested solvers
BISECT_MAX_ITER = 200
BISECT_XTOL = 1e-15


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = BISECT_XTOL,
    max_iter: int = BISECT_MAX_ITER,
    label: str = 'root'
) -> float:
    """
    Find a root of f on [lo, hi] by bisection.

    Args:
        f: Continuous scalar function
        lo: Left end of the bracket
        hi: Right end of the bracket
        xtol: Absolute tolerance on the root location
        max_iter: Iteration cap
        label: Name used in error messages and logs

    Returns:
        Root location

    Raises:
        NoBracket: If f(lo) and f(hi) have the same strict sign
    """
    f_lo = f(lo)
    if f_lo == 0.0:
        return lo
    f_hi = f(hi)
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoBracket(
            f"No sign change for {label} on [{lo}, {hi}]: "
            f"f(lo)={f_lo:.6g}, f(hi)={f_hi:.6g}"
        )
    root = optimize.bisect(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                           maxiter=max_iter, disp=False)
    logger.debug(f"{label}: root {root!r} on [{lo}, {hi}]")
    return float(root)


def local_maxima(values: Sequence[float], atol: float = 1e-15) -> List[int]:
    """
    Indices of strict local maxima in a sampled curve, endpoints included.

    Differences smaller than ``atol`` are treated as flat and skipped, so
    rounding noise on a plateau does not create spurious peaks.

    Args:
        values: Curve samples on an ordered grid
        atol: Flatness threshold for consecutive differences

    Returns:
        Sorted list of peak indices
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return [0] if v.size else []

    diffs = np.diff(v)
    steps = [(i, 1 if d > 0 else -1) for i, d in enumerate(diffs) if abs(d) > atol]
    if not steps:
        return []

    peaks = []
    # Left endpoint is a peak when the curve starts by falling
    if steps[0][1] < 0:
        peaks.append(0)
    for (i, s_prev), (j, s_next) in zip(steps, steps[1:]):
        if s_prev > 0 and s_next < 0:
            # Peak sits after the last rise; on flat tops take its left edge
            peaks.append(i + 1)
    if steps[-1][1] > 0:
        peaks.append(v.size - 1)
    return peaks


def parallel_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    max_workers: Optional[int] = None
) -> List[R]:
    """
    Apply fn to each item on a thread pool, preserving input order.

    Args:
        fn: Function to apply
        items: Inputs
        max_workers: Worker cap; defaults to the configured thread count

    Returns:
        List of results in input order
    """
    items = list(items)
    if max_workers is None:
        from .config import get_settings
        max_workers = get_settings().threads

    if max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(max_workers, len(items))) as pool:
        return list(pool.map(fn, items))


def format_time_duration(seconds: float) -> str:
    """Wall time for run logs: milliseconds below a second, whole minutes past one"""
    if seconds >= 60:
        minutes, rest = divmod(int(seconds), 60)
        return f"{minutes}m {rest}s"
    return f"{seconds:.1f}s" if seconds >= 1 else f"{seconds * 1e3:.0f}ms"


def format_float(x: float) -> str:
    """Shortest round-trip decimal form; non-finite values as inf/-inf/nan"""
    x = float(x)
    if math.isnan(x):
        return 'nan'
    if math.isinf(x):
        return 'inf' if x > 0 else '-inf'
    return repr(x)


def to_jsonable(obj: Any) -> Any:
    """
    Convert results into plain JSON-compatible structures.

    Dataclasses use their ``to_dict`` when defined. numpy scalars and
    arrays become Python numbers and lists. Non-finite floats become strings.
    """
    if hasattr(obj, 'to_dict') and callable(obj.to_dict):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else format_float(x)
    return obj


def atomic_write_text(path: str, text: str) -> None:
    """
    Write text to path via a temporary sibling file and a rename.

    Args:
        path: Destination file
        text: Content (written as UTF-8 with LF newlines)
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix='.part')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
