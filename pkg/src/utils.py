"""Utility functions: root scanning, formatting, ordered parallel map."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_SCAN_INTERVALS, DEFAULT_XTOL
from .errors import ParameterError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class ScanSettings:
    """Bracket scan over [lo, hi]; None bounds are chosen by the solver."""

    lo: Optional[float] = None
    hi: Optional[float] = None
    intervals: int = DEFAULT_SCAN_INTERVALS
    spacing: str = "log"
    xtol: float = DEFAULT_XTOL

    def __post_init__(self) -> None:
        if self.intervals < 1:
            raise ParameterError(f"scan needs at least one interval, got {self.intervals}")
        if self.spacing not in ("log", "linear"):
            raise ParameterError(f"unknown spacing '{self.spacing}'")

    def nodes(self, lo: float, hi: float) -> np.ndarray:
        return scan_nodes(lo, hi, self.intervals, self.spacing)


def scan_nodes(lo: float, hi: float, intervals: int, spacing: str = "log") -> np.ndarray:
    """``intervals + 1`` nodes covering [lo, hi], log- or linearly spaced."""
    if not (0.0 < lo < hi):
        raise ParameterError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if spacing == "log":
        return np.geomspace(lo, hi, intervals + 1)
    if spacing == "linear":
        return np.linspace(lo, hi, intervals + 1)
    raise ParameterError(f"unknown spacing '{spacing}'")


def bracket_roots(func: Callable[[float], float], nodes: np.ndarray,
                  values: Optional[np.ndarray] = None,
                  xtol: float = DEFAULT_XTOL) -> List[float]:
    """
    Roots of ``func`` located by sign changes between consecutive nodes and
    refined with Brent's method. Non-finite node values break brackets.
    A node where the value is exactly zero is reported once.
    """
    if values is None:
        values = np.array([func(float(x)) for x in nodes])
    roots: List[float] = []
    finite = np.isfinite(values)
    for i, x in enumerate(nodes):
        if finite[i] and values[i] == 0.0:
            roots.append(float(x))
    for i in range(len(nodes) - 1):
        if not (finite[i] and finite[i + 1]):
            continue
        if values[i] * values[i + 1] < 0.0:
            try:
                roots.append(float(brentq(func, nodes[i], nodes[i + 1], xtol=xtol)))
            except (ValueError, ArithmeticError) as exc:
                logger.debug("bracket [%g, %g] skipped: %s", nodes[i], nodes[i + 1], exc)
    return sorted(roots)


def dedupe_sorted(values: Iterable[float], rel_tol: float = 1e-9) -> List[float]:
    out: List[float] = []
    for x in sorted(values):
        if out and abs(x - out[-1]) <= rel_tol * max(1.0, abs(x)):
            continue
        out.append(x)
    return out


def fmt_float(x: float) -> str:
    """Round-trippable float text for CSV and JSON output."""
    return format(float(x), ".17g")


def ordered_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Map ``fn`` over ``items`` keeping input order; threads when workers > 1."""
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def merge_flat_roots(func: Callable[[float], float], roots: Sequence[float],
                     tol: float, samples: int = 8, keep: Iterable[float] = ()) -> List[float]:
    """
    Merge neighbouring roots when |func| stays within ``tol`` (relative to
    max(1, x)) at interior sample points between them: a tangency, not
    distinct roots. Values in ``keep`` win their merged group.
    """
    anchors = set(keep)
    out: List[float] = []
    for x in sorted(roots):
        if out:
            prev = out[-1]
            inner = np.linspace(prev, x, samples + 2)[1:-1]
            values = np.array([func(float(t)) for t in inner])
            if np.all(np.isfinite(values)) and np.all(np.abs(values) <= tol * np.maximum(1.0, np.abs(inner))):
                if x in anchors and prev not in anchors:
                    out[-1] = x
                continue
        out.append(x)
    return out
