"""
Translation-invariant boundary laws for the stick, gun and key graphs.

stick: v = Y(v), then u and w from v.
gun/key (alpha = beta): u = v and u = U(u), w = u / (alpha + (1-alpha) u^k).
The key graph is the gun with d = 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .config import DEFAULT_KEY_EPSILON, DEFAULT_SEED, DEFAULT_STARTS
from .core import FieldVector, PointClassification, TransitionMatrix, build_matrix, multistart_fixed_points
from .errors import ParameterError, UnsupportedAssumptionError
from .utils import ScanSettings, bracket_roots, dedupe_sorted

logger = logging.getLogger(__name__)

FERTILE_GRAPHS = ("stick", "gun", "key")
ROOT_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class FertileParams:
    graph: str
    alpha: float
    beta: float
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    d: Optional[float] = None
    k: int = 2

    def __post_init__(self) -> None:
        if self.graph not in FERTILE_GRAPHS:
            raise ParameterError(f"unknown fertile graph '{self.graph}'")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.graph == "key" and self.d is None:
            object.__setattr__(self, "d", 0.0)
        self.matrix()

    def params(self) -> Dict[str, float]:
        out = {"alpha": self.alpha, "beta": self.beta}
        if self.graph != "stick":
            for name in ("a", "b", "c", "d"):
                value = getattr(self, name)
                if value is None:
                    raise ParameterError(f"{self.graph} graph needs parameter '{name}'")
                out[name] = value
        return out

    def matrix(self) -> TransitionMatrix:
        return build_matrix(self.graph, self.params())


@dataclass(frozen=True)
class FertileSolution:
    u: float
    v: float
    w: float
    residual: float

    def field(self, k: int) -> FieldVector:
        return FieldVector(self.u ** k, self.v ** k, self.w ** k)


# -- stick ---------------------------------------------------------------------

def stick_Y(v, p: FertileParams):
    """Y(v) = 1 / (alpha s^-k + 1 - alpha), s = beta + (1-beta) v^k."""
    s = p.beta + (1 - p.beta) * np.asarray(v, dtype=float) ** p.k
    out = 1.0 / (p.alpha * s ** (-p.k) + 1 - p.alpha)
    return float(out) if np.ndim(out) == 0 else out


def stick_Y_prime_at_1(p: FertileParams) -> float:
    return p.k ** 2 * p.alpha * (1 - p.beta)


def _stick_triple(v: float, p: FertileParams) -> FertileSolution:
    al, be, k = p.alpha, p.beta, p.k
    s = be + (1 - be) * v ** k
    u = (v * s ** (-k)) ** (1.0 / (k + 1))
    w = (v * s) ** (1.0 / (k + 1))
    S = al * u ** k + (1 - al) * w ** k
    eqs = [(u, 1.0 / S), (v, w ** k / S), (w, (be + (1 - be) * v ** k) / S)]
    residual = max(abs(lhs - rhs) / max(1.0, abs(lhs)) for lhs, rhs in eqs)
    return FertileSolution(u, v, w, residual)


def stick_solutions(p: FertileParams, scan: Optional[ScanSettings] = None) -> List[FertileSolution]:
    if p.graph != "stick":
        raise ParameterError(f"stick_solutions needs the stick graph, got '{p.graph}'")
    scan = scan or ScanSettings()
    y0 = p.beta ** p.k / (p.alpha + (1 - p.alpha) * p.beta ** p.k)
    lo = scan.lo if scan.lo is not None else min(1e-8, 0.5 * y0)
    hi = scan.hi if scan.hi is not None else 2.0 / (1 - p.alpha)
    nodes = scan.nodes(lo, hi)
    roots = bracket_roots(lambda v: stick_Y(v, p) - v, nodes, stick_Y(nodes, p) - nodes, scan.xtol)
    roots.append(1.0)
    return [_stick_triple(v, p) for v in dedupe_sorted(roots, ROOT_MATCH_TOL)]


# -- gun and key ---------------------------------------------------------------

def _require_symmetric(p: FertileParams) -> None:
    if p.graph not in ("gun", "key"):
        raise ParameterError(f"gun reduction needs the gun or key graph, got '{p.graph}'")
    if p.alpha != p.beta:
        raise UnsupportedAssumptionError(
            f"u = v reduction needs alpha = beta (got {p.alpha}, {p.beta}); try the experimental route")


def gun_U(u, p: FertileParams):
    """U(u) = q^(k+1) / ([(a+b) q^k + c] u^k + d q^k), q = alpha + (1-alpha) u^k."""
    _require_symmetric(p)
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0):
        raise ParameterError("U is evaluated only for u > 0")
    k = p.k
    uk = u ** k
    q = p.alpha + (1 - p.alpha) * uk
    qk = q ** k
    out = q ** (k + 1) / (((p.a + p.b) * qk + p.c) * uk + p.d * qk)
    return float(out) if np.ndim(out) == 0 else out


def gun_U_prime_at_1(p: FertileParams) -> float:
    k, c, d = p.k, p.c, p.d
    return k * (k * c + d - p.alpha * (k * c + 1))


def gun_criterion(p: FertileParams) -> float:
    return abs(gun_U_prime_at_1(p))


def _gun_triple(u: float, p: FertileParams) -> FertileSolution:
    al, be, k = p.alpha, p.beta, p.k
    v = u
    q = al + (1 - al) * u ** k
    w = u / q
    S = p.d + p.a * u ** k + p.b * v ** k + p.c * w ** k
    eqs = [(u, (al + (1 - al) * v ** k) / S), (v, (be + (1 - be) * u ** k) / S), (w, 1.0 / S)]
    residual = max(abs(lhs - rhs) / max(1.0, abs(lhs)) for lhs, rhs in eqs)
    return FertileSolution(u, v, w, residual)


def gun_solutions(p: FertileParams, scan: Optional[ScanSettings] = None,
                  epsilon: float = DEFAULT_KEY_EPSILON) -> List[FertileSolution]:
    """
    Roots of U(u) = u on (epsilon, hi]. For the key graph U diverges at 0,
    so roots below epsilon are not searched.
    """
    _require_symmetric(p)
    scan = scan or ScanSettings()
    if scan.hi is not None:
        hi = scan.hi
    else:
        upper = gun_U(np.geomspace(1.0, 1e8, 2001), p)
        hi = max(2.0, 2.0 * float(np.max(upper[np.isfinite(upper)])))
    lo = scan.lo if scan.lo is not None else epsilon
    nodes = scan.nodes(lo, hi)
    roots = bracket_roots(lambda u: gun_U(u, p) - u, nodes, gun_U(nodes, p) - nodes, scan.xtol)
    roots.append(1.0)
    return [_gun_triple(u, p) for u in dedupe_sorted(roots, ROOT_MATCH_TOL)]


def gun_solutions_general(p: FertileParams, starts: int = DEFAULT_STARTS,
                          seed: int = DEFAULT_SEED) -> List[FieldVector]:
    """Experimental: multi-start search on the full three-dimensional map, any alpha, beta."""
    if p.graph not in ("gun", "key"):
        raise ParameterError(f"gun route needs the gun or key graph, got '{p.graph}'")
    return multistart_fixed_points(p.matrix(), p.k, starts=starts, seed=seed)


def fertile_solutions(p: FertileParams, scan: Optional[ScanSettings] = None,
                      epsilon: float = DEFAULT_KEY_EPSILON) -> List[FertileSolution]:
    if p.graph == "stick":
        return stick_solutions(p, scan)
    return gun_solutions(p, scan, epsilon)


def fertile_criterion(p: FertileParams) -> float:
    if p.graph == "stick":
        return stick_Y_prime_at_1(p)
    return gun_criterion(p)


def classify_fertile(p: FertileParams, scan: Optional[ScanSettings] = None,
                     epsilon: float = DEFAULT_KEY_EPSILON) -> PointClassification:
    """
    stick rows carry (alpha, beta); gun/key rows carry (alpha, c) in the
    alpha and beta slots since those graphs are scanned on alpha = beta.
    """
    criterion = fertile_criterion(p)
    count = len(fertile_solutions(p, scan, epsilon))
    label = "multiple" if count >= 3 else ("unstable" if criterion > 1.0 else "unique")
    second = p.beta if p.graph == "stick" else p.c
    return PointClassification(p.alpha, second, p.graph, criterion, count, label)
