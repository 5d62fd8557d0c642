"""
Uniqueness certificate by iterated interval narrowing.

Boxes D_1 ⊇ D_2 ⊇ ... bound every translation-invariant boundary law; on
the log image of a box the recursion is a contraction when 3kθ < 1, where
θ bounds the partial derivatives of the log map.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .config import DEFAULT_BOX_FLOOR, DEFAULT_M_MAX, DEFAULT_THETA_GRID, DEFAULT_TOL
from .core import AdmissibilityGraph, STATES, TransitionMatrix, log_map, log_map_jacobian, local_ratios
from .errors import InapplicableConditionError, ParameterError

logger = logging.getLogger(__name__)

NEST_TOL = 1e-12


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INAPPLICABLE = "inapplicable"
    INCONCLUSIVE = "inconclusive"
    CONVERGED = "converged"


@dataclass(frozen=True)
class ConditionA:
    """Result of the row-0 positivity test; truthy when the condition holds."""

    holds: bool
    unbounded: bool

    def __bool__(self) -> bool:
        return self.holds


def check_condition_a(P: TransitionMatrix) -> ConditionA:
    """
    P01·P02·P03 > 0. ``unbounded`` marks P00 = 0 with some Pi0 > 0, where the
    local ratios have no finite supremum on the orthant.
    """
    p = P.p
    holds = bool(p[0, 1] * p[0, 2] * p[0, 3] > 0.0)
    unbounded = bool(p[0, 0] == 0.0 and np.any(p[1:, 0] > 0.0))
    return ConditionA(holds, unbounded)


def degree_shortcut(graph: AdmissibilityGraph) -> Optional[str]:
    if all(graph.outdegree(s) == 1 for s in STATES):
        return "unique (uniform over admissible configurations)"
    return None


@dataclass(frozen=True)
class IntervalBox:
    """Product of three positive intervals [lo_i, hi_i] bounding z_i."""

    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]
    clamped: bool = False

    def __post_init__(self) -> None:
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ParameterError("box needs three intervals")
        for a, b in zip(lo, hi):
            if not (np.isfinite(a) and np.isfinite(b)) or a <= 0.0 or a > b:
                raise ParameterError(f"invalid interval [{a}, {b}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, z: Tuple[float, float, float]) -> "IntervalBox":
        return cls(tuple(z), tuple(z))

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))))

    def log_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.log(self.lo), np.log(self.hi)

    def width(self) -> float:
        return float(max(b - a for a, b in zip(self.lo, self.hi)))

    def contains(self, other: "IntervalBox", tol: float = NEST_TOL) -> bool:
        return all(a - tol * max(1.0, a) <= c and d <= b + tol * max(1.0, b)
                   for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def to_json(self) -> Dict[str, List[float]]:
        return {"lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class ContractionCertificate:
    k: int
    condition_a: bool
    unbounded_flag: bool
    verdict: Verdict
    boxes: Tuple[IntervalBox, ...] = ()
    theta_sequence: Tuple[float, ...] = ()
    grid: int = DEFAULT_THETA_GRID
    box_floor: float = DEFAULT_BOX_FLOOR
    lipschitz_sample: Optional[float] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def m_stop(self) -> int:
        return len(self.boxes)

    @property
    def clamped(self) -> bool:
        return any(b.clamped for b in self.boxes)

    @property
    def theta(self) -> Optional[float]:
        return self.theta_sequence[-1] if self.theta_sequence else None

    def to_json(self) -> Dict[str, Any]:
        return {
            "condition_a": self.condition_a,
            "unbounded_flag": self.unbounded_flag,
            "k": self.k,
            "m_stop": self.m_stop,
            "theta_sequence": list(self.theta_sequence),
            "boxes": [b.to_json() for b in self.boxes],
            "verdict": self.verdict.value,
            "clamped": self.clamped,
            "box_floor": self.box_floor,
            "theta_grid": self.grid,
            "lipschitz_sample": self.lipschitz_sample,
            "notes": list(self.notes),
        }


def initial_box(P: TransitionMatrix, k: int, floor: float = DEFAULT_BOX_FLOOR) -> IntervalBox:
    """
    Closed-form first box: a ratio of nonnegative linear forms on the orthant
    lies between its extreme coefficient ratios P_ij / P_0j.
    """
    cond = check_condition_a(P)
    if not cond.holds:
        raise InapplicableConditionError("condition P01*P02*P03 > 0 fails")
    if cond.unbounded:
        raise InapplicableConditionError("P00 = 0 while some Pi0 > 0: local ratios unbounded")
    p = P.p
    lo, hi = [], []
    clamped = False
    for i in (1, 2, 3):
        ratios = []
        for j in STATES:
            if p[0, j] > 0.0:
                ratios.append(p[i, j] / p[0, j])
            elif p[i, j] > 0.0:
                raise InapplicableConditionError(f"f_{i} unbounded: P0{j} = 0 < P{i}{j}")
        low = min(ratios) ** k
        if low < floor:
            low, clamped = floor, True
        lo.append(low)
        hi.append(max(max(ratios) ** k, low))
    return IntervalBox(tuple(lo), tuple(hi), clamped=clamped)


def _next_box(P: TransitionMatrix, k: int, box: IntervalBox, floor: float) -> IntervalBox:
    # f_i is monotone on coordinate lines: extrema sit on corners
    values = local_ratios(P, box.corners()) ** k
    lo = np.maximum(values.min(axis=0), box.lo)
    hi = np.minimum(values.max(axis=0), box.hi)
    clamped = bool(np.any(lo < floor))
    lo = np.maximum(lo, floor)
    hi = np.maximum(hi, lo)
    return IntervalBox(tuple(lo), tuple(hi), clamped=clamped)


def _box_change(a: IntervalBox, b: IntervalBox) -> float:
    diffs = [abs(x - y) / max(1.0, abs(y)) for x, y in zip(a.lo + a.hi, b.lo + b.hi)]
    return max(diffs)


def _narrowing(P: TransitionMatrix, k: int, tol: float, m_max: int,
               floor: float) -> Iterator[Tuple[IntervalBox, bool]]:
    """Yields (D_m, converged) for m = 1..m_max."""
    box = initial_box(P, k, floor)
    yield box, box.width() == 0.0
    for _ in range(m_max - 1):
        nxt = _next_box(P, k, box, floor)
        converged = _box_change(nxt, box) < tol
        box = nxt
        yield box, converged
        if converged:
            return


def narrow_boxes(P: TransitionMatrix, k: int, tol: float = DEFAULT_TOL,
                 m_max: int = DEFAULT_M_MAX, floor: float = DEFAULT_BOX_FLOOR) -> ContractionCertificate:
    cond = check_condition_a(P)
    boxes: List[IntervalBox] = []
    converged = False
    for box, converged in _narrowing(P, k, tol, m_max, floor):
        boxes.append(box)
        if converged:
            break
    verdict = Verdict.CONVERGED if converged else Verdict.INCONCLUSIVE
    if not converged:
        logger.info("box narrowing did not converge in %d steps", m_max)
    return ContractionCertificate(k=k, condition_a=cond.holds, unbounded_flag=cond.unbounded,
                                  verdict=verdict, boxes=tuple(boxes), box_floor=floor)


def theta_of_box(P: TransitionMatrix, box: IntervalBox, grid: int = DEFAULT_THETA_GRID) -> float:
    """
    max_ij max over the log box of |dF_i/dh_j|: grid search, then a bounded
    scalar maximization along each coordinate from the grid argmax.
    """
    if grid < 2:
        raise ParameterError(f"theta grid must be >= 2, got {grid}")
    low, high = box.log_bounds()
    axes = [np.linspace(a, b, grid) for a, b in zip(low, high)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    partials = np.abs(log_map_jacobian(P, mesh))
    theta_ij = partials.max(axis=0)
    argmax = partials.reshape(len(mesh), 9).argmax(axis=0)

    for flat in range(9):
        i, j = divmod(flat, 3)
        h = mesh[argmax[flat]].copy()
        best = theta_ij[i, j]
        for c in range(3):
            if high[c] <= low[c]:
                continue

            def neg_partial(t: float, c: int = c) -> float:
                hh = h.copy()
                hh[c] = t
                return -abs(log_map_jacobian(P, hh)[i, j])

            res = minimize_scalar(neg_partial, bounds=(low[c], high[c]), method="bounded")
            if -res.fun > best:
                best = -res.fun
                h[c] = res.x
        theta_ij[i, j] = best
    return float(theta_ij.max())


def lipschitz_ratio(P: TransitionMatrix, box: IntervalBox, samples: int = 1000, seed: int = 0) -> float:
    """Largest observed |F(h) - F(l)|_max / |h - l|_max over random pairs in the log box."""
    low, high = box.log_bounds()
    if np.all(high <= low):
        return 0.0
    rng = np.random.default_rng(seed)
    h = rng.uniform(low, high, size=(samples, 3))
    l = rng.uniform(low, high, size=(samples, 3))
    num = np.max(np.abs(log_map(P, h) - log_map(P, l)), axis=1)
    den = np.max(np.abs(h - l), axis=1)
    ok = den > 0.0
    return float(np.max(num[ok] / den[ok])) if np.any(ok) else 0.0


def certify_uniqueness(P: TransitionMatrix, k: int, tol: float = DEFAULT_TOL,
                       m_max: int = DEFAULT_M_MAX, grid: int = DEFAULT_THETA_GRID,
                       floor: float = DEFAULT_BOX_FLOOR) -> ContractionCertificate:
    """
    Pass iff 3kθ^(m) < 1 for some m <= m_max. θ^(m) is the running minimum
    of the per-box estimates. A failed certificate proves nothing.
    """
    cond = check_condition_a(P)
    if not cond.holds or cond.unbounded:
        reason = ("condition P01*P02*P03 > 0 fails" if not cond.holds
                  else "P00 = 0 with some Pi0 > 0: local ratios unbounded")
        logger.info("certificate inapplicable: %s", reason)
        return ContractionCertificate(k=k, condition_a=cond.holds, unbounded_flag=cond.unbounded,
                                      verdict=Verdict.INAPPLICABLE, grid=grid, box_floor=floor,
                                      notes=(reason,))

    boxes: List[IntervalBox] = []
    thetas: List[float] = []
    verdict = Verdict.FAIL
    for box, converged in _narrowing(P, k, tol, m_max, floor):
        boxes.append(box)
        theta = theta_of_box(P, box, grid)
        thetas.append(min(theta, thetas[-1]) if thetas else theta)
        logger.debug("m=%d theta=%.6g width=%.3g", len(boxes), thetas[-1], box.width())
        if 3 * k * thetas[-1] < 1.0:
            verdict = Verdict.PASS
            break
        if converged:
            break
    notes = ()
    if verdict is Verdict.FAIL:
        notes = ("fail to certify is not a proof of non-uniqueness",)
    return ContractionCertificate(
        k=k, condition_a=True, unbounded_flag=False, verdict=verdict,
        boxes=tuple(boxes), theta_sequence=tuple(thetas), grid=grid, box_floor=floor,
        lipschitz_sample=lipschitz_ratio(P, boxes[-1]), notes=notes)
