"""
Diamond model: translation-invariant boundary laws through the scalar
reduction v = eta(v), the Ising subfamily (f = g, h = 1) and period-2
solutions alternating between even and odd levels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .core import FieldVector, PointClassification, TransitionMatrix, build_matrix
from .errors import DiamondDomainError, ParameterError, ScanRangeError, UnsupportedAssumptionError
from .utils import ScanSettings, bracket_roots, dedupe_sorted, merge_flat_roots

logger = logging.getLogger(__name__)

ETA_V_MIN = 1e-6
ROOT_MATCH_TOL = 1e-9
ONE_STRADDLE = 1e-6
FLAT_TOL = 1e-10


@dataclass(frozen=True)
class DiamondParams:
    alpha: float
    beta: float
    k: int = 2

    def __post_init__(self) -> None:
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterError(f"{name}={value} not in (0,1)")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")

    def matrix(self) -> TransitionMatrix:
        return build_matrix("diamond", {"alpha": self.alpha, "beta": self.beta})


@dataclass(frozen=True)
class TiSolution:
    v: float
    u: float
    w: float
    f: float
    g: float
    h: float
    residual: float

    def field(self) -> FieldVector:
        return FieldVector(self.f, self.g, self.h)


@dataclass(frozen=True)
class PeriodicPair:
    """Boundary law z_even on even levels and z_odd on odd levels of the (f, f, 1) family."""

    z_even: float
    z_odd: float
    residual: float

    def fields(self) -> Tuple[FieldVector, FieldVector]:
        return FieldVector(self.z_even, self.z_even, 1.0), FieldVector(self.z_odd, self.z_odd, 1.0)


# -- translation-invariant solutions ---------------------------------------

def _eta_parts(v: np.ndarray, p: DiamondParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(q, u, A) with w = A / beta."""
    al, be, k = p.alpha, p.beta, p.k
    vk = v ** k
    q = al + (1.0 - al) * vk
    u = (be + (1.0 - be) * vk) / q
    inner = al * v + (be - al) * u ** k / q
    return q, u, inner


def eta_values(v: np.ndarray, p: DiamondParams) -> np.ndarray:
    """Vectorised eta; NaN where the inner expression is negative."""
    v = np.asarray(v, dtype=float)
    q, u, inner = _eta_parts(v, p)
    be, k = p.beta, p.k
    with np.errstate(invalid="ignore"):
        out = ((1.0 - be) * u ** k + be ** (1 - k) * inner ** k) / q
    return np.where(inner < 0.0, np.nan, out)


def eta(v: float, p: DiamondParams) -> float:
    if v <= 0.0:
        raise ParameterError(f"eta needs v > 0, got {v}")
    _, _, inner = _eta_parts(np.float64(v), p)
    if inner < 0.0:
        raise DiamondDomainError(v, float(inner))
    return float(eta_values(np.float64(v), p))


def eta_prime_at_1(p: DiamondParams) -> float:
    al, be, k = p.alpha, p.beta, p.k
    return k * (2 * al - (1 + k * (be - al)) ** 2 + k * (be ** 2 - al ** 2))


def ti_critical_alphas(beta: float, k: int, target: float = 1.0) -> List[float]:
    """alpha in (0,1) where eta'(1) = target at fixed beta (eta'(1) is quadratic in alpha)."""
    coeffs = [-(k * k + k), 2 + 2 * k + 2 * k * k * beta,
              k * beta ** 2 - (1 + k * beta) ** 2 - target / k]
    roots = np.roots(coeffs)
    real = [float(r.real) for r in roots if abs(r.imag) < 1e-12 and 0.0 < r.real < 1.0]
    return sorted(real)


def eta_upper_bound(p: DiamondParams, samples: int = 2001) -> float:
    """Sampled supremum of eta over (ETA_V_MIN, 1e6]."""
    v = np.geomspace(ETA_V_MIN, 1e6, samples)
    values = eta_values(v, p)
    finite = values[np.isfinite(values)]
    return float(finite.max()) if finite.size else 1.0


def reconstruct_ti(v: float, p: DiamondParams) -> TiSolution:
    """(u, w) from v and the residual of the three TI equations."""
    q, u, inner = (float(x) for x in _eta_parts(np.float64(v), p))
    if inner < 0.0:
        raise DiamondDomainError(v, inner)
    al, be, k = p.alpha, p.beta, p.k
    w = inner / be
    eqs = [
        (u, (be + (1 - be) * v ** k) / q),
        (v, ((1 - be) * u ** k + be * w ** k) / q),
        (w, ((1 - al) * u ** k + al * w ** k) / q),
    ]
    residual = max(abs(lhs - rhs) / max(1.0, abs(lhs)) for lhs, rhs in eqs)
    return TiSolution(v=v, u=u, w=w, f=u ** k, g=v ** k, h=w ** k, residual=residual)


def ti_diamond_solutions(p: DiamondParams, scan: Optional[ScanSettings] = None) -> List[TiSolution]:
    """
    All roots of eta(v) = v on the scan range, sorted by v. The upper end
    defaults to 2 max(1, sup eta); a smaller user bound is rejected.
    """
    scan = scan or ScanSettings()
    bound = 2.0 * max(1.0, eta_upper_bound(p))
    if scan.hi is not None and scan.hi < bound:
        raise ScanRangeError(f"v_max={scan.hi} below eta bound {bound:.6g}")
    lo = scan.lo if scan.lo is not None else ETA_V_MIN
    hi = scan.hi if scan.hi is not None else bound
    # nodes straddling v = 1 separate outer roots from the trivial one
    near_one = [x for x in (1.0 - ONE_STRADDLE, 1.0 + ONE_STRADDLE) if lo < x < hi]
    nodes = np.union1d(scan.nodes(lo, hi), near_one)
    values = eta_values(nodes, p) - nodes
    roots = bracket_roots(lambda x: eta(x, p) - x, nodes, values, scan.xtol)
    roots = [r for r in roots if abs(r - 1.0) >= ROOT_MATCH_TOL] + [1.0]
    roots = dedupe_sorted(roots, ROOT_MATCH_TOL)
    roots = merge_flat_roots(lambda x: float(eta_values(np.float64(x), p)) - x, roots,
                             FLAT_TOL, keep=[1.0])
    solutions = []
    for v in roots:
        try:
            solutions.append(reconstruct_ti(v, p))
        except DiamondDomainError as exc:
            logger.debug("root %g dropped: %s", v, exc)
    logger.debug("diamond TI (%g, %g, k=%d): %d roots", p.alpha, p.beta, p.k, len(solutions))
    return solutions


# -- Ising subfamily ----------------------------------------------------------

def ising_params_from_theta(theta: float) -> Tuple[float, float]:
    """theta = exp(2J/T) to (alpha, beta) = (theta/(theta+1), 1/(theta+1))."""
    if theta <= 0.0:
        raise ParameterError(f"theta must be > 0, got {theta}")
    return theta / (theta + 1.0), 1.0 / (theta + 1.0)


def ising_g(z, p: DiamondParams):
    al, be = p.alpha, p.beta
    return ((be + (1 - be) * z) / (al + (1 - al) * z)) ** p.k


def ising_critical_alpha(beta: float, k: int) -> float:
    return beta * (k + 1) ** 2 / (4 * k * beta + (k - 1) ** 2)


def ising_reduced_coefficients(p: DiamondParams) -> Tuple[float, float]:
    """(A, B) of the substitution x = ((1-beta)/beta) z, giving A x = ((1+x)/(B+x))^k."""
    al, be, k = p.alpha, p.beta, p.k
    a_coef = be * (1 - al) ** k / (1 - be) ** (k + 1)
    b_coef = al * (1 - be) / (be * (1 - al))
    return a_coef, b_coef


def ising_nu(b_coef: float, k: int) -> Optional[Tuple[float, float]]:
    """
    (nu_1, nu_2) from the roots of x^2 + [2 - (B-1)(k-1)] x + B = 0, or None
    when B is below ((k+1)/(k-1))^2.
    """
    if k < 2:
        return None
    lin = 2.0 - (b_coef - 1.0) * (k - 1)
    disc = lin * lin - 4.0 * b_coef
    if disc < -1e-12 * lin * lin:
        return None
    root = math.sqrt(max(disc, 0.0))
    xs = ((-lin - root) / 2.0, (-lin + root) / 2.0)
    if min(xs) <= 0.0:
        return None
    nus = sorted((1.0 / x) * ((1.0 + x) / (b_coef + x)) ** k for x in xs)
    return nus[0], nus[1]


def ising_three_root_window(p: DiamondParams) -> bool:
    a_coef, b_coef = ising_reduced_coefficients(p)
    nus = ising_nu(b_coef, p.k)
    return nus is not None and nus[0] < a_coef < nus[1]


def _ising_range(p: DiamondParams) -> Tuple[float, float]:
    s1 = (p.beta / p.alpha) ** p.k
    s2 = ((1 - p.beta) / (1 - p.alpha)) ** p.k
    return 0.5 * min(s1, s2), 2.0 * max(s1, s2)


def ising_fixed_points(p: DiamondParams, scan: Optional[ScanSettings] = None) -> List[float]:
    """Positive roots of z = g(z), g(z) = ((beta + (1-beta) z)/(alpha + (1-alpha) z))^k."""
    scan = scan or ScanSettings()
    nodes = scan.nodes(*_ising_range(p))
    roots = bracket_roots(lambda z: ising_g(z, p) - z, nodes, ising_g(nodes, p) - nodes, scan.xtol)
    roots.append(1.0)
    return dedupe_sorted(roots, ROOT_MATCH_TOL)


def ising_fixed_points_reduced(p: DiamondParams, scan: Optional[ScanSettings] = None) -> List[float]:
    """Same roots through A x = ((1+x)/(B+x))^k, mapped back to z."""
    scan = scan or ScanSettings()
    a_coef, b_coef = ising_reduced_coefficients(p)
    k = p.k
    scale = (1 - p.beta) / p.beta
    lo, hi = _ising_range(p)

    def h(x):
        return a_coef * x - ((1 + x) / (b_coef + x)) ** k

    nodes = scan.nodes(lo * scale, hi * scale)
    xs = bracket_roots(h, nodes, h(nodes), scan.xtol)
    xs.append(scale)
    return dedupe_sorted((x / scale for x in xs), ROOT_MATCH_TOL)


def ising_predicted_roots(p: DiamondParams) -> int:
    """Root count predicted by the critical line: 3 above it, 1 otherwise."""
    return 3 if p.alpha > ising_critical_alpha(p.beta, p.k) else 1


@dataclass(frozen=True)
class IsingBounds:
    lower: float
    upper: float
    iterations: int
    converged: bool
    note: str = ""


def ising_bounds(p: DiamondParams, tol: float = 1e-13, m_max: int = 100000) -> IsingBounds:
    """
    Limits of the monotone sequences started at (beta/alpha)^k and
    ((1-beta)/(1-alpha))^k. For alpha < beta g is decreasing and the updates
    alternate, so the limits solve z = g(g(z)).
    """
    if p.alpha == p.beta:
        return IsingBounds(1.0, 1.0, 0, True, "alpha = beta: g is constant 1")
    s1 = (p.beta / p.alpha) ** p.k
    s2 = ((1 - p.beta) / (1 - p.alpha)) ** p.k
    lower, upper = min(s1, s2), max(s1, s2)
    increasing = p.alpha > p.beta
    for it in range(1, m_max + 1):
        if increasing:
            new_lower, new_upper = ising_g(lower, p), ising_g(upper, p)
        else:
            new_lower, new_upper = ising_g(upper, p), ising_g(lower, p)
        # monotone: lower never decreases, upper never increases
        new_lower, new_upper = max(new_lower, lower), min(new_upper, upper)
        done = abs(new_lower - lower) <= tol * max(1.0, lower) and abs(new_upper - upper) <= tol * max(1.0, upper)
        lower, upper = new_lower, new_upper
        if done:
            return IsingBounds(lower, upper, it, True)
    logger.warning("Ising bounds not converged after %d steps", m_max)
    return IsingBounds(lower, upper, m_max, False)


# -- period-2 solutions -------------------------------------------------------

@dataclass(frozen=True)
class PeriodicCoefficients:
    """Exact coefficients of A z^2 + B z + C = 0 (k = 2) plus the printed D."""

    A: Fraction
    B: Fraction
    C: Fraction
    D_printed: Fraction

    @property
    def discriminant(self) -> Fraction:
        return self.B * self.B - 4 * self.A * self.C

    def as_floats(self) -> Dict[str, float]:
        return {"A": float(self.A), "B": float(self.B), "C": float(self.C),
                "D_printed": float(self.D_printed), "discriminant": float(self.discriminant)}


def periodic_coefficients(alpha: float, beta: float) -> PeriodicCoefficients:
    a = Fraction(str(alpha))
    b = Fraction(str(beta))
    ca, cb = 1 - a, 1 - b
    A = (a * ca + cb ** 2) ** 2
    C = (a ** 2 + b * cb) ** 2
    B = 4 * a * b * ca * cb + 2 * b * cb ** 3 + a ** 2 * cb ** 2 + 2 * a ** 3 * ca - ca ** 2 * b ** 2
    D = ((3 * a * b * ca * cb + b * cb ** 3 + a ** 3 * ca - ca ** 2 * b ** 2)
         * (5 * a * b * ca * cb + 3 * b * cb ** 3 + 2 * a ** 2 * cb ** 2 + 3 * a ** 3 * ca - ca ** 2 * b ** 2))
    return PeriodicCoefficients(A, B, C, D)


def _pair(z: float, p: DiamondParams) -> PeriodicPair:
    gz = float(ising_g(z, p))
    residual = max(abs(float(ising_g(gz, p)) - z) / max(1.0, z),
                   abs(float(ising_g(z, p)) - gz) / max(1.0, gz))
    return PeriodicPair(z_even=z, z_odd=gz, residual=residual)


def periodic_pairs_k2(p: DiamondParams) -> List[PeriodicPair]:
    """
    Period-2 pairs for k = 2 from the quadratic; one pair per orientation
    (z on even levels, g(z) on odd levels and the swap).
    """
    if p.k != 2:
        raise UnsupportedAssumptionError(f"closed-form period-2 route needs k=2, got k={p.k}")
    coeffs = periodic_coefficients(p.alpha, p.beta)
    if coeffs.A == 0 or coeffs.discriminant <= 0:
        return []
    A, B, C = float(coeffs.A), float(coeffs.B), float(coeffs.C)
    root = math.sqrt(float(coeffs.discriminant))
    q = -0.5 * (B + math.copysign(root, B))
    candidates = sorted(z for z in (q / A, C / q) if z > 0.0)
    pairs = []
    for z in candidates:
        pair = _pair(z, p)
        if abs(pair.z_odd - z) <= 1e-6 * max(1.0, z):
            continue
        pairs.append(pair)
    return pairs


def periodic_scan_general(p: DiamondParams, scan: Optional[ScanSettings] = None) -> List[PeriodicPair]:
    """Roots of g(g(z)) = z that are not fixed points of g, for any k."""
    scan = scan or ScanSettings()
    nodes = scan.nodes(*_ising_range(p))

    def h(z):
        return ising_g(ising_g(z, p), p) - z

    roots = dedupe_sorted(bracket_roots(h, nodes, h(nodes), scan.xtol), ROOT_MATCH_TOL)
    pairs = []
    for z in roots:
        if abs(float(ising_g(z, p)) - z) <= 1e-6 * max(1.0, z):
            continue
        pairs.append(_pair(z, p))
    return pairs


# -- classification -----------------------------------------------------------

DIAMOND_MODES = ("ti-full", "ising", "periodic")


def classify_point(p: DiamondParams, mode: str, scan: Optional[ScanSettings] = None) -> PointClassification:
    """
    ti-full: |eta'(1)| and TI root count. ising: alpha minus the critical
    alpha and Ising root count. periodic: printed D (k = 2) or k(alpha-beta)
    and the number of period-2 orientations. "multiple" needs the count.
    """
    extra: Dict[str, Any] = {}
    if mode == "ti-full":
        criterion = abs(eta_prime_at_1(p))
        count = len(ti_diamond_solutions(p, scan))
        if count >= 3:
            label = "multiple"
        elif criterion > 1.0:
            label = "unstable"
        else:
            label = "unique"
    elif mode == "ising":
        criterion = p.alpha - ising_critical_alpha(p.beta, p.k)
        count = len(ising_fixed_points(p, scan))
        label = "multiple" if count >= 3 else "unique"
    elif mode == "periodic":
        if p.k == 2:
            coeffs = periodic_coefficients(p.alpha, p.beta)
            criterion = float(coeffs.D_printed)
            extra = coeffs.as_floats()
            count = len(periodic_pairs_k2(p))
        else:
            criterion = p.k * (p.alpha - p.beta)
            count = len(periodic_scan_general(p, scan))
        label = "multiple" if count >= 1 else "unique"
    else:
        raise ParameterError(f"unknown diamond mode '{mode}' (expected one of {', '.join(DIAMOND_MODES)})")
    return PointClassification(p.alpha, p.beta, mode, criterion, count, label, extra)
