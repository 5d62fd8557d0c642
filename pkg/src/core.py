"""
Model definitions and the splitting-measure recursion.

States are 0..3; state 0 is the normalization reference, so a boundary law
is carried as the ratio vector z = (t1/t0, t2/t0, t3/t0).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import root

from .config import DEFAULT_SEED, DEFAULT_STARTS, DEFAULT_TOL
from .errors import (
    CatalogError,
    ParameterError,
    SingularEvaluationError,
    SupportMismatchError,
)

logger = logging.getLogger(__name__)

STATES = (0, 1, 2, 3)
ROW_SUM_TOL = 1e-12
SIMPLEX_TOL = 1e-12

# multistart acceptance and clustering, log coordinates
ACCEPT_RESIDUAL = 1e-10
ORIGIN_TOL = 1e-12
MERGE_FLOOR = 1e-4
MERGE_CAP = 1e-1

Edge = Tuple[int, int]


@dataclass(frozen=True)
class AdmissibilityGraph:
    """Allowed ordered state pairs (i, j): state j may follow state i."""

    edges: FrozenSet[Edge]

    def __post_init__(self) -> None:
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i not in STATES or j not in STATES:
                raise ParameterError(f"edge ({i},{j}) uses a state outside 0..3")
        object.__setattr__(self, "edges", edges)
        for s in STATES:
            if self.outdegree(s) < 1 or self.indegree(s) < 1:
                raise ParameterError(f"state {s} needs positive indegree and outdegree")

    @classmethod
    def undirected(cls, edges: Iterable[Edge]) -> "AdmissibilityGraph":
        """Close ``edges`` under reversal."""
        pairs = set()
        for i, j in edges:
            pairs.add((i, j))
            pairs.add((j, i))
        return cls(frozenset(pairs))

    def __contains__(self, pair: object) -> bool:
        return pair in self.edges

    def successors(self, i: int) -> Tuple[int, ...]:
        return tuple(j for j in STATES if (i, j) in self.edges)

    def outdegree(self, i: int) -> int:
        return sum(1 for (a, _) in self.edges if a == i)

    def indegree(self, j: int) -> int:
        return sum(1 for (_, b) in self.edges if b == j)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((4, 4), dtype=bool)
        for i, j in self.edges:
            a[i, j] = True
        return a


def outdegrees(graph: AdmissibilityGraph) -> Tuple[int, int, int, int]:
    return tuple(graph.outdegree(s) for s in STATES)  # type: ignore[return-value]


_CATALOG_EDGES: Dict[str, Tuple[bool, Tuple[Edge, ...]]] = {
    # name: (undirected, edges)
    "diamond": (False, ((0, 0), (0, 2), (1, 0), (1, 2), (2, 1), (2, 3), (3, 1), (3, 3))),
    "stick": (True, ((0, 1), (0, 3), (2, 3))),
    "gun": (True, ((0, 0), (0, 1), (0, 2), (0, 3), (1, 2))),
    "key": (True, ((0, 1), (0, 2), (0, 3), (1, 2))),
}

CATALOG = tuple(_CATALOG_EDGES)


def builtin_graph(name: str) -> AdmissibilityGraph:
    try:
        undirected, edges = _CATALOG_EDGES[name]
    except KeyError:
        raise CatalogError(f"unknown graph '{name}' (expected one of {', '.join(CATALOG)})") from None
    if undirected:
        return AdmissibilityGraph.undirected(edges)
    return AdmissibilityGraph(frozenset(edges))


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic 4x4 matrix whose support is exactly ``graph``."""

    p: np.ndarray
    graph: AdmissibilityGraph
    name: Optional[str] = None
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        p = np.array(self.p, dtype=float)
        if p.shape != (4, 4):
            raise ParameterError(f"transition matrix must be 4x4, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0.0):
            raise ParameterError("transition matrix entries must be finite and nonnegative")
        sums = p.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise ParameterError(f"rows must sum to 1, got {sums.tolist()}")
        if not np.array_equal(p > 0.0, self.graph.adjacency()):
            raise SupportMismatchError(
                f"support of {self.name or 'matrix'} does not match its admissibility graph")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "params", dict(self.params))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]],
                  graph: Optional[AdmissibilityGraph] = None) -> "TransitionMatrix":
        """Matrix from explicit rows; the graph defaults to the support."""
        p = np.array(rows, dtype=float)
        if graph is None:
            if p.shape != (4, 4):
                raise ParameterError(f"transition matrix must be 4x4, got shape {p.shape}")
            graph = AdmissibilityGraph(frozenset(
                (i, j) for i in STATES for j in STATES if p[i, j] > 0.0))
        return cls(p, graph)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        return self.graph == other.graph and np.array_equal(self.p, other.p)

    def __hash__(self) -> int:
        return hash((self.graph, self.p.tobytes()))


def to_json(matrix: TransitionMatrix) -> str:
    return json.dumps(matrix.p.tolist())


def from_json(text: str) -> TransitionMatrix:
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"matrix is not valid JSON: {exc}") from exc
    return TransitionMatrix.from_rows(rows)


def _check_open_unit(params: Mapping[str, float], names: Iterable[str]) -> None:
    for name in names:
        if name not in params:
            raise ParameterError(f"missing parameter '{name}'")
        value = float(params[name])
        if not 0.0 < value < 1.0:
            raise ParameterError(f"parameter {name}={value} not in (0,1)")


def _check_simplex(params: Mapping[str, float], names: Sequence[str]) -> None:
    total = sum(float(params[n]) for n in names)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ParameterError(f"{'+'.join(names)} must equal 1, got {total!r}")


def build_matrix(name: str, params: Mapping[str, float]) -> TransitionMatrix:
    """
    Transition matrix of a catalog model.

    diamond/stick take alpha, beta; gun takes alpha, beta, a, b, c, d with
    a+b+c+d = 1; key is the gun with d = 0 and a+b+c = 1.
    """
    graph = builtin_graph(name)
    if name in ("diamond", "stick"):
        _check_open_unit(params, ("alpha", "beta"))
        al, be = float(params["alpha"]), float(params["beta"])
        if name == "diamond":
            rows = [
                [al, 0.0, 1.0 - al, 0.0],
                [be, 0.0, 1.0 - be, 0.0],
                [0.0, 1.0 - be, 0.0, be],
                [0.0, 1.0 - al, 0.0, al],
            ]
        else:
            rows = [
                [0.0, al, 0.0, 1.0 - al],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [be, 0.0, 1.0 - be, 0.0],
            ]
        used = {"alpha": al, "beta": be}
    else:
        if name == "gun":
            _check_open_unit(params, ("alpha", "beta", "a", "b", "c", "d"))
            _check_simplex(params, ("a", "b", "c", "d"))
            d = float(params["d"])
        else:
            if float(params.get("d", 0.0)) != 0.0:
                raise ParameterError("key graph requires d = 0")
            _check_open_unit(params, ("alpha", "beta", "a", "b", "c"))
            _check_simplex(params, ("a", "b", "c"))
            d = 0.0
        al, be = float(params["alpha"]), float(params["beta"])
        a, b, c = float(params["a"]), float(params["b"]), float(params["c"])
        rows = [
            [d, a, b, c],
            [al, 0.0, 1.0 - al, 0.0],
            [be, 1.0 - be, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ]
        used = {"alpha": al, "beta": be, "a": a, "b": b, "c": c, "d": d}
    # rows built from a+b+c+d within tolerance; renormalize row 0 exactly
    p = np.array(rows)
    p[0] = p[0] / p[0].sum()
    return TransitionMatrix(p, graph, name=name, params=used)


@dataclass(frozen=True)
class TreeShape:
    """Cayley tree truncated at depth n; non-root vertices have k children."""

    k: int
    depth: int
    root_branching: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.depth < 0:
            raise ParameterError(f"depth must be >= 0, got {self.depth}")
        if self.root_branching not in (self.k, self.k + 1):
            raise ParameterError(f"root_branching must be k or k+1, got {self.root_branching}")

    @classmethod
    def full(cls, k: int, depth: int) -> "TreeShape":
        return cls(k, depth, k + 1)

    @classmethod
    def half(cls, k: int, depth: int) -> "TreeShape":
        return cls(k, depth, k)

    def level_size(self, d: int) -> int:
        if d == 0:
            return 1
        return self.root_branching * self.k ** (d - 1)

    @property
    def vertex_count(self) -> int:
        return sum(self.level_size(d) for d in range(self.depth + 1))


@dataclass(frozen=True)
class FieldVector:
    """Boundary-law ratios (z1, z2, z3), all finite and positive."""

    z1: float
    z2: float
    z3: float

    def __post_init__(self) -> None:
        for name in ("z1", "z2", "z3"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0.0:
                raise ParameterError(f"field component {name}={value!r} must be finite and > 0")
            object.__setattr__(self, name, value)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FieldVector":
        if len(values) != 3:
            raise ParameterError(f"field needs 3 components, got {len(values)}")
        return cls(float(values[0]), float(values[1]), float(values[2]))

    @classmethod
    def ones(cls) -> "FieldVector":
        return cls(1.0, 1.0, 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.z1, self.z2, self.z3])

    def log(self) -> np.ndarray:
        return np.log(self.as_array())

    def __getitem__(self, i: int) -> float:
        """Component for state i in 1..3; state 0 is the reference 1."""
        if i == 0:
            return 1.0
        return (self.z1, self.z2, self.z3)[i - 1]


@dataclass(frozen=True)
class PointClassification:
    """One parameter point of a region scan."""

    alpha: float
    beta: float
    mode: str
    criterion: float
    root_count: int
    label: str
    extra: Mapping[str, float] = field(default_factory=dict)


def affine_ratios(numerators: np.ndarray, denominator: np.ndarray, z: np.ndarray) -> np.ndarray:
    """
    (c_i0 + sum_j c_ij z_j) / (d_0 + sum_j d_j z_j) for each row c_i of
    ``numerators`` (shape (n, 4)) against ``denominator`` (shape (4,)).
    """
    numerators = np.asarray(numerators, dtype=float)
    denominator = np.asarray(denominator, dtype=float)
    z = np.asarray(z, dtype=float)
    num = numerators[:, 0] + z @ numerators[:, 1:].T
    den = denominator[0] + z @ denominator[1:]
    if np.any(den == 0.0):
        raise SingularEvaluationError("row-0 form vanishes at the evaluation point")
    return num / np.expand_dims(den, -1)


def local_ratios(P: TransitionMatrix, z: np.ndarray) -> np.ndarray:
    """
    f_1..f_3 at z. ``z`` may carry leading batch axes: shape (..., 3) in,
    shape (..., 3) out.
    """
    return affine_ratios(P.p[1:], P.p[0], z)


def local_ratio(P: TransitionMatrix, i: int, z: FieldVector) -> float:
    if i not in (1, 2, 3):
        raise ParameterError(f"state must be 1, 2 or 3, got {i}")
    return float(local_ratios(P, z.as_array())[i - 1])


def recursion_step(P: TransitionMatrix, k: int, children: Sequence[FieldVector]) -> FieldVector:
    """Parent field from its children: component i is the product of f_i."""
    if len(children) not in (k, k + 1):
        raise ParameterError(f"expected {k} or {k + 1} children, got {len(children)}")
    values = local_ratios(P, np.array([c.as_array() for c in children]))
    with np.errstate(over="raise", under="ignore"):
        try:
            product = np.prod(values, axis=0)
        except FloatingPointError as exc:
            raise SingularEvaluationError(f"recursion overflow: {exc}") from exc
    return FieldVector.from_array(product)


def ti_map(P: TransitionMatrix, k: int, z: FieldVector) -> FieldVector:
    return FieldVector.from_array(local_ratios(P, z.as_array()) ** k)


def fixed_point_residual(P: TransitionMatrix, k: int, z: FieldVector) -> float:
    """max_i |T(z)_i - z_i| / max(1, |z_i|)."""
    zz = z.as_array()
    tz = local_ratios(P, zz) ** k
    return float(np.max(np.abs(tz - zz) / np.maximum(1.0, np.abs(zz))))


def log_map(P: TransitionMatrix, h: np.ndarray) -> np.ndarray:
    """F(h) = log f(exp h); batched like ``local_ratios``."""
    return np.log(local_ratios(P, np.exp(h)))


def log_map_jacobian(P: TransitionMatrix, h: np.ndarray) -> np.ndarray:
    """
    dF_i/dh_j = x_j (P_ij / N_i - P_0j / D) with x = exp(h), N_i and D the
    numerator and denominator forms of f_i. Shape (..., 3, 3).
    """
    p = P.p
    x = np.exp(np.asarray(h, dtype=float))
    num = p[1:, 0] + x @ p[1:, 1:].T
    den = p[0, 0] + x @ p[0, 1:]
    first = p[1:, 1:] / np.expand_dims(num, -1)
    second = p[0, 1:] / np.expand_dims(np.expand_dims(den, -1), -1)
    return np.expand_dims(x, -2) * (first - second)


def iterate_ti_map(P: TransitionMatrix, k: int, z0: FieldVector,
                   tol: float = DEFAULT_TOL, max_iter: int = 10000) -> Tuple[FieldVector, bool, int]:
    """Plain iteration z <- T(z); returns (last, converged, iterations)."""
    z = z0.as_array()
    for it in range(1, max_iter + 1):
        nxt = local_ratios(P, z) ** k
        if np.max(np.abs(nxt - z) / np.maximum(1.0, z)) < tol:
            return FieldVector.from_array(nxt), True, it
        z = nxt
    return FieldVector.from_array(z), False, max_iter


def _log_residual(P: TransitionMatrix, k: int, h: np.ndarray) -> float:
    """Relative fixed-point residual of exp(h); inf when it cannot be evaluated."""
    with np.errstate(all="ignore"):
        z = np.exp(h)
        if not np.all((z > 0.0) & np.isfinite(z)):
            return float("inf")
        try:
            tz = local_ratios(P, z) ** k
        except SingularEvaluationError:
            return float("inf")
        res = float(np.max(np.abs(tz - z) / np.maximum(1.0, z)))
    return res if np.isfinite(res) else float("inf")


def _merge_radius(P: TransitionMatrix, k: int, h: np.ndarray, res: float) -> float:
    """
    Log-space radius within which another candidate counts as the same fixed
    point: MERGE_FLOOR, or the residual over the smallest singular value of
    kJ - I, which grows near a degenerate fixed point.
    """
    jac = k * log_map_jacobian(P, h) - np.eye(3)
    sigma = float(np.linalg.svd(jac, compute_uv=False)[-1])
    if sigma <= 0.0:
        return MERGE_CAP
    return min(MERGE_CAP, max(MERGE_FLOOR, 10.0 * res / sigma))


def multistart_fixed_points(P: TransitionMatrix, k: int, starts: int = DEFAULT_STARTS,
                            seed: int = DEFAULT_SEED, damping: float = 0.5,
                            log_radius: float = 5.0, tol: float = DEFAULT_TOL,
                            max_iter: int = 2000) -> List[FieldVector]:
    """
    Fixed points of ``ti_map`` found from random log-space starts.

    Each start is polished with ``scipy.optimize.root`` twice: directly,
    which reaches unstable fixed points, and after damped iteration
    h <- (1-damping) h + damping k F(h). (1,1,1) is always tested. Candidates
    are clustered by ``_merge_radius`` and the lowest-residual member of
    each cluster is returned, sorted.
    """
    rng = np.random.default_rng(seed)

    def residual(h: np.ndarray) -> np.ndarray:
        return k * log_map(P, h) - h

    def polish(h0: np.ndarray) -> Optional[np.ndarray]:
        with np.errstate(all="ignore"):
            try:
                sol = root(residual, h0, method="hybr", options={"xtol": 1e-13})
            except SingularEvaluationError:
                return None
        return sol.x if np.all(np.isfinite(sol.x)) else None

    candidates: List[Tuple[float, np.ndarray]] = []
    origin = np.zeros(3)
    if _log_residual(P, k, origin) <= ORIGIN_TOL:
        candidates.append((0.0, origin))
    for h0 in rng.uniform(-log_radius, log_radius, size=(starts, 3)):
        h = h0.copy()
        with np.errstate(all="ignore"):
            for _ in range(max_iter):
                try:
                    nxt = (1.0 - damping) * h + damping * k * log_map(P, h)
                except SingularEvaluationError:
                    break
                if not np.all(np.isfinite(nxt)):
                    break
                done = np.max(np.abs(nxt - h)) < tol
                h = nxt
                if done:
                    break
        for start in (h0, h):
            found = polish(start)
            if found is None:
                continue
            res = _log_residual(P, k, found)
            if res <= ACCEPT_RESIDUAL:
                candidates.append((res, found))

    kept: List[Tuple[np.ndarray, float]] = []
    for res, h in sorted(candidates, key=lambda item: item[0]):
        radius = _merge_radius(P, k, h, res)
        if any(np.max(np.abs(h - other)) <= max(radius, other_radius) for other, other_radius in kept):
            continue
        kept.append((h, radius))
    logger.debug("multistart: %d distinct fixed points from %d candidates", len(kept), len(candidates))
    return sorted((FieldVector.from_array(np.exp(h)) for h, _ in kept),
                  key=lambda f: (f.z1, f.z2, f.z3))
