"""
Exact finite-volume measures on small rooted trees.

A tree of depth n carries edge weights P[parent state, child state] and
leaf weights t_x. Marginalizing the depth-n measure onto V_{n-1} must
reproduce the depth-(n-1) measure whenever the leaf weights come from a
solution of the boundary-law recursion.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, TextIO, Tuple

import networkx as nx
import numpy as np
from scipy.special import logsumexp

from .config import DEFAULT_ENUM_BUDGET
from .core import AdmissibilityGraph, FieldVector, TransitionMatrix, TreeShape
from .errors import DegenerateMeasureError, EnumerationBudgetError, ParameterError, ShapeMismatchError
from .utils import fmt_float

logger = logging.getLogger(__name__)

LOG_SPACE_THRESHOLD = 12
PERTURBATION = 1.1
SOLUTION_TOL = 1e-10
PERTURBED_MIN = 1e-4

Configuration = Tuple[int, ...]


class FiniteTree:
    """Truncated tree with vertices numbered level by level from the root 0."""

    def __init__(self, shape: TreeShape):
        self.shape = shape
        g = nx.DiGraph()
        g.add_node(0, depth=0)
        frontier = [0]
        next_id = 1
        for d in range(1, shape.depth + 1):
            level = []
            for v in frontier:
                branching = shape.root_branching if v == 0 else shape.k
                for _ in range(branching):
                    g.add_edge(v, next_id)
                    g.nodes[next_id]["depth"] = d
                    level.append(next_id)
                    next_id += 1
            frontier = level
        self.graph = g
        self.size = next_id
        self.parent = np.full(self.size, -1, dtype=np.int64)
        for u, v in g.edges:
            self.parent[v] = u
        self.depth = np.array([g.nodes[v]["depth"] for v in range(self.size)], dtype=np.int64)
        self.leaves = tuple(v for v in range(self.size) if self.depth[v] == shape.depth)

    def children(self, v: int) -> List[int]:
        return sorted(self.graph.successors(v))

    def edges(self) -> np.ndarray:
        """(E, 2) array of (parent, child), children in vertex order."""
        kids = np.arange(1, self.size)
        return np.stack([self.parent[kids], kids], axis=1)

    def truncate(self, depth: int) -> "FiniteTree":
        if not 0 <= depth <= self.shape.depth:
            raise ShapeMismatchError(f"cannot truncate depth {self.shape.depth} tree to {depth}")
        return FiniteTree(TreeShape(self.shape.k, depth, self.shape.root_branching))

    def __repr__(self) -> str:
        return f"FiniteTree({self.shape}, size={self.size})"


@dataclass(frozen=True, eq=False)
class FiniteVolumeLaw:
    P: TransitionMatrix
    boundary: Mapping[int, np.ndarray]

    def __post_init__(self) -> None:
        cleaned = {}
        for leaf, t in self.boundary.items():
            t = np.array(t, dtype=float)
            if t.shape != (4,) or not np.all(np.isfinite(t)) or np.any(t <= 0.0):
                raise ParameterError(f"boundary weight at vertex {leaf} must be 4 positive reals")
            t.setflags(write=False)
            cleaned[int(leaf)] = t
        object.__setattr__(self, "boundary", cleaned)

    def check_tree(self, tree: FiniteTree) -> None:
        if set(self.boundary) != set(tree.leaves):
            raise ShapeMismatchError("boundary weights do not cover exactly the leaves",
                                     f"{len(self.boundary)} weights for {len(tree.leaves)} leaves")


def enumeration_bound(tree: FiniteTree, graph: AdmissibilityGraph) -> int:
    max_out = max(graph.outdegree(s) for s in range(4))
    return 4 * max_out ** (tree.size - 1)


def _check_budget(tree: FiniteTree, graph: AdmissibilityGraph, budget: int) -> None:
    bound = enumeration_bound(tree, graph)
    if bound > budget:
        raise EnumerationBudgetError(bound, budget)


def enumerate_admissible(tree: FiniteTree, graph: AdmissibilityGraph,
                         budget: int = DEFAULT_ENUM_BUDGET) -> Iterator[Configuration]:
    """Depth-first over vertex order; only admissible prefixes are extended."""
    _check_budget(tree, graph, budget)
    successors = {s: graph.successors(s) for s in range(4)}
    parent = tree.parent.tolist()
    prefix: List[int] = []

    def extend(v: int) -> Iterator[Configuration]:
        if v == tree.size:
            yield tuple(prefix)
            return
        allowed = range(4) if v == 0 else successors[prefix[parent[v]]]
        for s in allowed:
            prefix.append(s)
            yield from extend(v + 1)
            prefix.pop()

    return extend(0)


def count_admissible(tree: FiniteTree, graph: AdmissibilityGraph) -> int:
    """Transfer count: c_v = prod over children (A c_child), summed at the root."""
    adj = graph.adjacency().astype(object)
    counts: Dict[int, np.ndarray] = {}
    for v in range(tree.size - 1, -1, -1):
        c = np.ones(4, dtype=object)
        for child in tree.children(v):
            c = c * adj.dot(counts.pop(child))
        counts[v] = c
    return int(sum(counts[0]))


def configuration_array(tree: FiniteTree, graph: AdmissibilityGraph,
                        budget: int = DEFAULT_ENUM_BUDGET) -> np.ndarray:
    """All admissible configurations as an (N, |V|) array in lexicographic order."""
    _check_budget(tree, graph, budget)
    adj = graph.adjacency()
    rows = np.arange(4, dtype=np.int8).reshape(4, 1)
    for v in range(1, tree.size):
        parent_states = rows[:, tree.parent[v]]
        blocks = []
        for s in range(4):
            keep = rows[adj[parent_states, s]]
            blocks.append(np.hstack([keep, np.full((len(keep), 1), s, dtype=np.int8)]))
        rows = np.vstack(blocks)
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def hamiltonian(P: TransitionMatrix, tree: FiniteTree, sigma: Configuration) -> float:
    """Sum of log P over tree edges; +inf on an inadmissible configuration."""
    if len(sigma) != tree.size:
        raise ShapeMismatchError(f"configuration has {len(sigma)} states for {tree.size} vertices")
    total = 0.0
    for u, v in tree.edges():
        pij = P.p[sigma[u], sigma[v]]
        if pij == 0.0:
            return float("inf")
        total += float(np.log(pij))
    return total


def _measure_arrays(law: FiniteVolumeLaw, tree: FiniteTree,
                    budget: int = DEFAULT_ENUM_BUDGET) -> Tuple[np.ndarray, np.ndarray]:
    law.check_tree(tree)
    configs = configuration_array(tree, law.P.graph, budget)
    edges = tree.edges()
    with np.errstate(divide="ignore"):
        log_p = np.log(law.P.p)
    log_w = np.zeros(len(configs))
    if len(edges):
        log_w += log_p[configs[:, edges[:, 0]], configs[:, edges[:, 1]]].sum(axis=1)
    for leaf in tree.leaves:
        log_w += np.log(law.boundary[leaf])[configs[:, leaf]]
    if tree.size > LOG_SPACE_THRESHOLD:
        log_z = logsumexp(log_w)
        if not np.isfinite(log_z):
            raise DegenerateMeasureError("partition function is zero")
        probs = np.exp(log_w - log_z)
    else:
        weights = np.exp(log_w)
        z = weights.sum()
        if not z > 0.0:
            raise DegenerateMeasureError("partition function is zero")
        probs = weights / z
    return configs, probs


def finite_measure(law: FiniteVolumeLaw, tree: FiniteTree,
                   budget: int = DEFAULT_ENUM_BUDGET) -> Dict[Configuration, float]:
    configs, probs = _measure_arrays(law, tree, budget)
    return {tuple(int(s) for s in row): float(p) for row, p in zip(configs, probs)}


def root_marginal(law: FiniteVolumeLaw, tree: FiniteTree,
                  budget: int = DEFAULT_ENUM_BUDGET) -> np.ndarray:
    configs, probs = _measure_arrays(law, tree, budget)
    return np.bincount(configs[:, 0], weights=probs, minlength=4)


def _prefix_distribution(configs: np.ndarray, probs: np.ndarray, m: int) -> Dict[int, float]:
    codes = configs[:, :m].astype(np.int64) @ (4 ** np.arange(m, dtype=np.int64))
    keys, inverse = np.unique(codes, return_inverse=True)
    sums = np.bincount(inverse, weights=probs)
    return dict(zip(keys.tolist(), sums.tolist()))


def compatibility_check(law: FiniteVolumeLaw, law_prev: FiniteVolumeLaw, tree: FiniteTree,
                        budget: int = DEFAULT_ENUM_BUDGET) -> float:
    """
    max over configurations on V_{n-1} of |marginal of the depth-n measure
    minus the depth-(n-1) measure|.
    """
    if tree.shape.depth < 1:
        raise ShapeMismatchError("compatibility needs depth >= 1")
    if law.P != law_prev.P:
        raise ShapeMismatchError("both depths must use the same transition matrix")
    prev_tree = tree.truncate(tree.shape.depth - 1)
    configs, probs = _measure_arrays(law, tree, budget)
    prev_configs, prev_probs = _measure_arrays(law_prev, prev_tree, budget)
    marginal = _prefix_distribution(configs, probs, prev_tree.size)
    previous = _prefix_distribution(prev_configs, prev_probs, prev_tree.size)
    keys = set(marginal) | set(previous)
    return max(abs(marginal.get(key, 0.0) - previous.get(key, 0.0)) for key in keys)


def boundary_from_field(tree: FiniteTree, field: FieldVector,
                        odd_field: Optional[FieldVector] = None) -> Dict[int, np.ndarray]:
    """t_x = (1, z1, z2, z3) on every leaf; ``odd_field`` applies at odd depth."""
    chosen = field
    if odd_field is not None and tree.shape.depth % 2 == 1:
        chosen = odd_field
    t = np.concatenate([[1.0], chosen.as_array()])
    return {leaf: t.copy() for leaf in tree.leaves}


def perturbed_residual(P: TransitionMatrix, tree: FiniteTree, field: FieldVector,
                       odd_field: Optional[FieldVector] = None, factor: float = PERTURBATION,
                       budget: int = DEFAULT_ENUM_BUDGET) -> float:
    """Largest compatibility residual after scaling one state weight of the first leaf."""
    prev = FiniteVolumeLaw(P, boundary_from_field(tree.truncate(tree.shape.depth - 1), field, odd_field))
    worst = 0.0
    for j in (1, 2, 3):
        boundary = boundary_from_field(tree, field, odd_field)
        boundary[tree.leaves[0]][j] *= factor
        worst = max(worst, compatibility_check(FiniteVolumeLaw(P, boundary), prev, tree, budget))
    return worst


@dataclass(frozen=True)
class OracleReport:
    shape: TreeShape
    configurations: int
    solution_residual: float
    perturbed_residual: float

    @property
    def passed(self) -> bool:
        return self.solution_residual < SOLUTION_TOL and self.perturbed_residual > PERTURBED_MIN


def verify_model(P: TransitionMatrix, shape: TreeShape, field: FieldVector,
                 odd_field: Optional[FieldVector] = None,
                 budget: int = DEFAULT_ENUM_BUDGET) -> OracleReport:
    """Compatibility residuals of a boundary law and of its perturbation."""
    if shape.depth < 1:
        raise ShapeMismatchError("verification needs depth >= 1")
    tree = FiniteTree(shape)
    law = FiniteVolumeLaw(P, boundary_from_field(tree, field, odd_field))
    prev_tree = tree.truncate(shape.depth - 1)
    prev = FiniteVolumeLaw(P, boundary_from_field(prev_tree, field, odd_field))
    solution = compatibility_check(law, prev, tree, budget)
    perturbed = perturbed_residual(P, tree, field, odd_field, budget=budget)
    count = count_admissible(tree, P.graph)
    logger.info("oracle %s: %d configurations, residual %.3g, perturbed %.3g",
                shape, count, solution, perturbed)
    return OracleReport(shape, count, solution, perturbed)


def measure_table_csv(law: FiniteVolumeLaw, tree: FiniteTree, stream: TextIO,
                      budget: int = DEFAULT_ENUM_BUDGET) -> int:
    """Write configuration,probability rows; returns the row count."""
    configs, probs = _measure_arrays(law, tree, budget)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["configuration", "probability"])
    for row, p in zip(configs, probs):
        writer.writerow(["".join(str(int(s)) for s in row), fmt_float(p)])
    return len(configs)
