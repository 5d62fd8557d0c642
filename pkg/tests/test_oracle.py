"""Tests for the finite-volume oracle."""

import io
import unittest

import numpy as np

from src import core, diamond, fertile, oracle
from src.core import FieldVector, TreeShape
from src.diamond import DiamondParams
from src.errors import EnumerationBudgetError, ShapeMismatchError
from src.fertile import FertileParams
from src.oracle import FiniteVolumeLaw, FiniteTree


def uniform_law(P, tree):
    return FiniteVolumeLaw(P, {leaf: np.ones(4) for leaf in tree.leaves})


def nontrivial_field(solutions, field):
    """Field of the solution off (1,1,1) that stays closest to 1."""
    candidates = [s for s in solutions if abs(s.v - 1.0) > 1e-6] or solutions
    return min((field(s) for s in candidates), key=lambda z: np.max(np.abs(z.log())))


def model_fields():
    """(name, matrix, field) for one boundary law of each catalog model at k = 2."""
    out = []
    dp = DiamondParams(0.85, 0.55, k=2)
    out.append(("diamond", dp.matrix(),
                nontrivial_field(diamond.ti_diamond_solutions(dp), lambda s: s.field())))
    for p in (FertileParams("stick", 0.9, 0.1, k=2),
              FertileParams("gun", 0.05, 0.05, a=0.025, b=0.025, c=0.45, d=0.45, k=2),
              FertileParams("key", 0.05, 0.05, a=0.025, b=0.025, c=0.95, k=2)):
        out.append((p.graph, p.matrix(),
                    nontrivial_field(fertile.fertile_solutions(p), lambda s: s.field(2))))
    return out


class TestFiniteTree(unittest.TestCase):
    """Test tree construction."""

    def test_sizes(self):
        """Vertex counts follow the level sizes."""
        for shape in (TreeShape.full(2, 2), TreeShape.half(2, 2), TreeShape.full(3, 1), TreeShape.half(1, 4)):
            with self.subTest(shape=shape):
                tree = FiniteTree(shape)
                self.assertEqual(tree.size, shape.vertex_count)
                self.assertEqual(len(tree.leaves), shape.level_size(shape.depth))
                self.assertEqual(tree.graph.number_of_edges(), tree.size - 1)

    def test_level_order(self):
        """Children of the root are 1..r, parents precede children."""
        tree = FiniteTree(TreeShape.full(2, 2))
        self.assertEqual(tree.children(0), [1, 2, 3])
        self.assertTrue(all(tree.parent[v] < v for v in range(1, tree.size)))

    def test_truncate(self):
        """Truncation keeps the same vertex numbering."""
        tree = FiniteTree(TreeShape.half(2, 3))
        small = tree.truncate(1)
        self.assertEqual(small.size, 3)
        np.testing.assert_array_equal(small.parent, tree.parent[:3])
        with self.assertRaises(ShapeMismatchError):
            tree.truncate(4)


class TestCounting(unittest.TestCase):
    """Test admissible configuration counts."""

    def test_small_counts(self):
        """Depth one with two leaves: 16 for diamond, 10 for stick; a single vertex has 4."""
        tree = FiniteTree(TreeShape.half(2, 1))
        self.assertEqual(oracle.count_admissible(tree, core.builtin_graph("diamond")), 16)
        self.assertEqual(oracle.count_admissible(tree, core.builtin_graph("stick")), 10)
        self.assertEqual(oracle.count_admissible(FiniteTree(TreeShape.half(2, 0)),
                                                 core.builtin_graph("gun")), 4)

    def test_enumeration_matches_transfer_count(self):
        """DFS, array expansion and transfer counting agree."""
        for name in ("diamond", "stick", "gun", "key"):
            graph = core.builtin_graph(name)
            for shape in (TreeShape.half(2, 2), TreeShape.full(2, 2), TreeShape.full(3, 1)):
                with self.subTest(model=name, shape=shape):
                    tree = FiniteTree(shape)
                    listed = list(oracle.enumerate_admissible(tree, graph))
                    self.assertEqual(len(listed), oracle.count_admissible(tree, graph))
                    self.assertEqual(len(set(listed)), len(listed))
                    array = oracle.configuration_array(tree, graph)
                    self.assertEqual([tuple(int(s) for s in row) for row in array], sorted(listed))

    def test_budget(self):
        """Enumeration refuses trees beyond the budget."""
        tree = FiniteTree(TreeShape.half(2, 1))
        graph = core.builtin_graph("diamond")
        with self.assertRaises(EnumerationBudgetError) as ctx:
            list(oracle.enumerate_admissible(tree, graph, budget=10))
        self.assertEqual(ctx.exception.bound, 16)
        with self.assertRaises(EnumerationBudgetError):
            oracle.configuration_array(tree, graph, budget=10)


class TestMeasure(unittest.TestCase):
    """Test the finite measure."""

    def test_normalized(self):
        """Probabilities sum to one over admissible configurations."""
        P = core.build_matrix("gun", {"alpha": 0.3, "beta": 0.6, "a": 0.1, "b": 0.2, "c": 0.3, "d": 0.4})
        tree = FiniteTree(TreeShape.full(2, 2))
        measure = oracle.finite_measure(uniform_law(P, tree), tree)
        self.assertAlmostEqual(sum(measure.values()), 1.0, places=12)
        self.assertEqual(len(measure), oracle.count_admissible(tree, P.graph))

    def test_single_vertex_uniform(self):
        """Depth zero with unit weights is uniform over the four states."""
        tree = FiniteTree(TreeShape.half(2, 0))
        P = core.build_matrix("diamond", {"alpha": 0.5, "beta": 0.5})
        np.testing.assert_allclose(oracle.root_marginal(uniform_law(P, tree), tree), np.full(4, 0.25))

    def test_uniform_diamond_edges(self):
        """With alpha = beta = 1/2 every admissible configuration is equally likely."""
        P = core.build_matrix("diamond", {"alpha": 0.5, "beta": 0.5})
        tree = FiniteTree(TreeShape.half(2, 1))
        measure = oracle.finite_measure(uniform_law(P, tree), tree)
        for prob in measure.values():
            self.assertAlmostEqual(prob, 1.0 / 16.0, places=14)

    def test_diamond_swap_symmetry(self):
        """Swapping 0<->3 and 1<->2 maps the diamond model to itself."""
        P = core.build_matrix("diamond", {"alpha": 0.3, "beta": 0.8})
        tree = FiniteTree(TreeShape.full(2, 2))
        m = oracle.root_marginal(uniform_law(P, tree), tree)
        self.assertAlmostEqual(m[0], m[3], places=12)
        self.assertAlmostEqual(m[1], m[2], places=12)

    def test_hamiltonian_weights(self):
        """With unit boundary weights probabilities are proportional to exp(H)."""
        P = core.build_matrix("stick", {"alpha": 0.35, "beta": 0.6})
        tree = FiniteTree(TreeShape.half(2, 2))
        measure = oracle.finite_measure(uniform_law(P, tree), tree)
        ratios = [prob / np.exp(oracle.hamiltonian(P, tree, sigma)) for sigma, prob in measure.items()]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)

    def test_hamiltonian_inadmissible(self):
        """A forbidden edge gives infinite energy."""
        P = core.build_matrix("diamond", {"alpha": 0.3, "beta": 0.7})
        tree = FiniteTree(TreeShape.half(2, 1))
        self.assertEqual(oracle.hamiltonian(P, tree, (0, 1, 0)), float("inf"))
        with self.assertRaises(ShapeMismatchError):
            oracle.hamiltonian(P, tree, (0, 0))

    def test_log_space_path(self):
        """Thirteen vertices go through log-sum-exp and stay normalized."""
        P = core.build_matrix("diamond", {"alpha": 0.2, "beta": 0.9})
        tree = FiniteTree(TreeShape.half(3, 2))
        self.assertGreater(tree.size, oracle.LOG_SPACE_THRESHOLD)
        measure = oracle.finite_measure(uniform_law(P, tree), tree)
        self.assertAlmostEqual(sum(measure.values()), 1.0, places=12)

    def test_boundary_shape_mismatch(self):
        """Boundary weights must sit on exactly the leaves."""
        P = core.build_matrix("diamond", {"alpha": 0.3, "beta": 0.7})
        tree = FiniteTree(TreeShape.half(2, 2))
        law = FiniteVolumeLaw(P, {0: np.ones(4)})
        with self.assertRaises(ShapeMismatchError):
            oracle.finite_measure(law, tree)

    def test_csv_table(self):
        """CSV table has a header and one row per configuration."""
        P = core.build_matrix("diamond", {"alpha": 0.3, "beta": 0.7})
        tree = FiniteTree(TreeShape.half(2, 1))
        buf = io.StringIO()
        rows = oracle.measure_table_csv(uniform_law(P, tree), tree, buf)
        lines = buf.getvalue().splitlines()
        self.assertEqual(rows, 16)
        self.assertEqual(lines[0], "configuration,probability")
        self.assertEqual(len(lines), 17)
        self.assertEqual(lines[1].split(",")[0], "000")


class TestCompatibility(unittest.TestCase):
    """Test compatibility of boundary-law measures."""

    def test_fixed_points_compatible(self):
        """Every model's boundary law is compatible; perturbations are not."""
        for name, P, field in model_fields():
            for shape in (TreeShape.full(2, 2), TreeShape.half(2, 2)):
                with self.subTest(model=name, shape=shape):
                    report = oracle.verify_model(P, shape, field)
                    self.assertLess(report.solution_residual, 1e-10)
                    self.assertGreater(report.perturbed_residual, 1e-4)
                    self.assertTrue(report.passed)

    def test_trivial_field_compatible(self):
        """(1,1,1) is compatible for any matrix."""
        P = core.build_matrix("gun", {"alpha": 0.3, "beta": 0.6, "a": 0.1, "b": 0.2, "c": 0.3, "d": 0.4})
        report = oracle.verify_model(P, TreeShape.full(2, 3), FieldVector.ones())
        self.assertLess(report.solution_residual, 1e-12)

    def test_half_tree_depth_one(self):
        """A root with k children is compatible at depth one."""
        _, P, field = model_fields()[1]
        report = oracle.verify_model(P, TreeShape.half(2, 1), field)
        self.assertLess(report.solution_residual, 1e-10)

    def test_full_root_depth_one_fails(self):
        """A root with k+1 children needs the k+1 power, so depth one is incompatible."""
        _, P, field = model_fields()[1]
        report = oracle.verify_model(P, TreeShape.full(2, 1), field)
        self.assertGreater(report.solution_residual, 1e-6)

    def test_periodic_pair_compatible(self):
        """Alternating boundary laws are compatible on both parities of depth."""
        p = DiamondParams(0.1, 0.9, k=2)
        pair = diamond.periodic_pairs_k2(p)[0]
        z_even, z_odd = pair.fields()
        for depth in (2, 3):
            with self.subTest(depth=depth):
                report = oracle.verify_model(p.matrix(), TreeShape.half(2, depth), z_even, z_odd)
                self.assertLess(report.solution_residual, 1e-10)

    def test_different_matrices_rejected(self):
        """Both depths must share one matrix."""
        tree = FiniteTree(TreeShape.half(2, 1))
        P = core.build_matrix("diamond", {"alpha": 0.3, "beta": 0.7})
        Q = core.build_matrix("diamond", {"alpha": 0.4, "beta": 0.7})
        with self.assertRaises(ShapeMismatchError):
            oracle.compatibility_check(uniform_law(P, tree), uniform_law(Q, tree.truncate(0)), tree)


if __name__ == "__main__":
    unittest.main()
