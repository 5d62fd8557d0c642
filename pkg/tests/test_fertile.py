"""Tests for the stick, gun and key solvers."""

import unittest

import numpy as np

from src import core, fertile
from src.errors import ParameterError, UnsupportedAssumptionError
from src.fertile import FertileParams


def gun_point(**overrides):
    params = dict(alpha=0.05, beta=0.05, a=0.025, b=0.025, c=0.45, d=0.45, k=2)
    params.update(overrides)
    return FertileParams("gun", **params)


def key_point():
    return FertileParams("key", alpha=0.05, beta=0.05, a=0.025, b=0.025, c=0.95, k=2)


class TestStick(unittest.TestCase):
    """Test the stick reduction Y."""

    def test_y_fixed_values(self):
        """Y(1) = 1 and Y(0) matches its closed form."""
        p = FertileParams("stick", alpha=0.5, beta=0.5, k=2)
        self.assertAlmostEqual(fertile.stick_Y(1.0, p), 1.0, places=14)
        self.assertAlmostEqual(fertile.stick_Y(0.0, p), 0.4, places=14)
        for al, be, k in [(0.2, 0.7, 3), (0.9, 0.1, 2), (0.4, 0.4, 5)]:
            with self.subTest(alpha=al, beta=be, k=k):
                self.assertAlmostEqual(fertile.stick_Y(1.0, FertileParams("stick", al, be, k=k)), 1.0, places=12)

    def test_y_increasing_and_bounded(self):
        """Y is increasing and stays below 1/(1-alpha)."""
        p = FertileParams("stick", alpha=0.7, beta=0.3, k=3)
        values = fertile.stick_Y(np.geomspace(1e-4, 1e4, 500), p)
        self.assertTrue(np.all(np.diff(values) >= 0.0))
        self.assertTrue(np.all(values <= 1.0 / (1 - 0.7) + 1e-12))

    def test_y_prime_finite_differences(self):
        """Y'(1) = k^2 alpha (1 - beta)."""
        step = 1e-6
        for k in (2, 3, 5):
            for al in np.linspace(0.05, 0.95, 20):
                for be in np.linspace(0.05, 0.95, 20):
                    p = FertileParams("stick", float(al), float(be), k=k)
                    fd = (fertile.stick_Y(1 + step, p) - fertile.stick_Y(1 - step, p)) / (2 * step)
                    self.assertLess(abs(fd - fertile.stick_Y_prime_at_1(p)), 1e-5)

    def test_three_roots(self):
        """Criterion 3.24 gives at least three roots, each a TI fixed point."""
        p = FertileParams("stick", alpha=0.9, beta=0.1, k=2)
        self.assertAlmostEqual(fertile.stick_Y_prime_at_1(p), 3.24, places=12)
        sols = fertile.stick_solutions(p)
        self.assertGreaterEqual(len(sols), 3)
        P = p.matrix()
        for s in sols:
            self.assertLess(s.residual, 1e-9)
            self.assertLess(core.fixed_point_residual(P, 2, s.field(2)), 1e-9)

    def test_trivial_root_present(self):
        """(1,1,1) is always a solution."""
        sols = fertile.stick_solutions(FertileParams("stick", alpha=0.1, beta=0.9, k=2))
        self.assertTrue(any(abs(s.u - 1) < 1e-9 and abs(s.v - 1) < 1e-9 and abs(s.w - 1) < 1e-9
                            for s in sols))

    def test_criterion_grid(self):
        """Points with a clearly positive criterion have at least three roots."""
        for al in np.linspace(0.05, 0.95, 30):
            for be in np.linspace(0.05, 0.95, 30):
                p = FertileParams("stick", float(al), float(be), k=2)
                if fertile.stick_Y_prime_at_1(p) > 1.2:
                    self.assertGreaterEqual(len(fertile.stick_solutions(p)), 3,
                                            f"alpha={al}, beta={be}")


class TestGun(unittest.TestCase):
    """Test the gun and key reduction U."""

    def test_u_values(self):
        """U(1) = 1 and U(0+) = alpha/d."""
        p = gun_point(alpha=0.5, beta=0.5, a=0.25, b=0.25, c=0.25, d=0.25)
        self.assertAlmostEqual(fertile.gun_U(1.0, p), 1.0, places=14)
        self.assertAlmostEqual(fertile.gun_U(1e-9, p), 2.0, places=6)
        self.assertAlmostEqual(fertile.gun_U(1.0, key_point()), 1.0, places=14)

    def test_u_prime_finite_differences(self):
        """U'(1) = k (kc + d - alpha (kc + 1))."""
        step = 1e-6
        for k in (2, 3, 5):
            for al in np.linspace(0.05, 0.95, 10):
                for c in np.linspace(0.05, 0.5, 10):
                    rest = (1 - c - 0.3) / 2
                    p = gun_point(alpha=float(al), beta=float(al), a=rest, b=rest, c=float(c), d=0.3, k=k)
                    fd = (fertile.gun_U(1 + step, p) - fertile.gun_U(1 - step, p)) / (2 * step)
                    self.assertLess(abs(fd - fertile.gun_U_prime_at_1(p)), 1e-5)

    def test_criterion_values(self):
        """Criterion at the documented points."""
        self.assertAlmostEqual(fertile.gun_criterion(gun_point()), 2.51, places=12)
        silent = gun_point(alpha=0.5, beta=0.5, a=0.1, b=0.1, c=0.4, d=0.4)
        self.assertAlmostEqual(fertile.gun_criterion(silent), 0.6, places=12)

    def test_gun_three_roots(self):
        """Criterion 2.51 gives at least three roots with v = u."""
        p = gun_point()
        sols = fertile.gun_solutions(p)
        self.assertGreaterEqual(len(sols), 3)
        P = p.matrix()
        for s in sols:
            self.assertEqual(s.u, s.v)
            self.assertLess(s.residual, 1e-9)
            self.assertLess(core.fixed_point_residual(P, 2, s.field(2)), 1e-9)
        trivial = [s for s in sols if abs(s.u - 1) < 1e-9]
        self.assertEqual(len(trivial), 1)
        self.assertAlmostEqual(trivial[0].w, 1.0, places=9)

    def test_key_as_gun_without_d(self):
        """Key graph runs through the same route with d = 0."""
        p = key_point()
        self.assertEqual(p.d, 0.0)
        sols = fertile.gun_solutions(p)
        self.assertGreaterEqual(len(sols), 3)
        P = p.matrix()
        for s in sols:
            self.assertLess(core.fixed_point_residual(P, 2, s.field(2)), 1e-9)

    def test_requires_equal_alpha_beta(self):
        """The u = v reduction needs alpha = beta."""
        p = gun_point(beta=0.3)
        with self.assertRaises(UnsupportedAssumptionError):
            fertile.gun_solutions(p)
        with self.assertRaises(UnsupportedAssumptionError):
            fertile.gun_U(1.0, p)

    def test_invalid_simplex(self):
        """Gun weights must sum to 1."""
        with self.assertRaises(ParameterError):
            gun_point(c=0.6)

    def test_criterion_grid(self):
        """Positive slope above 1.2 at u = 1 gives at least three roots."""
        for al in np.linspace(0.02, 0.5, 30):
            for c in np.linspace(0.05, 0.5, 30):
                rest = (1 - c - 0.45) / 2
                p = gun_point(alpha=float(al), beta=float(al), a=rest, b=rest, c=float(c), d=0.45)
                if fertile.gun_U_prime_at_1(p) > 1.2:
                    self.assertGreaterEqual(len(fertile.gun_solutions(p)), 3, f"alpha={al}, c={c}")

    def test_general_route_finds_fixed_points(self):
        """Experimental multi-start works for alpha != beta."""
        p = gun_point(alpha=0.5, beta=0.3, a=0.1, b=0.1, c=0.4, d=0.4)
        roots = fertile.gun_solutions_general(p, starts=20, seed=5)
        self.assertTrue(roots)
        P = p.matrix()
        for z in roots:
            self.assertLess(core.fixed_point_residual(P, 2, z), 1e-8)
        self.assertTrue(any(np.allclose(z.as_array(), 1.0, atol=1e-6) for z in roots))


class TestClassifyFertile(unittest.TestCase):
    """Test fertile point classification."""

    def test_labels(self):
        """Multiple only with three roots."""
        self.assertEqual(fertile.classify_fertile(FertileParams("stick", 0.9, 0.1, k=2)).label, "multiple")
        self.assertEqual(fertile.classify_fertile(FertileParams("stick", 0.1, 0.9, k=2)).label, "unique")
        row = fertile.classify_fertile(gun_point())
        self.assertEqual(row.label, "multiple")
        self.assertEqual(row.beta, 0.45)


if __name__ == "__main__":
    unittest.main()
