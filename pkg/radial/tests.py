from math import pi, sqrt

import numpy as np
from django.test import SimpleTestCase

from radial.domain import RadialField, RadialGrid, sphere_area
from radial.exceptions import NumericError, ResolutionError, StructuralError
from radial.io import field_from_csv, field_from_dict, field_to_csv, field_to_dict, parse_nodes_spec
from radial.profiles import GaussianProfile, sample
from radial.services import (
    apply_laplacian,
    check_resolution,
    dilate,
    grad_norm_sq,
    integrate,
    lp_norm_pow,
    mass,
    mixed_term,
    suggest_grid,
)


def soliton_1d(grid: RadialGrid) -> RadialField:
    return RadialField.from_function(grid, lambda r: sqrt(2.0) / np.cosh(r))


def bump(grid: RadialGrid, lo: float, hi: float, power: int = 4) -> RadialField:
    # гладкая функция с носителем внутри (lo, hi)
    r = grid.nodes
    t = np.clip((r - lo) / (hi - lo), 0.0, 1.0)
    return RadialField(grid, (16.0 * t * (1.0 - t)) ** power)


class GridTests(SimpleTestCase):
    def test_sphere_area(self):
        self.assertEqual(sphere_area(1), 2.0)
        self.assertAlmostEqual(sphere_area(2), 2 * pi, places=14)
        self.assertAlmostEqual(sphere_area(3), 4 * pi, places=14)

    def test_rejects_bad_grids(self):
        with self.assertRaises(StructuralError):
            RadialGrid.uniform(3, 32, 10.0)
        with self.assertRaises(StructuralError):
            RadialGrid(dim=3, r_max=1.0, nodes=np.linspace(0.1, 1.0, 100))
        with self.assertRaises(StructuralError):
            RadialGrid(dim=3, r_max=1.0, nodes=np.linspace(0.0, 1.0, 100) ** 2)
        with self.assertRaises(StructuralError):
            RadialGrid.uniform(0, 128, 1.0)

    def test_field_invariants(self):
        grid = RadialGrid.uniform(3, 128, 5.0)
        u = RadialField(grid, np.ones(grid.size))
        self.assertEqual(u.values[-1], 0.0)
        with self.assertRaises(StructuralError):
            RadialField(grid, np.ones(grid.size - 1))
        with self.assertRaises(NumericError):
            RadialField(grid, np.full(grid.size, np.nan))


class QuadratureTests(SimpleTestCase):
    def test_zero_integrand(self):
        grid = RadialGrid.uniform(3)
        self.assertEqual(integrate(grid, np.zeros(grid.size)), 0.0)

    def test_gaussian_3d(self):
        grid = RadialGrid.uniform(3, 4096, 12.0)
        value = integrate(grid, np.exp(-grid.nodes ** 2))
        self.assertAlmostEqual(value, pi ** 1.5, delta=1e-8)

    def test_linear_cutoff_1d(self):
        for count in (1025, 4097):
            grid = RadialGrid.uniform(1, count, 2.0)
            h = grid.step
            f = np.clip((1.0 + h - grid.nodes) / h, 0.0, 1.0)
            self.assertAlmostEqual(integrate(grid, f), 2.0, delta=4 * h)

    def test_linear_and_monotone(self):
        grid = RadialGrid.uniform(2, 512, 6.0)
        rng = np.random.default_rng(0)
        f, g = rng.random(grid.size), rng.random(grid.size)
        self.assertAlmostEqual(integrate(grid, f + g), integrate(grid, f) + integrate(grid, g), delta=1e-12)
        self.assertGreaterEqual(integrate(grid, f), 0.0)

    def test_errors(self):
        grid = RadialGrid.uniform(3, 128, 5.0)
        with self.assertRaises(StructuralError):
            integrate(grid, np.zeros(10))
        bad = np.zeros(grid.size)
        bad[3] = np.inf
        with self.assertRaises(NumericError):
            integrate(grid, bad)


class NormTests(SimpleTestCase):
    def test_soliton_norms(self):
        grid = RadialGrid.uniform(1, 16384, 20.0)
        u = soliton_1d(grid)
        self.assertAlmostEqual(mass(u), 4.0, delta=1e-6)
        self.assertAlmostEqual(grad_norm_sq(u), 4.0 / 3.0, delta=1e-5)
        self.assertAlmostEqual(lp_norm_pow(u, 4), 16.0 / 3.0, delta=1e-5)

    def test_trivial_values(self):
        grid = RadialGrid.uniform(3, 256, 10.0)
        zero = RadialField.zeros(grid)
        self.assertEqual(mass(zero), 0.0)
        self.assertEqual(lp_norm_pow(zero, 3.5), 0.0)
        # константа с обрывом в r_max: вклад даёт только последняя ячейка
        flat = RadialField(grid, np.ones(grid.size))
        last_cell = grid.sphere_area * grid.midpoints[-1] ** 2 / grid.step
        self.assertAlmostEqual(grad_norm_sq(flat), last_cell, delta=1e-9 * last_cell)

    def test_lp_two_is_mass(self):
        grid = RadialGrid.uniform(3, 1024, 10.0)
        u = sample(GaussianProfile(3, 1.3, 0.8), grid)
        self.assertEqual(lp_norm_pow(u, 2), mass(u))

    def test_mixed_term(self):
        grid = RadialGrid.uniform(3, 1024, 10.0)
        u = sample(GaussianProfile(3, 1.0, 1.0), grid)
        v = sample(GaussianProfile(3, 0.7, 1.6), grid)
        self.assertEqual(mixed_term(u, RadialField.zeros(grid), 1.5, 2.5), 0.0)
        self.assertAlmostEqual(mixed_term(u, u, 1.5, 2.5), lp_norm_pow(u, 4.0), delta=1e-12)

        r1, r2, q = 1.5, 2.5, 1.8
        qp = q / (q - 1.0)
        bound = lp_norm_pow(u, r1 * q) ** (1 / q) * lp_norm_pow(v, r2 * qp) ** (1 / qp)
        self.assertLessEqual(mixed_term(u, v, r1, r2), bound * (1 + 1e-12))

    def test_mixed_term_grid_mismatch(self):
        u = RadialField.zeros(RadialGrid.uniform(3, 128, 5.0))
        v = RadialField.zeros(RadialGrid.uniform(3, 256, 5.0))
        with self.assertRaises(StructuralError):
            mixed_term(u, v, 1.0, 1.0)

    def test_gaussian_closed_forms(self):
        profile = GaussianProfile(3, 1.2, 0.9)
        u = sample(profile, RadialGrid.uniform(3, 8192, 12.0))
        self.assertAlmostEqual(mass(u) / profile.mass, 1.0, delta=1e-8)
        self.assertAlmostEqual(grad_norm_sq(u) / profile.grad_norm_sq, 1.0, delta=1e-5)
        self.assertAlmostEqual(lp_norm_pow(u, 3.0) / profile.lp_norm_pow(3.0), 1.0, delta=1e-8)


class LaplacianTests(SimpleTestCase):
    def test_zero(self):
        grid = RadialGrid.uniform(3, 256, 10.0)
        self.assertFalse(np.any(apply_laplacian(RadialField.zeros(grid)).values))

    def test_gaussian_3d(self):
        grid = RadialGrid.uniform(3, 4096, 12.0)
        r = grid.nodes
        u = RadialField(grid, np.exp(-0.5 * r ** 2))
        exact = (3.0 - r ** 2) * np.exp(-0.5 * r ** 2)
        err = np.abs(apply_laplacian(u).values - exact)[:-1]
        h2 = grid.step ** 2
        self.assertLess(err[0], 10 * h2)
        # погрешность потоковой схемы ведёт себя как h^2 (1 + 1/r^2)
        self.assertLess(np.max(err[r[:-1] >= 0.5]), 20 * h2)

    def test_soliton_residual_1d(self):
        grid = RadialGrid.uniform(1, 4096, 20.0)
        u = soliton_1d(grid)
        res = apply_laplacian(u).values + u.values - u.values ** 3
        # у r_max поле обрезано до 0: пограничный слой не входит
        inner = grid.nodes <= grid.r_max - 1.0
        self.assertLess(np.max(np.abs(res[inner])), 1e-4)

    def test_symmetric(self):
        grid = RadialGrid.uniform(3, 2048, 10.0)
        u = bump(grid, 1.0, 7.0)
        v = bump(grid, 2.0, 8.0, power=3)
        left = integrate(grid, apply_laplacian(u).values * v.values)
        right = integrate(grid, u.values * apply_laplacian(v).values)
        self.assertLess(abs(left - right), 1e-8 * max(abs(left), 1.0))

    def test_green_identity(self):
        grid = RadialGrid.uniform(3, 4096, 12.0)
        u = sample(GaussianProfile(3, 1.0, 1.0), grid)
        pairing = integrate(grid, u.values * apply_laplacian(u).values)
        self.assertAlmostEqual(pairing / grad_norm_sq(u), 1.0, delta=1e-6)


class DilationTests(SimpleTestCase):
    def setUp(self):
        self.grid = RadialGrid.uniform(3, 65536, 16.0)
        self.u = sample(GaussianProfile(3, 1.0, 1.0), self.grid)
        self.v = sample(GaussianProfile(3, 0.6, 0.8), self.grid)

    def test_identity(self):
        self.assertIs(dilate(self.u, 0.0), self.u)
        with self.assertRaises(NumericError):
            dilate(self.u, float("inf"))

    def test_scaling_laws(self):
        base_mass = mass(self.u)
        base_grad = grad_norm_sq(self.u)
        base_p = lp_norm_pow(self.u, 3.5)
        base_mixed = mixed_term(self.u, self.v, 1.5, 2.5)
        for s in (-1.0, -0.4, 0.3, 1.0):
            du, dv = dilate(self.u, s), dilate(self.v, s)
            self.assertAlmostEqual(mass(du) / base_mass, 1.0, delta=1e-8)
            self.assertAlmostEqual(grad_norm_sq(du) / (np.exp(2 * s) * base_grad), 1.0, delta=1e-6)
            self.assertAlmostEqual(
                lp_norm_pow(du, 3.5) / (np.exp(s * 3 * 1.5 / 2) * base_p), 1.0, delta=1e-6
            )
            self.assertAlmostEqual(
                mixed_term(du, dv, 1.5, 2.5) / (np.exp(s * 3 * 2.0 / 2) * base_mixed), 1.0, delta=1e-6
            )

    def test_matches_exact_profile(self):
        profile = GaussianProfile(3, 1.0, 1.0)
        for s in (0.7, 2.5):
            exact = sample(profile.dilated(s), self.grid)
            scale = float(np.max(exact.values))
            self.assertLess(np.max(np.abs(dilate(self.u, s).values - exact.values)), 1e-6 * scale)

    def test_group_inverse(self):
        for s in (-1.0, 0.5, 1.0):
            back = dilate(dilate(self.u, s), -s)
            self.assertLess(np.max(np.abs(back.values - self.u.values)), 1e-6)


class ResolutionTests(SimpleTestCase):
    def test_suggest_grid(self):
        grid = suggest_grid(3, [-1.0])
        self.assertGreaterEqual(grid.r_max, 15.0)
        self.assertEqual(grid.size, 4096)

        grid = suggest_grid(3, [-1.0, -400.0])
        self.assertLessEqual(grid.step, 1.0 / 800)
        self.assertEqual(grid.size & (grid.size - 1), 0)

    def test_check_resolution(self):
        grid = RadialGrid.uniform(3, 1024, 20.0)
        with self.assertRaises(ResolutionError):
            check_resolution(grid, 0.05)
        with self.assertLogs("radial.services", level="WARNING"):
            check_resolution(grid, 5.0)


class SerializationTests(SimpleTestCase):
    def test_nodes_spec(self):
        self.assertEqual(parse_nodes_spec("uniform(512)"), 512)
        self.assertEqual(parse_nodes_spec(2048), 2048)
        with self.assertRaises(StructuralError):
            parse_nodes_spec("chebyshev(12)")

    def test_json_object(self):
        grid = RadialGrid.uniform(2, 256, 8.0)
        u = sample(GaussianProfile(2, 1.0, 1.0), grid)
        data = field_to_dict(u)
        self.assertEqual(set(data), {"dim", "r_max", "values"})
        back = field_from_dict({**data, "nodes": "uniform(256)"})
        np.testing.assert_array_equal(back.values, u.values)

    def test_csv(self):
        grid = RadialGrid.uniform(3, 128, 6.0)
        u = sample(GaussianProfile(3, 1.0, 1.0), grid)
        text = field_to_csv(u)
        self.assertTrue(text.startswith("r,value\n"))
        back = field_from_csv(text, 3)
        self.assertLess(np.max(np.abs(back.values - u.values)), 1e-11)
