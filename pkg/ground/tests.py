from math import log, sqrt

import numpy as np
from django.test import SimpleTestCase
from pydantic import ValidationError

from ground.domain import ScalarProblem
from ground.services import (
    _bisect,
    _bracket,
    ground_level,
    lambda_for_mass,
    level_curve,
    level_of,
    mass_frequency,
    relax_unit_ground,
    rescale_to_mass,
    scaled_norms,
    solve_unit_ground,
)
from radial.domain import RadialGrid
from radial.exceptions import ConfigurationError, ResolutionError
from radial.services import grad_norm_sq, laplacian_values, lp_norm_pow, mass


def grid_1d(count: int = 4096) -> RadialGrid:
    return RadialGrid.uniform(1, count, 20.0)


def grid_3d(count: int = 4096) -> RadialGrid:
    return RadialGrid.uniform(3, count, 20.0)


class ScalarProblemTests(SimpleTestCase):
    def test_rejects_critical_exponent(self):
        with self.assertRaises(ValidationError):
            ScalarProblem(dim=3, p=10 / 3)
        ScalarProblem(dim=3, p=10 / 3, allow_critical=True)

    def test_range(self):
        with self.assertRaises(ValidationError):
            ScalarProblem(dim=3, p=6.0)
        with self.assertRaises(ValidationError):
            ScalarProblem(dim=3, p=2.0)
        with self.assertRaises(ValidationError):
            ScalarProblem(dim=3, p=3.0, mu=0.0)
        ScalarProblem(dim=2, p=40.0)

    def test_kappa(self):
        self.assertAlmostEqual(ScalarProblem(dim=3, p=3.0).kappa, 3.0)
        self.assertAlmostEqual(ScalarProblem(dim=3, p=4.0).kappa, -1.0)


class ClosedFormSolitonTests(SimpleTestCase):
    def test_cubic_1d(self):
        gs = solve_unit_ground(ScalarProblem(dim=1, p=4.0), grid_1d())
        self.assertAlmostEqual(gs.shoot_value, sqrt(2.0), delta=1e-6)
        self.assertAlmostEqual(gs.mass_w, 4.0, delta=1e-5)
        self.assertAlmostEqual(gs.grad_w, 4.0 / 3.0, delta=1e-5)
        self.assertAlmostEqual(gs.plevel_w, 16.0 / 3.0, delta=1e-5)
        self.assertAlmostEqual(gs.level_w, -2.0 / 3.0, delta=1e-5)

        exact = sqrt(2.0) / np.cosh(gs.w.grid.nodes)
        self.assertLess(np.max(np.abs(gs.w.values[:-1] - exact[:-1])), 1e-6)

    def test_quadratic_1d(self):
        gs = solve_unit_ground(ScalarProblem(dim=1, p=3.0), grid_1d())
        self.assertAlmostEqual(gs.shoot_value, 1.5, delta=1e-6)
        # |(3/2) sech^2(x/2)|_2^2 = 6
        self.assertAlmostEqual(gs.mass_w, 6.0, delta=1e-5)


class GroundStateTests(SimpleTestCase):
    def setUp(self):
        self.problem = ScalarProblem(dim=3, p=3.0)
        self.gs = solve_unit_ground(self.problem, grid_3d())

    def test_positive_and_decreasing(self):
        values = self.gs.w.values[:-1]
        self.assertTrue(np.all(values > 0.0))
        self.assertTrue(np.all(np.diff(values) < 0.0))

    def test_identities(self):
        self.assertLess(abs(self.gs.pairing_defect), 1e-7)
        self.assertLess(abs(self.gs.pohozaev_defect), 1e-7)

    def test_unique_shoot_value(self):
        lo, hi = _bracket(self.problem)
        a1, _ = _bisect(self.problem, lo, hi)
        a2, _ = _bisect(self.problem, lo, 4.0 * hi)
        self.assertAlmostEqual(a1, a2, delta=1e-8)

    def test_tolerance_stops_bisection(self):
        lo, hi = _bracket(self.problem)
        exact, full = _bisect(self.problem, lo, hi)
        rough, fewer = _bisect(self.problem, lo, hi, 1e-2)
        self.assertLess(fewer, full)
        self.assertLessEqual(exact - rough, 1e-2 * 1e-12 * hi)
        self.assertLessEqual(rough, exact)
        with self.assertRaises(ConfigurationError):
            solve_unit_ground(self.problem, grid_3d(), tol=0.0)

    def test_relaxation_oracle(self):
        oracle = relax_unit_ground(self.problem, grid_3d())
        self.assertAlmostEqual(oracle.mass_w / self.gs.mass_w, 1.0, delta=1e-4)
        self.assertAlmostEqual(oracle.shoot_value / self.gs.shoot_value, 1.0, delta=1e-3)


class RescalingTests(SimpleTestCase):
    def test_identity_mass(self):
        gs = solve_unit_ground(ScalarProblem(dim=3, p=3.0), grid_3d())
        lam, u = rescale_to_mass(gs, gs.mass_w)
        self.assertAlmostEqual(lam, 1.0, delta=1e-14)
        self.assertLess(np.max(np.abs(u.values - gs.w.values)), 1e-12)
        self.assertAlmostEqual(ground_level(gs, gs.mass_w), gs.level_w, delta=1e-14)

    def test_cubic_1d_mass_8(self):
        gs = solve_unit_ground(ScalarProblem(dim=1, p=4.0), grid_1d())
        lam, u = rescale_to_mass(gs, 8.0)
        self.assertAlmostEqual(lam, 4.0, delta=1e-5)
        self.assertAlmostEqual(mass(u), 8.0, delta=1e-5)

    def test_doubled_mass_3d(self):
        gs = solve_unit_ground(ScalarProblem(dim=3, p=3.0), grid_3d())
        lam, u = rescale_to_mass(gs, 2.0 * gs.mass_w)
        self.assertAlmostEqual(lam, 4.0, delta=1e-12)
        self.assertAlmostEqual(mass(u) / (2.0 * gs.mass_w), 1.0, delta=1e-4)

    def test_under_resolved(self):
        gs = solve_unit_ground(ScalarProblem(dim=3, p=4.0), grid_3d())
        with self.assertRaises(ResolutionError):
            rescale_to_mass(gs, 1e-3)

    def test_fiber_stationarity(self):
        for p in (3.0, 4.0):
            gs = solve_unit_ground(ScalarProblem(dim=3, p=p), grid_3d())
            _, grad, plevel = scaled_norms(gs, 1.7)
            derivative = grad - 3 * (p - 2) / (2 * p) * plevel
            self.assertLess(abs(derivative) / grad, 1e-6)


class LevelTests(SimpleTestCase):
    masses = [0.5, 1.0, 2.0, 4.0]

    def test_subcritical_curve(self):
        problem = ScalarProblem(dim=3, p=3.0)
        table = level_curve(problem, grid_3d(), self.masses, jobs=2)
        ms = [row.m for row in table]
        self.assertTrue(all(m < 0 for m in ms))
        self.assertTrue(all(b < a for a, b in zip(ms, ms[1:])))

        slope = (log(abs(ms[-1])) - log(abs(ms[0]))) / (log(self.masses[-1]) - log(self.masses[0]))
        self.assertAlmostEqual(slope, problem.kappa, delta=1e-3)

    def test_supercritical_curve(self):
        table = level_curve(ScalarProblem(dim=3, p=4.0), grid_3d(), self.masses)
        ms = [row.m for row in table]
        self.assertTrue(all(m > 0 for m in ms))
        self.assertTrue(all(b < a for a, b in zip(ms, ms[1:])))

    def test_level_matches_rescaled_norms(self):
        gs = solve_unit_ground(ScalarProblem(dim=1, p=4.0), grid_1d())
        _, grad, plevel = scaled_norms(gs, 8.0)
        self.assertAlmostEqual(ground_level(gs, 8.0), 0.5 * grad - 0.25 * plevel, delta=1e-12)
        self.assertAlmostEqual(lambda_for_mass(gs, 8.0), 4.0, delta=1e-5)

    def test_grid_free_level(self):
        for problem in (ScalarProblem(dim=3, p=3.0), ScalarProblem(dim=3, p=4.0)):
            gs = solve_unit_ground(problem, grid_3d())
            for a in self.masses:
                m = ground_level(gs, a)
                self.assertAlmostEqual(level_of(problem, a), m, delta=1e-12 * abs(m))
                self.assertAlmostEqual(mass_frequency(problem, a), lambda_for_mass(gs, a), delta=1e-12)

    def test_bad_masses(self):
        problem = ScalarProblem(dim=3, p=3.0)
        with self.assertRaises(ConfigurationError):
            level_curve(problem, grid_3d(), [2.0, 1.0])
        with self.assertRaises(ConfigurationError):
            level_curve(problem, grid_3d(), [0.0, 1.0])


class GridConvergenceTests(SimpleTestCase):
    def defects(self, count: int) -> tuple[float, float, float]:
        grid1 = RadialGrid.uniform(1, count, 20.0)
        w = solve_unit_ground(ScalarProblem(dim=1, p=4.0), grid1).w.values
        res = laplacian_values(grid1, w) + w - w ** 3
        # у r_max профиль обрезан до 0
        inner = grid1.nodes <= grid1.r_max - 1.0
        soliton = sqrt(float(grid1.weights[inner] @ res[inner] ** 2))

        grid3 = RadialGrid.uniform(3, count, 20.0)
        gs = solve_unit_ground(ScalarProblem(dim=3, p=3.0), grid3)
        a = 2.0 * gs.mass_w
        _, u = rescale_to_mass(gs, a, grid3)
        _, grad, _ = scaled_norms(gs, a)
        sampled = grad_norm_sq(u)
        pohozaev = sampled - 3.0 * (3.0 - 2.0) / (2.0 * 3.0) * lp_norm_pow(u, 3.0)
        return soliton, abs(sampled / grad - 1.0), abs(pohozaev) / grad

    def test_second_order(self):
        coarse, fine = self.defects(2048), self.defects(4096)
        for name, c, f in zip(("soliton_residual", "grad_norm", "pohozaev"), coarse, fine):
            with self.subTest(quantity=name):
                self.assertGreaterEqual(c / f, 3.0)
