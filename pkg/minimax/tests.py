import unittest
from dataclasses import replace
from math import pi

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase
from pydantic import ValidationError

from energy.domain import State, SystemParams
from energy.services import energy_J
from flow.services import auto_grid, decoupled_level, descend, ground_pair
from minimax.domain import ExactComponent, MinimaxOptions, NewtonOptions, SweepRow
from minimax.services import (
    PATH_SIGMA_STEP,
    _excess,
    beta_sweep,
    build_path,
    continue_in_beta,
    critical_mass_scan,
    gamma_estimate,
    gaussian_component,
    ground_component,
    level_threshold_a1,
    newton_refine,
    overlap,
    path_max,
    sample_inf_B,
    superlinear_tail,
    sweep_jumps,
)
from radial.domain import RadialField, RadialGrid
from radial.exceptions import ConfigurationError, GeometryError, ResolutionError
from radial.profiles import GaussianProfile
from radial.services import grad_norm_sq, lp_norm_pow, mass

SLOW = settings.NLSNORM_SLOW

SUBCRITICAL = SystemParams(dim=3, p1=2.5, p2=2.5, r1=1.2, r2=1.2, beta=1.0, a1=1.0, a2=1.0)
MIXED = SystemParams(dim=3, p1=2.5, p2=4.0, r1=1.5, r2=2.5, beta=1.0, a1=1.0, a2=1.0)
SUPER = SystemParams(dim=3, p1=4.0, p2=4.0, r1=2.0, r2=2.0, beta=1.0, a1=1.0, a2=1.0)


def mixed_point(a2: float = 1.0) -> SystemParams:
    """Mixed-пример с a1 = 2 ā1, так что m1(a1) + m2(a2) < 0."""
    params = MIXED.with_masses(a2=a2)
    return params.with_masses(a1=2.0 * level_threshold_a1(params))


def gaussian(width: float, p: float, a: float = 1.0) -> ExactComponent:
    profile = GaussianProfile(3, width=width).with_mass(a)
    return ExactComponent(profile, p, a, profile.grad_norm_sq, profile.lp_norm_pow(p), width)


class OptionsTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(ValidationError):
            MinimaxOptions(path_nodes=2)
        with self.assertRaises(ValidationError):
            MinimaxOptions(s_growth=1.0)
        with self.assertRaises(ValidationError):
            NewtonOptions(damping_floor=2.0)
        self.assertEqual(MinimaxOptions(newton={"tol": 1e-8}).newton.tol, 1e-8)


class ExactComponentTests(SimpleTestCase):
    def test_dilation_laws(self):
        component = gaussian_component(MIXED, 2, 0.4)
        self.assertAlmostEqual(component.profile.mass, 1.0, delta=1e-14)
        for s in (-0.8, 0.3, 1.1):
            dilated = component.dilated(s)
            self.assertAlmostEqual(dilated.grad / dilated.profile.grad_norm_sq, 1.0, delta=1e-12)
            self.assertAlmostEqual(dilated.plevel / dilated.profile.lp_norm_pow(4.0), 1.0, delta=1e-12)
            self.assertAlmostEqual(dilated.width, 0.4 * np.exp(-s), delta=1e-15)
        self.assertIs(component.dilated(0.0), component)

    def test_ground_component_norms(self):
        grid = RadialGrid.uniform(3, 8192, 2.0)
        component = ground_component(SUPER, 2, grid)
        u = component.sample(grid)
        self.assertAlmostEqual(mass(u), 1.0, delta=1e-4)
        self.assertAlmostEqual(grad_norm_sq(u) / component.grad, 1.0, delta=1e-3)
        self.assertAlmostEqual(lp_norm_pow(u, 4.0) / component.plevel, 1.0, delta=1e-3)


    def test_gaussian_closed_form(self):
        f, g = gaussian(0.3, 2.5, 2.0), gaussian(1.0, 4.0, 0.5)
        r1, r2 = 1.5, 2.5
        expected = (
            f.profile.amplitude ** r1
            * g.profile.amplitude ** r2
            * (2.0 * pi / (r1 / 0.3 ** 2 + r2 / 1.0 ** 2)) ** 1.5
        )
        self.assertAlmostEqual(overlap(f, g, r1, r2) / expected, 1.0, delta=1e-10)
        self.assertAlmostEqual(overlap(g, f, r2, r1) / expected, 1.0, delta=1e-10)

    def test_narrow_profile_without_solve_grid(self):
        f, g = gaussian(0.5, 2.5, 2.0), gaussian(1e-12, 4.0, 0.5)
        r1, r2 = 1.5, 2.5
        expected = (
            f.profile.amplitude ** r1
            * g.profile.amplitude ** r2
            * (2.0 * pi / (r1 / 0.5 ** 2 + r2 / 1e-24)) ** 1.5
        )
        self.assertAlmostEqual(overlap(f, g, r1, r2) / expected, 1.0, delta=1e-8)

    def test_excess_without_coupling(self):
        params = MIXED.with_beta(0.0)
        low, v = gaussian(0.5, 2.5), gaussian(0.2, 4.0)
        self.assertEqual(_excess(params, low, v), v.level(1.0))
        self.assertLess(_excess(MIXED, low, v), v.level(1.0))


class MountainPassTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = mixed_point()
        cls.grid = auto_grid(cls.params, min_nodes=1 << 19)
        cls.opts = MinimaxOptions()
        cls.low = ground_component(cls.params, 1, cls.grid)
        cls.bar = ground_component(cls.params, 2, cls.grid)
        cls.samples = sample_inf_B(cls.params, cls.grid, cls.opts, low=cls.low, bar=cls.bar)
        cls.path = build_path(cls.params, cls.grid, cls.opts, samples=cls.samples, low=cls.low, bar=cls.bar)
        cls.level = decoupled_level(cls.params)

    def test_threshold_certifies_negative_level(self):
        self.assertLess(self.level, 0.0)
        at_threshold = self.params.with_masses(a1=level_threshold_a1(self.params))
        self.assertAlmostEqual(decoupled_level(at_threshold), 0.0, delta=1e-9 * abs(self.level))

    def test_path_midpoint_is_decoupled_pair(self):
        mid = self.path.state(0.5)
        np.testing.assert_array_equal(mid.u1.values, self.low.sample(self.grid).values)
        np.testing.assert_array_equal(mid.u2.values, self.bar.sample(self.grid).values)
        k = len(self.path.t_values) // 2
        self.assertEqual(self.path.t_values[k], 0.5)
        self.assertLess(self.path.energies[k], self.level)

    def test_endpoints(self):
        start, end = self.path.component(0.0), self.path.component(1.0)
        self.assertLessEqual(start.grad, self.path.c_low)
        self.assertGreater(end.grad, 2.0 * self.path.c_low)
        self.assertLess(self.path.excess[0], self.path.inf_b_excess)
        self.assertLess(self.path.excess[-1], self.path.inf_b_excess)
        self.assertLess(self.path.energies[-1], 0.0)
        self.assertGreater(self.path.inf_b_excess, 0.0)

    def test_path_max_bounds(self):
        peak = path_max(self.params, self.path)
        self.assertLess(peak.J_max, 0.0)
        self.assertLessEqual(peak.J_max, self.level)
        self.assertGreaterEqual(peak.excess_max, self.path.inf_b_excess)
        self.assertGreaterEqual(peak.excess_max, float(np.max(self.path.excess)))
        self.assertTrue(0.0 < peak.t_star < 1.0)

    def test_path_sampled_finely_in_sigma(self):
        t = self.path.t_values
        self.assertEqual(len(t) % 2, 1)
        self.assertGreaterEqual(len(t), self.opts.path_nodes)
        steps = np.diff([self.path.sigma(float(x)) for x in t])
        self.assertLessEqual(float(np.max(steps)), PATH_SIGMA_STEP + 1e-12)

    def test_unresolved_path_maximum(self):
        coarse = replace(self.path, grid=RadialGrid.uniform(3, 32, self.grid.r_max))
        with self.assertRaises(ResolutionError):
            path_max(self.params, coarse)

    def test_short_path_is_rejected(self):
        with self.assertRaises(GeometryError):
            build_path(self.params, self.grid, MinimaxOptions(s_max=2.0), samples=self.samples, low=self.low, bar=self.bar)

    def test_gamma_bracket(self):
        estimate = gamma_estimate(self.params, self.grid, self.opts)
        solution = estimate.solution
        self.assertTrue(solution.converged, solution.message)
        self.assertTrue(estimate.bracket_ok)
        self.assertLess(solution.lambda1, 0.0)
        self.assertLess(solution.lambda2, 0.0)
        self.assertLessEqual(abs(solution.Q_value), 1e-4)
        self.assertLessEqual(estimate.gamma_upper, self.level + estimate.slack)
        self.assertAlmostEqual(estimate.slack, 1e-3 * abs(self.level), delta=1e-15 * abs(self.level))

    def test_decoupled_control(self):
        params = self.params.with_beta(0.0)
        estimate = gamma_estimate(params, self.grid, self.opts)
        self.assertTrue(estimate.solution.converged, estimate.solution.message)
        self.assertLessEqual(estimate.solution.residual_norm, 1e-6)
        self.assertLessEqual(abs(estimate.solution.Q_value), 1e-4)
        self.assertAlmostEqual(estimate.solution.J_value, self.level, delta=1e-4 * abs(self.level))


class GeometryErrorTests(SimpleTestCase):
    def test_nonnegative_level(self):
        grid = RadialGrid.uniform(3, 4096, 20.0)
        with self.assertRaises(GeometryError):
            gamma_estimate(MIXED, grid)

    def test_wrong_regime(self):
        grid = RadialGrid.uniform(3, 4096, 20.0)
        with self.assertRaises(ConfigurationError):
            build_path(SUPER, grid)
        with self.assertRaises(ConfigurationError):
            beta_sweep(SUBCRITICAL, [0.0], grid)

    def test_threshold_needs_mixed_exponents(self):
        with self.assertRaises(ConfigurationError):
            level_threshold_a1(SUPER)


class NewtonTests(SimpleTestCase):
    def test_decoupled_pair_is_a_root(self):
        params = SUBCRITICAL.with_beta(0.0)
        grid = RadialGrid.uniform(3, 4096, 40.0)
        solution = newton_refine(params, ground_pair(params, grid))
        self.assertTrue(solution.converged, solution.message)
        self.assertLessEqual(solution.iterations, 3)
        self.assertAlmostEqual(solution.J_value, decoupled_level(params), delta=1e-5)
        self.assertAlmostEqual(mass(solution.state.u1), 1.0, delta=1e-10)
        self.assertAlmostEqual(mass(solution.state.u2), 1.0, delta=1e-10)

    def test_agrees_with_gradient_flow(self):
        grid = RadialGrid.uniform(3, 4096, 40.0)
        minimizer = descend(SUBCRITICAL, ground_pair(SUBCRITICAL, grid))
        solution = newton_refine(SUBCRITICAL, minimizer.state)
        self.assertTrue(solution.converged, solution.message)
        self.assertAlmostEqual(solution.J_value, minimizer.J_value, delta=1e-8)
        self.assertLessEqual(solution.iterations, 3)

    def test_critical_exponent_is_refused(self):
        params = SystemParams(dim=3, p1=10 / 3, p2=10 / 3, r1=1.5, r2=1.5)
        grid = RadialGrid.uniform(3, 512, 10.0)
        state = State(RadialField.zeros(grid), RadialField.zeros(grid))
        with self.assertRaises(ConfigurationError):
            newton_refine(params, state)

    def test_supercritical_samples(self):
        cases = (
            (0.05, RadialGrid.uniform(3, 262144, 2.0)),
            (50.0, RadialGrid.uniform(3, 4096, 100.0)),
        )
        for beta, grid in cases:
            with self.subTest(beta=beta):
                params = SUPER.with_beta(beta)
                rows = beta_sweep(params, [beta], grid)
                self.assertTrue(rows[0].converged, rows[0].message)
                self.assertLess(rows[0].lambda1, 0.0)
                self.assertLess(rows[0].lambda2, 0.0)

    def test_supercritical_positive_solution(self):
        grid = RadialGrid.uniform(3, 4096, 100.0)
        solutions = []
        beta_sweep(SUPER.with_beta(50.0), [50.0], grid, solutions=solutions)
        solution = solutions[0]
        self.assertTrue(solution.converged, solution.message)
        inner = grid.nodes < 0.5 * grid.r_max
        self.assertTrue(np.all(solution.state.u1.values[inner] > 0.0))
        self.assertTrue(np.all(solution.state.u2.values[inner] > 0.0))
        self.assertLessEqual(abs(solution.Q_value), 1e-4)
        self.assertIn("superlinear_tail", solution.diagnostics)

    def test_supercritical_decoupled_control(self):
        params = SUPER.with_beta(0.0)
        grid = RadialGrid.uniform(3, 262144, 2.0)
        rows = beta_sweep(params, [0.0], grid)
        level = decoupled_level(params)
        self.assertTrue(rows[0].converged, rows[0].message)
        self.assertAlmostEqual(rows[0].J, level, delta=1e-4 * abs(level))


class SuperlinearTailTests(SimpleTestCase):
    def test_ratios(self):
        self.assertTrue(superlinear_tail([1.0, 1e-2, 1e-6]))
        self.assertFalse(superlinear_tail([1.0, 0.5, 0.4]))
        self.assertTrue(superlinear_tail([1.0]))


class ContinuationTests(SimpleTestCase):
    def test_continue_to_coupled_minimizer(self):
        grid = RadialGrid.uniform(3, 4096, 40.0)
        decoupled = SUBCRITICAL.with_beta(0.0)
        start = newton_refine(decoupled, ground_pair(decoupled, grid))
        branch = continue_in_beta(decoupled, start, 1.0, MinimaxOptions(beta_step=0.5))
        self.assertTrue(branch.reached, branch.message)
        self.assertEqual(branch.betas[-1], 1.0)
        self.assertTrue(all(b < c for b, c in zip(branch.betas, branch.betas[1:])))
        self.assertTrue(all(s.converged for s in branch.branch))

        minimizer = descend(SUBCRITICAL, ground_pair(SUBCRITICAL, grid))
        self.assertAlmostEqual(branch.last.J_value, minimizer.J_value, delta=1e-6)
        self.assertLess(branch.last.J_value, energy_J(SUBCRITICAL, ground_pair(SUBCRITICAL, grid)))

    def test_sweep_is_continuous(self):
        grid = RadialGrid.uniform(3, 262144, 2.0)
        betas = [0.0, 0.05, 0.1, 0.15]
        rows = beta_sweep(SUPER.with_beta(0.0), betas, grid)
        self.assertEqual([row.beta for row in rows], betas)
        self.assertTrue(all(row.converged for row in rows), [row.message for row in rows])
        self.assertEqual(sweep_jumps(rows), [])
        js = [row.J for row in rows]
        self.assertTrue(all(b < a for a, b in zip(js, js[1:])))


class SweepJumpTests(SimpleTestCase):
    def test_detects_branch_switch(self):
        rows = [SweepRow(beta=float(b), converged=True, J=j, lambda1=-1.0, lambda2=-1.0, Q=0.0)
                for b, j in enumerate([0.0, 1.0, 2.0, 30.0, 31.0])]
        self.assertEqual(sweep_jumps(rows), [(2.0, 3.0)])

    def test_ignores_failed_rows(self):
        rows = [
            SweepRow(0.0, True, 0.0, -1.0, -1.0, 0.0),
            SweepRow(1.0, False, 500.0, -1.0, -1.0, 0.0),
            SweepRow(2.0, True, 1.0, -1.0, -1.0, 0.0),
            SweepRow(3.0, True, 2.0, -1.0, -1.0, 0.0),
        ]
        self.assertEqual(sweep_jumps(rows), [])


class MassThresholdTests(SimpleTestCase):
    def test_threshold_shrinks_with_a2(self):
        thresholds = [level_threshold_a1(MIXED.with_masses(a2=a2)) for a2 in (1.0, 4.0, 16.0)]
        self.assertTrue(all(b < a for a, b in zip(thresholds, thresholds[1:])))

    @unittest.skipUnless(SLOW, "set NLSNORM_SLOW=1 for the full mass scan")
    def test_scan_trend(self):
        rows = critical_mass_scan(
            MIXED,
            [2.0 ** k for k in range(4, 11)],
            [1.0, 4.0, 16.0],
            MinimaxOptions(jobs=3),
            grid_for=lambda params: auto_grid(params, min_nodes=16384),
        )
        found = [row.a1_min for row in rows]
        self.assertTrue(all(a is not None for a in found), rows)
        self.assertTrue(all(b <= a for a, b in zip(found, found[1:])))
        for row in rows:
            self.assertGreater(row.a1_min, row.a1_threshold)
