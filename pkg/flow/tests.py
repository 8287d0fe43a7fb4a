import numpy as np
from django.test import SimpleTestCase
from pydantic import ValidationError

from energy.domain import State, SystemParams
from energy.services import energy_J, gradient_residual, lagrange_multipliers, residual_report
from flow.domain import FlowOptions
from flow.services import (
    decoupled_level,
    descend,
    gaussian_pair,
    global_min_estimate,
    ground_pair,
    initial_state,
    perturbed_pair,
    pohozaev_bound,
    project_sphere,
    relax_first,
    symmetric_pair,
)
from radial.domain import RadialField, RadialGrid
from radial.exceptions import ConfigurationError, NumericError
from radial.services import mass, weighted_norm

SUBCRITICAL = SystemParams(dim=3, p1=2.5, p2=2.5, r1=1.2, r2=1.2, beta=1.0, a1=1.0, a2=1.0)


def grid_3d() -> RadialGrid:
    return RadialGrid.uniform(3, 4096, 40.0)


class ProjectionTests(SimpleTestCase):
    def setUp(self):
        self.grid = RadialGrid.uniform(3, 512, 10.0)
        self.u = RadialField.from_function(self.grid, lambda r: np.exp(-r * r))

    def test_mass_is_exact(self):
        for a in (0.1, 1.0, 37.0):
            self.assertAlmostEqual(mass(project_sphere(self.u, a)) / a, 1.0, delta=1e-14)

    def test_idempotent(self):
        once = project_sphere(self.u, 2.0)
        twice = project_sphere(once, 2.0)
        np.testing.assert_allclose(twice.values, once.values, rtol=1e-15, atol=0.0)

    def test_zero_field(self):
        with self.assertRaises(NumericError):
            project_sphere(RadialField.zeros(self.grid), 1.0)
        with self.assertRaises(ConfigurationError):
            project_sphere(self.u, -1.0)


class OptionsTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(ValidationError):
            FlowOptions(dt=0.0)
        with self.assertRaises(ValidationError):
            FlowOptions(tol=-1.0)
        with self.assertRaises(ValidationError):
            FlowOptions(backtrack=1.5)


class InitializerTests(SimpleTestCase):
    def test_masses_and_positivity(self):
        grid = grid_3d()
        rng = np.random.default_rng(1)
        for factory in (ground_pair, gaussian_pair, perturbed_pair):
            state = factory(SUBCRITICAL, grid, rng)
            self.assertAlmostEqual(mass(state.u1), 1.0, delta=1e-3)
            self.assertTrue(np.all(state.u2.values >= 0.0))

    def test_unknown_name(self):
        with self.assertRaises(ConfigurationError):
            initial_state("random_walk", SUBCRITICAL, grid_3d())

    def test_symmetric_pair_solves_system(self):
        params = SystemParams(dim=3, p1=4.0, p2=4.0, r1=2.0, r2=2.0, beta=2.0)
        # невязка сэмплированного профиля набирается у начала координат и убывает как h^1.5
        grid = RadialGrid.uniform(3, 32768, 10.0)
        state = symmetric_pair(params, grid)
        lam, lam2 = lagrange_multipliers(params, state)
        self.assertAlmostEqual(lam, lam2, delta=1e-14)
        self.assertLess(residual_report(params, state, lam, lam).relative, 1e-4)
        with self.assertRaises(ConfigurationError):
            symmetric_pair(SUBCRITICAL, grid)


class DescendTests(SimpleTestCase):
    def setUp(self):
        self.grid = grid_3d()

    def test_decoupled_limit(self):
        params = SUBCRITICAL.with_beta(0.0)
        solution = descend(params, gaussian_pair(params, self.grid))
        self.assertTrue(solution.converged, solution.message)
        self.assertAlmostEqual(solution.J_value, decoupled_level(params), delta=1e-5)
        self.assertAlmostEqual(mass(solution.state.u1), 1.0, delta=1e-10)
        self.assertAlmostEqual(mass(solution.state.u2), 1.0, delta=1e-10)

    def test_coupled_minimizer(self):
        solution = descend(SUBCRITICAL, ground_pair(SUBCRITICAL, self.grid))
        self.assertTrue(solution.converged, solution.message)
        self.assertLess(solution.residual_norm, 1e-6)
        self.assertLess(solution.lambda1, 0.0)
        self.assertLess(solution.lambda2, 0.0)
        self.assertLessEqual(abs(solution.Q_value), 1e-4)
        self.assertLessEqual(solution.J_value, decoupled_level(SUBCRITICAL) + 1e-6)

        inner = self.grid.nodes < 0.5 * self.grid.r_max
        self.assertTrue(np.all(solution.state.u1.values[inner] > 0.0))
        self.assertTrue(np.all(solution.state.u2.values[inner] > 0.0))
        self.assertTrue(np.all(solution.state.u1.values >= 0.0))

        energies = np.asarray(solution.energies)
        self.assertTrue(np.all(np.diff(energies) <= 1e-12 * np.maximum(1.0, np.abs(energies[:-1]))))

        report = residual_report(SUBCRITICAL, solution.state, solution.lambda1, solution.lambda2)
        self.assertLessEqual(report.relative, 1e-5)

        again = descend(SUBCRITICAL, solution.state)
        self.assertLessEqual(again.iterations, 1)

    def test_pohozaev_tolerance_is_absolute(self):
        self.assertAlmostEqual(pohozaev_bound(1e-6), 1e-4, delta=1e-18)
        self.assertAlmostEqual(pohozaev_bound(1e-8), 1e-6, delta=1e-20)

    def test_unconverged_is_flagged(self):
        solution = descend(SUBCRITICAL, gaussian_pair(SUBCRITICAL, self.grid), FlowOptions(max_iters=2))
        self.assertFalse(solution.converged)
        self.assertLessEqual(solution.iterations, 2)
        self.assertIn("max_iters", solution.message)

    def test_regime_mismatch(self):
        mixed = SystemParams(dim=3, p1=2.5, p2=4.0, r1=1.5, r2=2.5, beta=1.0)
        state = State(RadialField.zeros(self.grid), RadialField.zeros(self.grid))
        with self.assertRaises(ConfigurationError):
            descend(mixed, state)


class RelaxFirstTests(SimpleTestCase):
    def first_residual(self, state: State) -> float:
        lam1, lam2 = lagrange_multipliers(SUBCRITICAL, state)
        res1, _ = gradient_residual(SUBCRITICAL, state, lam1, lam2)
        return weighted_norm(state.grid, res1.values)

    def test_second_component_frozen(self):
        start = ground_pair(SUBCRITICAL, grid_3d())
        relaxed = relax_first(SUBCRITICAL, start)
        np.testing.assert_array_equal(relaxed.u2.values, start.u2.values)
        self.assertAlmostEqual(mass(relaxed.u1), SUBCRITICAL.a1, delta=1e-10)
        self.assertTrue(np.all(relaxed.u1.values >= 0.0))
        self.assertLess(energy_J(SUBCRITICAL, relaxed), energy_J(SUBCRITICAL, start))
        self.assertLess(self.first_residual(relaxed), 0.1 * self.first_residual(start))


class GlobalMinimumTests(SimpleTestCase):
    def setUp(self):
        self.grid = grid_3d()

    def test_starts_agree(self):
        result = global_min_estimate(SUBCRITICAL, self.grid, FlowOptions(restarts=2, jobs=2))
        self.assertTrue(result.converged)
        self.assertEqual(len(result.runs), 4)
        self.assertLess(result.energy_spread, 1e-5)
        competitor = energy_J(SUBCRITICAL, ground_pair(SUBCRITICAL, self.grid))
        self.assertLessEqual(result.best.J_value, competitor)

    def test_coupling_lowers_minimum(self):
        opts = FlowOptions(initializers=("ground_pair",))
        weak = global_min_estimate(SUBCRITICAL.with_beta(0.0), self.grid, opts)
        strong = global_min_estimate(SUBCRITICAL.with_beta(10.0), self.grid, opts)
        self.assertTrue(weak.converged and strong.converged)
        self.assertLess(strong.best.J_value, weak.best.J_value)

    def test_deterministic_under_seed(self):
        opts = FlowOptions(initializers=("perturbed",), restarts=1, seed=42, max_iters=5)
        first = global_min_estimate(SUBCRITICAL, self.grid, opts)
        second = global_min_estimate(SUBCRITICAL, self.grid, opts)
        np.testing.assert_array_equal(first.best.state.u1.values, second.best.state.u1.values)
