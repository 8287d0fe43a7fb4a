from math import sqrt

import numpy as np
from django.test import SimpleTestCase
from pydantic import ValidationError

from energy.domain import RegimeTag, State, SystemParams
from energy.services import (
    classify_regime,
    coercivity_on_pohozaev,
    coercivity_witness,
    dilate_norms,
    energy_J,
    fiber_energy,
    fiber_pohozaev,
    fiber_profile,
    gn_alpha,
    gn_constant,
    gn_quotient,
    gradient_residual,
    lagrange_multipliers,
    pohozaev_Q,
    pohozaev_rescale,
    residual_report,
    state_norms,
    threshold_c,
    threshold_constants,
    threshold_exponent_q,
)
from flow.services import project_sphere
from ground.domain import ScalarProblem
from ground.services import rescale_to_mass, solve_unit_ground
from radial.domain import RadialField, RadialGrid
from radial.exceptions import ConfigurationError, RegimeError
from radial.services import dilate, grad_norm_sq, integrate, lp_norm_pow

SUBCRITICAL = dict(dim=3, p1=2.5, p2=2.5, r1=1.2, r2=1.2, mu1=1.0, mu2=1.0, beta=1.0, a1=1.0, a2=1.0)
MIXED = dict(dim=3, p1=2.5, p2=4.0, r1=1.5, r2=2.5, mu1=1.0, mu2=1.0, beta=1.0, a1=1.0, a2=1.0)
SUPER = dict(dim=3, p1=4.0, p2=4.0, r1=2.0, r2=2.0, mu1=1.0, mu2=1.0, beta=1.0, a1=1.0, a2=1.0)


def random_field(grid: RadialGrid, rng: np.random.Generator) -> RadialField:
    r = grid.nodes
    values = np.zeros_like(r)
    for _ in range(3):
        values += rng.uniform(0.2, 1.5) * np.exp(-0.5 * (r / rng.uniform(0.6, 2.0)) ** 2)
    return RadialField(grid, values)


def random_state(grid: RadialGrid, rng: np.random.Generator) -> State:
    return State(random_field(grid, rng), random_field(grid, rng))


def bump(grid: RadialGrid, lo: float, hi: float) -> RadialField:
    t = np.clip((grid.nodes - lo) / (hi - lo), 0.0, 1.0)
    return RadialField(grid, (16.0 * t * (1.0 - t)) ** 4)


class SystemParamsTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(ValidationError):
            SystemParams(**{**SUBCRITICAL, "r1": 0.5, "r2": 0.5})
        with self.assertRaises(ValidationError):
            SystemParams(**{**SUBCRITICAL, "p1": 7.0})
        with self.assertRaises(ValidationError):
            SystemParams(**{**SUBCRITICAL, "beta": -1.0})
        # критические показатели допустимы на уровне типа
        SystemParams(**{**SUBCRITICAL, "p1": 10 / 3})

    def test_swap(self):
        params = SystemParams(**MIXED)
        swapped = params.swapped()
        self.assertEqual((swapped.p1, swapped.r1, swapped.a1), (params.p2, params.r2, params.a2))
        self.assertEqual(swapped.swapped(), params)


class RegimeTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(classify_regime(SystemParams(**SUBCRITICAL)).tag, RegimeTag.SUBCRITICAL_MIN)
        self.assertEqual(classify_regime(SystemParams(**MIXED)).tag, RegimeTag.MIXED)
        self.assertEqual(classify_regime(SystemParams(**SUPER)).tag, RegimeTag.SUPERCRITICAL)
        critical = SystemParams(**{**SUBCRITICAL, "p1": 10 / 3})
        self.assertEqual(classify_regime(critical).tag, RegimeTag.CRITICAL_UNSUPPORTED)

    def test_high_dimension(self):
        base = dict(dim=5, p1=2.5, p2=2.5, r1=1.1, r2=1.1)
        regime = classify_regime(SystemParams(**base))
        self.assertEqual(regime.tag, RegimeTag.SUBCRITICAL_MIN_HIGH_DIM)
        self.assertFalse(regime.experimental)
        regime = classify_regime(SystemParams(**{**base, "p1": 2.7}))
        self.assertTrue(regime.experimental)

    def test_unclassified(self):
        swapped = SystemParams(**MIXED).swapped()
        self.assertEqual(classify_regime(swapped).tag, RegimeTag.UNCLASSIFIED)
        weak = SystemParams(**{**MIXED, "r1": 2.0, "r2": 1.5})
        self.assertEqual(classify_regime(weak).tag, RegimeTag.UNCLASSIFIED)

    def test_one_dimension_needs_r2_above_four(self):
        base = dict(dim=1, p1=4.0, p2=8.0, r1=1.5)
        self.assertEqual(classify_regime(SystemParams(**base, r2=3.0)).tag, RegimeTag.UNCLASSIFIED)
        self.assertEqual(classify_regime(SystemParams(**base, r2=4.6)).tag, RegimeTag.MIXED)


class FunctionalTests(SimpleTestCase):
    def setUp(self):
        self.grid = RadialGrid.uniform(3, 4096, 16.0)
        self.rng = np.random.default_rng(7)

    def test_zero_state(self):
        params = SystemParams(**SUBCRITICAL)
        zero = State(RadialField.zeros(self.grid), RadialField.zeros(self.grid))
        self.assertEqual(energy_J(params, zero), 0.0)
        self.assertEqual(pohozaev_Q(params, zero), 0.0)
        r1, r2 = gradient_residual(params, zero, -1.0, -1.0)
        self.assertFalse(np.any(r1.values) or np.any(r2.values))

    def test_decoupled_additivity(self):
        params = SystemParams(**{**SUBCRITICAL, "beta": 0.0})
        state = random_state(self.grid, self.rng)

        def scalar_energy(u, p):
            return 0.5 * grad_norm_sq(u) - lp_norm_pow(u, p) / p

        expected = scalar_energy(state.u1, params.p1) + scalar_energy(state.u2, params.p2)
        self.assertAlmostEqual(energy_J(params, state), expected, delta=1e-12 * abs(expected))

    def test_swap_invariance(self):
        params = SystemParams(**MIXED)
        state = random_state(self.grid, self.rng)
        j, q = energy_J(params, state), pohozaev_Q(params, state)
        self.assertAlmostEqual(energy_J(params.swapped(), state.swapped()), j, delta=1e-12 * abs(j))
        self.assertAlmostEqual(pohozaev_Q(params.swapped(), state.swapped()), q, delta=1e-12 * abs(q))

    def test_beta_lowers_energy(self):
        params = SystemParams(**SUBCRITICAL)
        state = random_state(self.grid, self.rng)
        self.assertLess(energy_J(params.with_beta(10.0), state), energy_J(params, state))


class SolitonPairTests(SimpleTestCase):
    """N=1, p=4: u = √2 sech на массе 4 и u_a на массе 8 с λ_a = 4."""

    def setUp(self):
        self.grid = RadialGrid.uniform(1, 16384, 20.0)
        self.params = SystemParams(dim=1, p1=4.0, p2=4.0, r1=1.2, r2=1.2, beta=0.0, a1=4.0, a2=8.0)
        gs = solve_unit_ground(ScalarProblem(dim=1, p=4.0), self.grid)
        _, self.u1 = rescale_to_mass(gs, 4.0)
        self.lam2, self.u2 = rescale_to_mass(gs, 8.0)

    def test_energy_of_ground_pair(self):
        state = State(self.u1, self.u2)
        # m(4) = -2/3, m(8) = 4^{1.5} m(4) = -16/3
        self.assertAlmostEqual(energy_J(self.params, state), -2.0 / 3.0 - 16.0 / 3.0, delta=5e-5)

    def test_pohozaev_of_single_component(self):
        state = State(self.u1, RadialField.zeros(self.grid))
        self.assertAlmostEqual(pohozaev_Q(self.params, state), 0.0, delta=1e-5)

    def test_multiplier_sign_convention(self):
        state = State(self.u1, self.u2)
        lam1, lam2 = lagrange_multipliers(self.params, state)
        self.assertAlmostEqual(lam1, -1.0, delta=1e-5)
        self.assertAlmostEqual(lam2, -self.lam2, delta=1e-5)

    def test_residual_of_ground_component(self):
        state = State(self.u2, RadialField.zeros(self.grid))
        res1, res2 = gradient_residual(self.params, state, -self.lam2, -1.0)
        self.assertLess(sqrt(integrate(self.grid, res1.values ** 2)), 1e-4)
        self.assertFalse(np.any(res2.values))

    def test_residual_report_is_relative(self):
        state = State(self.u1, self.u2)
        lam1, lam2 = lagrange_multipliers(self.params, state)
        report = residual_report(self.params, state, lam1, lam2)
        self.assertLess(report.relative, 1e-4)
        self.assertGreater(report.scale, 1.0)


class GradientTests(SimpleTestCase):
    def test_directional_derivative(self):
        grid = RadialGrid.uniform(3, 2048, 12.0)
        params = SystemParams(**MIXED)
        # |u|^(r1-2) сингулярно в нуле: на носителе v поля отделены от нуля
        floor = 0.5 * np.cos(0.5 * np.pi * grid.nodes / grid.r_max)
        base = random_state(grid, np.random.default_rng(3))
        state = State(
            RadialField(grid, base.u1.values + floor),
            RadialField(grid, base.u2.values + floor),
        )
        v = bump(grid, 1.0, 8.0).scaled(1.0 / 256.0)
        res1, res2 = gradient_residual(params, state, 0.0, 0.0)
        eps = 1e-4

        for component, res in ((1, res1), (2, res2)):
            def shifted(t):
                if component == 1:
                    return State(RadialField(grid, state.u1.values + t * v.values), state.u2)
                return State(state.u1, RadialField(grid, state.u2.values + t * v.values))

            fd = (energy_J(params, shifted(eps)) - energy_J(params, shifted(-eps))) / (2 * eps)
            exact = integrate(grid, res.values * v.values)
            self.assertAlmostEqual(fd, exact, delta=1e-6 * max(1.0, abs(exact)))

    def test_multipliers_annihilate_paired_residual(self):
        grid = RadialGrid.uniform(3, 2048, 12.0)
        params = SystemParams(**MIXED)
        state = random_state(grid, np.random.default_rng(5))
        self.assertGreater(state.u1.values[0], 0.0)
        lam1, lam2 = lagrange_multipliers(params, state)
        res1, res2 = gradient_residual(params, state, lam1, lam2)
        for res, u in ((res1, state.u1), (res2, state.u2)):
            scale = sqrt(integrate(grid, res.values ** 2) * integrate(grid, u.values ** 2))
            self.assertLess(abs(integrate(grid, res.values * u.values)), 1e-10 * scale)

    def test_multipliers_match_continuum_form(self):
        grid = RadialGrid.uniform(3, 8192, 12.0)
        params = SystemParams(**MIXED)
        state = random_state(grid, np.random.default_rng(5))
        n = state_norms(params, state)
        lam1, lam2 = lagrange_multipliers(params, state)
        continuum = (
            (n.grad1 - n.plevel1 - params.r1 * n.mixed) / n.mass1,
            (n.grad2 - n.plevel2 - params.r2 * n.mixed) / n.mass2,
        )
        for lam, expected in zip((lam1, lam2), continuum):
            self.assertAlmostEqual(lam, expected, delta=1e-6 * max(1.0, abs(lam)))


class FiberTests(SimpleTestCase):
    def setUp(self):
        self.grid = RadialGrid.uniform(3, 65536, 16.0)
        self.rng = np.random.default_rng(11)

    def test_row_at_zero(self):
        params = SystemParams(**MIXED)
        state = random_state(self.grid, self.rng)
        row = fiber_profile(params, state, [0.0])[0]
        self.assertAlmostEqual(row.J, energy_J(params, state), delta=1e-12 * abs(row.J))
        self.assertAlmostEqual(row.Q, pohozaev_Q(params, state), delta=1e-12 * abs(row.Q))

    def test_exact_fiber_derivative(self):
        h = 1e-5
        for kwargs in (SUBCRITICAL, MIXED, SUPER):
            params = SystemParams(**kwargs)
            for _ in range(50):
                n = state_norms(params, random_state(self.grid, self.rng))
                fd = (fiber_energy(params, n, h) - fiber_energy(params, n, -h)) / (2 * h)
                q = fiber_pohozaev(params, n, 0.0)
                self.assertAlmostEqual(fd, q, delta=1e-8 * max(1.0, n.kinetic))

    def test_resampled_fiber_derivative(self):
        params = SystemParams(**MIXED)
        h = 1e-2
        for _ in range(50):
            state = State(
                project_sphere(random_field(self.grid, self.rng), params.a1),
                project_sphere(random_field(self.grid, self.rng), params.a2),
            )

            def j(s):
                return energy_J(params, State(dilate(state.u1, s), dilate(state.u2, s)))

            fd = (-j(2 * h) + 8 * j(h) - 8 * j(-h) + j(-2 * h)) / (12 * h)
            self.assertAlmostEqual(fd, pohozaev_Q(params, state), delta=1e-6)

    def test_supercritical_fiber_falls(self):
        params = SystemParams(**MIXED)
        rows = fiber_profile(params, random_state(self.grid, self.rng), np.linspace(3.0, 6.0, 13))
        energies = [row.J for row in rows]
        self.assertTrue(all(b < a for a, b in zip(energies, energies[1:])))

    def test_subcritical_coercivity(self):
        params = SystemParams(**SUBCRITICAL)
        for _ in range(5):
            n = state_norms(params, random_state(self.grid, self.rng))
            _, rising = coercivity_witness(params, n)
            self.assertTrue(rising)

    def test_pohozaev_rescale(self):
        params = SystemParams(**SUPER)
        n = state_norms(params, random_state(self.grid, self.rng))
        s = pohozaev_rescale(params, n)
        self.assertLess(abs(fiber_pohozaev(params, n, s)), 1e-9 * dilate_norms(params, n, s).kinetic)
        self.assertGreater(fiber_energy(params, n, s), fiber_energy(params, n, s + 0.1))
        self.assertGreater(fiber_energy(params, n, s), fiber_energy(params, n, s - 0.1))

    def test_coercive_on_pohozaev_set(self):
        params = SystemParams(**{**SUPER, "beta": 0.0})
        samples = [state_norms(params, random_state(self.grid, self.rng)) for _ in range(6)]
        pairs, increasing = coercivity_on_pohozaev(params, samples)
        self.assertTrue(increasing)
        # при p1 = p2 = 4, β = 0 на {Q=0}: J = |∇u|^2 / 6
        for kinetic, energy in pairs:
            self.assertAlmostEqual(energy, kinetic / 6.0, delta=1e-9 * kinetic)


class GagliardoNirenbergTests(SimpleTestCase):
    def test_trivial_and_alpha(self):
        self.assertEqual(gn_constant(3, 2.0), 1.0)
        self.assertEqual(gn_alpha(3, 4.0), 0.75)

    def test_sobolev_endpoint(self):
        self.assertAlmostEqual(gn_constant(3, 6.0), 3.0 ** -0.5 * (np.pi / 2) ** (-2.0 / 3.0), delta=1e-12)

    def test_sharpness_by_sampling(self):
        grid = RadialGrid.uniform(3, 4096, 20.0)
        c = gn_constant(3, 4.0, grid)
        rng = np.random.default_rng(5)
        for _ in range(100):
            self.assertLessEqual(gn_quotient(random_field(grid, rng), 4.0), c + 1e-10)

        gs = solve_unit_ground(ScalarProblem(dim=3, p=4.0), grid)
        self.assertAlmostEqual(gn_quotient(gs.w, 4.0) / c, 1.0, delta=1e-4)

    def test_sampled_optimizer_converges_across_grids(self):
        problem = ScalarProblem(dim=3, p=4.0)
        quotients = [
            gn_quotient(solve_unit_ground(problem, RadialGrid.uniform(3, count, 20.0)).w, 4.0)
            for count in (2048, 4096)
        ]
        self.assertAlmostEqual(quotients[0] / quotients[1], 1.0, delta=1e-4)
        for quotient in quotients:
            self.assertAlmostEqual(quotient / gn_constant(3, 4.0), 1.0, delta=1e-4)


class ThresholdTests(SimpleTestCase):
    def setUp(self):
        self.params = SystemParams(**MIXED)
        self.grid = RadialGrid.uniform(3, 4096, 20.0)

    def test_q_and_gamma(self):
        q = threshold_exponent_q(self.params)
        self.assertAlmostEqual(q, 0.5 * (6.0 / 3.5 + 2.4), delta=1e-12)
        self.assertGreater(threshold_constants(self.params)["gamma"], 2.0)

    def test_positive_finite_and_monotone(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            u1 = random_field(self.grid, rng)
            c = threshold_c(self.params, u1)
            self.assertTrue(np.isfinite(c) and c > 0.0)
            self.assertLessEqual(threshold_c(self.params, u1.scaled(1.5)), c)

    def test_empty_interval(self):
        params = SystemParams(dim=3, p1=2.5, p2=4.0, r1=3.5, r2=0.5)
        with self.assertRaises(RegimeError):
            threshold_exponent_q(params)

    def test_wrong_regime(self):
        with self.assertRaises(ConfigurationError):
            threshold_c(SystemParams(**SUBCRITICAL), RadialField.zeros(self.grid))
