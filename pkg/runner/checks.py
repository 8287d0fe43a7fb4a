"""
Набор проверок инвариантов. quick: тождества дилатаций, квадратуры и слоя;
full: ещё скалярные оракулы, производная по слою через пересэмплинг,
острота GN и решение примера с минимумом.

Каждая проверка возвращает CheckResult с измеренной величиной и допуском.
perturb={"name": factor} умножает одну из измеренных норм на factor
(проверка самого набора: соответствующая проверка должна упасть).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import exp, sqrt
from typing import Callable

import numpy as np

from energy.domain import State, SystemParams
from energy.services import (
    energy_J,
    fiber_energy,
    fiber_pohozaev,
    gn_constant,
    gn_quotient,
    pohozaev_Q,
    state_norms,
)
from flow.services import decoupled_level, descend, ground_pair, project_sphere
from ground.domain import ScalarProblem
from ground.services import level_curve, relax_unit_ground, solve_unit_ground
from radial.domain import RadialField, RadialGrid
from radial.services import apply_laplacian, dilate, grad_norm_sq, integrate, lp_norm_pow, mass

logger = logging.getLogger(__name__)

QUICK = "quick"
FULL = "full"

MIXED_EXAMPLE = SystemParams(dim=3, p1=2.5, p2=4.0, r1=1.5, r2=2.5, beta=1.0)
MINIMUM_EXAMPLE = SystemParams(dim=3, p1=2.5, p2=2.5, r1=1.2, r2=1.2, beta=1.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""


@dataclass
class CheckContext:
    rng: np.random.Generator
    perturb: dict[str, float] = field(default_factory=dict)

    def norm(self, name: str, value: float) -> float:
        return value * self.perturb.get(name, 1.0)


def _result(name: str, value: float, tol: float, detail: str = "") -> CheckResult:
    return CheckResult(name, float(value), tol, bool(np.isfinite(value) and value <= tol), detail)


def _random_field(
    grid: RadialGrid,
    rng: np.random.Generator,
    narrowest: float = 0.6,
    widest: float = 2.0,
) -> RadialField:
    r = grid.nodes
    values = np.zeros_like(r)
    for _ in range(3):
        values += rng.uniform(0.2, 1.5) * np.exp(-0.5 * (r / rng.uniform(narrowest, widest)) ** 2)
    return RadialField(grid, values)


# -------------------------
# Quick
# -------------------------
def check_dilation_laws(ctx: CheckContext) -> list[CheckResult]:
    grid = RadialGrid.uniform(3, 65536, 16.0)
    p = 3.5
    worst = {"dilation_mass": 0.0, "dilation_grad": 0.0, "dilation_lp": 0.0}
    for _ in range(5):
        # при s = -1 поле остаётся внутри r_max
        u = _random_field(grid, ctx.rng, narrowest=0.9, widest=1.1)
        base = (mass(u), grad_norm_sq(u), lp_norm_pow(u, p))
        for s in ctx.rng.uniform(-1.0, 1.0, 4):
            du = dilate(u, float(s))
            laws = {
                "dilation_mass": (mass(du), base[0]),
                "dilation_grad": (grad_norm_sq(du), exp(2.0 * s) * base[1]),
                "dilation_lp": (lp_norm_pow(du, p), exp(0.5 * s * 3 * (p - 2.0)) * base[2]),
            }
            for name, (measured, expected) in laws.items():
                worst[name] = max(worst[name], abs(ctx.norm(name, measured) / expected - 1.0))
    return [_result(name, value, 1e-6, "max relative deviation over 20 dilations") for name, value in worst.items()]


def check_green_identity(ctx: CheckContext) -> list[CheckResult]:
    grid = RadialGrid.uniform(3, 4096, 16.0)
    u, v = _random_field(grid, ctx.rng), _random_field(grid, ctx.rng)
    # поля обрезаются к r_max гладко
    cutoff = np.cos(0.5 * np.pi * grid.nodes / grid.r_max) ** 2
    u, v = RadialField(grid, u.values * cutoff), RadialField(grid, v.values * cutoff)
    left = integrate(grid, apply_laplacian(u).values * v.values)
    right = integrate(grid, u.values * apply_laplacian(v).values)
    pairing = integrate(grid, u.values * apply_laplacian(u).values)
    return [
        _result("laplacian_symmetry", abs(left - right) / max(abs(left), 1.0), 1e-8),
        _result("green_identity", abs(pairing / ctx.norm("green_identity", grad_norm_sq(u)) - 1.0), 1e-6),
    ]


def check_fiber_identity(ctx: CheckContext) -> list[CheckResult]:
    grid = RadialGrid.uniform(3, 4096, 16.0)
    params = MIXED_EXAMPLE
    h = 1e-5
    worst = 0.0
    for _ in range(50):
        n = state_norms(params, State(_random_field(grid, ctx.rng), _random_field(grid, ctx.rng)))
        fd = (fiber_energy(params, n, h) - fiber_energy(params, n, -h)) / (2.0 * h)
        q = ctx.norm("fiber_identity", fiber_pohozaev(params, n, 0.0))
        worst = max(worst, abs(fd - q) / max(1.0, n.kinetic))
    row_state = State(_random_field(grid, ctx.rng), _random_field(grid, ctx.rng))
    n = state_norms(params, row_state)
    at_zero = abs(fiber_pohozaev(params, n, 0.0) - pohozaev_Q(params, row_state)) / max(1.0, n.kinetic)
    return [
        _result("fiber_identity", worst, 1e-8, "central difference of exact fibers vs Q"),
        _result("fiber_at_zero", at_zero, 1e-12),
    ]


def check_projection(ctx: CheckContext) -> list[CheckResult]:
    grid = RadialGrid.uniform(3, 2048, 12.0)
    worst = 0.0
    for a in (0.5, 1.0, 7.0):
        u = project_sphere(_random_field(grid, ctx.rng), a)
        worst = max(worst, abs(ctx.norm("projection_mass", mass(u)) / a - 1.0))
    return [_result("projection_mass", worst, 1e-13)]


# -------------------------
# Full
# -------------------------
def check_scalar_oracles(ctx: CheckContext) -> list[CheckResult]:
    grid = RadialGrid.uniform(1, 4096, 20.0)
    quartic = solve_unit_ground(ScalarProblem(dim=1, p=4.0), grid)
    cubic = solve_unit_ground(ScalarProblem(dim=1, p=3.0), grid)
    problem = ScalarProblem(dim=3, p=3.0)
    grid3 = RadialGrid.uniform(3, 4096, 20.0)
    gs = solve_unit_ground(problem, grid3)
    oracle = relax_unit_ground(problem, grid3)
    return [
        _result("sech_quartic_peak", abs(quartic.shoot_value - sqrt(2.0)), 1e-6),
        _result("sech_quartic_mass", abs(ctx.norm("sech_quartic_mass", quartic.mass_w) - 4.0), 1e-5),
        _result("sech_cubic_peak", abs(cubic.shoot_value - 1.5), 1e-6),
        _result("sech_cubic_mass", abs(cubic.mass_w - 6.0), 1e-5),
        _result("relaxation_oracle", abs(oracle.mass_w / gs.mass_w - 1.0), 1e-4),
    ]


def check_level_slope(ctx: CheckContext) -> list[CheckResult]:
    problem = ScalarProblem(dim=3, p=3.0)
    masses = [0.5, 1.0, 2.0, 4.0]
    table = level_curve(problem, RadialGrid.uniform(3, 4096, 20.0), masses)
    ms = [abs(ctx.norm("level_slope", row.m)) for row in table]
    slope = (np.log(ms[-1]) - np.log(ms[0])) / (np.log(masses[-1]) - np.log(masses[0]))
    return [_result("level_slope", abs(slope - problem.kappa), 1e-3)]


def check_resampled_fiber(ctx: CheckContext) -> list[CheckResult]:
    grid = RadialGrid.uniform(3, 65536, 16.0)
    params = MIXED_EXAMPLE
    h = 1e-2
    worst = 0.0
    for _ in range(50):
        state = State(
            project_sphere(_random_field(grid, ctx.rng), params.a1),
            project_sphere(_random_field(grid, ctx.rng), params.a2),
        )

        def j(s: float) -> float:
            return energy_J(params, State(dilate(state.u1, s), dilate(state.u2, s)))

        fd = (-j(2 * h) + 8 * j(h) - 8 * j(-h) + j(-2 * h)) / (12 * h)
        worst = max(worst, abs(fd - ctx.norm("resampled_fiber", pohozaev_Q(params, state))))
    return [_result("resampled_fiber", worst, 1e-6, "fourth-order difference over 50 states on S(a1)xS(a2)")]


def check_gn_sharpness(ctx: CheckContext) -> list[CheckResult]:
    grid = RadialGrid.uniform(3, 4096, 16.0)
    constant = gn_constant(3, 4.0)
    excess = max(gn_quotient(_random_field(grid, ctx.rng), 4.0) - constant for _ in range(100))
    return [_result("gn_sharpness", max(excess, 0.0), 1e-10)]


def check_minimum_example(ctx: CheckContext) -> list[CheckResult]:
    params = MINIMUM_EXAMPLE
    grid = RadialGrid.uniform(3, 4096, 40.0)
    solution = descend(params, ground_pair(params, grid))
    gap = solution.J_value - decoupled_level(params)
    return [
        _result("minimum_residual", solution.residual_norm, 1e-6, solution.message),
        _result("minimum_multipliers", max(solution.lambda1, solution.lambda2), 0.0),
        _result("minimum_below_decoupled", gap, 1e-6),
    ]


QUICK_CHECKS: tuple[Callable[[CheckContext], list[CheckResult]], ...] = (
    check_dilation_laws,
    check_green_identity,
    check_fiber_identity,
    check_projection,
)
FULL_CHECKS = QUICK_CHECKS + (
    check_scalar_oracles,
    check_level_slope,
    check_resampled_fiber,
    check_gn_sharpness,
    check_minimum_example,
)


def run_checks(level: str = QUICK, *, seed: int = 0, perturb: dict[str, float] | None = None) -> dict:
    """Отчёт {level, seed, passed, checks: [...]}; падение проверки: запись, не исключение."""
    checks = FULL_CHECKS if level == FULL else QUICK_CHECKS
    ctx = CheckContext(rng=np.random.default_rng(seed), perturb=dict(perturb or {}))
    results: list[CheckResult] = []
    for check in checks:
        try:
            results.extend(check(ctx))
        except Exception as e:
            logger.exception("check %s raised", check.__name__)
            results.append(CheckResult(check.__name__, float("nan"), 0.0, False, f"{type(e).__name__}: {e}"))
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning("check suite (%s): %d of %d failed: %s", level, len(failed), len(results), ", ".join(failed))
    else:
        logger.info("check suite (%s): %d checks passed", level, len(results))
    return {
        "level": level,
        "seed": seed,
        "passed": not failed,
        "checks": [r.__dict__ for r in results],
    }
