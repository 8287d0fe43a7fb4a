from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from math import sqrt
from typing import Callable

import numpy as np

from energy.domain import Regime, RegimeTag, State, SystemParams
from energy.services import (
    energy_from_norms,
    gradient_residual,
    lagrange_multipliers,
    pohozaev_from_norms,
    require_regime,
    residual_from_fields,
    state_norms,
)
from flow.domain import FlowOptions, MultiStart, Solution
from ground.domain import ScalarProblem
from ground.services import lambda_for_mass, level_of, mass_frequency, rescale_to_mass, solve_unit_ground
from radial.domain import RadialField, RadialGrid
from radial.exceptions import ConfigurationError, NumericError
from radial.profiles import GaussianProfile, sample
from radial.services import integrate, laplacian_values, mass, solve_shifted, suggest_grid, weighted_norm

logger = logging.getLogger(__name__)

ENERGY_SLACK = 1e-12
POHOZAEV_FACTOR = 100.0
SHIFT_FLOOR = 1e-3
PERTURB_AMPLITUDE = 0.2

SUBCRITICAL = (RegimeTag.SUBCRITICAL_MIN, RegimeTag.SUBCRITICAL_MIN_HIGH_DIM)


# -------------------------
# Constraint
# -------------------------
def project_sphere(u: RadialField, a: float) -> RadialField:
    """u·√(a/|u|²): ближайшая точка S(a) на луче через u."""
    if not a > 0.0 or not np.isfinite(a):
        raise ConfigurationError(f"mass must be positive, got {a}")
    m = mass(u)
    if m <= 0.0:
        raise NumericError("cannot project a zero field onto the mass sphere")
    if m == a:
        return u
    return u.scaled(sqrt(a / m))


def clip_negative(u: RadialField) -> RadialField:
    if np.any(u.values < 0.0):
        return RadialField(u.grid, np.maximum(u.values, 0.0))
    return u


def pohozaev_bound(tol: float) -> float:
    """Допуск на |Q| у сошедшегося решения, абсолютный."""
    return POHOZAEV_FACTOR * tol


def assemble_solution(
    params: SystemParams,
    state: State,
    *,
    tol: float,
    regime: Regime,
    iterations: int,
    label: str = "",
    message: str = "",
    energies: tuple[float, ...] = (),
    residuals: tuple[float, ...] = (),
    diagnostics: dict | None = None,
) -> Solution:
    """Множители, J, Q и невязка в точке; converged = невязка и Q в допуске."""
    n = state_norms(params, state)
    lam1, lam2 = lagrange_multipliers(params, state)
    res1, res2 = gradient_residual(params, state, lam1, lam2)
    residual = residual_from_fields(state, res1, res2, lam1, lam2).relative
    q = pohozaev_from_norms(params, n)
    converged = residual <= tol and abs(q) <= pohozaev_bound(tol)
    if residual <= tol and not converged:
        message = message or f"natural constraint violated: |Q|={abs(q):.3g}"
    return Solution(
        state=state,
        lambda1=lam1,
        lambda2=lam2,
        J_value=energy_from_norms(params, n),
        Q_value=q,
        residual_norm=residual,
        iterations=iterations,
        regime=regime,
        converged=converged,
        label=label,
        message=message,
        energies=energies,
        residuals=residuals,
        diagnostics=diagnostics or {},
    )


# -------------------------
# Normalized gradient flow
# -------------------------
def _tangent_direction(grid: RadialGrid, u: np.ndarray, res: np.ndarray, shift: float) -> np.ndarray:
    """
    Предобусловленный градиент P R, P = (-Δ + shift)^(-1), с вычтенной
    P-компонентой вдоль u: направление касается S(a) и является спуском.
    """
    pr = solve_shifted(grid, shift, res)
    pu = solve_shifted(grid, shift, u)
    return pr - integrate(grid, pr * u) / integrate(grid, pu * u) * pu


def _trial(params: SystemParams, state: State, d1: np.ndarray, d2: np.ndarray, dt: float) -> State:
    grid = state.grid
    u1 = clip_negative(RadialField(grid, state.u1.values - dt * d1))
    u2 = clip_negative(RadialField(grid, state.u2.values - dt * d2))
    return State(project_sphere(u1, params.a1), project_sphere(u2, params.a2))


def descend(params: SystemParams, init: State, opts: FlowOptions | None = None, *, label: str = "") -> Solution:
    """
    Минимизация J на S(a1)×S(a2): шаг по предобусловленному проекционному
    градиенту, нормировка каждой компоненты, дробление шага до убывания J.
    """
    opts = opts or FlowOptions()
    regime = require_regime(params, *SUBCRITICAL)

    state = State(project_sphere(clip_negative(init.u1), params.a1), project_sphere(clip_negative(init.u2), params.a2))
    grid = state.grid
    n = state_norms(params, state)
    energy = energy_from_norms(params, n)
    energies = [energy]
    residuals: list[float] = []
    dt = opts.dt
    message = ""

    for it in range(opts.max_iters + 1):
        lam1, lam2 = lagrange_multipliers(params, state)
        res1, res2 = gradient_residual(params, state, lam1, lam2)
        residual = residual_from_fields(state, res1, res2, lam1, lam2).relative
        residuals.append(residual)
        if residual <= opts.tol:
            break
        if it == opts.max_iters:
            message = f"max_iters={opts.max_iters} reached"
            break

        d1 = _tangent_direction(grid, state.u1.values, res1.values, max(abs(lam1), SHIFT_FLOOR))
        d2 = _tangent_direction(grid, state.u2.values, res2.values, max(abs(lam2), SHIFT_FLOOR))

        accepted = False
        for _ in range(opts.max_backtracks):
            try:
                trial = _trial(params, state, d1, d2, dt)
            except NumericError:
                dt *= opts.backtrack
                continue
            trial_norms = state_norms(params, trial)
            trial_energy = energy_from_norms(params, trial_norms)
            if trial_energy <= energy + ENERGY_SLACK * max(1.0, abs(energy)):
                accepted = True
                break
            dt *= opts.backtrack

        if not accepted:
            message = f"step collapsed at iteration {it} (dt={dt:.3g})"
            logger.warning("descend %s: %s, residual %.3g", label, message, residual)
            break

        state, n, energy = trial, trial_norms, trial_energy
        energies.append(energy)
        dt = min(dt * opts.growth, opts.dt_max)
        if it % 100 == 0:
            logger.debug("descend %s it=%d J=%.12g residual=%.3g dt=%.3g", label, it, energy, residual, dt)

    solution = assemble_solution(
        params,
        state,
        tol=opts.tol,
        regime=regime,
        iterations=len(energies) - 1,
        label=label,
        message=message,
        energies=tuple(energies),
        residuals=tuple(residuals),
    )
    if solution.converged:
        logger.info(
            "descend %s converged in %d steps: J=%.12g λ=(%.6g, %.6g)",
            label, solution.iterations, solution.J_value, solution.lambda1, solution.lambda2,
        )
    else:
        logger.warning("descend %s not converged: residual %.3g %s", label, solution.residual_norm, solution.message)
    return solution


def relax_first(
    params: SystemParams,
    state: State,
    opts: FlowOptions | None = None,
    *,
    steps: int = 300,
    tol: float = 1e-5,
) -> State:
    """
    Спуск по u1 ∈ S(a1) при замороженном u2. Подстраивает первую компоненту
    под вторую перед Ньютоном: J не возрастает, u2 не меняется.
    """
    opts = opts or FlowOptions()
    grid = state.grid
    u2 = state.u2
    state = State(project_sphere(clip_negative(state.u1), params.a1), u2)
    energy = energy_from_norms(params, state_norms(params, state))
    dt = opts.dt
    relative = float("inf")

    for it in range(steps):
        lam1, lam2 = lagrange_multipliers(params, state)
        res1, _ = gradient_residual(params, state, lam1, lam2)
        scale = weighted_norm(grid, laplacian_values(grid, state.u1.values)) + abs(lam1) * weighted_norm(
            grid, state.u1.values
        )
        relative = weighted_norm(grid, res1.values) / scale
        if relative <= tol:
            break
        d1 = _tangent_direction(grid, state.u1.values, res1.values, max(abs(lam1), SHIFT_FLOOR))

        for _ in range(opts.max_backtracks):
            try:
                u1 = project_sphere(clip_negative(RadialField(grid, state.u1.values - dt * d1)), params.a1)
            except NumericError:
                dt *= opts.backtrack
                continue
            trial = State(u1, u2)
            trial_energy = energy_from_norms(params, state_norms(params, trial))
            if trial_energy <= energy + ENERGY_SLACK * max(1.0, abs(energy)):
                break
            dt *= opts.backtrack
        else:
            logger.debug("relax_first: step collapsed at iteration %d", it)
            break

        state, energy = trial, trial_energy
        dt = min(dt * opts.growth, opts.dt_max)

    logger.debug("relax_first: J=%.12g, first residual %.3g", energy, relative)
    return state


# -------------------------
# Initial states
# -------------------------
def _ground_component(params: SystemParams, grid: RadialGrid, i: int, mu: float | None = None):
    p, mu_i, _, a = params.component(i)
    gs = solve_unit_ground(ScalarProblem(dim=params.dim, p=p, mu=mu_i if mu is None else mu), grid)
    return gs, a


def ground_pair(params: SystemParams, grid: RadialGrid, rng: np.random.Generator | None = None) -> State:
    """Несвязанная пара основных состояний (u_a1, u_a2)."""
    fields = []
    for i in (1, 2):
        gs, a = _ground_component(params, grid, i)
        fields.append(rescale_to_mass(gs, a, grid)[1])
    return State(*fields)


def gaussian_pair(params: SystemParams, grid: RadialGrid, rng: np.random.Generator | None = None) -> State:
    """Гауссовы профили массы ai с шириной 1/√λ_ai основного состояния."""
    fields = []
    for i in (1, 2):
        gs, a = _ground_component(params, grid, i)
        width = 1.0 / sqrt(lambda_for_mass(gs, a))
        profile = GaussianProfile(params.dim, width=width).with_mass(a)
        fields.append(sample(profile, grid))
    return State(*fields)


def perturbed_pair(params: SystemParams, grid: RadialGrid, rng: np.random.Generator | None = None) -> State:
    """Пара основных состояний, умноженная на гладкий положительный шум."""
    rng = rng or np.random.default_rng()
    fields = []
    for i in (1, 2):
        gs, a = _ground_component(params, grid, i)
        lam, u = rescale_to_mass(gs, a, grid)
        phase = sqrt(lam) * grid.nodes
        noise = sum(rng.standard_normal() / k * np.sin(0.5 * k * phase) for k in (1, 2, 3))
        fields.append(project_sphere(RadialField(grid, u.values * np.exp(PERTURB_AMPLITUDE * noise)), a))
    return State(*fields)


def symmetric_pair(params: SystemParams, grid: RadialGrid, rng: np.random.Generator | None = None) -> State:
    """
    При (p1,μ1,r1,a1) = (p2,μ2,r2,a2) и p = r1+r2 пара u1 = u2 = u решает систему,
    где u: основное состояние с коэффициентом μ + β r1.
    """
    if not params.is_swap_symmetric or abs(params.p1 - params.coupling_degree) > 1e-12:
        raise ConfigurationError("symmetric pair needs swap-symmetric parameters with p = r1 + r2")
    gs, a = _ground_component(params, grid, 1, mu=params.mu1 + params.beta * params.r1)
    _, u = rescale_to_mass(gs, a, grid)
    return State(u, u)


INITIALIZERS: dict[str, Callable[..., State]] = {
    "ground_pair": ground_pair,
    "gaussian_pair": gaussian_pair,
    "perturbed": perturbed_pair,
    "symmetric_pair": symmetric_pair,
}


def initial_state(name: str, params: SystemParams, grid: RadialGrid, rng: np.random.Generator | None = None) -> State:
    try:
        factory = INITIALIZERS[name]
    except KeyError:
        raise ConfigurationError(f"unknown initializer {name!r}; known: {', '.join(INITIALIZERS)}") from None
    return factory(params, grid, rng)


def decoupled_level(params: SystemParams) -> float:
    """m1(a1) + m2(a2): уровень несвязанной пары основных состояний."""
    return sum(level_of(params.scalar_problem(i), params.component(i)[3]) for i in (1, 2))


def decoupled_lambdas(params: SystemParams) -> tuple[float, float]:
    """Множители несвязанной пары в записи -Δu = λu + ...: λi = -λ_ai < 0."""
    return tuple(-mass_frequency(params.scalar_problem(i), params.component(i)[3]) for i in (1, 2))


def auto_grid(params: SystemParams, *, min_nodes: int = 4096) -> RadialGrid:
    return suggest_grid(params.dim, list(decoupled_lambdas(params)), min_nodes=min_nodes)


# -------------------------
# Multi-start
# -------------------------
def _starts(params: SystemParams, grid: RadialGrid, opts: FlowOptions) -> list[tuple[str, State]]:
    seeds = iter(np.random.SeedSequence(opts.seed).spawn(max(opts.restarts, 1) * len(opts.initializers)))
    starts = []
    for name in opts.initializers:
        copies = opts.restarts if name == "perturbed" else 1
        for k in range(copies):
            rng = np.random.default_rng(next(seeds))
            label = f"{name}#{k}" if copies > 1 else name
            starts.append((label, initial_state(name, params, grid, rng)))
    return starts


def global_min_estimate(params: SystemParams, grid: RadialGrid, opts: FlowOptions | None = None) -> MultiStart:
    """Мультистарт descend; лучший: наименьшее J среди сошедшихся запусков."""
    opts = opts or FlowOptions()
    require_regime(params, *SUBCRITICAL)
    starts = _starts(params, grid, opts)
    if not starts:
        raise ConfigurationError("no initializers requested")

    with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
        runs = tuple(pool.map(lambda item: descend(params, item[1], opts, label=item[0]), starts))

    converged = [run for run in runs if run.converged]
    if converged:
        best = min(converged, key=lambda run: run.J_value)
    else:
        best = min(runs, key=lambda run: run.J_value)
        logger.warning("global_min_estimate: none of %d starts converged", len(runs))
    result = MultiStart(best=best, runs=runs)
    logger.info("global_min_estimate: best %s J=%.12g spread %.3g", best.label, best.J_value, result.energy_spread)
    return result
