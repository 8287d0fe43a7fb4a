from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from functools import lru_cache
from math import ceil, inf, log, sqrt
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from energy.domain import RegimeTag, State, SystemParams
from energy.services import (
    classify_regime,
    gradient_residual,
    lagrange_multipliers,
    require_regime,
    residual_from_fields,
    signed_power,
    threshold_c,
)
from flow.domain import Solution
from flow.services import (
    assemble_solution,
    auto_grid,
    clip_negative,
    decoupled_level,
    ground_pair,
    project_sphere,
    relax_first,
    symmetric_pair,
)
from ground.domain import ScalarProblem
from ground.services import lambda_for_mass, level_of, rescaled_profile, scaled_norms, solve_unit_ground
from minimax.domain import (
    BSample,
    Continuation,
    ExactComponent,
    GammaEstimate,
    MassScanRow,
    MinimaxOptions,
    NewtonOptions,
    Path,
    PathMax,
    SweepRow,
)
from radial.domain import RadialField, RadialGrid
from radial.exceptions import ConfigurationError, GeometryError, NumericError, SolverError
from radial.profiles import GaussianProfile
from radial.services import check_resolution, integrate, laplacian_matrix

logger = logging.getLogger(__name__)

LEVEL_SLACK = 1e-3
# доля квадратурного отрезка, в которую отображается самый узкий профиль при вычислении перекрытия
OVERLAP_SPAN = 1.0 / 20.0
OVERLAP_NODES = 8192
# шаг по σ вдоль пути
PATH_SIGMA_STEP = 0.1
# порог знакопеременности для пробных шагов Ньютона
TRIAL_NEGATIVITY = 1e-3
REGULARIZATION = 1e-10
JUMP_FACTOR = 10.0


# -------------------------
# Exact components
# -------------------------
def ground_component(params: SystemParams, i: int, grid: RadialGrid) -> ExactComponent:
    """Основное состояние i-й компоненты на массе ai с точными нормами."""
    p, mu, _, a = params.component(i)
    gs = solve_unit_ground(ScalarProblem(dim=params.dim, p=p, mu=mu), grid)
    lam = lambda_for_mass(gs, a)
    width = 1.0 / sqrt(lam)
    check_resolution(grid, width, label=f"component {i} ground state")
    _, grad, plevel = scaled_norms(gs, a)
    return ExactComponent(profile=rescaled_profile(gs, a), p=p, mass=a, grad=grad, plevel=plevel, width=width)


def gaussian_component(params: SystemParams, i: int, width: float) -> ExactComponent:
    p, _, _, a = params.component(i)
    profile = GaussianProfile(params.dim, width=width).with_mass(a)
    return ExactComponent(
        profile=profile,
        p=p,
        mass=a,
        grad=profile.grad_norm_sq,
        plevel=profile.lp_norm_pow(p),
        width=width,
    )


@lru_cache(maxsize=8)
def _quadrature_grid(dim: int) -> RadialGrid:
    return RadialGrid.uniform(dim, OVERLAP_NODES, 1.0)


def overlap(f: ExactComponent, g: ExactComponent, r1: float, r2: float) -> float:
    """
    ∫|f|^r1 |g|^r2 dx. Интеграл считается в растянутой переменной x = k y
    на собственной квадратурной сетке, где более узкий профиль занимает OVERLAP_SPAN.
    От расчётной сетки не зависит.
    """
    grid = _quadrature_grid(f.dim)
    k = min(f.width, g.width) / (OVERLAP_SPAN * grid.r_max)
    x = k * grid.nodes
    integrand = np.abs(f.profile(x)) ** r1 * np.abs(g.profile(x)) ** r2
    integrand[-1] = 0.0
    return k ** grid.dim * integrate(grid, integrand)


def _excess(params: SystemParams, u1: ExactComponent, v: ExactComponent) -> float:
    """J(u1, v) - J(u1, 0)."""
    mixed = overlap(u1, v, params.r1, params.r2) if params.beta else 0.0
    return v.level(params.mu2) - params.beta * mixed


# -------------------------
# Separating set B
# -------------------------
def sample_inf_B(
    params: SystemParams,
    grid: RadialGrid,
    opts: MinimaxOptions | None = None,
    *,
    low: ExactComponent | None = None,
    bar: ExactComponent | None = None,
) -> list[BSample]:
    """
    Выборка из B = {|∇u2|² = 2c(u1)}: u1 пробегает дилатации u_low и гауссианы
    на S(a1), u2 пробегает u_bar и гауссиану, растянутые до |∇u2|² = 2c(u1).
    excess: J(u1, u2) - J(u_low, 0).
    """
    opts = opts or MinimaxOptions()
    low = low or ground_component(params, 1, grid)
    bar = bar or ground_component(params, 2, grid)
    base_level = low.level(params.mu1)

    sigmas = np.union1d(np.linspace(-opts.b_span, opts.b_span, opts.b_dilations), [0.0])
    firsts = [(f"low@{s:+.3g}", low.dilated(float(s))) for s in sigmas]
    firsts += [
        (f"gauss@{factor:g}", gaussian_component(params, 1, factor * low.width))
        for factor in (0.5, 1.0, 2.0)
    ]
    seconds = [("bar", bar), ("gauss", gaussian_component(params, 2, bar.width))]

    samples = []
    for name1, u1 in firsts:
        c = threshold_c(params, u1.sample(grid))
        offset = u1.level(params.mu1) - base_level
        for name2, v in seconds:
            v_b = v.dilated(0.5 * log(2.0 * c / v.grad))
            samples.append(BSample(f"{name1}|{name2}", c, offset + _excess(params, u1, v_b)))
    best = min(samples, key=lambda sample: sample.excess)
    logger.info("inf_B sample: %d states, min excess %.6g at %s", len(samples), best.excess, best.label)
    return samples


# -------------------------
# Path
# -------------------------
def _endpoint_report(params, low, bar, s, c_low, inf_b) -> dict:
    start, end = bar.dilated(-s), bar.dilated(s)
    e0 = _excess(params, low, start)
    e1 = _excess(params, low, end)
    base = low.level(params.mu1)
    checks = {
        "start_in_A": start.grad <= c_low,
        "end_outside_A2c": end.grad > 2.0 * c_low,
        "start_below_B": e0 < inf_b,
        "end_below_B": e1 < inf_b,
        "end_negative": base + e1 < 0.0,
    }
    return {"s": s, "excess_start": e0, "excess_end": e1, **checks, "ok": all(checks.values())}


def build_path(
    params: SystemParams,
    grid: RadialGrid,
    opts: MinimaxOptions | None = None,
    *,
    samples: list[BSample] | None = None,
    low: ExactComponent | None = None,
    bar: ExactComponent | None = None,
) -> Path:
    """
    Путь (u_low, σ*u_bar), σ ∈ [-s, s]; s растёт, пока концы не удовлетворяют условиям класса путей.
    Узлы по σ не реже PATH_SIGMA_STEP. Концы проверяются по точным нормам, на сетку не выходят.
    """
    opts = opts or MinimaxOptions()
    require_regime(params, RegimeTag.MIXED)
    low = low or ground_component(params, 1, grid)
    bar = bar or ground_component(params, 2, grid)
    c_low = threshold_c(params, low.sample(grid))
    if samples is None:
        samples = sample_inf_B(params, grid, opts, low=low, bar=bar)
    inf_b = min(sample.excess for sample in samples)

    candidates = []
    s = opts.s_initial
    while s < opts.s_max:
        candidates.append(s)
        s *= opts.s_growth
    candidates.append(opts.s_max)

    report: dict = {}
    for s in candidates:
        report = _endpoint_report(params, low, bar, s, c_low, inf_b)
        if report["ok"]:
            break
    else:
        raise GeometryError(f"path endpoints not admissible for s <= {opts.s_max:g}: {report}")

    # нечётное число узлов: t = 0.5 всегда узел
    half = max(opts.path_nodes // 2, ceil(s / PATH_SIGMA_STEP))
    t_values = np.arange(2 * half + 1) / (2 * half)
    excess = np.array([_excess(params, low, bar.dilated(s * (2.0 * t - 1.0))) for t in t_values])
    logger.info("path: s=%.4g, %d nodes, c(u_low)=%.4g inf_B excess=%.4g", s, t_values.size, c_low, inf_b)
    return Path(
        params=params,
        grid=grid,
        low=low,
        bar=bar,
        s=s,
        t_values=t_values,
        excess=excess,
        base_energy=low.level(params.mu1),
        c_low=c_low,
        inf_b_excess=inf_b,
    )


def path_excess(params: SystemParams, path: Path, t: float) -> float:
    return _excess(params, path.low, path.component(t))


def path_max(params: SystemParams, path: Path) -> PathMax:
    """
    Максимум J вдоль пути: дискретный argmax, затем уточнение Брента на соседних узлах.
    Состояние в максимуме сэмплируется на сетку; ResolutionError, если σ*u_bar там не разрешён.
    """
    k = int(np.argmax(path.excess))
    t_star, e_star = float(path.t_values[k]), float(path.excess[k])
    if 0 < k < len(path.t_values) - 1:
        res = minimize_scalar(
            lambda t: -path_excess(params, path, t),
            bounds=(float(path.t_values[k - 1]), float(path.t_values[k + 1])),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if -res.fun >= e_star:
            t_star, e_star = float(res.x), float(-res.fun)
    check_resolution(path.grid, path.component(t_star).width, label="path maximum")
    return PathMax(t_star=t_star, J_max=path.base_energy + e_star, excess_max=e_star, state=path.state(t_star))


# -------------------------
# Newton on the constrained system
# -------------------------
def _abs_power(values: np.ndarray, exponent: float) -> np.ndarray:
    out = np.zeros_like(values)
    nz = values != 0.0
    out[nz] = np.abs(values[nz]) ** exponent
    return out


def _force_derivatives(params: SystemParams, u1: np.ndarray, u2: np.ndarray):
    d11 = params.mu1 * (params.p1 - 1.0) * _abs_power(u1, params.p1 - 2.0)
    d22 = params.mu2 * (params.p2 - 1.0) * _abs_power(u2, params.p2 - 2.0)
    d12 = np.zeros_like(u1)
    if params.beta:
        b, r1, r2 = params.beta, params.r1, params.r2
        d11 = d11 + b * r1 * (r1 - 1.0) * _abs_power(u1, r1 - 2.0) * _abs_power(u2, r2)
        d22 = d22 + b * r2 * (r2 - 1.0) * _abs_power(u2, r2 - 2.0) * _abs_power(u1, r1)
        d12 = b * r1 * r2 * signed_power(u1, r1) * signed_power(u2, r2)
    return d11, d12, d22


def _kkt(params: SystemParams, grid: RadialGrid, x: np.ndarray):
    """Невязка: уравнения в узлах 0..M-2 и два условия на массу."""
    n = grid.size - 1
    u1, u2, lam1, lam2 = x[:n], x[n:2 * n], x[2 * n], x[2 * n + 1]
    state = State(RadialField(grid, np.append(u1, 0.0)), RadialField(grid, np.append(u2, 0.0)))
    res1, res2 = gradient_residual(params, state, lam1, lam2)
    w = grid.weights[:n]
    g1 = 0.5 * (float(w @ (u1 * u1)) - params.a1)
    g2 = 0.5 * (float(w @ (u2 * u2)) - params.a2)
    merit = (
        residual_from_fields(state, res1, res2, lam1, lam2).relative
        + 2.0 * abs(g1) / params.a1
        + 2.0 * abs(g2) / params.a2
    )
    return state, np.concatenate((res1.values[:n], res2.values[:n], [g1, g2])), merit


def _jacobian(params: SystemParams, grid: RadialGrid, x: np.ndarray, shift: float = 0.0) -> sparse.csc_matrix:
    n = grid.size - 1
    u1, u2, lam1, lam2 = x[:n], x[n:2 * n], x[2 * n], x[2 * n + 1]
    a = laplacian_matrix(grid)
    d11, d12, d22 = _force_derivatives(params, u1, u2)
    w = grid.weights[:n]
    j11 = a + sparse.diags(shift - lam1 - d11)
    j22 = a + sparse.diags(shift - lam2 - d22)
    j12 = sparse.diags(-d12)
    col1 = sparse.csr_matrix(-u1.reshape(-1, 1))
    col2 = sparse.csr_matrix(-u2.reshape(-1, 1))
    row1 = sparse.csr_matrix((w * u1).reshape(1, -1))
    row2 = sparse.csr_matrix((w * u2).reshape(1, -1))
    return sparse.bmat(
        [
            [j11, j12, col1, None],
            [j12, j22, None, col2],
            [row1, None, None, None],
            [None, row2, None, None],
        ],
        format="csc",
    )


def _solve(jac: sparse.csc_matrix, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        dx = spsolve(jac, rhs)
    if not np.all(np.isfinite(dx)):
        raise NumericError("Newton step is not finite")
    return dx


def superlinear_tail(history: list[float] | tuple[float, ...]) -> bool:
    """Отношения последних невязок убывают."""
    if len(history) < 3:
        return True
    r0, r1, r2 = history[-3:]
    if r1 == 0.0 or r0 == 0.0:
        return True
    return r2 / r1 < r1 / r0


def _sign_changing(u: RadialField, eps: float) -> bool:
    top = float(np.max(np.abs(u.values)))
    return top == 0.0 or float(np.min(u.values)) < -eps * top


def newton_refine(
    params: SystemParams,
    init: State,
    opts: NewtonOptions | None = None,
    *,
    label: str = "newton",
) -> Solution:
    """
    Демпфированный Ньютон по (u1, u2, λ1, λ2) для системы с двумя условиями на массу.
    Принятое решение: невязка и Q в допуске, обе компоненты неотрицательны, λ1, λ2 < 0.
    """
    opts = opts or NewtonOptions()
    regime = classify_regime(params)
    if regime.tag == RegimeTag.CRITICAL_UNSUPPORTED:
        raise ConfigurationError(f"newton_refine does not handle {regime}: {regime.reason}")

    grid = init.grid
    n = grid.size - 1
    start = State(project_sphere(init.u1, params.a1), project_sphere(init.u2, params.a2))
    lam1, lam2 = lagrange_multipliers(params, start)
    x = np.concatenate((start.u1.values[:n], start.u2.values[:n], [lam1, lam2]))
    state, residual, merit = _kkt(params, grid, x)

    history = [merit]
    damping: list[float] = []
    singular = 0
    message = ""
    iterations = 0
    shift = REGULARIZATION * 2.0 * grid.dim / grid.step ** 2

    for it in range(opts.max_iters):
        if merit <= 0.1 * opts.tol:
            break
        dx = None
        for reg in (0.0, shift):
            try:
                dx = _solve(_jacobian(params, grid, x, reg), -residual)
                break
            except (MatrixRankWarning, RuntimeError, NumericError) as exc:
                singular += 1
                logger.debug("%s: Jacobian solve failed (shift %.3g): %s", label, reg, exc)
        if dx is None:
            message = f"singular Jacobian at iteration {it}"
            break

        theta = 1.0
        while theta >= opts.damping_floor:
            trial = x + theta * dx
            try:
                t_state, t_residual, t_merit = _kkt(params, grid, trial)
            except NumericError:
                t_merit = inf
            if t_merit < merit and not any(_sign_changing(u, TRIAL_NEGATIVITY) for u in (t_state.u1, t_state.u2)):
                break
            theta *= 0.5
        else:
            message = f"damping floor reached at iteration {it}"
            break

        x, state, residual, merit = trial, t_state, t_residual, t_merit
        history.append(merit)
        damping.append(theta)
        iterations = it + 1
        logger.debug("%s it=%d merit=%.3g theta=%.3g λ=(%.6g, %.6g)", label, iterations, merit, theta, x[-2], x[-1])
    else:
        if merit > 0.1 * opts.tol:
            message = f"max_iters={opts.max_iters} reached"

    diagnostics = {
        "damping": damping,
        "singular_retries": singular,
        "superlinear_tail": superlinear_tail(history),
    }
    changing = [i for i, u in ((1, state.u1), (2, state.u2)) if _sign_changing(u, opts.positivity_eps)]
    if changing:
        diagnostics["sign_changing"] = changing
    else:
        state = State(
            project_sphere(clip_negative(state.u1), params.a1),
            project_sphere(clip_negative(state.u2), params.a2),
        )

    solution = assemble_solution(
        params,
        state,
        tol=opts.tol,
        regime=regime,
        iterations=iterations,
        label=label,
        message=message,
        residuals=tuple(history),
        diagnostics=diagnostics,
    )
    if changing:
        solution = replace(solution, converged=False, message=f"sign-changing or zero component(s) {changing}")
    elif solution.converged and not solution.signs_ok:
        solution = replace(
            solution,
            converged=False,
            message=f"multiplier sign violated: λ=({solution.lambda1:.6g}, {solution.lambda2:.6g})",
        )

    if solution.converged:
        logger.info(
            "%s converged in %d steps: J=%.12g λ=(%.6g, %.6g) |Q|=%.3g",
            label, iterations, solution.J_value, solution.lambda1, solution.lambda2, abs(solution.Q_value),
        )
    else:
        logger.warning("%s rejected: residual %.3g %s", label, solution.residual_norm, solution.message)
    return solution


# -------------------------
# Continuation in β
# -------------------------
def _predict(branch: list[Solution], betas: list[float], beta: float, params: SystemParams) -> State:
    last = branch[-1].state
    if len(branch) < 2:
        return last
    prev = branch[-2].state
    k = (beta - betas[-1]) / (betas[-1] - betas[-2])
    grid = last.grid
    u1 = RadialField(grid, last.u1.values + k * (last.u1.values - prev.u1.values))
    u2 = RadialField(grid, last.u2.values + k * (last.u2.values - prev.u2.values))
    try:
        return State(project_sphere(clip_negative(u1), params.a1), project_sphere(clip_negative(u2), params.a2))
    except NumericError:
        return last


def continue_in_beta(
    params: SystemParams,
    start: Solution,
    beta_target: float,
    opts: MinimaxOptions | None = None,
) -> Continuation:
    """
    Продолжение решения от params.beta до beta_target: секущий прогноз, Ньютон,
    шаг удваивается после успеха и делится пополам после неудачи.
    """
    opts = opts or MinimaxOptions()
    beta = params.beta
    branch, betas = [start], [beta]
    direction = 1.0 if beta_target >= beta else -1.0
    h = opts.beta_step

    for _ in range(opts.max_continuation_steps):
        remaining = abs(beta_target - beta)
        if remaining <= 1e-14 * max(1.0, abs(beta_target)):
            return Continuation(tuple(branch), tuple(betas), reached=True)
        nxt = beta_target if remaining <= h else beta + direction * h
        target = params.with_beta(nxt)
        solution = newton_refine(target, _predict(branch, betas, nxt, target), opts.newton, label=f"beta={nxt:.6g}")
        if solution.converged:
            branch.append(solution)
            betas.append(nxt)
            beta = nxt
            h = min(2.0 * h, opts.beta_step_max)
            continue
        h *= 0.5
        if h < opts.beta_step_min:
            message = f"step below {opts.beta_step_min:g} at beta={beta:.6g}"
            logger.warning("continuation stopped: %s", message)
            return Continuation(tuple(branch), tuple(betas), reached=False, message=message)

    reached = abs(beta_target - beta) <= 1e-14 * max(1.0, abs(beta_target))
    return Continuation(tuple(branch), tuple(betas), reached=reached, message="" if reached else "step budget exhausted")


def _fresh_start(params: SystemParams, grid: RadialGrid) -> State:
    if params.is_swap_symmetric and abs(params.p1 - params.coupling_degree) <= 1e-12:
        return symmetric_pair(params, grid)
    return ground_pair(params, grid)


def _row(beta: float, params: SystemParams, solution: Solution | None, message: str = "") -> SweepRow:
    if solution is None:
        nan = float("nan")
        return SweepRow(beta, False, nan, nan, nan, nan, params.a1, params.a2, 0, message)
    return SweepRow(
        beta=beta,
        converged=solution.converged,
        J=solution.J_value,
        lambda1=solution.lambda1,
        lambda2=solution.lambda2,
        Q=solution.Q_value,
        a1=params.a1,
        a2=params.a2,
        iterations=solution.iterations,
        message=solution.message,
    )


def beta_sweep(
    params: SystemParams,
    beta_values: list[float],
    grid: RadialGrid,
    opts: MinimaxOptions | None = None,
    *,
    solutions: list | None = None,
) -> list[SweepRow]:
    """
    Ньютон при каждом β с продолжением от предыдущего сошедшегося решения.
    Неудачи записываются в таблицу, обход продолжается.
    """
    opts = opts or MinimaxOptions()
    require_regime(params, RegimeTag.SUPERCRITICAL)
    rows: list[SweepRow] = []
    prev: Solution | None = None
    prev_beta = 0.0

    for beta in beta_values:
        target = params.with_beta(beta)
        solution = None
        try:
            if prev is not None:
                cont = continue_in_beta(params.with_beta(prev_beta), prev, beta, opts)
                if cont.reached:
                    solution = cont.last
            if solution is None:
                solution = newton_refine(target, _fresh_start(target, grid), opts.newton, label=f"beta={beta:.6g}")
        except SolverError as exc:
            logger.warning("sweep a=(%g, %g) beta=%g failed: %s", params.a1, params.a2, beta, exc)
            rows.append(_row(beta, target, None, str(exc)))
            if solutions is not None:
                solutions.append(None)
            continue
        rows.append(_row(beta, target, solution))
        if solutions is not None:
            solutions.append(solution)
        if solution.converged:
            prev, prev_beta = solution, beta
    return rows


def sweep_jumps(rows: list[SweepRow]) -> list[tuple[float, float]]:
    """
    Интервалы (β_k, β_k+1) между соседними сошедшимися строками, где секущая J
    превосходит соседние секущие больше чем в JUMP_FACTOR раз (разрыв ветви).
    """
    good = [row for row in rows if row.converged]
    pairs = [(a, b) for a, b in zip(good, good[1:]) if b.beta != a.beta]
    slopes = [(b.J - a.J) / (b.beta - a.beta) for a, b in pairs]
    jumps = []
    for k, slope in enumerate(slopes):
        neighbours = [abs(slopes[j]) for j in (k - 1, k + 1) if 0 <= j < len(slopes)]
        if neighbours and abs(slope) > JUMP_FACTOR * max(max(neighbours), 1e-12):
            jumps.append((pairs[k][0].beta, pairs[k][1].beta))
    return jumps


def sweep_grid(
    params: SystemParams,
    a1_values: list[float],
    a2_values: list[float],
    beta_values: list[float],
    opts: MinimaxOptions | None = None,
    *,
    grid: RadialGrid | None = None,
) -> list[SweepRow]:
    """Цепочки по β для каждой пары масс; цепочки идут параллельно."""
    opts = opts or MinimaxOptions()
    chains = [params.with_masses(a1, a2) for a1 in a1_values for a2 in a2_values]

    def run(chain: SystemParams) -> list[SweepRow]:
        return beta_sweep(chain, beta_values, grid or auto_grid(chain), opts)

    with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
        tables = list(pool.map(run, chains))
    return [row for table in tables for row in table]


# -------------------------
# Mountain-pass level
# -------------------------
def level_threshold_a1(params: SystemParams) -> float:
    """
    ā1, при котором m1(ā1) + m2(a2) = 0 (m1(a) = m1(1) a^κ1);
    a1 > ā1 гарантирует m1(a1) + m2(a2) < 0.
    """
    first = params.scalar_problem(1)
    m2 = level_of(params.scalar_problem(2), params.a2)
    m1_unit = level_of(first, 1.0)
    if not (m2 > 0.0 and m1_unit < 0.0 and first.kappa > 0.0):
        raise ConfigurationError("level threshold needs p1 mass-subcritical and p2 mass-supercritical")
    return (m2 / abs(m1_unit)) ** (1.0 / first.kappa)


def gamma_estimate(
    params: SystemParams,
    grid: RadialGrid,
    opts: MinimaxOptions | None = None,
) -> GammaEstimate:
    """
    Верхняя оценка γ максимумом на пути, нижняя по выборке из B,
    решение: Ньютон из максимума пути после подстройки u1. Если решение не сошлось
    или вышло из вилки уровней, запасной маршрут: продолжение по β от β=0.
    """
    opts = opts or MinimaxOptions()
    require_regime(params, RegimeTag.MIXED)
    total = decoupled_level(params)
    if not total < 0.0:
        raise GeometryError(
            f"m1(a1)+m2(a2) = {total:.6g} >= 0; a1 must exceed {level_threshold_a1(params):.6g}"
        )

    low = ground_component(params, 1, grid)
    bar = ground_component(params, 2, grid)
    samples = sample_inf_B(params, grid, opts, low=low, bar=bar)
    path = build_path(params, grid, opts, samples=samples, low=low, bar=bar)
    peak = path_max(params, path)
    slack = LEVEL_SLACK * abs(total)
    inf_b_lower = path.base_energy + path.inf_b_excess

    def admissible(candidate: Solution) -> bool:
        j = candidate.J_value
        return candidate.converged and inf_b_lower - slack <= j <= peak.J_max + slack

    # при β > 0 u1 сначала подстраивается под σ*u_bar
    seed = relax_first(params, peak.state) if params.beta > 0.0 else peak.state
    solution = newton_refine(params, seed, opts.newton, label="path_max")
    route = "path_max"
    if not admissible(solution) and params.beta > 0.0:
        logger.warning(
            "Newton from the path maximum gave no admissible solution (%s, J=%.9g); continuing from beta=0",
            solution.message or "outside the level bracket", solution.J_value,
        )
        decoupled = params.with_beta(0.0)
        start = newton_refine(decoupled, path.state(0.5), opts.newton, label="beta=0")
        if start.converged:
            cont = continue_in_beta(decoupled, start, params.beta, opts)
            if cont.reached and (admissible(cont.last) or not solution.converged):
                solution, route = cont.last, "continuation"

    estimate = GammaEstimate(
        gamma_upper=peak.J_max,
        inf_b_lower=inf_b_lower,
        decoupled_level=total,
        solution=solution,
        path=path,
        route=route,
        slack=slack,
    )
    if solution.converged and not estimate.bracket_ok:
        logger.warning(
            "level bracket violated: inf_B %.9g, J %.9g, path max %.9g, m1+m2 %.9g",
            estimate.inf_b_lower, solution.J_value, estimate.gamma_upper, total,
        )
    logger.info(
        "gamma: inf_B %.9g <= J %.9g <= path max %.9g <= m1+m2 %.9g (route %s)",
        estimate.inf_b_lower, solution.J_value, estimate.gamma_upper, total, route,
    )
    return estimate


def critical_mass_scan(
    params: SystemParams,
    a1_values: list[float],
    a2_values: list[float],
    opts: MinimaxOptions | None = None,
    *,
    grid_for: Callable[[SystemParams], RadialGrid] = auto_grid,
) -> list[MassScanRow]:
    """Для каждого a2 наименьшее a1 из скана, при котором gamma_estimate успешен."""
    opts = opts or MinimaxOptions()
    a1_sorted = sorted(a1_values)

    def scan(a2: float) -> MassScanRow:
        tried = []
        for a1 in a1_sorted:
            point = params.with_masses(a1, a2)
            tried.append(a1)
            try:
                if gamma_estimate(point, grid_for(point), opts).succeeded:
                    return MassScanRow(a2, level_threshold_a1(point), a1, tuple(tried))
            except SolverError as exc:
                logger.debug("mass scan a1=%g a2=%g: %s", a1, a2, exc)
        return MassScanRow(a2, level_threshold_a1(params.with_masses(a2=a2)), None, tuple(tried))

    with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
        return list(pool.map(scan, a2_values))
