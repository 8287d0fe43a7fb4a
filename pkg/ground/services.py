from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from math import inf, sqrt

import numpy as np
from scipy.integrate import quad, solve_ivp

from ground.domain import GroundProfile, GroundState, LevelPoint, ScalarProblem
from radial.domain import RadialField, RadialGrid, sphere_area
from radial.exceptions import ConfigurationError, NoBracketError
from radial.services import (
    check_resolution,
    grad_norm_sq,
    laplacian_values,
    lp_norm_pow,
    mass,
    solve_shifted,
)

logger = logging.getLogger(__name__)

# Shooting
RTOL = 1e-12
ATOL = 1e-14
SHOOT_R_END = 80.0
BRACKET_EXPANSIONS = 60
MAX_BISECTIONS = 200
# Дальше этого уровня (относительно w(0)) профиль продолжается точным хвостом.
TAIL_LEVEL = 1e-6

# Relaxation oracle
RELAX_MAX_ITERS = 2000


# -------------------------
# Radial ODE
# -------------------------
def _rhs(dim: int, p: float, mu: float):
    """w, w' и три интеграла ∫ r^(N-1) (w^2, w'^2, |w|^p) dr."""
    k = dim - 1.0

    def f(r, y):
        w, dw = y[0], y[1]
        d2w = -k / r * dw + w - mu * abs(w) ** (p - 2.0) * w
        rk = r ** k
        return [dw, d2w, rk * w * w, rk * dw * dw, rk * abs(w) ** p]

    return f


def _start(problem: ScalarProblem, alpha: float) -> tuple[float, float, float, float]:
    """Старт ряда у нуля: (r0, w''(0), w(r0), w'(r0))."""
    n, p, mu = problem.dim, problem.p, problem.mu
    curvature = (alpha - mu * alpha ** (p - 1.0)) / n
    local_scale = 1.0 / sqrt(max(1.0, mu * alpha ** (p - 2.0)))
    r0 = 1e-4 * local_scale
    return r0, curvature, alpha + 0.5 * curvature * r0 * r0, curvature * r0


def _events():
    def crossed(r, y):
        return y[0]
    crossed.terminal = True
    crossed.direction = -1

    def turned(r, y):
        return y[1]
    turned.terminal = True
    turned.direction = 1

    return crossed, turned


def _shoot(problem: ScalarProblem, alpha: float, events: tuple, *, dense: bool = False):
    # Пробные и финальный выстрелы интегрируют одну и ту же систему:
    # шаги совпадают, и финальная траектория из lo повторяет пробную.
    n, p = problem.dim, problem.p
    r0, curvature, w0, dw0 = _start(problem, alpha)
    return solve_ivp(
        _rhs(n, p, problem.mu),
        (r0, SHOOT_R_END),
        [
            w0,
            dw0,
            alpha ** 2 * r0 ** n / n,
            curvature ** 2 * r0 ** (n + 2) / (n + 2),
            alpha ** p * r0 ** n / n,
        ],
        method="DOP853",
        rtol=RTOL,
        atol=ATOL,
        dense_output=dense,
        events=events,
    )


def _overshoots(problem: ScalarProblem, alpha: float) -> bool:
    """True, если траектория из w(0)=alpha пересекает ноль (alpha слишком велико)."""
    w_star = problem.mu ** (-1.0 / (problem.p - 2.0))
    if alpha <= w_star:
        return False
    sol = _shoot(problem, alpha, _events())
    if sol.t_events[0].size:
        return True
    if sol.t_events[1].size:
        return False
    return bool(sol.y[0, -1] < 0.0)


def _bracket(problem: ScalarProblem) -> tuple[float, float]:
    w_star = problem.mu ** (-1.0 / (problem.p - 2.0))
    lo, hi = w_star, 2.0 * w_star
    for _ in range(BRACKET_EXPANSIONS):
        if _overshoots(problem, hi):
            return lo, hi
        lo, hi = hi, 2.0 * hi
    raise NoBracketError(
        f"no overshooting w(0) found up to {hi:.3g} for N={problem.dim}, p={problem.p}, mu={problem.mu}"
    )


def _bisect(problem: ScalarProblem, lo: float, hi: float, tol: float = 0.0) -> tuple[float, int]:
    """
    Бисекция по w(0) до ширины скобки tol·TAIL_LEVEL²·hi (или до машинной точности).
    Растущая мода усиливает ошибку w(0) в 1/TAIL_LEVEL² раз к уровню хвоста,
    так что профиль из lo доходит до хвоста с относительной ошибкой порядка tol.
    """
    iterations = 0
    while iterations < MAX_BISECTIONS:
        if hi - lo <= tol * TAIL_LEVEL ** 2 * hi:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _overshoots(problem, mid):
            hi = mid
        else:
            lo = mid
        iterations += 1
    return lo, iterations


# -------------------------
# Unit ground state
# -------------------------
@lru_cache(maxsize=64)
def unit_ground_profile(problem: ScalarProblem, tol: float = 1e-8) -> tuple[GroundProfile, tuple[float, float, float]]:
    """
    Профиль единичного основного состояния и его нормы (mass, grad, plevel).

    tol: допустимая относительная ошибка профиля у уровня хвоста, задаёт
    остановку бисекции по w(0).
    """
    n, p, mu = problem.dim, problem.p, problem.mu
    lo, hi = _bracket(problem)
    alpha, iterations = _bisect(problem, lo, hi, tol)
    logger.debug("shooting N=%d p=%g mu=%g: w(0)=%.17g after %d bisections", n, p, mu, alpha, iterations)

    r0, curvature, _, _ = _start(problem, alpha)

    def reached_tail(r, y):
        return y[0] - TAIL_LEVEL * alpha
    reached_tail.terminal = True
    reached_tail.direction = -1

    crossed, turned = _events()
    sol = _shoot(problem, alpha, (reached_tail, turned, crossed), dense=True)
    if not sol.success:
        raise NoBracketError(f"final shooting integration failed: {sol.message}")
    if not sol.t_events[0].size:
        logger.warning(
            "shooting N=%d p=%g: profile left the decaying branch at r=%.3g before reaching the tail level",
            n, p, sol.t[-1],
        )

    r_match = float(sol.t[-1])
    w_match = float(sol.y[0, -1])
    profile = GroundProfile(
        dim=n,
        shoot_value=alpha,
        curvature=curvature,
        r0=r0,
        r_match=r_match,
        w_match=w_match,
        dense=sol.sol,
    )

    omega = sphere_area(n)
    k = n - 1.0
    tails = []
    for integrand in (
        lambda r: r ** k * profile.tail(r) ** 2,
        lambda r: r ** k * profile.tail_slope(r) ** 2,
        lambda r: r ** k * np.abs(profile.tail(r)) ** p,
    ):
        value, _ = quad(integrand, r_match, inf, epsabs=1e-16, epsrel=1e-12, limit=200)
        tails.append(value)

    body = sol.y[2:, -1]
    mass_w, grad_w, plevel_w = (float(omega * (b + t)) for b, t in zip(body, tails))
    logger.info(
        "unit ground state N=%d p=%g mu=%g: w(0)=%.12g mass=%.12g grad=%.12g plevel=%.12g",
        n, p, mu, alpha, mass_w, grad_w, plevel_w,
    )
    return profile, (mass_w, grad_w, plevel_w)


def solve_unit_ground(problem: ScalarProblem, grid: RadialGrid, tol: float = 1e-8) -> GroundState:
    if tol <= 0.0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    if grid.dim != problem.dim:
        raise ConfigurationError(f"grid is {grid.dim}-dimensional, problem is {problem.dim}-dimensional")

    profile, (mass_w, grad_w, plevel_w) = unit_ground_profile(problem, tol)
    gs = GroundState(
        problem=problem,
        w=RadialField(grid, profile(grid.nodes)),
        mass_w=mass_w,
        grad_w=grad_w,
        plevel_w=plevel_w,
        shoot_value=profile.shoot_value,
        profile=profile,
    )
    if abs(gs.pairing_defect) > 10 * tol:
        logger.warning("unit ground state: pairing identity off by %.3g (tol %.3g)", gs.pairing_defect, tol)
    return gs


# -------------------------
# Rescaling to mass a
# -------------------------
def _frequency(problem: ScalarProblem, mass_w: float, a: float) -> float:
    if not a > 0.0:
        raise ConfigurationError(f"mass must be positive, got {a}")
    exponent = 2.0 * (problem.p - 2.0) / (4.0 - problem.dim * (problem.p - 2.0))
    return (a / mass_w) ** exponent


def lambda_for_mass(gs: GroundState, a: float) -> float:
    return _frequency(gs.problem, gs.mass_w, a)


def mass_frequency(problem: ScalarProblem, a: float) -> float:
    """λ_a без сетки, по нормам единичного профиля."""
    _, (mass_w, _, _) = unit_ground_profile(problem)
    return _frequency(problem, mass_w, a)


def level_of(problem: ScalarProblem, a: float) -> float:
    """m(a) без сетки."""
    _, (mass_w, grad_w, plevel_w) = unit_ground_profile(problem)
    level_w = 0.5 * grad_w - problem.mu / problem.p * plevel_w
    return _frequency(problem, mass_w, a) ** problem.level_exponent * level_w


def rescale_to_mass(gs: GroundState, a: float, grid: RadialGrid | None = None) -> tuple[float, RadialField]:
    """(λ_a, u_a): u_a(r) = λ_a^(1/(p-2)) w(√λ_a r), выборка точно из профиля."""
    grid = grid or gs.w.grid
    lam = lambda_for_mass(gs, a)
    check_resolution(grid, 1.0 / sqrt(lam), label=f"ground state at mass {a:g}")
    profile = gs.profile.rescaled(lam, gs.problem.p)
    return lam, RadialField(grid, profile(grid.nodes))


def rescaled_profile(gs: GroundState, a: float) -> GroundProfile:
    return gs.profile.rescaled(lambda_for_mass(gs, a), gs.problem.p)


def scaled_norms(gs: GroundState, a: float) -> tuple[float, float, float]:
    """Точные (mass, grad, plevel) для u_a по кэшированным нормам w."""
    lam = lambda_for_mass(gs, a)
    factor = lam ** gs.problem.level_exponent
    return a, factor * gs.grad_w, factor * gs.plevel_w


def ground_level(gs: GroundState, a: float) -> float:
    """m(a) = λ_a^(p/(p-2) - N/2) I(w)."""
    lam = lambda_for_mass(gs, a)
    return lam ** gs.problem.level_exponent * gs.level_w


def level_curve(
    problem: ScalarProblem,
    grid: RadialGrid,
    a_values: list[float],
    *,
    tol: float = 1e-8,
    jobs: int = 1,
) -> list[LevelPoint]:
    a_values = [float(a) for a in a_values]
    if not a_values or any(not a > 0.0 for a in a_values):
        raise ConfigurationError("a_values must be positive")
    if any(b <= a for a, b in zip(a_values, a_values[1:])):
        raise ConfigurationError("a_values must be sorted ascending")

    gs = solve_unit_ground(problem, grid, tol)

    def point(a: float) -> LevelPoint:
        return LevelPoint(a=a, lambda_a=lambda_for_mass(gs, a), m=ground_level(gs, a))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        table = list(pool.map(point, a_values))
    logger.info("level curve N=%d p=%g: %d points", problem.dim, problem.p, len(table))
    return table


# -------------------------
# Independent oracle
# -------------------------
def relax_unit_ground(
    problem: ScalarProblem,
    grid: RadialGrid,
    tol: float = 1e-10,
    max_iters: int = RELAX_MAX_ITERS,
) -> GroundState:
    """
    Петвиашвили для -Δ_h w + w = μ|w|^(p-2)w на сетке (λ = 1 фиксировано).
    Нормы считаются по сетке, профиль: кусочно-линейная интерполяция.
    """
    p, mu = problem.p, problem.mu
    gamma = (p - 1.0) / (p - 2.0)
    w_star = mu ** (-1.0 / (p - 2.0))

    r = grid.nodes
    w = 2.0 * w_star * np.exp(-0.5 * r ** 2)
    w[-1] = 0.0

    for it in range(1, max_iters + 1):
        nonlin = mu * np.abs(w) ** (p - 2.0) * w
        image = solve_shifted(grid, 1.0, nonlin)
        denom = float(grid.weights @ (nonlin * w))
        numer = float(grid.weights @ (w * _shifted_apply(grid, w)))
        stab = numer / denom
        new = stab ** gamma * image
        change = float(np.max(np.abs(new - w)))
        w = new
        if change <= tol * float(np.max(np.abs(w))):
            logger.debug("relaxation converged in %d iterations", it)
            break
    else:
        logger.warning("relaxation did not converge in %d iterations (last change %.3g)", max_iters, change)

    field = RadialField(grid, w)

    profile = _interpolated_profile(grid, field)
    return GroundState(
        problem=problem,
        w=field,
        mass_w=mass(field),
        grad_w=grad_norm_sq(field),
        plevel_w=lp_norm_pow(field, p),
        shoot_value=float(w[0]),
        profile=profile,
    )


def _shifted_apply(grid: RadialGrid, w: np.ndarray) -> np.ndarray:
    return laplacian_values(grid, w) + w


def _interpolated_profile(grid: RadialGrid, field: RadialField) -> GroundProfile:
    nodes, values = grid.nodes, field.values

    def dense(r):
        return np.atleast_2d(np.interp(r, nodes, values))

    return GroundProfile(
        dim=grid.dim,
        shoot_value=float(values[0]),
        curvature=0.0,
        r0=0.0,
        r_match=float(grid.r_max),
        w_match=0.0,
        dense=dense,
    )
