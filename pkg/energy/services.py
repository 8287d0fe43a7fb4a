from __future__ import annotations

import logging
from functools import lru_cache
from math import exp, gamma as gamma_fn, inf, isinf, pi

import numpy as np
from scipy.optimize import brentq
from scipy.stats import spearmanr

from energy.domain import FiberRow, Regime, RegimeTag, Residual, State, StateNorms, SystemParams
from ground.domain import ScalarProblem, critical_exponent, sobolev_exponent
from ground.services import unit_ground_profile
from radial.domain import RadialField, RadialGrid
from radial.exceptions import (
    ConfigurationError,
    GeometryError,
    NumericError,
    RegimeError,
    StructuralError,
)
from radial.services import (
    apply_laplacian,
    grad_norm_sq,
    integrate,
    laplacian_values,
    lp_norm_pow,
    mass,
    mixed_term,
    weighted_norm,
)

logger = logging.getLogger(__name__)

CRITICAL_EPS = 1e-12


# -------------------------
# Pointwise nonlinearities
# -------------------------
def signed_power(values: np.ndarray, exponent: float) -> np.ndarray:
    """|u|^(e-1) sign(u), т.е. |u|^(e-2) u; в нулях 0."""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(values)
    nz = values != 0.0
    out[nz] = np.sign(values[nz]) * np.abs(values[nz]) ** (exponent - 1.0)
    return out


def forces(params: SystemParams, state: State) -> tuple[np.ndarray, np.ndarray]:
    """Нелинейные части: μi|ui|^(pi-2)ui + ri β |ui|^(ri-2) ui |uj|^rj."""
    u1, u2 = state.u1.values, state.u2.values
    f1 = params.mu1 * signed_power(u1, params.p1)
    f2 = params.mu2 * signed_power(u2, params.p2)
    if params.beta:
        f1 = f1 + params.r1 * params.beta * signed_power(u1, params.r1) * np.abs(u2) ** params.r2
        f2 = f2 + params.r2 * params.beta * signed_power(u2, params.r2) * np.abs(u1) ** params.r1
    return f1, f2


# -------------------------
# Functionals
# -------------------------
def state_norms(params: SystemParams, state: State) -> StateNorms:
    return StateNorms(
        grad1=grad_norm_sq(state.u1),
        grad2=grad_norm_sq(state.u2),
        plevel1=lp_norm_pow(state.u1, params.p1),
        plevel2=lp_norm_pow(state.u2, params.p2),
        mixed=mixed_term(state.u1, state.u2, params.r1, params.r2) if params.beta else 0.0,
        mass1=mass(state.u1),
        mass2=mass(state.u2),
    )


def energy_from_norms(params: SystemParams, n: StateNorms) -> float:
    return (
        0.5 * n.kinetic
        - params.mu1 / params.p1 * n.plevel1
        - params.mu2 / params.p2 * n.plevel2
        - params.beta * n.mixed
    )


def pohozaev_from_norms(params: SystemParams, n: StateNorms) -> float:
    N = params.dim
    return (
        n.kinetic
        - params.mu1 / params.p1 * N * (params.p1 / 2.0 - 1.0) * n.plevel1
        - params.mu2 / params.p2 * N * (params.p2 / 2.0 - 1.0) * n.plevel2
        - N * params.beta * (params.coupling_degree / 2.0 - 1.0) * n.mixed
    )


def energy_J(params: SystemParams, state: State) -> float:
    return energy_from_norms(params, state_norms(params, state))


def pohozaev_Q(params: SystemParams, state: State) -> float:
    return pohozaev_from_norms(params, state_norms(params, state))


def lagrange_multipliers(params: SystemParams, state: State) -> tuple[float, float]:
    """
    λi в записи -Δui = λi ui + fi: i-е дискретное уравнение, спаренное с ui
    в весах квадратуры,
        λi = ⟨-Δ_h ui - fi, ui⟩ / ⟨ui, ui⟩.
    На точном решении дискретной системы совпадает с множителем Ньютона.
    """
    grid = state.grid
    f1, f2 = forces(params, state)
    lams = []
    for u, f in ((state.u1, f1), (state.u2, f2)):
        m = mass(u)
        if m <= 0.0:
            raise NumericError("lagrange multipliers need both components with positive mass")
        lams.append(integrate(grid, (laplacian_values(grid, u.values) - f) * u.values) / m)
    return lams[0], lams[1]


def gradient_residual(
    params: SystemParams,
    state: State,
    lambda1: float,
    lambda2: float,
) -> tuple[RadialField, RadialField]:
    """Ri = -Δui - λi ui - (нелинейность i); узел r_max всегда 0."""
    f1, f2 = forces(params, state)
    grid = state.grid
    r1 = apply_laplacian(state.u1).values - lambda1 * state.u1.values - f1
    r2 = apply_laplacian(state.u2).values - lambda2 * state.u2.values - f2
    return RadialField(grid, r1), RadialField(grid, r2)


def residual_report(params: SystemParams, state: State, lambda1: float, lambda2: float) -> Residual:
    """Абсолютная невязка и масштаб ‖-Δu‖ + |λ|‖u‖ для относительной."""
    res1, res2 = gradient_residual(params, state, lambda1, lambda2)
    return residual_from_fields(state, res1, res2, lambda1, lambda2)


def residual_from_fields(
    state: State,
    res1: RadialField,
    res2: RadialField,
    lambda1: float,
    lambda2: float,
) -> Residual:
    grid = state.grid
    scale = (
        weighted_norm(grid, apply_laplacian(state.u1).values)
        + weighted_norm(grid, apply_laplacian(state.u2).values)
        + abs(lambda1) * weighted_norm(grid, state.u1.values)
        + abs(lambda2) * weighted_norm(grid, state.u2.values)
    )
    return Residual(
        absolute1=weighted_norm(grid, res1.values),
        absolute2=weighted_norm(grid, res2.values),
        scale=scale,
    )


# -------------------------
# Fibers s*state
# -------------------------
def _fiber_exponents(params: SystemParams) -> tuple[float, float, float]:
    N = params.dim
    return (
        0.5 * N * (params.p1 - 2.0),
        0.5 * N * (params.p2 - 2.0),
        0.5 * N * (params.coupling_degree - 2.0),
    )


def fiber_energy(params: SystemParams, n: StateNorms, s: float) -> float:
    """J(s*u1, s*u2) по масштабным законам, без пересэмплирования."""
    b1, b2, bm = _fiber_exponents(params)
    return (
        0.5 * exp(2.0 * s) * n.kinetic
        - params.mu1 / params.p1 * exp(b1 * s) * n.plevel1
        - params.mu2 / params.p2 * exp(b2 * s) * n.plevel2
        - params.beta * exp(bm * s) * n.mixed
    )


def fiber_pohozaev(params: SystemParams, n: StateNorms, s: float) -> float:
    """d/ds J(s*state) = Q(s*state)."""
    b1, b2, bm = _fiber_exponents(params)
    return (
        exp(2.0 * s) * n.kinetic
        - params.mu1 / params.p1 * b1 * exp(b1 * s) * n.plevel1
        - params.mu2 / params.p2 * b2 * exp(b2 * s) * n.plevel2
        - params.beta * bm * exp(bm * s) * n.mixed
    )


def dilate_norms(params: SystemParams, n: StateNorms, s: float) -> StateNorms:
    b1, b2, bm = _fiber_exponents(params)
    e2 = exp(2.0 * s)
    return StateNorms(
        grad1=e2 * n.grad1,
        grad2=e2 * n.grad2,
        plevel1=exp(b1 * s) * n.plevel1,
        plevel2=exp(b2 * s) * n.plevel2,
        mixed=exp(bm * s) * n.mixed,
        mass1=n.mass1,
        mass2=n.mass2,
    )


def fiber_profile(params: SystemParams, state: State, s_values) -> list[FiberRow]:
    n = state_norms(params, state)
    return [FiberRow(float(s), fiber_energy(params, n, s), fiber_pohozaev(params, n, s)) for s in s_values]


def pohozaev_rescale(params: SystemParams, n: StateNorms, *, s_span: float = 20.0) -> float:
    """
    s, при котором Q(s*state) = 0 и J на слое имеет максимум
    (Q меняет знак с + на -). При нескольких таких точках берётся наибольшая.
    """
    grid = np.linspace(-s_span, s_span, int(8 * s_span) + 1)
    q = np.array([fiber_pohozaev(params, n, s) for s in grid])
    crossings = np.flatnonzero((q[:-1] > 0.0) & (q[1:] <= 0.0))
    if crossings.size == 0:
        raise GeometryError("fiber energy has no interior maximum on the scanned range")
    i = int(crossings[-1])
    if q[i + 1] == 0.0:
        return float(grid[i + 1])
    return float(brentq(lambda s: fiber_pohozaev(params, n, s), grid[i], grid[i + 1], xtol=1e-14))


# -------------------------
# Gagliardo–Nirenberg
# -------------------------
def gn_alpha(dim: int, p: float) -> float:
    return dim * (p - 2.0) / (2.0 * p)


@lru_cache(maxsize=128)
def _gn_constant(dim: int, p: float) -> float:
    if p == 2.0:
        return 1.0
    upper = sobolev_exponent(dim)
    if not isinf(upper) and abs(p - upper) <= CRITICAL_EPS:
        # Аубен–Таленти
        return (pi * dim * (dim - 2.0)) ** -0.5 * (gamma_fn(dim) / gamma_fn(0.5 * dim)) ** (1.0 / dim)
    if not 2.0 < p < upper:
        raise ConfigurationError(f"GN inequality needs 2 <= p <= 2*, got p={p} for N={dim}")

    problem = ScalarProblem(dim=dim, p=p, mu=1.0, allow_critical=True)
    _, (mass_w, grad_w, plevel_w) = unit_ground_profile(problem)
    alpha = gn_alpha(dim, p)
    value = plevel_w ** (1.0 / p) / (grad_w ** (0.5 * alpha) * mass_w ** (0.5 * (1.0 - alpha)))
    logger.debug("GN constant N=%d p=%g: %.15g", dim, p, value)
    return value


def gn_constant(dim: int, p: float, grid: RadialGrid | None = None) -> float:
    """
    Точная константа C(N,p) в |u|_p <= C |∇u|^α |u|_2^(1-α), α = N(p-2)/(2p).
    Берётся из единичного основного состояния с μ = 1 (оптимизатор частного).
    """
    if grid is not None and grid.dim != dim:
        raise StructuralError(f"grid is {grid.dim}-dimensional, requested N={dim}")
    return _gn_constant(int(dim), float(p))


def gn_quotient(u: RadialField, p: float) -> float:
    alpha = gn_alpha(u.grid.dim, p)
    return lp_norm_pow(u, p) ** (1.0 / p) / (grad_norm_sq(u) ** (0.5 * alpha) * mass(u) ** (0.5 * (1.0 - alpha)))


# -------------------------
# Linking threshold c(u1)
# -------------------------
def threshold_exponent_q(params: SystemParams) -> float:
    """Середина допустимого интервала для q."""
    N, r1, r2 = params.dim, params.r1, params.r2
    star = sobolev_exponent(N)
    lower = max(2.0 / r1, 1.0 if isinf(star) else star / (star - r2), 1.0)
    uppers = [
        inf if isinf(star) else star / r1,
        inf if r2 >= 2.0 else 2.0 / (2.0 - r2),
    ]
    denom = 2.0 * N - r2 * N + 4.0
    uppers.append(2.0 * N / denom if denom > 0.0 else inf)
    upper = min(uppers)
    if not upper > lower:
        raise RegimeError(f"empty admissible interval for q: ({lower:.6g}, {upper:.6g})")
    return 2.0 * lower if isinf(upper) else 0.5 * (lower + upper)


def threshold_constants(params: SystemParams) -> dict[str, float]:
    """q, γ и константы K1, K2 в оценке J на B_c."""
    N, p2, r1, r2 = params.dim, params.p2, params.r1, params.r2
    q = threshold_exponent_q(params)
    qp = q / (q - 1.0)
    gam = N * (r2 * qp - 2.0) / (2.0 * qp)
    if not gam > 2.0:
        raise RegimeError(f"gamma={gam:.6g} must exceed 2 for q={q:.6g}")

    alpha2 = gn_alpha(N, p2)
    k1 = (
        params.mu2 / p2
        * gn_constant(N, p2) ** p2
        * params.a2 ** (0.5 * p2 * (1.0 - alpha2))
        * 2.0 ** (0.25 * N * (p2 - 2.0))
    )
    s = r2 * qp
    alpha_s = gn_alpha(N, s)
    k2 = (
        params.beta
        * gn_constant(N, s) ** r2
        * params.a2 ** (0.5 * (1.0 - alpha_s) * r2)
        * 2.0 ** (0.5 * gam)
    )
    return {"q": q, "q_prime": qp, "gamma": gam, "K1": k1, "K2": k2}


def threshold_c(params: SystemParams, u1: RadialField) -> float:
    """
    c(u1) = min{(8K1)^(-4/(N(p2-2)-4)), (8K2)^(-2/(γ-2)) |u1|_{r1 q}^(-2 r1/(γ-2))}.
    """
    regime = classify_regime(params)
    if regime.tag != RegimeTag.MIXED:
        raise ConfigurationError(f"threshold c(u1) is defined for the Mixed regime, got {regime}")
    k = threshold_constants(params)
    N, p2 = params.dim, params.p2
    first = (8.0 * k["K1"]) ** (-4.0 / (N * (p2 - 2.0) - 4.0))
    if k["K2"] == 0.0:
        return first
    x = lp_norm_pow(u1, params.r1 * k["q"]) ** (1.0 / k["q"])
    second = (8.0 * k["K2"] * x) ** (-2.0 / (k["gamma"] - 2.0))
    return min(first, second)


# -------------------------
# Regimes
# -------------------------
def _compare(value: float, crit: float) -> int:
    if abs(value - crit) <= CRITICAL_EPS:
        return 0
    return -1 if value < crit else 1


def classify_regime(params: SystemParams) -> Regime:
    N = params.dim
    crit = critical_exponent(N)
    c1 = _compare(params.p1, crit)
    c2 = _compare(params.p2, crit)
    cr = _compare(params.coupling_degree, crit)

    if 0 in (c1, c2, cr):
        return Regime(RegimeTag.CRITICAL_UNSUPPORTED, reason=f"an exponent equals 2+4/N = {crit:.6g}")

    high_dim = N >= 5
    if c1 < 0 and c2 < 0 and cr < 0:
        if not high_dim:
            return Regime(RegimeTag.SUBCRITICAL_MIN)
        bound = 2.0 + 2.0 / (N - 2.0)
        experimental = params.p1 >= bound or params.p2 >= bound
        return Regime(
            RegimeTag.SUBCRITICAL_MIN_HIGH_DIM,
            experimental=experimental,
            reason=f"p_i >= {bound:.6g}: existence is open" if experimental else "",
        )

    if c1 > 0 and c2 > 0 and cr > 0:
        return Regime(RegimeTag.SUPERCRITICAL, experimental=high_dim, reason="N >= 5" if high_dim else "")

    if c1 < 0 < c2 and cr > 0:
        r2_bound = 4.0 if N == 1 else 2.0
        if params.r2 > r2_bound:
            return Regime(RegimeTag.MIXED, experimental=high_dim, reason="N >= 5" if high_dim else "")
        return Regime(RegimeTag.UNCLASSIFIED, reason=f"mixed exponents but r2 <= {r2_bound:g}")

    if c2 < 0 < c1:
        return Regime(RegimeTag.UNCLASSIFIED, reason="p1 supercritical with p2 subcritical: swap component labels")
    return Regime(RegimeTag.UNCLASSIFIED, reason="exponent set covered by no existence result")


def require_regime(params: SystemParams, *tags: RegimeTag) -> Regime:
    regime = classify_regime(params)
    if regime.tag not in tags:
        wanted = ", ".join(t.value for t in tags)
        raise ConfigurationError(f"regime {regime.tag.value} not supported here (expected {wanted}); {regime.reason}")
    if regime.experimental:
        logger.warning("regime %s is experimental: %s", regime.tag.value, regime.reason)
    return regime


# -------------------------
# Coercivity diagnostics
# -------------------------
def coercivity_witness(params: SystemParams, n: StateNorms, s_values=None) -> tuple[list[float], bool]:
    """J(s*state) на s ∈ [0, 6]: в докритическом режиме возрастает на второй половине."""
    s_values = np.linspace(0.0, 6.0, 25) if s_values is None else np.asarray(s_values)
    energies = [fiber_energy(params, n, s) for s in s_values]
    tail = energies[len(energies) // 2:]
    return energies, bool(np.all(np.diff(tail) > 0.0))


def coercivity_on_pohozaev(params: SystemParams, samples: list[StateNorms]) -> tuple[list[tuple[float, float]], bool]:
    """
    Каждое состояние переносится на {Q=0}; возвращает пары (|∇u|^2, J)
    и признак положительной ранговой корреляции J с кинетической энергией.
    """
    pairs = []
    for n in samples:
        s = pohozaev_rescale(params, n)
        moved = dilate_norms(params, n, s)
        pairs.append((moved.kinetic, energy_from_norms(params, moved)))
    if len(pairs) < 3:
        return pairs, True
    rho = spearmanr([g for g, _ in pairs], [j for _, j in pairs]).statistic
    return pairs, bool(rho > 0.0)
