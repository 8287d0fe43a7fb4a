from __future__ import annotations

import logging
from functools import lru_cache
from math import ceil, exp, log2, sqrt

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded
from scipy import sparse

from radial.domain import RadialField, RadialGrid
from radial.exceptions import NumericError, ResolutionError, StructuralError

logger = logging.getLogger(__name__)

# Одно обращение dilate не растягивает/сжимает больше чем в e^2 раз.
MAX_DILATION_STEP = 2.0

# Сколько узлов должно приходиться на характерную ширину 1/sqrt(|lambda|).
NODES_PER_WIDTH = 40
# r_max >= DECAY_WIDTHS / sqrt(|lambda|)
DECAY_WIDTHS = 15.0


# -------------------------
# Quadrature & norms
# -------------------------
def integrate(grid: RadialGrid, f: np.ndarray) -> float:
    """Трапеции для ∫ f(r) ω r^(N-1) dr на [0, r_max]."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != grid.nodes.shape:
        raise StructuralError(f"integrand has {f.size} values, grid has {grid.size} nodes")
    if not np.all(np.isfinite(f)):
        raise NumericError("integrand must be finite")
    return float(grid.weights @ f)


def mass(u: RadialField) -> float:
    return integrate(u.grid, u.values * u.values)


def grad_norm_sq(u: RadialField) -> float:
    """
    |∇u|_2^2 на разнесённой сетке:
        ω Σ r_{i+1/2}^(N-1) (u_{i+1} - u_i)^2 / h
    С apply_laplacian в весах трапеций совпадает с точностью O(h^N):
    для N >= 2 вес узла 0 нулевой, и строка r = 0 в спаривание не входит.
    """
    grid = u.grid
    h = grid.step
    du = np.diff(u.values)
    flux_area = grid.sphere_area * grid.midpoints ** (grid.dim - 1)
    return float(np.sum(flux_area * du * du) / h)


def lp_norm_pow(u: RadialField, p: float) -> float:
    if not np.isfinite(p):
        raise NumericError(f"exponent must be finite, got {p}")
    if p == 2.0:
        return mass(u)
    return integrate(u.grid, np.abs(u.values) ** p)


def mixed_term(u1: RadialField, u2: RadialField, r1: float, r2: float) -> float:
    """∫ |u1|^r1 |u2|^r2 dx."""
    if not u1.grid.same_as(u2.grid):
        raise StructuralError("mixed_term needs both fields on the same grid")
    return integrate(u1.grid, np.abs(u1.values) ** r1 * np.abs(u2.values) ** r2)


def weighted_norm(grid: RadialGrid, f: np.ndarray) -> float:
    """Взвешенная L2-норма массива в узлах (для невязок)."""
    return sqrt(max(integrate(grid, np.asarray(f) ** 2), 0.0))


# -------------------------
# Laplacian
# -------------------------
@lru_cache(maxsize=32)
def laplacian_bands(grid: RadialGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Трёхдиагональная матрица -Δ в потоковой форме:
        (-Δu)_i = -[r_{i+1/2}^(N-1)(u_{i+1}-u_i) - r_{i-1/2}^(N-1)(u_i-u_{i-1})] / (h^2 r_i^(N-1))
    В нуле предел -N u''(0) ≈ -2N (u_1 - u_0)/h^2. Последняя строка нулевая (Дирихле).

    Возвращает (lower, diag, upper): lower[i] при u_{i-1}, upper[i] при u_{i+1}.
    """
    m = grid.size
    if m < 3:
        raise StructuralError("laplacian needs at least 3 nodes")
    h2 = grid.step ** 2
    k = grid.dim - 1
    i = np.arange(1, m - 1, dtype=np.float64)

    lower = np.zeros(m)
    diag = np.zeros(m)
    upper = np.zeros(m)

    left = ((i - 0.5) / i) ** k
    right = ((i + 0.5) / i) ** k
    lower[1:-1] = -left / h2
    upper[1:-1] = -right / h2
    diag[1:-1] = (left + right) / h2

    diag[0] = 2.0 * grid.dim / h2
    upper[0] = -2.0 * grid.dim / h2

    for arr in (lower, diag, upper):
        arr.setflags(write=False)
    return lower, diag, upper


def laplacian_values(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    lower, diag, upper = laplacian_bands(grid)
    out = diag * values
    out[1:] += lower[1:] * values[:-1]
    out[:-1] += upper[:-1] * values[1:]
    out[-1] = 0.0
    return out


def apply_laplacian(u: RadialField) -> RadialField:
    """-Δu, второй порядок точности; в r_max значение 0."""
    return RadialField(u.grid, laplacian_values(u.grid, u.values))


def laplacian_matrix(grid: RadialGrid) -> sparse.csr_matrix:
    """-Δ на внутренних неизвестных 0..M-2 (узел r_max исключён)."""
    lower, diag, upper = laplacian_bands(grid)
    n = grid.size - 1
    return sparse.diags(
        [lower[1:n], diag[:n], upper[: n - 1]],
        offsets=[-1, 0, 1],
        shape=(n, n),
        format="csr",
    )


def solve_shifted(grid: RadialGrid, shift: float | np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """
    Решает (-Δ + shift) x = rhs с условием x(r_max) = 0.
    shift: число или массив по узлам.
    """
    lower, diag, upper = laplacian_bands(grid)
    n = grid.size - 1
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[: n - 1]
    ab[1, :] = diag[:n] + (shift[:n] if np.ndim(shift) else shift)
    ab[2, :-1] = lower[1:n]
    x = np.zeros(grid.size)
    x[:n] = solve_banded((1, 1), ab, np.asarray(rhs, dtype=np.float64)[:n])
    return x


# -------------------------
# Dilation s*u
# -------------------------
def _even_interpolant(u: RadialField) -> PchipInterpolator:
    # чётное продолжение на [-r_max, r_max]: производная в нуле получается нулевой
    r = u.grid.nodes
    x = np.concatenate((-r[:0:-1], r))
    y = np.concatenate((u.values[:0:-1], u.values))
    return PchipInterpolator(x, y, extrapolate=False)


def _dilate_once(u: RadialField, s: float) -> RadialField:
    grid = u.grid
    targets = exp(s) * grid.nodes
    values = _even_interpolant(u)(np.minimum(targets, grid.r_max))
    values = np.where(targets > grid.r_max, 0.0, values)
    return RadialField(grid, exp(0.5 * s * grid.dim) * values)


def dilate(u: RadialField, s: float) -> RadialField:
    """
    (s*u)(r) = e^(sN/2) u(e^s r), монотонная кубическая интерполяция.
    Масса сохраняется; за пределами исходного носителя: 0.
    """
    if not np.isfinite(s):
        raise NumericError(f"dilation parameter must be finite, got {s}")
    if s == 0.0:
        return u
    steps = max(1, ceil(abs(s) / MAX_DILATION_STEP))
    out = u
    for _ in range(steps):
        out = _dilate_once(out, s / steps)
    return out


# -------------------------
# Resolution policy
# -------------------------
def check_resolution(grid: RadialGrid, width: float, *, label: str = "field") -> None:
    """
    width: характерная ширина 1/sqrt(|lambda|).
    Слишком узко для шага сетки -> ResolutionError; слишком широко для r_max -> warning.
    """
    h = grid.step
    if width < 10.0 * h:
        raise ResolutionError(
            f"{label}: width {width:.3g} is resolved by only {width / h:.1f} nodes (h={h:.3g})"
        )
    if width < NODES_PER_WIDTH * h:
        logger.warning("%s: width %.3g covers %.1f nodes, expect reduced accuracy", label, width, width / h)
    if DECAY_WIDTHS * width > grid.r_max:
        logger.warning(
            "%s: r_max=%.3g is below %.0f decay widths (%.3g); truncation error is not negligible",
            label, grid.r_max, DECAY_WIDTHS, DECAY_WIDTHS * width,
        )


def suggest_grid(
    dim: int,
    lambdas: list[float],
    *,
    min_nodes: int = 4096,
    max_nodes: int = 1 << 17,
) -> RadialGrid:
    """
    Сетка под набор частот |lambda|: r_max покрывает самый медленный спад,
    шаг разрешает самый узкий профиль.
    """
    ks = [sqrt(abs(lam)) for lam in lambdas if lam and np.isfinite(lam)]
    if not ks:
        return RadialGrid.uniform(dim, min_nodes, 20.0)
    r_max = max(DECAY_WIDTHS / min(ks), 1.0)
    h = 1.0 / (NODES_PER_WIDTH * max(ks))
    wanted = int(ceil(r_max / h)) + 1
    count = max(min_nodes, 1 << int(ceil(log2(wanted))))
    if count > max_nodes:
        logger.warning("suggest_grid: %d nodes wanted, capped at %d", count, max_nodes)
        count = max_nodes
    logger.debug("suggest_grid: N=%d r_max=%.4g nodes=%d", dim, r_max, count)
    return RadialGrid.uniform(dim, count, r_max)
