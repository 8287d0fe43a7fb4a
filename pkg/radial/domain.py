from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np

from radial.exceptions import NumericError, StructuralError

MIN_NODES = 64


def sphere_area(dim: int) -> float:
    """
    Площадь единичной сферы в R^N.
    Для N=1 берём 2: радиальное поле на [0, r_max] отражается на всю прямую.
    """
    if dim < 1:
        raise StructuralError(f"dimension must be >= 1, got {dim}")
    if dim == 1:
        return 2.0
    return 2.0 * pi ** (dim / 2.0) / gamma(dim / 2.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """
    Равномерная радиальная сетка на [0, r_max].

    nodes[0] = 0, nodes[-1] = r_max. Все операторы (квадратура, лапласиан)
    рассчитаны на постоянный шаг h.
    """
    dim: int
    r_max: float
    nodes: np.ndarray
    sphere_area: float = field(init=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=np.float64).copy()
        if nodes.ndim != 1 or nodes.size < MIN_NODES:
            raise StructuralError(f"grid needs at least {MIN_NODES} nodes, got {nodes.size}")
        if not np.all(np.isfinite(nodes)):
            raise NumericError("grid nodes must be finite")
        if nodes[0] != 0.0:
            raise StructuralError("first grid node must be 0")
        steps = np.diff(nodes)
        if np.any(steps <= 0.0):
            raise StructuralError("grid nodes must be strictly increasing")
        h = float(steps.mean())
        if np.max(np.abs(steps - h)) > 1e-9 * max(h, 1.0):
            raise StructuralError("only uniform grids are supported")
        if abs(nodes[-1] - self.r_max) > 1e-12 * max(self.r_max, 1.0):
            raise StructuralError(f"last node {nodes[-1]} != r_max {self.r_max}")
        nodes[-1] = float(self.r_max)
        nodes.setflags(write=False)

        omega = sphere_area(self.dim)
        # трапеции с радиальной мерой omega * r^(N-1)
        w = np.full(nodes.size, h)
        w[0] = w[-1] = 0.5 * h
        w = w * omega * nodes ** (self.dim - 1)
        w.setflags(write=False)

        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "sphere_area", omega)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, dim: int, count: int = 4096, r_max: float = 20.0) -> RadialGrid:
        if r_max <= 0.0 or not np.isfinite(r_max):
            raise StructuralError(f"r_max must be positive and finite, got {r_max}")
        return cls(dim=int(dim), r_max=float(r_max), nodes=np.linspace(0.0, float(r_max), int(count)))

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def step(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    def same_as(self, other: RadialGrid) -> bool:
        if self is other:
            return True
        return (
            self.dim == other.dim
            and self.size == other.size
            and self.r_max == other.r_max
        )

    def __repr__(self) -> str:
        return f"RadialGrid(dim={self.dim}, nodes={self.size}, r_max={self.r_max})"


@dataclass(frozen=True, eq=False)
class RadialField:
    """
    Радиальная функция, заданная значениями в узлах сетки.

    Значение в r_max всегда 0 (однородное условие Дирихле): конструктор
    обнуляет последний узел.
    """
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != self.grid.nodes.shape:
            raise StructuralError(
                f"field has {values.size} values, grid has {self.grid.size} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise NumericError("field values must be finite")
        values[-1] = 0.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: RadialGrid) -> RadialField:
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid: RadialGrid, fn) -> RadialField:
        return cls(grid, fn(grid.nodes))

    def scaled(self, factor: float) -> RadialField:
        return RadialField(self.grid, factor * self.values)

    def __repr__(self) -> str:
        return f"RadialField({self.grid!r}, max={float(np.max(np.abs(self.values))):.6g})"
