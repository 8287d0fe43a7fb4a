from __future__ import annotations

from dataclasses import dataclass
from math import exp, log, pi, sqrt
from typing import Protocol

import numpy as np

from radial.domain import RadialField, RadialGrid
from radial.exceptions import StructuralError


class Profile(Protocol):
    """Радиальный профиль, который можно вычислить в любой точке r >= 0."""

    dim: int

    def __call__(self, r: np.ndarray) -> np.ndarray: ...

    def dilated(self, s: float) -> "Profile": ...


def sample(profile: Profile, grid: RadialGrid) -> RadialField:
    if profile.dim != grid.dim:
        raise StructuralError(f"profile is {profile.dim}-dimensional, grid is {grid.dim}-dimensional")
    return RadialField(grid, profile(grid.nodes))


@dataclass(frozen=True)
class GaussianProfile:
    """
    u(r) = amplitude * exp(-r^2 / (2 width^2)).
    Все нормы известны в замкнутом виде, дилатация точная.
    """
    dim: int
    amplitude: float = 1.0
    width: float = 1.0

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return self.amplitude * np.exp(-0.5 * (r / self.width) ** 2)

    def dilated(self, s: float) -> GaussianProfile:
        return GaussianProfile(
            dim=self.dim,
            amplitude=exp(0.5 * s * self.dim) * self.amplitude,
            width=self.width * exp(-s),
        )

    def scaled(self, factor: float) -> GaussianProfile:
        return GaussianProfile(self.dim, factor * self.amplitude, self.width)

    @property
    def mass(self) -> float:
        return self.amplitude ** 2 * pi ** (0.5 * self.dim) * self.width ** self.dim

    @property
    def grad_norm_sq(self) -> float:
        return 0.5 * self.dim * self.amplitude ** 2 * pi ** (0.5 * self.dim) * self.width ** (self.dim - 2)

    def lp_norm_pow(self, p: float) -> float:
        return abs(self.amplitude) ** p * (2.0 * pi * self.width ** 2 / p) ** (0.5 * self.dim)

    def with_mass(self, a: float) -> GaussianProfile:
        return self.scaled(sqrt(a / self.mass))

    def with_grad_norm_sq(self, g: float) -> GaussianProfile:
        """Дилатация с сохранением массы до заданной кинетической энергии."""
        # |∇(s*u)|^2 = e^{2s} |∇u|^2
        return self.dilated(0.5 * log(g / self.grad_norm_sq))
