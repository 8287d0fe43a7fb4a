from __future__ import annotations

from dataclasses import dataclass
from math import exp, inf, sqrt

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import kve

from radial.domain import RadialField

CRITICAL_EPS = 1e-12


def critical_exponent(dim: int) -> float:
    """L2-критический показатель 2 + 4/N."""
    return 2.0 + 4.0 / dim


def sobolev_exponent(dim: int) -> float:
    """2* = 2N/(N-2); для N <= 2 верхней границы нет."""
    return inf if dim <= 2 else 2.0 * dim / (dim - 2.0)


class ScalarProblem(BaseModel):
    """
    Скалярная задача -Δw + w = μ|w|^(p-2) w.

    p = 2 + 4/N отклоняется: для этого показателя уровень m(a) не определён.
    allow_critical нужен только константе Гальярдо–Ниренберга.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    dim: int = Field(ge=1)
    p: float
    mu: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    allow_critical: bool = Field(default=False, exclude=True)

    @model_validator(mode="after")
    def _check_exponent(self) -> ScalarProblem:
        if not np.isfinite(self.p) or self.p <= 2.0:
            raise ValueError(f"p must be > 2, got {self.p}")
        if self.p >= sobolev_exponent(self.dim):
            raise ValueError(f"p must be below 2* = {sobolev_exponent(self.dim):.6g} for N={self.dim}")
        if not self.allow_critical and self.is_critical:
            raise ValueError(f"p = 2+4/N = {critical_exponent(self.dim):.6g} is mass-critical and not supported")
        return self

    @property
    def is_critical(self) -> bool:
        return abs(self.p - critical_exponent(self.dim)) <= CRITICAL_EPS

    @property
    def is_supercritical(self) -> bool:
        return self.p > critical_exponent(self.dim) + CRITICAL_EPS

    @property
    def level_exponent(self) -> float:
        """Показатель λ в I(u_λ) = λ^e I(w) и |∇u_λ|^2 = λ^e |∇w|^2."""
        return self.p / (self.p - 2.0) - 0.5 * self.dim

    @property
    def kappa(self) -> float:
        """Наклон log|m(a)| по log a."""
        n, p = self.dim, self.p
        return (2.0 * p - n * (p - 2.0)) / (4.0 - n * (p - 2.0))


@dataclass(frozen=True, eq=False)
class GroundProfile:
    """
    Единичное основное состояние как функция r (независимо от сетки).

    [0, r0]      ряд Тейлора w(0) + w''(0) r^2 / 2
    [r0, r_m]    плотный вывод ODE-решателя
    [r_m, inf)   точный линейный хвост w_m (r_m/r)^ν K_ν(r)/K_ν(r_m), ν = (N-2)/2
    """
    dim: int
    shoot_value: float
    curvature: float
    r0: float
    r_match: float
    w_match: float
    dense: object
    scale: float = 1.0
    stretch: float = 1.0

    @property
    def nu(self) -> float:
        return 0.5 * (self.dim - 2.0)

    def tail(self, r: np.ndarray) -> np.ndarray:
        nu, rm = self.nu, self.r_match
        return (
            self.w_match
            * (rm / r) ** nu
            * kve(nu, r) / kve(nu, rm)
            * np.exp(-(r - rm))
        )

    def tail_slope(self, r: np.ndarray) -> np.ndarray:
        nu, rm = self.nu, self.r_match
        return (
            -self.w_match
            * (rm / r) ** nu
            * kve(nu + 1.0, r) / kve(nu, rm)
            * np.exp(-(r - rm))
        )

    def unit(self, r: np.ndarray) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=np.float64))
        out = np.empty_like(r)

        near = r <= self.r0
        far = r >= self.r_match
        mid = ~(near | far)

        out[near] = self.shoot_value + 0.5 * self.curvature * r[near] ** 2
        if np.any(mid):
            out[mid] = self.dense(r[mid])[0]
        if np.any(far):
            out[far] = self.tail(r[far])
        return out

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return self.scale * self.unit(self.stretch * r)

    def rescaled(self, lam: float, p: float) -> GroundProfile:
        """u_λ(r) = λ^(1/(p-2)) w(√λ r)."""
        return self._replace(scale=self.scale * lam ** (1.0 / (p - 2.0)), stretch=self.stretch * sqrt(lam))

    def dilated(self, s: float) -> GroundProfile:
        """(s*u)(r) = e^(sN/2) u(e^s r)."""
        return self._replace(scale=self.scale * exp(0.5 * s * self.dim), stretch=self.stretch * exp(s))

    def scaled(self, factor: float) -> GroundProfile:
        return self._replace(scale=self.scale * factor)

    def _replace(self, **changes) -> GroundProfile:
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data.update(changes)
        return GroundProfile(**data)


@dataclass(frozen=True, eq=False)
class GroundState:
    problem: ScalarProblem
    w: RadialField
    mass_w: float
    grad_w: float
    plevel_w: float
    shoot_value: float
    profile: GroundProfile

    @property
    def level_w(self) -> float:
        """I(w) = ½|∇w|^2 - (μ/p)|w|_p^p."""
        return 0.5 * self.grad_w - self.problem.mu / self.problem.p * self.plevel_w

    @property
    def pairing_defect(self) -> float:
        """(|∇w|^2 + |w|^2 - μ|w|_p^p) / (μ|w|_p^p); 0 для точного решения."""
        target = self.problem.mu * self.plevel_w
        return (self.grad_w + self.mass_w - target) / target

    @property
    def pohozaev_defect(self) -> float:
        """(|∇w|^2 - μN(p-2)/(2p)|w|_p^p) / |∇w|^2."""
        pr = self.problem
        return (self.grad_w - pr.mu * pr.dim * (pr.p - 2.0) / (2.0 * pr.p) * self.plevel_w) / self.grad_w


@dataclass(frozen=True)
class LevelPoint:
    a: float
    lambda_a: float
    m: float
