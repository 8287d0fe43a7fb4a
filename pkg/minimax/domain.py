from __future__ import annotations

from dataclasses import dataclass, field
from math import exp

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from energy.domain import State, SystemParams
from flow.domain import Solution
from radial.domain import RadialField, RadialGrid
from radial.profiles import Profile


class NewtonOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol: float = Field(default=1e-6, gt=0.0, allow_inf_nan=False)
    max_iters: int = Field(default=30, ge=1)
    damping_floor: float = Field(default=1.0 / 1024.0, gt=0.0, le=1.0)
    # отрицательные значения меньше eps·max|u| считаются шумом и обнуляются
    positivity_eps: float = Field(default=1e-8, ge=0.0)


class MinimaxOptions(BaseModel):
    """Настройки пути, выборки B и продолжения по β."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    path_nodes: int = Field(default=41, ge=3)
    s_initial: float = Field(default=1.0, gt=0.0)
    s_growth: float = Field(default=1.5, gt=1.0)
    s_max: float = Field(default=40.0, gt=0.0)
    b_dilations: int = Field(default=9, ge=1)
    b_span: float = Field(default=0.5, ge=0.0)
    beta_step: float = Field(default=0.25, gt=0.0)
    beta_step_min: float = Field(default=1e-4, gt=0.0)
    beta_step_max: float = Field(default=4.0, gt=0.0)
    max_continuation_steps: int = Field(default=200, ge=1)
    jobs: int = Field(default=1, ge=1)
    newton: NewtonOptions = NewtonOptions()


@dataclass(frozen=True)
class ExactComponent:
    """
    Профиль компоненты с точно известными нормами.

    plevel: |u|_p^p для показателя p этой компоненты; width: характерная длина.
    Дилатация пересчитывает нормы по масштабным законам.
    """
    profile: Profile
    p: float
    mass: float
    grad: float
    plevel: float
    width: float

    @property
    def dim(self) -> int:
        return self.profile.dim

    def dilated(self, s: float) -> ExactComponent:
        if s == 0.0:
            return self
        return ExactComponent(
            profile=self.profile.dilated(s),
            p=self.p,
            mass=self.mass,
            grad=exp(2.0 * s) * self.grad,
            plevel=exp(0.5 * self.dim * (self.p - 2.0) * s) * self.plevel,
            width=self.width * exp(-s),
        )

    def level(self, mu: float) -> float:
        """½|∇u|² - (μ/p)|u|_p^p."""
        return 0.5 * self.grad - mu / self.p * self.plevel

    def sample(self, grid: RadialGrid) -> RadialField:
        return RadialField(grid, self.profile(grid.nodes))


@dataclass(frozen=True, eq=False)
class Path:
    """
    Путь t -> (u_low, σ(t)*u_bar), σ(t) = s(2t-1).

    Состояния не хранятся: state(t) сэмплирует профили на сетке по запросу.
    excess: J(h(t)) - J(u_low, 0) в узлах t_values.
    """
    params: SystemParams
    grid: RadialGrid
    low: ExactComponent
    bar: ExactComponent
    s: float
    t_values: np.ndarray
    excess: np.ndarray
    base_energy: float
    c_low: float
    inf_b_excess: float

    def sigma(self, t: float) -> float:
        return self.s * (2.0 * t - 1.0)

    def component(self, t: float) -> ExactComponent:
        return self.bar.dilated(self.sigma(t))

    def state(self, t: float) -> State:
        return State(self.low.sample(self.grid), self.component(t).sample(self.grid))

    @property
    def energies(self) -> np.ndarray:
        return self.base_energy + self.excess


@dataclass(frozen=True)
class PathMax:
    t_star: float
    J_max: float
    excess_max: float
    state: State = field(repr=False)


@dataclass(frozen=True)
class BSample:
    """Точка множества B: |∇u2|² = 2c(u1)."""
    label: str
    c: float
    excess: float


@dataclass(frozen=True, eq=False)
class Continuation:
    branch: tuple[Solution, ...]
    betas: tuple[float, ...]
    reached: bool
    message: str = ""

    @property
    def last(self) -> Solution | None:
        return self.branch[-1] if self.branch else None


@dataclass(frozen=True, eq=False)
class GammaEstimate:
    gamma_upper: float
    inf_b_lower: float
    decoupled_level: float
    solution: Solution
    path: Path = field(repr=False)
    route: str = "path_max"
    slack: float = 0.0

    @property
    def bracket_ok(self) -> bool:
        j = self.solution.J_value
        return (
            self.inf_b_lower <= j + self.slack
            and j <= self.gamma_upper + self.slack
            and self.gamma_upper <= self.decoupled_level + self.slack
        )

    @property
    def succeeded(self) -> bool:
        return self.solution.converged and self.bracket_ok


@dataclass(frozen=True)
class SweepRow:
    beta: float
    converged: bool
    J: float
    lambda1: float
    lambda2: float
    Q: float
    a1: float = 1.0
    a2: float = 1.0
    iterations: int = 0
    message: str = ""


@dataclass(frozen=True)
class MassScanRow:
    a2: float
    a1_threshold: float
    a1_min: float | None
    tried: tuple[float, ...] = ()
