from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from energy.domain import Regime, State


class FlowOptions(BaseModel):
    """
    Настройки нормированного градиентного спуска.

    dt: начальный шаг в метрике предобуславливателя (-Δ + c)^(-1);
    при отказе шаг умножается на backtrack, после принятого на growth.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    dt_max: float = Field(default=1.5, gt=0.0, allow_inf_nan=False)
    backtrack: float = Field(default=0.5, gt=0.0, lt=1.0)
    growth: float = Field(default=1.2, ge=1.0, allow_inf_nan=False)
    max_backtracks: int = Field(default=40, ge=1)
    max_iters: int = Field(default=5000, ge=0)
    tol: float = Field(default=1e-6, gt=0.0, allow_inf_nan=False)
    restarts: int = Field(default=3, ge=0)
    initializers: tuple[str, ...] = ("ground_pair", "gaussian_pair", "perturbed")
    seed: int = 0
    jobs: int = Field(default=1, ge=1)


@dataclass(frozen=True, eq=False)
class Solution:
    """
    Найденное решение системы с множителями в записи -Δui = λi ui + ...

    energies / residuals: история по итерациям (для Ньютона по шагам).
    """
    state: State
    lambda1: float
    lambda2: float
    J_value: float
    Q_value: float
    residual_norm: float
    iterations: int
    regime: Regime
    converged: bool
    label: str = ""
    message: str = ""
    energies: tuple[float, ...] = field(default=(), repr=False)
    residuals: tuple[float, ...] = field(default=(), repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def is_positive(self) -> bool:
        # узел r_max всегда 0
        return bool(np.all(self.state.u1.values[:-1] > 0.0) and np.all(self.state.u2.values[:-1] > 0.0))

    @property
    def signs_ok(self) -> bool:
        return self.lambda1 < 0.0 and self.lambda2 < 0.0

    def summary(self) -> dict:
        return {
            "label": self.label,
            "converged": self.converged,
            "iterations": self.iterations,
            "regime": str(self.regime),
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "J": self.J_value,
            "Q": self.Q_value,
            "residual": self.residual_norm,
            "message": self.message,
        }


@dataclass(frozen=True, eq=False)
class MultiStart:
    """Результат мультистарта: лучший запуск и все запуски."""
    best: Solution
    runs: tuple[Solution, ...]

    @property
    def converged(self) -> bool:
        return self.best.converged

    @property
    def energy_spread(self) -> float:
        values = [run.J_value for run in self.runs if run.converged]
        return float(max(values) - min(values)) if values else float("nan")
