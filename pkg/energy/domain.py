from __future__ import annotations

from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

        def __format__(self, spec: str) -> str:
            return str(self.value).__format__(spec)

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ground.domain import ScalarProblem, sobolev_exponent
from radial.domain import RadialField, RadialGrid
from radial.exceptions import StructuralError


class SystemParams(BaseModel):
    """
    Параметры системы
        -Δu1 = λ1 u1 + μ1|u1|^(p1-2)u1 + r1 β|u1|^(r1-2)|u2|^r2 u1
        -Δu2 = λ2 u2 + μ2|u2|^(p2-2)u2 + r2 β|u1|^r1|u2|^(r2-2) u2
    с массами |u1|^2 = a1, |u2|^2 = a2.

    Критические показатели допускаются: classify_regime помечает их
    CriticalUnsupported, а решатели отказываются работать.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    dim: int = Field(ge=1)
    p1: float
    p2: float
    r1: float = Field(gt=0.0, allow_inf_nan=False)
    r2: float = Field(gt=0.0, allow_inf_nan=False)
    mu1: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    mu2: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    beta: float = Field(default=0.0, ge=0.0, allow_inf_nan=False)
    a1: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    a2: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _check_exponents(self) -> SystemParams:
        upper = sobolev_exponent(self.dim)
        for name in ("p1", "p2"):
            value = getattr(self, name)
            if not np.isfinite(value) or not 2.0 < value < upper:
                raise ValueError(f"{name}={value} must lie in (2, {upper:.6g})")
        total = self.r1 + self.r2
        if not 2.0 <= total < upper:
            raise ValueError(f"r1+r2={total} must lie in [2, {upper:.6g})")
        return self

    @property
    def coupling_degree(self) -> float:
        return self.r1 + self.r2

    def component(self, i: int) -> tuple[float, float, float, float]:
        """(p, μ, r, a) компоненты 1 или 2."""
        if i == 1:
            return self.p1, self.mu1, self.r1, self.a1
        if i == 2:
            return self.p2, self.mu2, self.r2, self.a2
        raise ValueError(f"component must be 1 or 2, got {i}")

    def scalar_problem(self, i: int, *, allow_critical: bool = False) -> ScalarProblem:
        p, mu, _, _ = self.component(i)
        return ScalarProblem(dim=self.dim, p=p, mu=mu, allow_critical=allow_critical)

    def swapped(self) -> SystemParams:
        return self.model_copy(update={
            "p1": self.p2, "p2": self.p1,
            "r1": self.r2, "r2": self.r1,
            "mu1": self.mu2, "mu2": self.mu1,
            "a1": self.a2, "a2": self.a1,
        })

    def with_beta(self, beta: float) -> SystemParams:
        return SystemParams(**{**self.model_dump(), "beta": beta})

    def with_masses(self, a1: float | None = None, a2: float | None = None) -> SystemParams:
        return SystemParams(**{
            **self.model_dump(),
            "a1": self.a1 if a1 is None else a1,
            "a2": self.a2 if a2 is None else a2,
        })

    @property
    def is_swap_symmetric(self) -> bool:
        return (self.p1, self.mu1, self.r1, self.a1) == (self.p2, self.mu2, self.r2, self.a2)


@dataclass(frozen=True, eq=False)
class State:
    u1: RadialField
    u2: RadialField

    def __post_init__(self) -> None:
        if not self.u1.grid.same_as(self.u2.grid):
            raise StructuralError("state components must share one grid")

    @property
    def grid(self) -> RadialGrid:
        return self.u1.grid

    def swapped(self) -> State:
        return State(self.u2, self.u1)

    def component(self, i: int) -> RadialField:
        return self.u1 if i == 1 else self.u2


class RegimeTag(StrEnum):
    SUBCRITICAL_MIN = "SubcriticalMin"
    SUBCRITICAL_MIN_HIGH_DIM = "SubcriticalMinHighDim"
    MIXED = "Mixed"
    SUPERCRITICAL = "Supercritical"
    CRITICAL_UNSUPPORTED = "CriticalUnsupported"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    experimental: bool = False
    reason: str = ""

    @property
    def is_subcritical(self) -> bool:
        return self.tag in (RegimeTag.SUBCRITICAL_MIN, RegimeTag.SUBCRITICAL_MIN_HIGH_DIM)

    def __str__(self) -> str:
        return f"{self.tag.value}{' (experimental)' if self.experimental else ''}"


@dataclass(frozen=True)
class StateNorms:
    """Интегралы, через которые J, Q и профиль на слое выражаются точно."""
    grad1: float
    grad2: float
    plevel1: float
    plevel2: float
    mixed: float
    mass1: float
    mass2: float

    @property
    def kinetic(self) -> float:
        return self.grad1 + self.grad2


@dataclass(frozen=True)
class FiberRow:
    s: float
    J: float
    Q: float


@dataclass(frozen=True)
class Residual:
    """Невязка системы во взвешенной L2-норме."""
    absolute1: float
    absolute2: float
    scale: float

    @property
    def absolute(self) -> float:
        return float(np.hypot(self.absolute1, self.absolute2))

    @property
    def relative(self) -> float:
        return self.absolute / self.scale if self.scale > 0.0 else self.absolute
