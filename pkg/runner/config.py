"""
RunConfig: TOML-файл + флаги командной строки (флаги главнее).

Эффективный конфиг пишется обратно в TOML и перечитывается в равный RunConfig.
"""
from __future__ import annotations

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Literal

import tomli_w
from django.conf import settings
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from energy.domain import RegimeTag, SystemParams
from energy.services import require_regime
from flow.domain import FlowOptions
from flow.services import auto_grid
from ground.domain import ScalarProblem
from minimax.domain import MinimaxOptions
from radial.domain import RadialGrid
from radial.exceptions import ConfigurationError, StructuralError
from radial.io import parse_nodes_spec
from radial.services import suggest_grid

Command = Literal["ground", "level-curve", "minimize", "mountain-pass", "sweep", "fiber", "check"]

SCALAR_COMMANDS = ("ground", "level-curve")
SYSTEM_COMMANDS = ("minimize", "mountain-pass", "sweep", "fiber")

# режимы, в которых команда имеет смысл
REGIMES: dict[str, tuple[RegimeTag, ...]] = {
    "minimize": (RegimeTag.SUBCRITICAL_MIN, RegimeTag.SUBCRITICAL_MIN_HIGH_DIM),
    "mountain-pass": (RegimeTag.MIXED,),
    "sweep": (RegimeTag.SUPERCRITICAL,),
}


class GridSpec(BaseModel):
    """{nodes = 4096, r_max = 20.0}, nodes = "uniform(4096)" или auto = true."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    nodes: int = Field(default_factory=lambda: settings.NLSNORM_GRID_NODES, ge=3)
    r_max: float = Field(default_factory=lambda: settings.NLSNORM_GRID_RMAX, gt=0.0, allow_inf_nan=False)
    auto: bool = False

    @field_validator("nodes", mode="before")
    @classmethod
    def _nodes(cls, value):
        try:
            return parse_nodes_spec(value)
        except StructuralError as e:
            raise ValueError(str(e)) from e

    def for_system(self, params: SystemParams) -> RadialGrid:
        if self.auto:
            return auto_grid(params, min_nodes=self.nodes)
        return RadialGrid.uniform(params.dim, self.nodes, self.r_max)

    def for_scalar(self, problem: ScalarProblem, lambdas: list[float] | None = None) -> RadialGrid:
        if self.auto:
            return suggest_grid(problem.dim, lambdas or [1.0], min_nodes=self.nodes)
        return RadialGrid.uniform(problem.dim, self.nodes, self.r_max)


class FiberSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    s_min: float = -2.0
    s_max: float = 2.0
    count: int = Field(default=41, ge=2)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Command
    scalar: ScalarProblem | None = None
    system: SystemParams | None = None
    grid: GridSpec = Field(default_factory=GridSpec)
    flow: FlowOptions = FlowOptions()
    minimax: MinimaxOptions = MinimaxOptions()
    masses: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()
    a1_values: tuple[float, ...] = ()
    a2_values: tuple[float, ...] = ()
    fiber: FiberSpec = FiberSpec()
    level: Literal["quick", "full"] = "quick"
    outdir: str = Field(default_factory=lambda: settings.NLSNORM_OUTDIR)
    seed: int = 0
    jobs: int = Field(default_factory=lambda: settings.NLSNORM_JOBS, ge=1)
    tol: float = Field(default_factory=lambda: settings.NLSNORM_TOL, gt=0.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _check_problem(self) -> RunConfig:
        if self.command in SCALAR_COMMANDS and self.scalar is None:
            raise ValueError(f"{self.command} needs a [scalar] table (dim, p, mu)")
        if self.command in SYSTEM_COMMANDS and self.system is None:
            raise ValueError(f"{self.command} needs a [system] table")
        if self.command == "level-curve" and not self.masses:
            raise ValueError("level-curve needs masses")
        if self.command == "sweep" and not self.betas:
            raise ValueError("sweep needs betas")
        wanted = REGIMES.get(self.command)
        if wanted:
            # ConfigurationError наследует ValueError, pydantic оборачивает её в ValidationError
            require_regime(self.system, *wanted)
        return self


# -------------------------
# Sources
# -------------------------
def read_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"malformed TOML in {path}: {e}") from e


def _merge(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def build_config(command: str, file_data: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Файл, затем флаги; ValidationError превращается в ConfigurationError."""
    data = _merge(file_data or {}, overrides or {})
    data["command"] = command
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration: {e}") from e


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.model_dump(mode="json", exclude_none=True))


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"malformed TOML: {e}") from e
    return build_config(data.pop("command", ""), data)
