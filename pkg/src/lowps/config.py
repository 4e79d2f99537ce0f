"""Validated run configuration. Unknown keys are rejected."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ParseError, PreconditionError
from .grid import DEFAULT_CAP, GridSpec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Strict):
    re_min: float = -1.5
    re_max: float = 1.5
    im_min: float = -1.5
    im_max: float = 1.5
    n_re: int = Field(50, ge=1)
    n_im: int = Field(50, ge=1)
    cap: int = Field(DEFAULT_CAP, ge=1)

    def spec(self) -> GridSpec:
        return GridSpec(self.re_min, self.re_max, self.im_min, self.im_max, self.n_re, self.n_im, self.cap)


class Common(_Strict):
    seed: int = 0
    threads: Optional[int] = Field(None, ge=1)
    out_dir: str = "."


class GridCommand(Common):
    matrix: Optional[str] = None
    u: Optional[str] = None
    v: Optional[str] = None
    mode: Literal["exact", "truncated", "randomized"] = "exact"
    l: Optional[int] = Field(None, ge=1)
    k: Optional[int] = Field(None, ge=2)
    delta: float = Field(0.2, gt=0, le=1)
    eps: list[float] = [0.1]
    grid: GridConfig = GridConfig()
    oracle: bool = False

    @model_validator(mode="after")
    def _inputs(self):
        if self.matrix is None and (self.u is None or self.v is None):
            raise ValueError("give either matrix or both u and v")
        return self


class StabilityCommand(Common):
    matrix: Optional[str] = None
    u: Optional[str] = None
    v: Optional[str] = None
    task: Literal["d2i", "kreiss", "kreiss_c", "radius", "abscissa"] = "d2i"
    eps: Optional[float] = Field(None, gt=0)
    l: Optional[int] = Field(None, ge=1)
    tol: float = Field(1e-12, gt=0)


class KoopmanCommand(Common):
    traj: str
    dt: Optional[float] = None
    bandwidth: Optional[float] = Field(None, gt=0)
    r: int = Field(20, ge=1)
    gamma: float = Field(1e-6, gt=0)
    grid: GridConfig = GridConfig()
    kreiss_eps: list[float] = []
    solver: Literal["auto", "dense", "arnoldi"] = "auto"


class SimulateCommand(Common):
    process: Literal["ou", "logistic"] = "ou"
    n: int = Field(10_000, ge=3)
    drift: list[list[float]] = [[-0.7, 0.3], [0.3, -0.7]]
    sigma: float = Field(1.0, gt=0)
    dt: float = Field(0.1, gt=0)
    noise_exponent: int = Field(20, ge=2)


class BenchCommand(Common):
    dims: list[int] = [200, 500, 1000]
    ranks: list[int] = [10]
    grid_m: int = Field(2500, ge=1)
    trials: int = Field(3, ge=1)
    dense_points: Optional[int] = Field(None, ge=1)


COMMANDS = {
    "grid": GridCommand,
    "stability": StabilityCommand,
    "koopman": KoopmanCommand,
    "simulate": SimulateCommand,
    "bench": BenchCommand,
}


def load(command: str, file_values: dict, overrides: dict):
    """Merge config-file values with command-line overrides and validate."""
    merged = dict(file_values)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "grid" and isinstance(value, dict):
            merged["grid"] = {**merged.get("grid", {}), **value}
        else:
            merged[key] = value
    try:
        return COMMANDS[command].model_validate(merged)
    except ValidationError as exc:
        # schema problems in the file are parse errors, bad values are preconditions
        kinds = {e["type"] for e in exc.errors()}
        if kinds & {"extra_forbidden", "missing", "model_type", "dict_type"}:
            raise ParseError(f"invalid {command} config: {exc}") from exc
        raise PreconditionError(f"invalid {command} config: {exc}") from exc
