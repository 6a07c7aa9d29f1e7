"""Experiment configuration: schema, validation and loading."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

__all__ = [
    "ConfigError",
    "ProblemConfig",
    "load_config",
    "config_hash",
    "EXPERIMENTS",
]

EXPERIMENTS = ("gauss", "capacity", "balayage", "exhaustion", "thinness", "mass-deficiency")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(field path, message)`` pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{p}: {m}" for p, m in problems))


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryConfig(_Model):
    """Either a sampled shape, inline points or a points file.

    ``extra_points`` are appended after the sampled or loaded points; the set
    selector ``{"kind": "base"}`` picks the points before them.
    """

    shape: dict | None = None
    N: int | None = Field(default=None, ge=2)
    random: bool = False
    points: list[list[float]] | None = None
    points_file: str | None = None
    extra_points: list[list[float]] = []
    min_separation: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _one_source(self):
        given = [k for k in ("shape", "points", "points_file") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of 'shape', 'points' or 'points_file'")
        if self.shape is not None:
            if self.N is None:
                raise ValueError("'N' is required with 'shape'")
            if "kind" not in self.shape:
                raise ValueError("'shape' needs a 'kind'")
        return self


class KernelConfig(_Model):
    kind: Literal["riesz", "logarithmic", "explicit"]
    alpha: float | None = None
    dim: int | None = None
    diagonal: Literal["cell", "fixed"] = "cell"
    # a number, or "surface" for the hexagonal surface-cell calibration
    c_reg: Union[float, Literal["surface"]] = 1.0
    diagonal_values: list[float] | None = None
    margin: float = 0.05
    matrix: list[list[float]] | None = None
    matrix_file: str | None = None

    @model_validator(mode="after")
    def _needs(self):
        if self.kind == "riesz" and (self.alpha is None or self.dim is None):
            raise ValueError("riesz kernel needs 'alpha' and 'dim'")
        if self.kind == "explicit" and (self.matrix is None) == (self.matrix_file is None):
            raise ValueError("explicit kernel needs exactly one of 'matrix' or 'matrix_file'")
        if self.diagonal == "fixed" and self.kind != "explicit" and self.diagonal_values is None:
            raise ValueError("fixed diagonal rule needs 'diagonal_values'")
        if isinstance(self.c_reg, float) and not self.c_reg > 0:
            raise ValueError("'c_reg' must be positive")
        return self


class SetConfig(_Model):
    """Index set selector.

    kinds: ``all``; ``base`` (points before ``extra_points``); ``indices``;
    ``range`` (``[start, stop)``); ``coordinate`` (points with
    ``low <= x[axis] <= high``, restricted to the base points).
    """

    kind: Literal["all", "base", "indices", "range", "coordinate"] = "all"
    indices: list[int] | None = None
    start: int | None = None
    stop: int | None = None
    axis: int = 0
    low: float = -math.inf
    high: float = math.inf

    @model_validator(mode="after")
    def _needs(self):
        if self.kind == "indices" and not self.indices:
            raise ValueError("'indices' selector needs a nonempty 'indices' list")
        if self.kind == "range" and (self.start is None or self.stop is None):
            raise ValueError("'range' selector needs 'start' and 'stop'")
        return self


class MeasureConfig(_Model):
    """Atomic measure: ``masses[j]`` at carrier index ``indices[j]``
    (negative indices count from the end)."""

    indices: list[int]
    masses: list[float]

    @model_validator(mode="after")
    def _lengths(self):
        if len(self.indices) != len(self.masses):
            raise ValueError("'indices' and 'masses' must have the same length")
        return self


class FieldConfig(_Model):
    form: Literal["zero", "minus-potential", "psi-plus-potential"] = "zero"
    zeta: MeasureConfig | None = None
    # entries may be the string "inf"
    psi: list[Union[float, Literal["inf"]]] | None = None
    theta: MeasureConfig | None = None

    @model_validator(mode="after")
    def _needs(self):
        if self.form == "minus-potential" and self.zeta is None:
            raise ValueError("minus-potential field needs 'zeta'")
        return self


class SolverConfig(_Model):
    tol: float = Field(default=1e-9, gt=0)
    max_iter: int = Field(default=100_000, ge=1)


class ChainConfig(_Model):
    """``by-coordinate`` takes stage ``j`` as the points of the set with
    ``x[axis] <= cutoffs[j]``; the other rules split the set into ``stages``
    growing pieces."""

    rule: Literal["by-distance", "by-index", "random", "by-coordinate"] = "by-distance"
    stages: int = Field(default=5, ge=1)
    axis: int = 0
    cutoffs: list[float] | None = None

    @model_validator(mode="after")
    def _needs(self):
        if self.rule == "by-coordinate" and not self.cutoffs:
            raise ValueError("by-coordinate chain needs 'cutoffs'")
        return self


class ParamsConfig(_Model):
    """Experiment parameters; each experiment reads only its own keys."""

    chain: ChainConfig = ChainConfig()
    q: float | None = None
    theta_floor: float | None = None
    theta_ratio: float | None = None
    origin: list[float] | None = None
    truncation_axis: int = 0
    truncations: list[float] | None = None
    mu: MeasureConfig | None = None
    super_set: SetConfig | None = None
    battery_trials: int = Field(default=50, ge=0)
    characterization_tol: float = Field(default=1e-6, gt=0)

    @field_validator("q")
    @classmethod
    def _q(cls, v):
        if v is not None and not v > 1:
            raise ValueError("annulus ratio q must exceed 1")
        return v


class OutputConfig(_Model):
    dir: str = "out"
    name: str | None = None
    formats: list[Literal["json", "csv"]] = ["json", "csv"]


class ProblemConfig(_Model):
    experiment: Literal["gauss", "capacity", "balayage", "exhaustion", "thinness", "mass-deficiency"]
    kernel: KernelConfig
    geometry: GeometryConfig | None = None
    set: SetConfig = SetConfig()
    field: FieldConfig = FieldConfig()
    solver: SolverConfig = SolverConfig()
    params: ParamsConfig = ParamsConfig()
    output: OutputConfig = OutputConfig()
    seed: int = 0

    @model_validator(mode="after")
    def _cross(self):
        if self.kernel.kind != "explicit" and self.geometry is None:
            raise ValueError(f"{self.kernel.kind} kernel needs a 'geometry'")
        if self.experiment == "thinness":
            if self.kernel.kind != "riesz":
                raise ValueError("thinness needs a riesz kernel")
            if self.params.q is None:
                raise ValueError("thinness needs 'params.q'")
        if self.experiment == "mass-deficiency":
            if not self.params.truncations:
                raise ValueError("mass-deficiency needs 'params.truncations'")
            if self.field.form != "minus-potential":
                raise ValueError("mass-deficiency needs a minus-potential field")
        if self.experiment == "balayage" and self.params.mu is None and self.field.zeta is None:
            raise ValueError("balayage needs 'params.mu' (or a field 'zeta')")
        return self


def _path(loc) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def _check_files(cfg: ProblemConfig, base: Path) -> list[tuple[str, str]]:
    out = []
    refs = [("kernel.matrix_file", cfg.kernel.matrix_file)]
    if cfg.geometry is not None:
        refs.append(("geometry.points_file", cfg.geometry.points_file))
    for name, ref in refs:
        if ref is not None and not (base / ref).is_file():
            out.append((name, f"file not found: {ref}"))
    return out


def parse_config(data: dict, base: Path | None = None) -> ProblemConfig:
    """Validate a config mapping; raises :class:`ConfigError` with field paths."""
    try:
        cfg = ProblemConfig.model_validate(data)
    except ValidationError as err:
        problems = []
        for e in err.errors():
            loc = tuple(p for p in e["loc"] if not (isinstance(p, str) and p.startswith("function-after")))
            problems.append((_path(loc), e["msg"]))
        raise ConfigError(problems) from None
    problems = _check_files(cfg, base or Path("."))
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, *, seed: int | None = None, tol: float | None = None) -> tuple[ProblemConfig, dict]:
    """Read, override and validate a config file.

    Returns the validated config and the effective raw mapping (with the
    overrides applied), which is what the report hash covers.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError([("<file>", f"config not found: {path}")]) from None
    except json.JSONDecodeError as err:
        raise ConfigError([("<file>", f"not valid JSON: {err}")]) from None
    if not isinstance(data, dict):
        raise ConfigError([("<root>", "config must be a JSON object")])
    data = copy.deepcopy(data)
    if seed is not None:
        data["seed"] = seed
    if tol is not None:
        data.setdefault("solver", {})
        if not isinstance(data["solver"], dict):
            raise ConfigError([("solver", "must be an object")])
        data["solver"]["tol"] = tol
    return parse_config(data, path.parent), data


def config_hash(data: dict) -> str:
    """sha256 of the canonical JSON text of a config mapping."""
    text = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(text.encode()).hexdigest()
