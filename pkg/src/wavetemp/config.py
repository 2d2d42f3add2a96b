"""Declarative experiment description consumed by the command line."""
from __future__ import annotations

import json
from math import gcd
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    dim: Literal[1] = 1
    extents: list[tuple[float, float]]
    points: list[int]
    boundary: Literal["periodic", "dirichlet-zero"]


class ConstantsSpec(_Strict):
    hbar: float = Field(1.0, gt=0)
    mass: float = Field(1.0, gt=0)
    k_b: float = Field(1.0, gt=0)
    gamma: Optional[float] = Field(None, gt=0)
    node_epsilon: float = Field(1e-10, gt=0)


class GaussianState(_Strict):
    kind: Literal["gaussian"]
    a: float = Field(1.0, gt=0, description="GaussianPacketParams: a > 0")


class BoxState(_Strict):
    kind: Literal["box"]
    n: int = 1
    a: float = Field(1.0, gt=0, description="BoxParams: a > 0")

    @model_validator(mode="after")
    def _n_positive(self):
        if self.n < 1:
            raise ValueError(f"BoxParams: n >= 1 (got {self.n})")
        return self


InitialState = Annotated[Union[GaussianState, BoxState], Field(discriminator="kind")]


class PotentialSpec(_Strict):
    kind: Literal["zero", "box"] = "zero"


class SolverSpec(_Strict):
    scheme: Literal["split_step", "crank_nicolson"]
    dt: float = Field(gt=0)
    steps: Optional[int] = Field(None, ge=0)
    snapshot_every: Optional[int] = Field(None, ge=1)


class LedgerSpec(_Strict):
    eps: list[float] = Field(min_length=1)
    perturbation: Literal["tilt", "scaling"] = "tilt"
    probe_time: float = 0.0


class AdditivitySpec(_Strict):
    a1: float = Field(1.0, gt=0)
    a2: float = Field(1.0, gt=0)
    eps: float = Field(1e-4, gt=0, le=1e-3)
    perturbation: Literal["shift", "scaling"] = "shift"
    probe: Optional[tuple[float, float]] = (0.5, 0.5)


class TrajectorySpec(_Strict):
    count: int = Field(0, ge=0)
    seed: int = 0
    positions: Optional[list[float]] = None
    step: Optional[float] = Field(None, gt=0)


class OutputsSpec(_Strict):
    fields: bool = True
    probe_times: list[float] = Field(default_factory=lambda: [0.0], min_length=1)
    info_report: bool = True
    ledger: Optional[LedgerSpec] = None
    additivity: Optional[AdditivitySpec] = None
    trajectories: Optional[TrajectorySpec] = None


class SimulationConfig(_Strict):
    name: str = "run"
    grid: GridSpec
    constants: ConstantsSpec = ConstantsSpec()
    initial_state: InitialState
    potential: PotentialSpec = PotentialSpec()
    solver: Optional[SolverSpec] = None
    outputs: OutputsSpec
    output_dir: str = "out"

    @model_validator(mode="after")
    def _consistent(self):
        g = self.grid
        if len(g.extents) != g.dim or len(g.points) != g.dim:
            raise ValueError("grid: one extent and point count per axis")
        dirichlet = g.boundary == "dirichlet-zero"
        if isinstance(self.initial_state, BoxState):
            if not dirichlet:
                raise ValueError("initial_state box requires a dirichlet-zero grid")
            lo, hi = g.extents[0]
            if lo != 0.0 or abs(hi - self.initial_state.a) > 1e-12:
                raise ValueError("initial_state box requires grid extents [0, a]")
        if self.potential.kind == "box" and not dirichlet:
            raise ValueError("potential box requires a dirichlet-zero grid")
        times = self.outputs.probe_times
        if any(t < 0 for t in times) or sorted(times) != list(times):
            raise ValueError("outputs.probe_times must be non-negative and increasing")
        if self.solver is None:
            if any(t != 0 for t in times):
                raise ValueError("outputs.probe_times beyond 0 require a solver section")
            if self.outputs.trajectories is not None:
                raise ValueError("outputs.trajectories requires a solver section")
        else:
            want = "crank_nicolson" if dirichlet else "split_step"
            if self.solver.scheme != want:
                raise ValueError(f"solver.scheme must be {want} on a {g.boundary} grid")
            dt = self.solver.dt
            for t in times:
                if abs(t / dt - round(t / dt)) > 1e-9:
                    raise ValueError(f"probe time {t} is not a multiple of solver.dt")
            every = self.snapshot_every()
            for t in times:
                if round(t / dt) % every and round(t / dt) != self.total_steps():
                    raise ValueError(f"probe time {t} does not fall on a snapshot")
        if self.outputs.ledger is not None:
            if self.outputs.ledger.probe_time not in times:
                raise ValueError("outputs.ledger.probe_time must be one of outputs.probe_times")
            if max(self.outputs.ledger.eps) > 1e-3 or min(self.outputs.ledger.eps) <= 0:
                raise ValueError("outputs.ledger.eps values must lie in (0, 1e-3]")
        return self

    def total_steps(self) -> int:
        s = self.solver
        if s is None:
            return 0
        if s.steps is not None:
            return s.steps
        return int(round(max(self.outputs.probe_times) / s.dt))

    def snapshot_every(self) -> int:
        s = self.solver
        if s is None:
            return 1
        if s.snapshot_every is not None:
            return s.snapshot_every
        counts = [int(round(t / s.dt)) for t in self.outputs.probe_times if t > 0]
        every = 0
        for c in counts:
            every = gcd(every, c)
        return every or 1


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> SimulationConfig:
    try:
        return SimulationConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(data)
