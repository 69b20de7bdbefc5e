"""Pydantic request/response envelopes for the HTTP service.

Model, clock and initial-law payloads reuse the frozen JSON schemas of
``subwf.serialization``; pydantic validates the envelope types and the
core validates semantics (raising ConfigError, mapped to HTTP 400).
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class ModelPayload(BaseModel):
    """SwfModel in its JSON form."""

    theta: list[float]
    clock: dict[str, Any]
    initial: dict[str, Any] = Field(default_factory=lambda: {"kind": "stationary"})

    def to_dict(self) -> dict:
        return {"theta": self.theta, "clock": self.clock, "initial": self.initial}


class _Req(BaseModel):
    model_config = ConfigDict(protected_namespaces=())


class EigenDecayRequest(_Req):
    model: ModelPayload
    indices: list[int] = Field(default=[1, 2, 5], description="eigenvalue indices n")
    t_grid: list[float] = Field(default_factory=lambda: [0.1 * k for k in range(1, 21)])
    tol: float = 1e-8
    volterra_check: bool = Field(
        default=True,
        description="for inverse-stable clocks emit the numerical Volterra "
        "column next to the analytic Mittag-Leffler one",
    )


class DualWeightsRequest(_Req):
    model: ModelPayload
    t: float
    start_total: Optional[int] = None
    tol: float = 1e-10
    mass_tol: float = 1e-9


class DualPathRequest(_Req):
    model: ModelPayload
    start: list[int]
    times: list[float]
    n_paths: int = 1
    seed: int = 0
    grid_step: Optional[float] = None


class SampleTransitionRequest(_Req):
    model: ModelPayload
    x: list[float]
    t: float
    n: int = 1
    mode: Literal["A", "B", "auto"] = "auto"
    seed: int = 0
    grid_step: Optional[float] = None


class SimulatePathRequest(_Req):
    model: ModelPayload
    times: list[float]
    n_paths: int = 1
    mode: Literal["A", "B", "auto"] = "auto"
    seed: int = 0
    grid_step: Optional[float] = None
    min_op_gap: float = 0.1


class SynthDataRequest(_Req):
    model: ModelPayload
    times: list[float]
    emission_total: int = 5
    seed: int = 0
    mode: Literal["A", "B", "auto"] = "auto"
    grid_step: Optional[float] = None
    min_op_gap: float = 0.1


class FilterRequest(_Req):
    model: ModelPayload
    data_csv: str
    tol: float = 1e-10


class SmoothRequest(_Req):
    model: ModelPayload
    data_csv: str
    tol: float = 1e-10


class NonMarkovFilterRequest(_Req):
    model: ModelPayload
    data_csv: str
    clock_draws: int = 1000
    tol: float = 1e-10
    seed: int = 0
    method: Literal["is", "rejection"] = "is"
    ess_floor: float = 25.0
    max_attempts: int = 100_000
    grid_step: Optional[float] = None


class ClockPosteriorRequest(_Req):
    model: ModelPayload
    data_csv: str
    n: int = 100
    seed: int = 0
    max_attempts: int = 100_000
    tol: float = 1e-10
    grid_step: Optional[float] = None


class HealthResponse(BaseModel):
    status: str
    version: str


class StatusInfo(BaseModel):
    mode: str
    exact: bool
    warning: Optional[str] = None


class ErrorBody(BaseModel):
    type: Literal["config", "numerical", "io"]
    message: str
