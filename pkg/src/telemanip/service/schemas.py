"""Request and response bodies for the REST endpoints."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class LoopStatus(BaseModel):
    running: bool
    tick: int
    sim_time: float
    mode: str
    status: str


class StatusResponse(BaseModel):
    service: str = "telemanip"
    uptime_s: float
    tcp_port: int | None
    peers: int
    heartbeats: int
    loop: LoopStatus | None = None


class ScenarioInfo(BaseModel):
    id: str = Field(description="key accepted by /api/scenarios/{id}")
    name: str
    task: str
    duration: float
    seed: int = 0


class SimulateRequest(BaseModel):
    scenario: str | dict = Field(description="bundled name, file path, or inline document")
    duration: float | None = None
    seed: int | None = None


class MetricsOut(BaseModel):
    completion: bool
    completion_time: float | None
    final_ee_error: float
    violations: int


class SimulateResponse(BaseModel):
    scenario: str
    task: str
    metrics: MetricsOut
    events: list[tuple[float, str]]
    states: int


class CheckRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str = "default"
    seed: int = 0


class CheckItem(BaseModel):
    name: str
    passed: bool
    detail: str


class CheckResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str
    passed: bool
    checks: list[CheckItem]
