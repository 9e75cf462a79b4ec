"""FastAPI application: REST endpoints, WebSocket adapter, static console.

The app owns one framed TCP session (default port 7447) started on
lifespan entry. The /ws WebSocket endpoint bridges each browser client
onto that session over loopback, so both transports share the same
routing, freshest-wins control slot, and heartbeats. REST serves the
model and scenario documents, batch simulation, and self-checks.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from ..diagnostics import check_model_source
from ..model import load_model
from ..protocol import FrameDecoder, encode
from ..scenario import (
    BUNDLED_SCENARIOS,
    ScenarioError,
    load_scenario,
    run_scenario,
    scenario_from_dict,
)
from ..session import DEFAULT_PORT, TcpSession
from .live import LiveLoop
from .schemas import (
    CheckItem,
    CheckRequest,
    CheckResponse,
    LoopStatus,
    MetricsOut,
    ScenarioInfo,
    SimulateRequest,
    SimulateResponse,
    StatusResponse,
)

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>telemanip</title></head>
<body>
<h1>telemanip service</h1>
<p>No console build is mounted. API lives under <code>/api</code>,
the binary WebSocket adapter at <code>/ws</code>.</p>
</body></html>
"""


@dataclass
class ServiceConfig:
    model_source: str = "default"
    scenario: str | None = None
    tcp_host: str = "127.0.0.1"
    tcp_port: int = DEFAULT_PORT
    live: bool = False
    log_path: str | None = None
    console_dir: str | None = None
    pace: float = 1.0


def _model_document(source: str) -> dict:
    if source == "default":
        text = resources.files("telemanip.data.models").joinpath("default.json").read_text()
    else:
        text = Path(source).read_text()
    return json.loads(text)


def _scenario_document(name: str) -> dict:
    if name in BUNDLED_SCENARIOS:
        text = resources.files("telemanip.data.scenarios").joinpath(f"{name}.json").read_text()
        return json.loads(text)
    raise HTTPException(status_code=404, detail=f"unknown scenario '{name}'")


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.started_at = time.monotonic()
        session = TcpSession(host=config.tcp_host, port=config.tcp_port)
        await session.start()
        app.state.session = session
        app.state.loop = None
        app.state.loop_task = None
        if config.live:
            model = load_model(config.model_source)
            scenario = load_scenario(config.scenario) if config.scenario else None
            loop = LiveLoop(
                model,
                session,
                scenario=scenario,
                log_path=config.log_path,
                pace=config.pace,
            )
            app.state.loop = loop
            app.state.loop_task = asyncio.create_task(loop.run())
        try:
            yield
        finally:
            loop = app.state.loop
            if loop is not None:
                loop.request_stop()
                if app.state.loop_task is not None:
                    try:
                        await asyncio.wait_for(app.state.loop_task, timeout=5.0)
                    except asyncio.TimeoutError:
                        app.state.loop_task.cancel()
                loop.close_log()
            await session.stop()

    app = FastAPI(title="telemanip", lifespan=lifespan)

    @app.get("/api/status", response_model=StatusResponse)
    def get_status() -> StatusResponse:
        session: TcpSession = app.state.session
        loop: LiveLoop | None = app.state.loop
        loop_status = None
        if loop is not None:
            loop_status = LoopStatus(
                running=loop.running,
                tick=loop.tick,
                sim_time=loop.sim_time,
                mode=loop.mode,
                status={0: "ok", 1: "degraded", 2: "fault"}.get(loop.status, "?"),
            )
        return StatusResponse(
            uptime_s=time.monotonic() - app.state.started_at,
            tcp_port=session.port,
            peers=session.peer_count,
            heartbeats=session.heartbeats,
            loop=loop_status,
        )

    @app.get("/api/model")
    def get_model() -> dict:
        try:
            return _model_document(config.model_source)
        except OSError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc

    @app.get("/api/scenarios", response_model=list[ScenarioInfo])
    def list_scenarios() -> list[ScenarioInfo]:
        out = []
        for name in BUNDLED_SCENARIOS:
            sc = load_scenario(name)
            out.append(
                ScenarioInfo(
                    id=name, name=sc.name, task=sc.task, duration=sc.duration, seed=sc.seed
                )
            )
        return out

    @app.get("/api/scenarios/{name}")
    def get_scenario(name: str) -> dict:
        return _scenario_document(name)

    @app.post("/api/simulate", response_model=SimulateResponse)
    def post_simulate(request: SimulateRequest) -> SimulateResponse:
        try:
            if isinstance(request.scenario, dict):
                scenario = scenario_from_dict(request.scenario)
            else:
                scenario = load_scenario(request.scenario)
            overrides = {}
            if request.duration is not None:
                overrides["duration"] = request.duration
            if request.seed is not None:
                overrides["seed"] = request.seed
            if overrides:
                scenario = dataclasses.replace(scenario, **overrides)
        except ScenarioError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        log, metrics, _ = run_scenario(scenario)
        return SimulateResponse(
            scenario=scenario.name,
            task=scenario.task,
            metrics=MetricsOut(
                completion=metrics.completion,
                completion_time=metrics.completion_time,
                final_ee_error=metrics.final_ee_error,
                violations=metrics.violations,
            ),
            events=log.events,
            states=len(log.states),
        )

    @app.post("/api/check", response_model=CheckResponse)
    def post_check(request: CheckRequest) -> CheckResponse:
        report = check_model_source(request.model, seed=request.seed)
        return CheckResponse(
            model=report.model_name,
            passed=report.passed,
            checks=[
                CheckItem(name=c.name, passed=c.passed, detail=c.detail)
                for c in report.checks
            ],
        )

    @app.websocket("/ws")
    async def ws_adapter(websocket: WebSocket) -> None:
        await websocket.accept()
        session: TcpSession = app.state.session
        try:
            reader, writer = await asyncio.open_connection("127.0.0.1", session.port)
        except OSError:
            await websocket.close(code=1013)
            return

        async def tcp_to_ws():
            decoder = FrameDecoder()
            while True:
                data = await reader.read(4096)
                if not data:
                    break
                # re-frame so each WebSocket frame is one whole message
                for message in decoder.feed(data):
                    await websocket.send_bytes(encode(message))

        pump = asyncio.create_task(tcp_to_ws())
        try:
            while True:
                event = await websocket.receive()
                if event["type"] == "websocket.disconnect":
                    break
                data = event.get("bytes")
                if data:
                    writer.write(data)
                    await writer.drain()
        except (WebSocketDisconnect, ConnectionError):
            pass
        finally:
            pump.cancel()
            writer.close()

    console = Path(config.console_dir) if config.console_dir else None
    if console is not None and console.is_dir():
        app.mount("/", StaticFiles(directory=console, html=True), name="console")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return _FALLBACK_PAGE

    return app
