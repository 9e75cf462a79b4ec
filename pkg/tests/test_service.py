"""REST endpoints, WebSocket adapter, and the live loop."""

import time

import pytest
from fastapi.testclient import TestClient

from telemanip.protocol import Ack, FrameDecoder, SkeletonFrame, decode, encode
from telemanip.scenario import BUNDLED_SCENARIOS
from telemanip.scripts import synth_frame
from telemanip.service import ServiceConfig, create_app


@pytest.fixture()
def client():
    app = create_app(ServiceConfig(tcp_port=0))
    with TestClient(app) as tc:
        tc.app = app
        yield tc


def test_status_reports_session(client):
    body = client.get("/api/status").json()
    assert body["service"] == "telemanip"
    assert body["tcp_port"] > 0
    assert body["peers"] == 0
    assert body["loop"] is None


def test_model_document_served(client):
    doc = client.get("/api/model").json()
    assert doc["name"] == "desk_quadruped_manipulator"
    assert {"links", "joints", "frames"} <= set(doc)


def test_scenarios_listed_and_served(client):
    infos = client.get("/api/scenarios").json()
    assert sorted(i["task"] for i in infos) == sorted(BUNDLED_SCENARIOS)
    assert sorted(i["id"] for i in infos) == sorted(BUNDLED_SCENARIOS)
    doc = client.get("/api/scenarios/manip").json()
    assert doc["task"] == "manip"
    assert client.get("/api/scenarios/unknown").status_code == 404


def test_check_endpoint_passes_default_model(client):
    body = client.post("/api/check", json={}).json()
    assert body["passed"] is True
    names = [c["name"] for c in body["checks"]]
    assert "model_loads" in names and "standing_qp" in names


def test_simulate_endpoint_runs_scenario(client):
    body = client.post(
        "/api/simulate", json={"scenario": "manip", "duration": 3.0}
    ).json()
    assert body["task"] == "manip"
    assert body["metrics"]["completion"] is True
    assert body["states"] == pytest.approx(3.0 / 0.002, abs=600)


def test_simulate_rejects_bad_scenario(client):
    response = client.post(
        "/api/simulate", json={"scenario": {"name": "x", "task": "fly", "duration": 1}}
    )
    assert response.status_code == 422


def test_fallback_index_mentions_api(client):
    page = client.get("/")
    assert page.status_code == 200
    assert "/api" in page.text


def test_ws_receives_heartbeat_ack(client):
    with client.websocket_connect("/ws") as ws:
        decoder = FrameDecoder()
        deadline = time.monotonic() + 3.0
        got_ack = False
        while time.monotonic() < deadline and not got_ack:
            data = ws.receive_bytes()
            got_ack = any(isinstance(m, Ack) for m in decoder.feed(data))
        assert got_ack


def test_ws_skeleton_reaches_control_slot(client):
    frame = synth_frame(0.5, [0.0, 0.0], 0.0, 1.0, 0.0, 0.0, [0.0, 0.0, 0.0])
    with client.websocket_connect("/ws") as ws:
        ws.send_bytes(encode(frame))
        session = client.app.state.session
        taken = None
        for _ in range(200):
            time.sleep(0.01)
            taken = session.take_control()
            if taken is not None:
                break
        assert isinstance(taken, SkeletonFrame)
        assert taken.timestamp == 0.5


def test_live_loop_ticks_and_reports():
    app = create_app(ServiceConfig(tcp_port=0, live=True, pace=4.0))
    with TestClient(app) as tc:
        time.sleep(0.5)
        body = tc.get("/api/status").json()
        assert body["loop"]["running"] is True
        assert body["loop"]["tick"] > 50
        assert body["loop"]["mode"] == "stand"
        assert body["loop"]["status"] == "ok"


def test_live_loop_writes_parseable_log(tmp_path):
    log_path = tmp_path / "live.tlog"
    app = create_app(
        ServiceConfig(tcp_port=0, live=True, pace=4.0, log_path=str(log_path))
    )
    with TestClient(app) as tc:
        time.sleep(0.4)
    data = log_path.read_bytes()
    assert len(data) > 0
    messages = FrameDecoder().feed(data)
    assert messages, "log should decode into state messages"
    stamps = [m.timestamp for m in messages]
    assert stamps == sorted(stamps)
