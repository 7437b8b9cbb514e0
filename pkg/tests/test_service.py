import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from splatteleop.channels import LinkModel
from splatteleop.fusion import StereoIntrinsics
from splatteleop.scene import Convention, SplatScene
from splatteleop.service import OperatorService, create_app
from splatteleop.session import RenderOptions, ViewMode
from splatteleop.wire import HEADER_SIZE, FrameWireHeader, PayloadKind


def tiny_scene():
    rng = np.random.default_rng(1)
    n = 25
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return SplatScene(
        positions=np.column_stack([
            rng.uniform(-1, 1, n), rng.uniform(0.0, 0.5, n), rng.uniform(-1, 1, n)
        ]),
        rotations=q,
        scales=rng.uniform(0.05, 0.25, size=(n, 3)),
        opacities=rng.uniform(0.5, 1.0, n),
        sh_coeffs=rng.normal(size=(n, 1, 3)) * 0.3,
        source_convention=Convention.ENGINE,
    )


@pytest.fixture
def client():
    service = OperatorService(
        scene=tiny_scene(),
        link=LinkModel(5.0, 0.0, 0.0, seed=2),
        render=RenderOptions(viewport=(96, 72), every_n_frames=2),
        intrinsics=StereoIntrinsics.from_fov(baseline=0.063, width=32, height=18),
        real_time=False,
    )
    app = create_app(service)
    with TestClient(app) as tc:
        yield tc
        service.stop()


def test_session_lifecycle(client):
    snap = client.get("/api/session").json()
    assert snap == {"active": False}

    started = client.post("/api/session", json={"action": "start", "mode": "exo",
                                                "trajectory": 1}).json()
    assert started["mode"] == "exo"
    assert started["goals_total"] == 3
    assert started["goal_index"] == 0

    time.sleep(0.3)
    snap = client.get("/api/session").json()
    assert snap["t_us"] > 0
    assert "indicator_pose" in snap

    reset = client.post("/api/session", json={"action": "reset", "mode": "cloud",
                                              "trajectory": 2}).json()
    assert reset["mode"] == "cloud"
    client.post("/api/session", json={"action": "stop"})


def test_frames_websocket_streams_png_packets(client):
    client.post("/api/session", json={"action": "start", "mode": "exo"})
    with client.websocket_connect("/ws/frames") as ws:
        packet = ws.receive_bytes()
    header = FrameWireHeader.unpack(packet[:HEADER_SIZE])
    assert header.payload_kind is PayloadKind.FUSED_PNG
    payload = packet[HEADER_SIZE:]
    assert len(payload) == header.payload_length
    assert payload[:8] == b"\x89PNG\r\n\x1a\n"
    assert (header.width, header.height) == (96, 72)


def test_control_websocket_drives_robot(client):
    client.post("/api/session", json={"action": "start", "mode": "exo"})
    with client.websocket_connect("/ws/control") as ws:
        ws.send_text(json.dumps(
            {"kind": "TWIST", "stamp_us": 0, "body": {"linear": 0.05, "angular": 0.0}}
        ) + "\n")
        # outbound ODOM records should arrive while the robot moves
        got_odom = False
        for _ in range(10):
            msg = json.loads(ws.receive_text())
            if msg["kind"] == "ODOM":
                got_odom = True
                break
        assert got_odom
    time.sleep(0.3)
    snap = client.get("/api/session").json()
    assert snap["command_count"] >= 1
    start = np.asarray(snap["indicator_pose"][:2])
    expect_start = np.asarray([-0.5125, -0.95])
    assert np.linalg.norm(start - expect_start) > 1e-4  # it moved


def test_mode_switch_via_control(client):
    client.post("/api/session", json={"action": "start", "mode": "exo"})
    with client.websocket_connect("/ws/control") as ws:
        ws.send_text(json.dumps(
            {"kind": "MODE", "stamp_us": 0, "body": {"mode": "ego"}}
        ) + "\n")
    time.sleep(0.3)
    snap = client.get("/api/session").json()
    assert snap["mode"] == "ego"
