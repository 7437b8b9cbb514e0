"""Operator-facing HTTP/WebSocket service.

Surfaces:
  GET  /api/session   -> session state snapshot (JSON)
  POST /api/session   -> {"action": "start"|"reset", "mode": ..., "trajectory": 1..4}
  WS   /ws/frames     -> binary fused-view PNGs framed by FrameWireHeader
  WS   /ws/control    -> JSON-lines control records (TWIST/MODE inbound;
                         ODOM/GOAL pushed outbound)

A background thread drives the session loop in (approximately) real time;
the HTTP layer reads immutable snapshots and enqueues control messages.
MODE records double as view-state carriers: {"mode": ...} switches the view
mode, {"camera_move": [x, y, z]} nudges the free camera while no trigger is
held (the trigger gating itself lives client-side).
"""

from __future__ import annotations

import io
import json
import threading
import time
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .camera import CameraModel
from .channels import LinkModel
from .fusion import StereoIntrinsics
from .maze import MazeSpec, canonical_maze
from .missions import generate_trajectories
from .scene import SplatScene
from .session import RenderOptions, Session, SessionConfig, ViewMode, exo_camera
from .wire import ControlMessage, FrameWireHeader, PayloadKind, WireError, decode_control

try:  # pillow is only needed when frames are actually served
    from PIL import Image
except ImportError:  # pragma: no cover
    Image = None


def encode_png_packet(target, seq: int, timestamp_us: int) -> bytes:
    img = Image.fromarray(target.to_srgb_u8())
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    payload = buf.getvalue()
    h, w = target.alpha.shape
    header = FrameWireHeader(seq=seq, capture_timestamp_us=timestamp_us, width=w,
                             height=h, payload_kind=PayloadKind.FUSED_PNG,
                             payload_length=len(payload))
    return header.pack() + payload


class OperatorService:
    """Owns the live session thread and the latest fused frame."""

    def __init__(
        self,
        scene: SplatScene | None = None,
        maze: MazeSpec | None = None,
        mode: ViewMode = ViewMode.EXO_FUSION,
        link: LinkModel | None = None,
        render: RenderOptions | None = None,
        intrinsics: StereoIntrinsics | None = None,
        real_time: bool = True,
        odom_noise: tuple[float, float] = (0.005, 0.005),
    ):
        self.scene = scene
        self.maze = maze or canonical_maze()
        self.trajectories = generate_trajectories(self.maze)
        self.default_mode = mode
        self.link = link or LinkModel(40.0, 8.0, 0.0, seed=1)
        self.render = render or RenderOptions(viewport=(320, 240), every_n_frames=3)
        self.intrinsics = intrinsics or StereoIntrinsics.from_fov(
            baseline=0.063, width=160, height=90
        )
        self.real_time = real_time
        self.odom_noise = odom_noise

        self._lock = threading.Lock()
        self._session: Session | None = None
        self._thread: threading.Thread | None = None
        self._running = False
        self._pending: list[ControlMessage] = []
        self._latest_packet: bytes | None = None
        self._latest_seq = -1
        self._view_seq = 0
        self._goal_events: list[dict] = []

    # -- lifecycle --------------------------------------------------------

    def start(self, mode: str | None = None, trajectory: int = 1, seed: int = 7) -> dict:
        self.stop()
        vm = ViewMode(mode) if mode else self.default_mode
        cfg = SessionConfig(
            mode=vm,
            trajectory=self.trajectories[int(trajectory) - 1],
            link=replace(self.link),
            maze=self.maze,
            scene=self.scene,
            intrinsics=self.intrinsics,
            odom_noise=self.odom_noise,
            odom_seed=seed,
            render=self.render,
        )
        with self._lock:
            self._session = Session(cfg)
            self._latest_packet = None
            self._latest_seq = -1
            self._view_seq = 0
            self._goal_events = []
            self._running = True
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()
        return self.snapshot()

    def stop(self) -> None:
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    def _loop(self) -> None:
        while self._running:
            t0 = time.monotonic()
            with self._lock:
                session = self._session
                if session is None or session.done:
                    self._running = False
                    break
                for msg in self._pending:
                    self._apply_control(session, msg)
                self._pending.clear()
                prev_goal = session.goal_idx
                session.tick()
                if session.goal_idx != prev_goal:
                    self._goal_events.append(
                        {"index": session.goal_idx,
                         "total": len(session.cfg.trajectory.goals),
                         "t_us": session.clock.now_us}
                    )
                if session.last_view is not None and session.frames_presented > self._view_seq:
                    self._view_seq = session.frames_presented
                    self._latest_packet = encode_png_packet(
                        session.last_view, self._view_seq, session.clock.now_us
                    )
                    self._latest_seq = self._view_seq
            if self.real_time:
                budget = session.tick_us / 1e6 - (time.monotonic() - t0)
                if budget > 0:
                    time.sleep(budget)

    def _apply_control(self, session: Session, msg: ControlMessage) -> None:
        if msg.kind == "TWIST":
            session.submit_twist(float(msg.body.get("linear", 0.0)),
                                 float(msg.body.get("angular", 0.0)))
        elif msg.kind == "MODE":
            if "mode" in msg.body:
                session.cfg.mode = ViewMode(msg.body["mode"])
            if "camera_move" in msg.body and session.cfg.mode is not ViewMode.EGO_FUSION:
                cam = CameraModel(pose=session.exo_pose,
                                  viewport=self.render.viewport)
                cam, _ = exo_camera(cam, np.asarray(msg.body["camera_move"], float),
                                    trigger_held=False)
                session.exo_pose = cam.pose

    # -- queries ----------------------------------------------------------

    def submit(self, msg: ControlMessage) -> None:
        with self._lock:
            if self._session is not None and not self._session.done:
                self._pending.append(msg)

    def snapshot(self) -> dict:
        with self._lock:
            if self._session is None:
                return {"active": False}
            snap = self._session.state_snapshot()
            snap["active"] = self._running and not self._session.done
            snap["frame_seq"] = self._latest_seq
            if self._session.done:
                m = self._session.metrics()
                snap["metrics"] = {
                    "completed": m.completed,
                    "elapsed_s": m.elapsed_s,
                    "goal_splits_s": list(m.goal_splits_s),
                    "collision_count": m.collision_count,
                    "command_count": m.command_count,
                    "ticks": m.ticks,
                }
            return snap

    def latest_packet(self) -> tuple[int, bytes | None]:
        with self._lock:
            return self._latest_seq, self._latest_packet

    def drain_goal_events(self, cursor: int) -> tuple[int, list[dict]]:
        with self._lock:
            events = self._goal_events[cursor:]
            return len(self._goal_events), events


def create_app(service: OperatorService) -> FastAPI:
    app = FastAPI(title="splatteleop operator service")
    app.state.service = service

    @app.get("/api/session")
    def get_session():
        return service.snapshot()

    @app.post("/api/session")
    def post_session(body: dict):
        action = body.get("action", "start")
        if action in ("start", "reset"):
            return service.start(
                mode=body.get("mode"),
                trajectory=int(body.get("trajectory", 1)),
                seed=int(body.get("seed", 7)),
            )
        if action == "stop":
            service.stop()
            return service.snapshot()
        return {"error": f"unknown action {action!r}"}

    @app.websocket("/ws/frames")
    async def ws_frames(ws: WebSocket):
        import asyncio

        await ws.accept()
        last_sent = -1
        try:
            while True:
                seq, packet = service.latest_packet()
                if packet is not None and seq > last_sent:
                    await ws.send_bytes(packet)
                    last_sent = seq
                await asyncio.sleep(0.03)
        except WebSocketDisconnect:
            pass

    @app.websocket("/ws/control")
    async def ws_control(ws: WebSocket):
        import asyncio

        await ws.accept()
        goal_cursor = 0
        last_odom = 0.0

        async def pump_outbound():
            nonlocal goal_cursor, last_odom
            while True:
                cursor, events = service.drain_goal_events(goal_cursor)
                goal_cursor = cursor
                for ev in events:
                    await ws.send_text(json.dumps(
                        {"kind": "GOAL", "stamp_us": ev["t_us"],
                         "body": {"index": ev["index"], "total": ev["total"]}}
                    ) + "\n")
                now = time.monotonic()
                if now - last_odom > 0.1:
                    last_odom = now
                    snap = service.snapshot()
                    if snap.get("active"):
                        await ws.send_text(json.dumps(
                            {"kind": "ODOM", "stamp_us": snap["t_us"],
                             "body": {"source": "wheel", "pose": snap["indicator_pose"]}}
                        ) + "\n")
                await asyncio.sleep(0.05)

        pump = asyncio.ensure_future(pump_outbound())
        try:
            while True:
                text = await ws.receive_text()
                for i, line in enumerate(text.splitlines(), start=1):
                    if not line.strip():
                        continue
                    try:
                        service.submit(decode_control(line, lineno=i))
                    except WireError as e:
                        await ws.send_text(json.dumps(
                            {"kind": "MODE", "stamp_us": 0, "body": {"error": str(e)}}
                        ) + "\n")
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()

    return app
