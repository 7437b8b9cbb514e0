"""Session orchestration: one virtual-clock loop wiring input, control and
frame channels, the robot simulator, depth capture, fusion and goal logic.

View modes mirror the three operator conditions: point cloud only from a
free camera, fused splat+cloud from a free camera, and fused splat+cloud
from a chase camera locked behind the odometry-estimated robot pose. The
mode only selects what gets rendered; physics never depends on it.

Scripted sessions are fully deterministic: the clock is integer
microseconds, channel delays and odometry noise come from seeded
generators, and rendering is read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .camera import CameraModel
from .channels import LinkModel, VirtualClock, control_channel, frame_channel
from .fusion import StereoIntrinsics, composite, frame_to_cloud
from .maze import MazeSpec, canonical_maze
from .missions import TrajectorySpec, goal_step
from .renderer import RenderTarget, render
from .scene import SplatScene
from .sim import (
    DEFAULT_FOOTPRINT_RADIUS,
    OdometryState,
    RobotState,
    SpeedLimits,
    TwistCommand,
    depth_camera_pose,
    render_depth,
    robot_world_transform,
    step,
    update_odometry,
)
from .transforms import RigidTransform
from .wire import ControlMessage


class ViewMode(Enum):
    EXO_CLOUD_ONLY = "cloud"  # condition C1
    EXO_FUSION = "exo"  # condition C2
    EGO_FUSION = "ego"  # condition C3


# chase-camera placement behind and above the robot indicator (tunable;
# behind = -Z in the robot frame)
DEFAULT_EGO_OFFSET = RigidTransform(translation=np.array([0.0, 0.25, -0.3]))


def ego_camera(robot_pose, offset: RigidTransform = DEFAULT_EGO_OFFSET) -> RigidTransform:
    """Chase-camera world pose rigidly attached to the robot pose."""
    return robot_world_transform(robot_pose).compose(offset)


def exo_camera(current: CameraModel, user_move, trigger_held: bool):
    """Free-camera update: joystick either moves the camera (trigger up) or
    is forwarded to the robot (trigger held, camera frozen).

    Returns (camera, forward_twist).
    """
    if trigger_held:
        return current, True
    delta = current.pose.apply_direction(np.asarray(user_move, dtype=np.float64))
    moved = RigidTransform(
        rotation=current.pose.rotation,
        translation=current.pose.translation + delta,
        uniform_scale=current.pose.uniform_scale,
    )
    return replace(current, pose=moved), False


@dataclass(frozen=True)
class SessionMetrics:
    completed: bool
    elapsed_s: float  # first goal shown -> last goal reached (or timeout)
    goal_splits_s: tuple[float, ...]
    collision_count: int
    command_count: int
    ticks: int


@dataclass
class RenderOptions:
    viewport: tuple[int, int] = (160, 120)
    vertical_fov: float = 54.0
    point_px: int = 2
    every_n_frames: int = 1  # fuse every Nth delivered frame
    workers: int = 1


@dataclass
class SessionConfig:
    mode: ViewMode = ViewMode.EXO_FUSION
    trajectory: TrajectorySpec | None = None
    link: LinkModel = field(default_factory=LinkModel)
    maze: MazeSpec = field(default_factory=canonical_maze)
    scene: SplatScene | None = None
    intrinsics: StereoIntrinsics = field(
        default_factory=lambda: StereoIntrinsics.from_fov(baseline=0.063, width=64, height=36)
    )
    limits: SpeedLimits = field(default_factory=SpeedLimits.session)
    odom_noise: tuple[float, float] = (0.0, 0.0)
    odom_seed: int = 7
    tick_hz: int = 50
    frame_hz: float = 30.0
    goal_tolerance: float = 0.05
    timeout_s: float = 300.0
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS
    render: RenderOptions | None = None  # None = headless (no imagery)
    exo_pose: RigidTransform | None = None


@dataclass
class SessionResult:
    metrics: SessionMetrics
    gt_path: list  # (t_us, x, y, theta) ground truth per tick
    odom_path: list  # (t_us, x, y, theta) estimate per tick
    latency_trace: list  # input/capture/deliver/present events
    frames_sent: int
    frames_presented: int
    last_view: RenderTarget | None


class TwistScript:
    """Deterministic input source: (t_us, linear, angular) entries, latched."""

    def __init__(self, entries):
        self.entries = sorted(entries, key=lambda e: e[0])
        self._i = 0

    def due(self, now_us: int):
        out = []
        while self._i < len(self.entries) and self.entries[self._i][0] <= now_us:
            out.append(self.entries[self._i])
            self._i += 1
        return out

    def reset(self):
        self._i = 0


def default_exo_pose(maze: MazeSpec) -> RigidTransform:
    """Raised oblique view over the course from the south."""
    from .transforms import look_rotation

    span = maze.outer.width
    eye = np.array([0.0, span * 0.95, -span * 0.85])
    target = np.array([0.0, 0.0, 0.1])
    fwd = target - eye
    return RigidTransform(rotation=look_rotation(fwd), translation=eye)


class Session:
    """Single-owner loop; advance with tick() until done."""

    def __init__(self, config: SessionConfig):
        if config.trajectory is None:
            raise ValueError("a trajectory is required")
        self.cfg = config
        self.clock = VirtualClock()
        self.tick_us = round(1_000_000 / config.tick_hz)
        self.frame_interval_us = round(1_000_000 / config.frame_hz)
        self.dt = self.tick_us / 1_000_000.0

        start = config.trajectory.start_pose
        self.robot = RobotState(pose=start, limits=config.limits)
        self.odom = OdometryState(pose_est=start, noise_std=config.odom_noise,
                                  seed=config.odom_seed)
        self.op_tx, self.robot_rx = control_channel()  # operator -> robot
        self.robot_tx, self.op_rx = control_channel()  # robot -> operator
        self.frame_tx, self.frame_rx = frame_channel(config.link)

        self.goal_idx = 0
        self.goal_splits: list[float] = []
        self.collisions = 0
        self.commands = 0
        self.ticks = 0
        self.frames_sent = 0
        self.frames_presented = 0
        self.latched = TwistCommand()
        self.next_frame_us = 0
        self.latency_trace: list[dict] = []
        self.gt_path: list = []
        self.odom_path: list = []
        self.capture_poses: dict[int, RigidTransform] = {}
        self.last_frame = None
        self.last_view: RenderTarget | None = None
        self.last_input_id = -1
        self.input_ids = 0
        self.exo_pose = config.exo_pose or default_exo_pose(config.maze)
        self.done = False
        self.indicator_pose = start  # odometry-driven, never ground truth

    # -- operator-side helpers -------------------------------------------

    def submit_twist(self, linear: float, angular: float, stamp_us: int | None = None):
        """Operator input entering the control channel (counts as a command)."""
        now = self.clock.now_us if stamp_us is None else stamp_us
        self.op_tx.send(ControlMessage(
            "TWIST",
            {"linear": linear, "angular": angular, "input_id": self.input_ids},
            stamp_us=now,
        ))
        self.latency_trace.append({"kind": "input", "id": self.input_ids, "t_us": now})
        self.input_ids += 1
        self.commands += 1

    # -- main loop --------------------------------------------------------

    def tick(self):
        now = self.clock.now_us

        # robot ingests operator commands (latest wins per tick)
        for msg in self.robot_rx.poll():
            if msg.kind == "TWIST":
                self.latched = TwistCommand(msg.body["linear"], msg.body["angular"],
                                            stamp_us=msg.stamp_us)
                self.last_input_id = msg.body.get("input_id", -1)

        self.robot = step(self.robot, self.latched, self.dt, self.cfg.maze,
                          self.cfg.footprint_radius)
        if self.robot.collided:
            self.collisions += 1
            applied = (0.0, 0.0)
        else:
            applied = (self.robot.v, self.robot.w)
        self.odom = update_odometry(self.odom, applied, self.dt)
        self.indicator_pose = self.odom.pose_est

        self.robot_tx.send(ControlMessage(
            "ODOM",
            {"source": "wheel", "pose": list(self.odom.pose_est)},
            stamp_us=now,
        ))

        if now >= self.next_frame_us:
            cam_pose = depth_camera_pose(self.robot.pose, self.cfg.intrinsics)
            seq = self.frames_sent
            frame = render_depth(self.cfg.maze, cam_pose, self.cfg.intrinsics,
                                 seq=seq, timestamp_us=now)
            self.frame_tx.send(frame, now)
            self.robot_tx.send(ControlMessage(
                "ODOM",
                {"source": "camera", "frame_seq": seq, "pose": cam_pose.to_dict()},
                stamp_us=now,
            ))
            self.latency_trace.append({"kind": "capture", "id": self.last_input_id,
                                       "t_us": now, "frame_seq": seq})
            self.capture_poses[seq] = (cam_pose, self.last_input_id)
            self.frames_sent += 1
            self.next_frame_us += self.frame_interval_us

        # operator side: pose stream then frame delivery
        for msg in self.op_rx.poll():
            pass  # odometry records are consumed by the UI layer

        for deliver_us, frame in self.frame_rx.poll(now):
            pose, input_id = self.capture_poses.pop(frame.seq, (RigidTransform.identity(), -1))
            frame.camera_pose_at_capture = pose
            self.last_frame = frame
            self.frames_presented += 1
            if input_id >= 0:  # frames captured before any input carry no pair
                self.latency_trace.append({"kind": "deliver", "id": input_id,
                                           "t_us": deliver_us, "frame_seq": frame.seq})
                self.latency_trace.append({"kind": "present", "id": input_id, "t_us": now,
                                           "frame_seq": frame.seq})
            if self.cfg.render is not None and frame.seq % self.cfg.render.every_n_frames == 0:
                self.last_view = self._fuse(frame)

        # goals track the physical robot
        self.goal_idx, reached = goal_step(self.goal_idx, self.robot.pose,
                                           self.cfg.trajectory.goals,
                                           self.cfg.goal_tolerance)
        t_s = (now + self.tick_us) / 1e6
        if reached:
            self.goal_splits.append(t_s - sum(self.goal_splits))
        self.gt_path.append((now, *self.robot.pose))
        self.odom_path.append((now, *self.odom.pose_est))

        self.ticks += 1
        self.clock.advance(self.tick_us)
        if self.goal_idx >= len(self.cfg.trajectory.goals):
            self.done = True
        if self.clock.now_us / 1e6 > self.cfg.timeout_s:
            self.done = True

    def _view_camera(self) -> CameraModel:
        opts = self.cfg.render
        if self.cfg.mode is ViewMode.EGO_FUSION:
            pose = ego_camera(self.indicator_pose)
        else:
            pose = self.exo_pose
        return CameraModel(pose=pose, vertical_fov=opts.vertical_fov,
                           viewport=opts.viewport)

    def _fuse(self, frame) -> RenderTarget:
        opts = self.cfg.render
        camera = self._view_camera()
        if self.cfg.mode is ViewMode.EXO_CLOUD_ONLY or self.cfg.scene is None:
            base = RenderTarget.empty(*opts.viewport)
        else:
            base = render(self.cfg.scene, camera, workers=opts.workers)
        cloud = frame_to_cloud(frame, self.cfg.intrinsics)
        return composite(base, cloud, camera, point_px=opts.point_px)

    def metrics(self) -> SessionMetrics:
        completed = self.goal_idx >= len(self.cfg.trajectory.goals)
        return SessionMetrics(
            completed=completed,
            elapsed_s=sum(self.goal_splits) if completed else self.ticks * self.dt,
            goal_splits_s=tuple(self.goal_splits),
            collision_count=self.collisions,
            command_count=self.commands,
            ticks=self.ticks,
        )

    def state_snapshot(self) -> dict:
        return {
            "mode": self.cfg.mode.value,
            "t_us": self.clock.now_us,
            "goal_index": self.goal_idx,
            "goals_total": len(self.cfg.trajectory.goals),
            "elapsed_s": self.ticks * self.dt,
            "indicator_pose": list(self.indicator_pose),
            "collision_count": self.collisions,
            "command_count": self.commands,
            "done": self.done,
            "frames_sent": self.frames_sent,
            "frames_presented": self.frames_presented,
        }


def run_session(config: SessionConfig, script: TwistScript) -> SessionResult:
    """Drive a scripted session to completion (all goals or timeout)."""
    session = Session(config)
    script.reset()
    while not session.done:
        for t_us, lin, ang in script.due(session.clock.now_us):
            session.submit_twist(lin, ang, stamp_us=t_us)
        session.tick()
    return SessionResult(
        metrics=session.metrics(),
        gt_path=session.gt_path,
        odom_path=session.odom_path,
        latency_trace=session.latency_trace,
        frames_sent=session.frames_sent,
        frames_presented=session.frames_presented,
        last_view=session.last_view,
    )


def script_for_route(trajectory: TrajectorySpec, limits: SpeedLimits,
                     tick_s: float = 0.02, speed_scale: float = 1.0) -> TwistScript:
    """Turn-then-drive twist script visiting every subpath vertex exactly.

    Each phase runs an integer number of ticks at a rate within the scaled
    limits, so the pose lands on each waypoint up to float rounding.
    """
    v_max = limits.v_max * speed_scale
    w_max = limits.w_max * speed_scale
    x, y, heading = trajectory.start_pose
    entries = []
    t_ticks = 0

    waypoints = []
    for sp in trajectory.subpaths:
        for p in sp.polyline:
            if not waypoints or (abs(p[0] - waypoints[-1][0]) > 1e-12
                                 or abs(p[1] - waypoints[-1][1]) > 1e-12):
                waypoints.append(p)
    if waypoints and abs(waypoints[0][0] - x) < 1e-9 and abs(waypoints[0][1] - y) < 1e-9:
        waypoints = waypoints[1:]

    def phase(lin, ang, ticks):
        nonlocal t_ticks
        if ticks <= 0:
            return
        entries.append((round(t_ticks * tick_s * 1e6), lin, ang))
        t_ticks += ticks

    for wx, wy in waypoints:
        dx, dy = wx - x, wy - y
        dist = math.hypot(dx, dy)
        if dist < 1e-12:
            continue
        target = math.atan2(dy, dx)
        dth = (target - heading + math.pi) % (2 * math.pi) - math.pi
        if abs(dth) > 1e-12:
            n = max(1, math.ceil(abs(dth) / (w_max * tick_s)))
            phase(0.0, dth / (n * tick_s), n)
            heading = target
        n = max(1, math.ceil(dist / (v_max * tick_s)))
        phase(dist / (n * tick_s), 0.0, n)
        x, y = wx, wy
    phase(0.0, 0.0, 1)
    return TwistScript(entries)
