"""Differential-drive robot simulation with drifting odometry and a raycast
stereo-depth stand-in sensor.

Pose integration uses the exact unicycle arc (no integrator error): constant
(v, w) traces a circle of radius v/w. Odometry integrates the same arc on
noise-perturbed commands, so a zero-noise estimate reproduces ground truth
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fusion import DepthFrame, StereoIntrinsics
from .maze import MazeSpec, check_collision, world_from_plan
from .transforms import RigidTransform, quat_from_matrix

DEFAULT_FOOTPRINT_RADIUS = 0.105  # burger-class chassis disc, reconstructed
DEFAULT_TICK_S = 0.02  # 50 Hz sim clock
CAMERA_MOUNT_HEIGHT = 0.18
CAMERA_MOUNT_FORWARD = 0.06


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SpeedLimits:
    v_max: float
    w_max: float

    @classmethod
    def platform(cls) -> "SpeedLimits":
        return cls(v_max=0.22, w_max=2.84)

    @classmethod
    def session(cls) -> "SpeedLimits":
        # reduced limits used during operator sessions, for safe teleoperation
        return cls(v_max=0.05, w_max=0.5)


@dataclass(frozen=True)
class TwistCommand:
    linear: float = 0.0
    angular: float = 0.0
    stamp_us: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.linear) and math.isfinite(self.angular)):
            raise SimError(f"non-finite twist command ({self.linear}, {self.angular})")


@dataclass(frozen=True)
class RobotState:
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x, y, heading
    v: float = 0.0
    w: float = 0.0
    limits: SpeedLimits = field(default_factory=SpeedLimits.platform)
    collided: bool = False  # last step was cancelled by a collision


@dataclass
class OdometryState:
    pose_est: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise_std: tuple[float, float] = (0.0, 0.0)  # per-step std on (v, w)
    seed: int = 0
    rng: np.random.Generator | None = None

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)


def clamp_twist(cmd: TwistCommand, limits: SpeedLimits) -> tuple[float, float]:
    v = min(max(cmd.linear, -limits.v_max), limits.v_max)
    w = min(max(cmd.angular, -limits.w_max), limits.w_max)
    return v, w


def unicycle_arc(x: float, y: float, theta: float, v: float, w: float, dt: float):
    """Exact constant-twist pose update."""
    theta2 = theta + w * dt
    if abs(w) < 1e-9:
        return x + v * dt * math.cos(theta), y + v * dt * math.sin(theta), theta2
    r = v / w
    return x + r * (math.sin(theta2) - math.sin(theta)), y - r * (math.cos(theta2) - math.cos(theta)), theta2


def step(
    state: RobotState,
    cmd: TwistCommand,
    dt: float,
    maze: MazeSpec | None = None,
    footprint_radius: float = DEFAULT_FOOTPRINT_RADIUS,
) -> RobotState:
    """Advance ground truth one tick; motion is cancelled on collision."""
    if not 0.0 < dt <= 0.1:
        raise SimError(f"dt must lie in (0, 0.1], got {dt}")
    v, w = clamp_twist(cmd, state.limits)
    x, y, theta = state.pose
    nx, ny, ntheta = unicycle_arc(x, y, theta, v, w, dt)
    if maze is not None and check_collision(maze, (nx, ny), footprint_radius):
        return replace(state, v=v, w=w, collided=True)
    return replace(state, pose=(nx, ny, ntheta), v=v, w=w, collided=False)


def update_odometry(odom: OdometryState, cmd_applied: tuple[float, float], dt: float) -> OdometryState:
    """Integrate the applied (v, w) plus per-step Gaussian noise.

    The returned state shares (and advances) the seeded RNG stream, so a
    fixed seed reproduces the whole estimate trajectory.
    """
    if not 0.0 < dt <= 0.1:
        raise SimError(f"dt must lie in (0, 0.1], got {dt}")
    v, w = cmd_applied
    ev = odom.rng.normal(0.0, odom.noise_std[0])
    ew = odom.rng.normal(0.0, odom.noise_std[1])
    x, y, theta = odom.pose_est
    pose = unicycle_arc(x, y, theta, v + ev, w + ew, dt)
    return OdometryState(pose_est=pose, noise_std=odom.noise_std, seed=odom.seed, rng=odom.rng)


def depth_camera_pose(pose, intrinsics: StereoIntrinsics | None = None,
                      mount_height: float = CAMERA_MOUNT_HEIGHT,
                      mount_forward: float = CAMERA_MOUNT_FORWARD) -> RigidTransform:
    """World pose of the forward-facing stereo camera for a plan pose.

    The stereo frame looks along its local -Z (see fusion.unproject):
    columns are [right, up, backward] in world coordinates.
    """
    x, y, theta = pose
    c, s = math.cos(theta), math.sin(theta)
    forward = np.array([-c, 0.0, s])  # plan heading embedded in world
    zc = -forward
    yc = np.array([0.0, 1.0, 0.0])
    xc = np.cross(yc, zc)
    rot = quat_from_matrix(np.column_stack([xc, yc, zc]))
    pos = world_from_plan(x + mount_forward * c, y + mount_forward * s, mount_height)
    return RigidTransform(rotation=rot, translation=pos)


def robot_world_transform(pose, height: float = 0.0) -> RigidTransform:
    """Robot body frame (+Z = heading, +Y up) embedded in world."""
    x, y, theta = pose
    c, s = math.cos(theta), math.sin(theta)
    zb = np.array([-c, 0.0, s])
    yb = np.array([0.0, 1.0, 0.0])
    xb = np.cross(yb, zb)
    rot = quat_from_matrix(np.column_stack([xb, yb, zb]))
    return RigidTransform(rotation=rot, translation=world_from_plan(x, y, height))


def _ray_boxes(origins, dirs, lo, hi):
    """Nearest forward hit of rays against AABBs.

    origins (3,), dirs (P, 3), lo/hi (B, 3). Returns (t (P,), box index (P,))
    with t = +inf, index = -1 for misses. t parametrizes p = origin + t*dir.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs  # (P, 3); infs where a component is zero
        t0 = (lo[None, :, :] - origins[None, None, :]) * inv[:, None, :]
        t1 = (hi[None, :, :] - origins[None, None, :]) * inv[:, None, :]
    tmin = np.minimum(t0, t1)
    tmax = np.maximum(t0, t1)
    # 0 * inf -> nan only when the origin sits exactly on a slab with a
    # parallel ray; treat that slab as non-constraining.
    tnear = np.max(np.where(np.isnan(tmin), -np.inf, tmin), axis=2)
    tfar = np.min(np.where(np.isnan(tmax), np.inf, tmax), axis=2)
    hit = (tnear <= tfar) & (tnear > 1e-9)
    tnear = np.where(hit, tnear, np.inf)
    idx = np.argmin(tnear, axis=1)
    best = tnear[np.arange(tnear.shape[0]), idx]
    idx = np.where(np.isfinite(best), idx, -1)
    return best, idx


def render_depth(
    maze: MazeSpec,
    camera_pose: RigidTransform,
    intrinsics: StereoIntrinsics,
    seq: int = 0,
    timestamp_us: int = 0,
) -> DepthFrame:
    """Raycast the maze into a disparity + color frame (0 = no hit)."""
    plan_x, plan_y = -camera_pose.translation[0], camera_pose.translation[2]
    if not maze.outer.contains(plan_x, plan_y):
        raise SimError(f"camera plan position ({plan_x:.3f}, {plan_y:.3f}) outside the maze")

    w, h = intrinsics.width, intrinsics.height
    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    x_d, y_d = intrinsics.pixel_plane_coords(cols.ravel(), rows.ravel())
    a, f = intrinsics.aspect, intrinsics.focal
    # Direction parametrized by forward distance: p_cam(t) = t * dir_cam.
    dirs_cam = np.stack([-a * x_d / f, -y_d / f, -np.ones_like(x_d)], axis=-1)
    dirs_world = camera_pose.apply_direction(dirs_cam)

    lo, hi, colors = maze.world_boxes()
    t, idx = _ray_boxes(camera_pose.translation, dirs_world, lo, hi)

    disparity = np.zeros(w * h, dtype=np.float32)
    rgb = np.zeros((w * h, 3), dtype=np.uint8)
    hit = idx >= 0
    if np.any(hit):
        disparity[hit] = intrinsics.disparity_for_forward_distance(t[hit]).astype(np.float32)
        # cheap distance shading keeps surfaces distinguishable
        shade = np.clip(1.0 - 0.18 * t[hit], 0.35, 1.0)
        rgb[hit] = np.clip(colors[idx[hit]] * shade[:, None] * 255.0, 0, 255).astype(np.uint8)

    return DepthFrame(
        seq=seq,
        timestamp_us=timestamp_us,
        width=w,
        height=h,
        disparity=disparity.reshape(h, w),
        color=rgb.reshape(h, w, 3),
        camera_pose_at_capture=camera_pose,
    )
