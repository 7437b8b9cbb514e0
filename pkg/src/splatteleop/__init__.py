"""splatteleop: photorealistic splat rendering fused with a live depth
stream, a differential-drive simulator, simulated transport, and a
steering-law mission harness for browser-based teleoperation.
"""

from .camera import CameraModel
from .channels import LinkModel, VirtualClock, control_channel, frame_channel, measure_m2p
from .fusion import (
    DepthFrame,
    StereoIntrinsics,
    WorldPointCloud,
    composite,
    frame_to_cloud,
    to_world,
    unproject,
)
from .maze import MazeSpec, canonical_maze, check_collision
from .missions import TrajectorySpec, generate_trajectories, goal_step, steering_time
from .renderer import (
    RenderTarget,
    bench,
    compute_covariance,
    project_splat,
    render,
    render_reference,
)
from .scene import (
    Convention,
    GaussianSplat,
    SplatScene,
    convert_convention,
    load_ply,
    register_scene,
)
from .session import (
    Session,
    SessionConfig,
    SessionMetrics,
    TwistScript,
    ViewMode,
    ego_camera,
    exo_camera,
    run_session,
    script_for_route,
)
from .sim import (
    OdometryState,
    RobotState,
    SpeedLimits,
    TwistCommand,
    render_depth,
    step,
    update_odometry,
)
from .transforms import RigidTransform
from .wire import ControlMessage, FrameWireHeader, decode_control, decode_frame, encode_control, encode_frame

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "ControlMessage",
    "Convention",
    "DepthFrame",
    "FrameWireHeader",
    "GaussianSplat",
    "LinkModel",
    "MazeSpec",
    "OdometryState",
    "RenderTarget",
    "RigidTransform",
    "RobotState",
    "Session",
    "SessionConfig",
    "SessionMetrics",
    "SpeedLimits",
    "SplatScene",
    "StereoIntrinsics",
    "TrajectorySpec",
    "TwistCommand",
    "TwistScript",
    "ViewMode",
    "VirtualClock",
    "WorldPointCloud",
    "bench",
    "canonical_maze",
    "check_collision",
    "composite",
    "compute_covariance",
    "control_channel",
    "convert_convention",
    "decode_control",
    "decode_frame",
    "ego_camera",
    "encode_control",
    "encode_frame",
    "exo_camera",
    "frame_channel",
    "frame_to_cloud",
    "generate_trajectories",
    "goal_step",
    "load_ply",
    "measure_m2p",
    "project_splat",
    "register_scene",
    "render",
    "render_depth",
    "render_reference",
    "run_session",
    "script_for_route",
    "steering_time",
    "step",
    "to_world",
    "unproject",
    "update_odometry",
]
