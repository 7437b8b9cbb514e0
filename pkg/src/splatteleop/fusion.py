"""Stereo depth unprojection and live point-cloud fusion.

A disparity pixel (x_d, y_d, d) maps to camera space through the
stereoscopic projection

    P_C = [[a, 0, 0, 0],
           [0, 1, 0, 0],
           [0, 0, 0, f],
           [0, 0, -1/b, 0]] @ [x_d, y_d, d, 1]

followed by the perspective division P_h = P_C.xyz / P_C.w, which yields
P_h = (-a*x_d*b/d, -y_d*b/d, -f*b/d). The depth camera therefore looks
along its local -Z; metric forward distance is f*b/d. World placement
composes the capture pose, a calibration offset and an optional extra
chain: P_W = view_chain . T_offset . M_camera . P_h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel
from .renderer import RenderTarget
from .transforms import RigidTransform


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class StereoIntrinsics:
    """Stereo sensor model: aspect a, baseline b (m), focal f, pixel grid.

    f relates normalized image-plane coordinates to view angles:
    f = 1/tan(v_fov/2) reproduces the configured vertical FoV, and
    a = tan(h_fov/2)/tan(v_fov/2) the horizontal one.
    """

    aspect: float
    baseline: float
    focal: float
    width: int = 320
    height: int = 180
    h_fov: float = 85.0
    v_fov: float = 54.0

    def __post_init__(self):
        if self.baseline <= 0 or self.focal <= 0 or self.aspect <= 0:
            raise FusionError("aspect, baseline and focal must all be positive")
        if self.width < 1 or self.height < 1:
            raise FusionError("pixel grid must be at least 1x1")

    @classmethod
    def from_fov(cls, baseline: float, width: int = 320, height: int = 180,
                 h_fov: float = 85.0, v_fov: float = 54.0) -> "StereoIntrinsics":
        tan_v = math.tan(math.radians(v_fov) / 2.0)
        tan_h = math.tan(math.radians(h_fov) / 2.0)
        return cls(aspect=tan_h / tan_v, baseline=baseline, focal=1.0 / tan_v,
                   width=width, height=height, h_fov=h_fov, v_fov=v_fov)

    def projection_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.aspect, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, self.focal],
                [0.0, 0.0, -1.0 / self.baseline, 0.0],
            ]
        )

    def pixel_plane_coords(self, cols, rows) -> tuple[np.ndarray, np.ndarray]:
        """Integer pixel indices -> normalized (x_d, y_d), pixel centers."""
        x_d = 2.0 * (np.asarray(cols, dtype=np.float64) + 0.5) / self.width - 1.0
        y_d = 2.0 * (np.asarray(rows, dtype=np.float64) + 0.5) / self.height - 1.0
        return x_d, y_d

    def disparity_for_forward_distance(self, dist):
        """Inverse of the unprojection depth: d = f*b/dist."""
        return self.focal * self.baseline / np.asarray(dist, dtype=np.float64)


@dataclass
class DepthFrame:
    """One captured disparity+color frame with its capture pose."""

    seq: int
    timestamp_us: int
    width: int
    height: int
    disparity: np.ndarray  # (H, W) float32, 0 marks invalid pixels
    color: np.ndarray  # (H, W, 3) uint8
    camera_pose_at_capture: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        self.disparity = np.asarray(self.disparity, dtype=np.float32)
        self.color = np.asarray(self.color, dtype=np.uint8)
        if self.disparity.shape != (self.height, self.width):
            raise FusionError("disparity shape does not match frame dimensions")
        if self.color.shape != (self.height, self.width, 3):
            raise FusionError("color shape does not match frame dimensions")
        if np.any(self.disparity < 0):
            raise FusionError("negative disparity; use 0 for invalid pixels")

    def valid_mask(self) -> np.ndarray:
        return self.disparity > 0


@dataclass(frozen=True)
class WorldPointCloud:
    points: np.ndarray  # (N, 3) world meters
    colors: np.ndarray  # (N, 3) uint8
    source_seq: int

    def __len__(self) -> int:
        return self.points.shape[0]


def unproject(pixel, intrinsics: StereoIntrinsics) -> np.ndarray:
    """(x_d, y_d, d) -> camera-space P_h via projection + perspective division.

    Components follow the canonical form (-a*x_d*b/d, -y_d*b/d, -f*b/d),
    evaluated in exactly that order so the principal point is exact.
    """
    x_d, y_d, d = (float(v) for v in pixel)
    if d <= 0:
        raise FusionError(f"disparity must be positive, got {d}")
    a, b, f = intrinsics.aspect, intrinsics.baseline, intrinsics.focal
    return np.array([-(a * x_d * b) / d, -(y_d * b) / d, -(f * b) / d])


def unproject_grid(x_d, y_d, d, intrinsics: StereoIntrinsics) -> np.ndarray:
    """Vectorized unproject for positive-disparity arrays of equal shape."""
    a, b, f = intrinsics.aspect, intrinsics.baseline, intrinsics.focal
    d = np.asarray(d, dtype=np.float64)
    return np.stack(
        [-(a * np.asarray(x_d) * b) / d, -(np.asarray(y_d) * b) / d, -(f * b) / d],
        axis=-1,
    )


def to_world(
    p_h,
    m_camera: RigidTransform,
    t_offset: RigidTransform | None = None,
    view_chain: RigidTransform | None = None,
) -> np.ndarray:
    """P_W = view_chain . T_offset . M_camera applied to P_h."""
    chain = m_camera
    if t_offset is not None:
        chain = t_offset.compose(chain)
    if view_chain is not None:
        chain = view_chain.compose(chain)
    return chain.apply(p_h)


def frame_to_cloud(
    frame: DepthFrame,
    intrinsics: StereoIntrinsics,
    t_offset: RigidTransform | None = None,
    view_chain: RigidTransform | None = None,
    stride: int = 1,
) -> WorldPointCloud:
    """Unproject every valid-disparity pixel and place it in world space."""
    if (frame.width, frame.height) != (intrinsics.width, intrinsics.height):
        raise FusionError(
            f"frame {frame.width}x{frame.height} does not match intrinsics "
            f"{intrinsics.width}x{intrinsics.height}"
        )
    if stride < 1:
        raise FusionError("stride must be >= 1")
    disp = frame.disparity[::stride, ::stride].astype(np.float64)
    colors = frame.color[::stride, ::stride]
    rows, cols = np.mgrid[0:frame.height:stride, 0:frame.width:stride]
    valid = disp > 0
    if not np.any(valid):
        return WorldPointCloud(np.zeros((0, 3)), np.zeros((0, 3), np.uint8), frame.seq)
    x_d, y_d = intrinsics.pixel_plane_coords(cols[valid], rows[valid])
    p_h = unproject_grid(x_d, y_d, disp[valid], intrinsics)
    p_w = to_world(p_h, frame.camera_pose_at_capture, t_offset, view_chain)
    return WorldPointCloud(p_w, colors[valid], frame.seq)


def composite(
    splat_target: RenderTarget,
    cloud: WorldPointCloud,
    camera: CameraModel,
    point_px: int = 2,
) -> RenderTarget:
    """Draw cloud points over a splat render as point_px-sized squares,
    z-tested against the target depth channel (points win ties)."""
    height, width = splat_target.alpha.shape
    if (width, height) != camera.viewport:
        raise FusionError("composite targets must share the camera viewport")
    out = splat_target.copy()
    if len(cloud) == 0:
        return out

    pts_cam = camera.camera_points(cloud.points)
    z = pts_cam[:, 2]
    keep = z > camera.near
    if not np.any(keep):
        return out
    pix = camera.project_camera_points(pts_cam[keep])
    z = z[keep]
    rgb = cloud.colors[keep].astype(np.float64) / 255.0

    # Far-to-near so nearer points overwrite; stable keeps draws deterministic.
    order = np.argsort(-z, kind="stable")
    pix, z, rgb = pix[order], z[order], rgb[order]

    half = point_px / 2.0
    x0 = np.floor(pix[:, 0] - half).astype(np.int64)
    y0 = np.floor(pix[:, 1] - half).astype(np.int64)
    side = max(int(point_px), 1)
    for dy in range(side):
        yy = y0 + dy
        for dx in range(side):
            xx = x0 + dx
            inside = (xx >= 0) & (xx < width) & (yy >= 0) & (yy < height)
            if not np.any(inside):
                continue
            xi, yi, zi = xx[inside], yy[inside], z[inside]
            wins = zi <= out.depth[yi, xi]
            if not np.any(wins):
                continue
            xi, yi = xi[wins], yi[wins]
            out.color[yi, xi] = rgb[inside][wins]
            out.alpha[yi, xi] = 1.0
            out.depth[yi, xi] = zi[wins]
    return out
