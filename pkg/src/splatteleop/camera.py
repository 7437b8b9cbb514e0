"""Pinhole camera model for the splat rasterizer and point compositor.

Camera frame: right-handed, +Z forward, +Y up, +X left (matching the
engine world at an identity pose). Pixel x grows to screen right, pixel y
grows downward; the viewport center is (width/2, height/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transforms import RigidTransform


class CameraError(ValueError):
    pass


@dataclass(frozen=True)
class CameraModel:
    pose: RigidTransform = field(default_factory=RigidTransform.identity)  # camera-to-world
    vertical_fov: float = 54.0  # degrees
    aspect: float | None = None  # defaults to width/height
    near: float = 0.05
    far: float = 100.0
    viewport: tuple[int, int] = (640, 480)  # (width, height)

    def __post_init__(self):
        w, h = self.viewport
        if w < 1 or h < 1:
            raise CameraError(f"viewport must be at least 1x1, got {w}x{h}")
        if not 0.0 < self.vertical_fov < 180.0:
            raise CameraError(f"vertical_fov must be in (0, 180), got {self.vertical_fov}")
        if not 0.0 < self.near < self.far:
            raise CameraError(f"require 0 < near < far, got {self.near}, {self.far}")
        if self.aspect is None:
            object.__setattr__(self, "aspect", w / h)
        if self.aspect <= 0:
            raise CameraError("aspect must be positive")

    @property
    def width(self) -> int:
        return self.viewport[0]

    @property
    def height(self) -> int:
        return self.viewport[1]

    def focal_px(self) -> tuple[float, float]:
        """(fx, fy) in pixels. fy from vertical FoV; fx = fy scaled so the
        horizontal FoV spans `aspect` times the vertical tangent."""
        tan_v = np.tan(np.radians(self.vertical_fov) / 2.0)
        fy = (self.height / 2.0) / tan_v
        fx = (self.width / 2.0) / (self.aspect * tan_v)
        return fx, fy

    def principal_point(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0

    def world_to_camera(self) -> RigidTransform:
        return self.pose.inverse()

    def camera_points(self, world_points) -> np.ndarray:
        return self.world_to_camera().apply(world_points)

    def project_camera_points(self, pts_cam) -> np.ndarray:
        """Camera-space (N, 3) -> pixel (N, 2). Callers cull z <= 0."""
        p = np.asarray(pts_cam, dtype=np.float64)
        fx, fy = self.focal_px()
        cx, cy = self.principal_point()
        z = p[..., 2]
        # +X is camera-left, +Y is camera-up; both flip onto the pixel grid.
        px = cx - fx * p[..., 0] / z
        py = cy - fy * p[..., 1] / z
        return np.stack([px, py], axis=-1)

    def project(self, world_points) -> tuple[np.ndarray, np.ndarray]:
        """World points -> (pixels (N, 2), view depth (N,))."""
        pc = self.camera_points(world_points)
        return self.project_camera_points(pc), pc[..., 2]
