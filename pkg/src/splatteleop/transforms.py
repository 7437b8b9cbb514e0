"""Quaternion math and rigid transforms with uniform scale.

Quaternions are stored (w, x, y, z). World space is right-handed, Y-up,
Z-forward; all rotations follow the right-hand rule with column vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    return q / norm


def quat_multiply(q1, q2):
    """Hamilton product q1 * q2 (applies q2's rotation first)."""
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    w2, x2, y2, z2 = np.moveaxis(q2, -1, 0)
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def quat_conjugate(q):
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q, v):
    """Rotate vectors v (..., 3) by unit quaternions q (..., 4)."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    qvec = q[..., 1:]
    uv = np.cross(qvec, v)
    uuv = np.cross(qvec, uv)
    return v + 2.0 * (q[..., :1] * uv + uuv)


def quat_to_matrix(q):
    """Unit quaternion(s) to 3x3 rotation matrix (stacked for batches)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = np.moveaxis(q, -1, 0)
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def quat_from_matrix(m):
    """3x3 proper rotation matrix to unit quaternion (w >= 0)."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


class TransformError(ValueError):
    """Raised for non-invertible or otherwise invalid transforms."""


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation + uniform scale, applied as p -> s*R(p) + t."""

    rotation: np.ndarray = field(default_factory=lambda: QUAT_IDENTITY.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    uniform_scale: float = 1.0

    def __post_init__(self):
        q = quat_normalize(np.asarray(self.rotation, dtype=np.float64))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)
        if not np.isfinite(self.uniform_scale) or self.uniform_scale <= 0:
            raise TransformError(f"uniform_scale must be positive, got {self.uniform_scale}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise TransformError("non-finite transform components")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_axis_angle(cls, axis, angle, translation=(0, 0, 0), uniform_scale=1.0):
        return cls(quat_from_axis_angle(axis, angle), np.asarray(translation, float), uniform_scale)

    def apply(self, points):
        """Transform points of shape (3,) or (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return self.uniform_scale * quat_rotate(self.rotation, p) + self.translation

    def apply_direction(self, dirs):
        """Rotate direction vectors (no translation, no scale)."""
        return quat_rotate(self.rotation, np.asarray(dirs, dtype=np.float64))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return T with T.apply(p) == self.apply(other.apply(p))."""
        return RigidTransform(
            rotation=quat_multiply(self.rotation, other.rotation),
            translation=self.apply(other.translation),
            uniform_scale=self.uniform_scale * other.uniform_scale,
        )

    def inverse(self) -> "RigidTransform":
        inv_q = quat_conjugate(self.rotation)
        inv_s = 1.0 / self.uniform_scale
        inv_t = -inv_s * quat_rotate(inv_q, self.translation)
        return RigidTransform(rotation=inv_q, translation=inv_t, uniform_scale=inv_s)

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def as_matrix(self) -> np.ndarray:
        """Homogeneous 4x4 matrix equivalent."""
        m = np.eye(4)
        m[:3, :3] = self.uniform_scale * self.rotation_matrix()
        m[:3, 3] = self.translation
        return m

    def almost_equal(self, other: "RigidTransform", tol=1e-9) -> bool:
        dq = min(
            np.max(np.abs(self.rotation - other.rotation)),
            np.max(np.abs(self.rotation + other.rotation)),
        )
        return (
            dq <= tol
            and np.max(np.abs(self.translation - other.translation)) <= tol
            and abs(self.uniform_scale - other.uniform_scale) <= tol
        )

    def to_dict(self) -> dict:
        return {
            "rotation": [float(v) for v in self.rotation],
            "translation": [float(v) for v in self.translation],
            "uniform_scale": float(self.uniform_scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(
            rotation=np.asarray(d.get("rotation", QUAT_IDENTITY), float),
            translation=np.asarray(d.get("translation", (0, 0, 0)), float),
            uniform_scale=float(d.get("uniform_scale", 1.0)),
        )


def look_rotation(forward, up=(0.0, 1.0, 0.0)):
    """Camera-to-world rotation whose +Z maps to `forward` and +Y near `up`.

    Camera frame is right-handed: +Z forward, +Y up, +X left.
    """
    f = np.asarray(forward, dtype=np.float64)
    f = f / np.linalg.norm(f)
    u = np.asarray(up, dtype=np.float64)
    left = np.cross(u, f)
    n = np.linalg.norm(left)
    if n < 1e-12:
        raise TransformError("forward and up are collinear")
    left /= n
    true_up = np.cross(f, left)
    m = np.column_stack([left, true_up, f])
    return quat_from_matrix(m)
