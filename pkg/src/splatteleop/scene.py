"""Gaussian splat scenes: PLY ingest, activation, convention conversion,
and world-space registration.

Raw PLY fields carry pre-activation values (log scales, logit opacities,
unnormalized quaternions); loading applies the activations once. Scenes are
immutable after construction; registration returns a new scene.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .sh import degree_for_coeffs, num_coeffs, sh_flip_signs
from .transforms import RigidTransform, TransformError, quat_multiply, quat_normalize

CACHE_SCHEMA_VERSION = 1

# COLMAP scenes are right-handed Y-down Z-forward; the engine world is
# right-handed Y-up Z-forward. The basis change is the proper rotation
# diag(-1, -1, 1), i.e. a half turn about Z, quaternion (0, 0, 0, 1).
_CONVENTION_AXIS_SIGNS = (-1, -1, 1)
_CONVENTION_QUAT = np.array([0.0, 0.0, 0.0, 1.0])


class Convention(Enum):
    COLMAP = "colmap"
    ENGINE = "engine"


class SceneError(ValueError):
    """Malformed splat asset or invalid scene operation."""


@dataclass(frozen=True)
class GaussianSplat:
    """One splat: position/rotation/scale/opacity plus SH color coefficients.

    Values are post-activation: scale components are positive std-devs in
    meters, opacity lies in [0, 1], the rotation quaternion is unit length.
    """

    position: np.ndarray
    rotation: np.ndarray
    scale: np.ndarray
    opacity: float
    sh_coeffs: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64)
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise SceneError("splat quaternion is not unit length")
        if np.any(np.asarray(self.scale) <= 0):
            raise SceneError("splat scale components must be positive")
        if not 0.0 <= self.opacity <= 1.0:
            raise SceneError("splat opacity outside [0, 1]")
        degree_for_coeffs(np.asarray(self.sh_coeffs).shape[0])

    @property
    def sh_degree(self) -> int:
        return degree_for_coeffs(self.sh_coeffs.shape[0])


class SplatScene:
    """Ordered splat collection with a model-to-world registration transform.

    Internally struct-of-arrays for the rasterizer; `splat(i)` materializes
    a single GaussianSplat view. All arrays are frozen read-only.
    """

    def __init__(
        self,
        positions,
        rotations,
        scales,
        opacities,
        sh_coeffs,
        source_convention: Convention = Convention.COLMAP,
        world_from_model: RigidTransform | None = None,
    ):
        self.positions = _frozen(positions, (None, 3))
        n = self.positions.shape[0]
        if n == 0:
            raise SceneError("scene contains zero splats")
        self.rotations = _frozen(rotations, (n, 4))
        self.scales = _frozen(scales, (n, 3))
        self.opacities = _frozen(opacities, (n,))
        self.sh_coeffs = _frozen(sh_coeffs, (n, None, 3))
        degree_for_coeffs(self.sh_coeffs.shape[1])
        self.source_convention = source_convention
        self.world_from_model = world_from_model or RigidTransform.identity()
        norms = np.linalg.norm(self.rotations, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise SceneError("scene contains non-unit splat quaternions")
        if np.any(self.scales <= 0):
            raise SceneError("scene contains non-positive scales")
        if np.any((self.opacities < 0) | (self.opacities > 1)):
            raise SceneError("scene contains opacities outside [0, 1]")
        if not np.all(np.isfinite(self.positions)):
            raise SceneError("scene contains non-finite positions")
        self._world_cache: dict | None = None

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def sh_degree(self) -> int:
        return degree_for_coeffs(self.sh_coeffs.shape[1])

    def splat(self, i: int) -> GaussianSplat:
        return GaussianSplat(
            position=self.positions[i].copy(),
            rotation=self.rotations[i].copy(),
            scale=self.scales[i].copy(),
            opacity=float(self.opacities[i]),
            sh_coeffs=self.sh_coeffs[i].copy(),
        )

    def world_positions(self) -> np.ndarray:
        return self.world_arrays()["positions"]

    def world_arrays(self) -> dict:
        """Registered world-space arrays, computed once and frozen."""
        if self._world_cache is None:
            t = self.world_from_model
            cache = {
                "positions": _frozen(t.apply(self.positions), (len(self), 3)),
                "rotations": _frozen(
                    quat_multiply(t.rotation, self.rotations), (len(self), 4)
                ),
                "scales": _frozen(t.uniform_scale * self.scales, (len(self), 3)),
                "opacities": self.opacities,
                "sh_coeffs": self.sh_coeffs,
            }
            self._world_cache = cache
        return self._world_cache

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """World-space (min, max) over splat centers."""
        p = self.world_positions()
        return p.min(axis=0), p.max(axis=0)

    def _replace(self, **kw) -> "SplatScene":
        args = dict(
            positions=self.positions,
            rotations=self.rotations,
            scales=self.scales,
            opacities=self.opacities,
            sh_coeffs=self.sh_coeffs,
            source_convention=self.source_convention,
            world_from_model=self.world_from_model,
        )
        args.update(kw)
        return SplatScene(**args)


def _frozen(a, shape) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if len(shape) != a.ndim or any(s is not None and s != d for s, d in zip(shape, a.shape)):
        raise SceneError(f"array shape {a.shape} does not match expected {shape}")
    a.setflags(write=False)
    return a


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _parse_ply_header(fh):
    magic = fh.readline().strip()
    if magic != b"ply":
        raise SceneError("malformed PLY header: missing 'ply' magic line")
    fmt = fh.readline().strip()
    if fmt != b"format binary_little_endian 1.0":
        raise SceneError(f"malformed PLY header: unsupported format {fmt!r}")
    count = None
    names: list[str] = []
    in_vertex = False
    while True:
        line = fh.readline()
        if not line:
            raise SceneError("malformed PLY header: truncated before end_header")
        line = line.strip()
        if line == b"end_header":
            break
        parts = line.decode("ascii", "replace").split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                if count is not None:
                    raise SceneError("malformed PLY header: duplicate vertex element")
                count = int(parts[2])
            elif count is None:
                raise SceneError("malformed PLY header: vertex is not the first element")
        elif parts[0] == "property" and in_vertex:
            if parts[1] != "float":
                raise SceneError(f"malformed PLY header: non-float property {parts[-1]}")
            names.append(parts[2])
    if count is None:
        raise SceneError("malformed PLY header: no vertex element")
    return count, names


_BASE_FIELDS = (
    "x", "y", "z",
    "f_dc_0", "f_dc_1", "f_dc_2",
    "opacity",
    "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
)


def load_ply(path) -> SplatScene:
    """Load a binary little-endian splat PLY and apply activations.

    Expects the de-facto splat export layout: x/y/z, f_dc_0..2, optional
    f_rest_* (band-major per channel), opacity, scale_0..2, rot_0..3.
    The resulting scene is tagged with the COLMAP source convention.
    """
    with open(path, "rb") as fh:
        count, names = _parse_ply_header(fh)
        if count == 0:
            raise SceneError("scene contains zero splats")
        for f in _BASE_FIELDS:
            if f not in names:
                raise SceneError(f"missing PLY field: {f}")
        rest = sorted(
            (n for n in names if n.startswith("f_rest_")),
            key=lambda n: int(n.split("_")[-1]),
        )
        for i, n in enumerate(rest):
            if n != f"f_rest_{i}":
                raise SceneError(f"missing PLY field: f_rest_{i}")
        if len(rest) % 3 != 0:
            raise SceneError(f"f_rest count {len(rest)} is not divisible by 3")
        per_channel = len(rest) // 3
        degree = degree_for_coeffs(per_channel + 1)  # validates the count

        raw = np.fromfile(fh, dtype="<f4", count=count * len(names))
        if raw.size != count * len(names):
            raise SceneError("PLY body truncated")
        raw = raw.reshape(count, len(names)).astype(np.float64)

    col = {n: i for i, n in enumerate(names)}
    positions = raw[:, [col["x"], col["y"], col["z"]]]
    quats = raw[:, [col["rot_0"], col["rot_1"], col["rot_2"], col["rot_3"]]]
    norms = np.linalg.norm(quats, axis=1)
    if np.any(norms < 1e-8):
        bad = int(np.argmax(norms < 1e-8))
        raise SceneError(f"degenerate quaternion at splat {bad} (norm {norms[bad]:.3g})")
    rotations = quats / norms[:, None]
    scales = np.exp(raw[:, [col["scale_0"], col["scale_1"], col["scale_2"]]])
    opacities = _sigmoid(raw[:, col["opacity"]])

    k = num_coeffs(degree)
    sh = np.zeros((count, k, 3))
    sh[:, 0, 0] = raw[:, col["f_dc_0"]]
    sh[:, 0, 1] = raw[:, col["f_dc_1"]]
    sh[:, 0, 2] = raw[:, col["f_dc_2"]]
    for c in range(3):
        for j in range(per_channel):
            sh[:, 1 + j, c] = raw[:, col[f"f_rest_{c * per_channel + j}"]]

    return SplatScene(positions, rotations, scales, opacities, sh,
                      source_convention=Convention.COLMAP)


def colmap_to_engine_arrays(positions, rotations, sh_coeffs):
    """Basis-change COLMAP -> engine on raw arrays. Involutive (the basis
    rotation is a half turn), so it doubles as its own inverse."""
    positions = np.asarray(positions, dtype=np.float64) * np.array(_CONVENTION_AXIS_SIGNS, float)
    rotations = quat_multiply(_CONVENTION_QUAT, np.asarray(rotations, dtype=np.float64))
    degree = degree_for_coeffs(np.asarray(sh_coeffs).shape[-2])
    signs = sh_flip_signs(degree, _CONVENTION_AXIS_SIGNS)
    sh_coeffs = np.asarray(sh_coeffs, dtype=np.float64) * signs[:, None]
    return positions, rotations, sh_coeffs


engine_to_colmap_arrays = colmap_to_engine_arrays


def convert_convention(scene: SplatScene) -> SplatScene:
    """Re-express a COLMAP-convention scene in the engine convention."""
    if scene.source_convention is not Convention.COLMAP:
        raise SceneError("scene already converted to the engine convention")
    p, r, sh = colmap_to_engine_arrays(scene.positions, scene.rotations, scene.sh_coeffs)
    return scene._replace(
        positions=p, rotations=quat_normalize(r), sh_coeffs=sh,
        source_convention=Convention.ENGINE,
    )


def register_scene(scene: SplatScene, reference: RigidTransform) -> SplatScene:
    """Pin the scene into world space via the reference-object transform."""
    if scene.source_convention is not Convention.ENGINE:
        raise SceneError("register_scene requires an engine-convention scene")
    try:
        reference.inverse()
    except (TransformError, ZeroDivisionError, FloatingPointError) as e:
        raise TransformError(f"registration transform is not invertible: {e}") from e
    return scene._replace(world_from_model=reference)


def save_cache(scene: SplatScene, path) -> None:
    """Versioned engine-native cache of a registered scene."""
    np.savez_compressed(
        path,
        schema_version=np.array([CACHE_SCHEMA_VERSION]),
        positions=scene.positions,
        rotations=scene.rotations,
        scales=scene.scales,
        opacities=scene.opacities,
        sh_coeffs=scene.sh_coeffs,
        convention=np.array([scene.source_convention.value]),
        world_rotation=scene.world_from_model.rotation,
        world_translation=scene.world_from_model.translation,
        world_scale=np.array([scene.world_from_model.uniform_scale]),
    )


def load_cache(path) -> SplatScene:
    with np.load(path, allow_pickle=False) as z:
        version = int(z["schema_version"][0])
        if version != CACHE_SCHEMA_VERSION:
            raise SceneError(f"unsupported cache schema version {version}")
        return SplatScene(
            z["positions"], z["rotations"], z["scales"], z["opacities"], z["sh_coeffs"],
            source_convention=Convention(str(z["convention"][0])),
            world_from_model=RigidTransform(
                rotation=z["world_rotation"],
                translation=z["world_translation"],
                uniform_scale=float(z["world_scale"][0]),
            ),
        )


def write_ply(path, positions, rotations, scales, opacities, sh_coeffs) -> None:
    """Write a splat PLY with RAW (pre-activation) values.

    Inverse of load_ply's activations: scales are log'd, opacities logit'd.
    Used by tests and demo tooling to author scenes.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    sh = np.asarray(sh_coeffs, dtype=np.float64)
    per_channel = sh.shape[1] - 1
    op = np.clip(np.asarray(opacities, dtype=np.float64), 1e-9, 1 - 1e-9)
    cols = [
        positions[:, 0], positions[:, 1], positions[:, 2],
        sh[:, 0, 0], sh[:, 0, 1], sh[:, 0, 2],
    ]
    names = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"]
    for c in range(3):
        for j in range(per_channel):
            cols.append(sh[:, 1 + j, c])
            names.append(f"f_rest_{c * per_channel + j}")
    cols.append(np.log(op / (1.0 - op)))
    names.append("opacity")
    logs = np.log(np.asarray(scales, dtype=np.float64))
    for i in range(3):
        cols.append(logs[:, i])
        names.append(f"scale_{i}")
    quats = np.asarray(rotations, dtype=np.float64)
    for i in range(4):
        cols.append(quats[:, i])
        names.append(f"rot_{i}")

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {name}" for name in names]
    header.append("end_header")
    body = np.stack(cols, axis=1).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        body.tofile(fh)
    assert os.path.getsize(path) > 0
