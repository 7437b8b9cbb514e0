"""Software rasterizer for Gaussian splat scenes.

Pipeline: project splat means and covariances into pixel space, cull,
depth-sort globally (stable, index tie-break), bin into 16x16 tiles by the
3-sigma footprint, then composite front-to-back per tile.

The blending law shared by the tiled and reference renderers:
  alpha_i(p) = min(0.99, opacity_i * exp(-0.5 * m2))   truncated to 0 when
  the Mahalanobis distance m2 > 9 (3 sigma), and a pixel stops accepting
  contributions once its transmittance T drops below 1/255.
Because truncation and pixel termination are part of the law itself, tile
binning and the per-tile early-out only skip work that is exactly zero, and
the output is independent of tiling and worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .camera import CameraModel
from .scene import Convention, GaussianSplat, SceneError, SplatScene
from .sh import eval_sh
from .transforms import quat_to_matrix

TILE = 16
ALPHA_CLAMP = 0.99
T_CUTOFF = 1.0 / 255.0
MAHALANOBIS_CUTOFF = 9.0  # 3 sigma, squared
DEPTH_ALPHA_CROSSING = 0.5
_CHUNK = 64


@dataclass
class RenderTarget:
    """Premultiplied linear-RGB accumulation plus alpha and depth channels.

    depth holds the view depth of the first splat whose cumulative alpha
    reached 0.5 (or the nearest winning point after compositing); +inf
    where nothing crossed.
    """

    color: np.ndarray  # (H, W, 3) float64, premultiplied by alpha
    alpha: np.ndarray  # (H, W) float64 in [0, 1]
    depth: np.ndarray  # (H, W) float64 meters, +inf where uncovered

    @classmethod
    def empty(cls, width: int, height: int) -> "RenderTarget":
        return cls(
            color=np.zeros((height, width, 3)),
            alpha=np.zeros((height, width)),
            depth=np.full((height, width), np.inf),
        )

    def copy(self) -> "RenderTarget":
        return RenderTarget(self.color.copy(), self.alpha.copy(), self.depth.copy())

    def composited_over(self, background=(0.0, 0.0, 0.0)) -> np.ndarray:
        bg = np.asarray(background, dtype=np.float64)
        return self.color + (1.0 - self.alpha)[..., None] * bg

    def to_srgb_u8(self, background=(0.0, 0.0, 0.0)) -> np.ndarray:
        linear = np.clip(self.composited_over(background), 0.0, 1.0)
        srgb = np.where(
            linear <= 0.0031308,
            12.92 * linear,
            1.055 * np.power(linear, 1.0 / 2.4) - 0.055,
        )
        return np.round(srgb * 255.0).astype(np.uint8)


@dataclass(frozen=True)
class ProjectedSplat:
    mean2d: np.ndarray  # pixel coordinates
    cov2d: np.ndarray  # 2x2 symmetric, pixels^2
    view_depth: float
    color: np.ndarray  # linear RGB
    opacity: float


def compute_covariance(scale, rotation) -> np.ndarray:
    """World covariance of one splat: R diag(s^2) R^T (symmetric PSD)."""
    r = quat_to_matrix(np.asarray(rotation, dtype=np.float64))
    s2 = np.asarray(scale, dtype=np.float64) ** 2
    return (r * s2) @ r.T


def _batch_covariances(scales, rotations) -> np.ndarray:
    r = quat_to_matrix(rotations)  # (N, 3, 3)
    s2 = scales**2
    return np.einsum("nij,nj,nkj->nik", r, s2, r)


def _project_arrays(scene: SplatScene, camera: CameraModel):
    """Project, cull and depth-sort the scene. Returns per-splat arrays
    (means, conics, radii, depths, colors, opacities) or None when every
    splat is culled."""
    world = scene.world_arrays()
    w2c = camera.world_to_camera()
    pts_cam = w2c.apply(world["positions"])
    depth = pts_cam[:, 2]

    keep = depth > camera.near
    if not np.any(keep):
        return None
    idx = np.flatnonzero(keep)
    pts_cam = pts_cam[idx]
    depth = depth[idx]

    mean2d = camera.project_camera_points(pts_cam)
    fx, fy = camera.focal_px()

    cov_world = _batch_covariances(world["scales"][idx], world["rotations"][idx])
    w_rot = w2c.uniform_scale * w2c.rotation_matrix()
    cov_cam = np.einsum("ij,njk,lk->nil", w_rot, cov_world, w_rot)

    x, y, z = pts_cam[:, 0], pts_cam[:, 1], pts_cam[:, 2]
    j0 = -fx / z
    j2 = fx * x / z**2
    j1 = -fy / z
    j3 = fy * y / z**2
    m00, m01, m02 = cov_cam[:, 0, 0], cov_cam[:, 0, 1], cov_cam[:, 0, 2]
    m11, m12, m22 = cov_cam[:, 1, 1], cov_cam[:, 1, 2], cov_cam[:, 2, 2]
    a = j0 * j0 * m00 + 2.0 * j0 * j2 * m02 + j2 * j2 * m22
    b = j0 * (m01 * j1 + m02 * j3) + j2 * (m12 * j1 + m22 * j3)
    c = j1 * j1 * m11 + 2.0 * j1 * j3 * m12 + j3 * j3 * m22

    det = a * c - b * b
    lam_max = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    radius = 3.0 * np.sqrt(np.maximum(lam_max, 0.0))

    w, h = camera.viewport
    visible = (
        (det > 0.0)
        & np.isfinite(radius)
        & (mean2d[:, 0] + radius >= 0.0)
        & (mean2d[:, 0] - radius <= w)
        & (mean2d[:, 1] + radius >= 0.0)
        & (mean2d[:, 1] - radius <= h)
    )
    if not np.any(visible):
        return None
    sub = np.flatnonzero(visible)
    idx = idx[sub]

    cam_pos = camera.pose.translation
    dirs = world["positions"][idx] - cam_pos
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    colors = eval_sh(world["sh_coeffs"][idx], dirs, scene.sh_degree)

    a, b, c, det = a[sub], b[sub], c[sub], det[sub]
    order = np.argsort(depth[sub], kind="stable")  # ties keep splat order
    return {
        "mean2d": mean2d[sub][order],
        "conic": np.stack([c / det, b / det, a / det], axis=1)[order],
        "cov2d": np.stack([a, b, c], axis=1)[order],
        "radius": radius[sub][order],
        "depth": depth[sub][order],
        "color": colors[order],
        "opacity": world["opacities"][idx][order],
    }


def project_splat(splat: GaussianSplat, camera: CameraModel) -> ProjectedSplat | None:
    """Project a single splat; returns None when culled."""
    scene = SplatScene(
        positions=splat.position[None, :],
        rotations=splat.rotation[None, :],
        scales=splat.scale[None, :],
        opacities=np.array([splat.opacity]),
        sh_coeffs=splat.sh_coeffs[None, :, :],
        source_convention=Convention.ENGINE,
    )
    p = _project_arrays(scene, camera)
    if p is None:
        return None
    a, b, c = p["cov2d"][0]
    return ProjectedSplat(
        mean2d=p["mean2d"][0],
        cov2d=np.array([[a, b], [b, c]]),
        view_depth=float(p["depth"][0]),
        color=p["color"][0],
        opacity=float(p["opacity"][0]),
    )


def _composite_block(px, py, proj, sel, out_rgb, out_alpha, out_depth, early_out=True):
    """Front-to-back blend of splats `sel` (already depth-ordered) over the
    flat pixel arrays px/py. Writes premultiplied RGB, alpha and depth."""
    npix = px.size
    t_run = np.ones(npix)
    acc = np.zeros(npix)
    rgb = np.zeros((npix, 3))
    dep = np.full(npix, np.inf)
    crossed = np.zeros(npix, dtype=bool)

    mean = proj["mean2d"][sel]
    conic = proj["conic"][sel]
    color = proj["color"][sel]
    opac = proj["opacity"][sel]
    depth = proj["depth"][sel]
    m = sel.size

    for s0 in range(0, m, _CHUNK):
        s1 = min(s0 + _CHUNK, m)
        dx = mean[s0:s1, 0, None] - px[None, :]
        dy = mean[s0:s1, 1, None] - py[None, :]
        ca = conic[s0:s1, 0, None]
        cb = conic[s0:s1, 1, None]
        cc = conic[s0:s1, 2, None]
        m2 = ca * dx * dx + cc * dy * dy + 2.0 * cb * dx * dy
        alpha = np.minimum(opac[s0:s1, None] * np.exp(-0.5 * m2), ALPHA_CLAMP)
        alpha[m2 > MAHALANOBIS_CUTOFF] = 0.0

        one_minus = 1.0 - alpha
        cp = np.cumprod(one_minus, axis=0)
        t_before = np.empty_like(cp)
        t_before[0] = t_run
        if s1 - s0 > 1:
            np.multiply(t_run[None, :], cp[:-1], out=t_before[1:])
        contrib = np.where(t_before >= T_CUTOFF, alpha * t_before, 0.0)

        rgb += np.einsum("kp,kc->pc", contrib, color[s0:s1])
        cum = acc[None, :] + np.cumsum(contrib, axis=0)
        hit = cum >= DEPTH_ALPHA_CROSSING
        newly = hit[-1] & ~crossed
        if np.any(newly):
            first = np.argmax(hit[:, newly], axis=0)
            dep[newly] = depth[s0 + first]
            crossed[newly] = True
        acc = cum[-1]
        t_run = t_run * cp[-1]
        if early_out and not np.any(t_run >= T_CUTOFF):
            break

    out_rgb[:] = rgb
    out_alpha[:] = acc
    out_depth[:] = dep


def _tile_pixel_grid(tx, ty, width, height):
    x0, y0 = tx * TILE, ty * TILE
    x1, y1 = min(x0 + TILE, width), min(y0 + TILE, height)
    gx, gy = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
    return gx.ravel(), gy.ravel(), (slice(y0, y1), slice(x0, x1))


def render(scene: SplatScene, camera: CameraModel, workers: int = 1) -> RenderTarget:
    """Tiled deterministic rasterization of a registered engine scene."""
    if scene.source_convention is not Convention.ENGINE:
        raise SceneError("render requires an engine-convention scene")
    width, height = camera.viewport
    if width * height == 0:
        raise ValueError("zero-area viewport")
    target = RenderTarget.empty(width, height)
    proj = _project_arrays(scene, camera)
    if proj is None:
        return target

    ntx = (width + TILE - 1) // TILE
    nty = (height + TILE - 1) // TILE
    mean, radius = proj["mean2d"], proj["radius"]
    tx0 = np.clip(np.floor((mean[:, 0] - radius) / TILE).astype(np.int64), 0, ntx - 1)
    tx1 = np.clip(np.floor((mean[:, 0] + radius) / TILE).astype(np.int64), 0, ntx - 1)
    ty0 = np.clip(np.floor((mean[:, 1] - radius) / TILE).astype(np.int64), 0, nty - 1)
    ty1 = np.clip(np.floor((mean[:, 1] + radius) / TILE).astype(np.int64), 0, nty - 1)
    tw = tx1 - tx0 + 1
    counts = tw * (ty1 - ty0 + 1)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    total = int(offsets[-1])

    pair_splat = np.repeat(np.arange(counts.size), counts)
    within = np.arange(total) - offsets[pair_splat]
    cols = within % tw[pair_splat]
    rows = within // tw[pair_splat]
    pair_tile = (ty0[pair_splat] + rows) * ntx + (tx0[pair_splat] + cols)

    tile_order = np.argsort(pair_tile, kind="stable")  # keeps depth order per tile
    sorted_tiles = pair_tile[tile_order]
    sorted_splats = pair_splat[tile_order]
    tile_ids, tile_starts = np.unique(sorted_tiles, return_index=True)
    tile_ends = np.concatenate([tile_starts[1:], [sorted_tiles.size]])

    def run_tile(i):
        tid = int(tile_ids[i])
        ty, tx = divmod(tid, ntx)
        sel = sorted_splats[tile_starts[i]:tile_ends[i]]
        px, py, region = _tile_pixel_grid(tx, ty, width, height)
        npix = px.size
        rgb = np.empty((npix, 3))
        alpha = np.empty(npix)
        dep = np.empty(npix)
        _composite_block(px, py, proj, sel, rgb, alpha, dep)
        shape = (region[0].stop - region[0].start, region[1].stop - region[1].start)
        target.color[region] = rgb.reshape(shape + (3,))
        target.alpha[region] = alpha.reshape(shape)
        target.depth[region] = dep.reshape(shape)

    indices = range(tile_ids.size)
    if workers <= 1:
        for i in indices:
            run_tile(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_tile, indices))
    return target


def render_reference(scene: SplatScene, camera: CameraModel) -> RenderTarget:
    """Brute-force oracle: every splat evaluated at every pixel in global
    depth order, no tiling, no early-out. O(pixels x splats)."""
    if scene.source_convention is not Convention.ENGINE:
        raise SceneError("render_reference requires an engine-convention scene")
    width, height = camera.viewport
    target = RenderTarget.empty(width, height)
    proj = _project_arrays(scene, camera)
    if proj is None:
        return target
    gx, gy = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    px, py = gx.ravel(), gy.ravel()
    npix = px.size
    rgb = np.empty((npix, 3))
    alpha = np.empty(npix)
    dep = np.empty(npix)
    sel = np.arange(proj["depth"].size)
    _composite_block(px, py, proj, sel, rgb, alpha, dep, early_out=False)
    target.color[:] = rgb.reshape(height, width, 3)
    target.alpha[:] = alpha.reshape(height, width)
    target.depth[:] = dep.reshape(height, width)
    return target


def bench(scene: SplatScene, camera: CameraModel, frames: int, warmup: int = 3,
          workers: int = 1) -> dict:
    """Throughput report over repeated renders; warm-up frames excluded."""
    if frames < 10:
        raise ValueError(f"bench requires frames >= 10, got {frames}")
    times = []
    for i in range(warmup + frames):
        t0 = time.perf_counter()
        render(scene, camera, workers=workers)
        dt = time.perf_counter() - t0
        if i >= warmup:
            times.append(dt)
    times = np.array(times)
    mean_s = float(times.mean())
    return {
        "frames": frames,
        "warmup": warmup,
        "splats": len(scene),
        "viewport": list(camera.viewport),
        "workers": workers,
        "fps": 1.0 / mean_s,
        "ms_per_frame_mean": mean_s * 1e3,
        "ms_per_frame_p95": float(np.percentile(times, 95)) * 1e3,
        "splats_per_s": len(scene) / mean_s,
    }
