"""Fuse a simulated live depth frame over an offline splat backdrop.

The robot's stereo camera sees a narrow wedge of the maze; the splat scene
supplies the wide surroundings. This demo raycasts one depth frame, lifts
it to a world point cloud (unproject + capture-pose chain), and composites
it over a splat render from a third-person viewpoint, writing before/after
images so the FoV extension is visible.

Run:  python demos/02_live_depth_fusion.py
"""

import pathlib

import numpy as np

from splatteleop import CameraModel, RigidTransform, composite, frame_to_cloud, render
from splatteleop.fusion import StereoIntrinsics
from splatteleop.maze import canonical_maze
from splatteleop.scene import Convention, SplatScene
from splatteleop.session import default_exo_pose
from splatteleop.sim import depth_camera_pose, render_depth

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)


def splat_backdrop(maze, per_rect=260, seed=12):
    """Sample splats over the maze surfaces to stand in for a trained scene."""
    rng = np.random.default_rng(seed)
    lo, hi, colors = maze.world_boxes()
    positions, shades = [], []
    for (a, b, c) in zip(lo, hi, colors):
        u = rng.uniform(size=(per_rect, 3))
        p = a + u * (b - a)
        # push samples onto the box skin so walls read as surfaces
        axis = rng.integers(0, 3, per_rect)
        side = rng.integers(0, 2, per_rect).astype(float)
        p[np.arange(per_rect), axis] = np.where(side > 0, b[axis], a[axis])
        positions.append(p)
        shades.append(np.tile(c, (per_rect, 1)) * rng.uniform(0.82, 1.0, (per_rect, 1)))
    positions = np.vstack(positions)
    shades = np.vstack(shades)
    n = positions.shape[0]
    quats = rng.normal(size=(n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    sh = np.zeros((n, 1, 3))
    sh[:, 0, :] = (shades - 0.5) / 0.28209479177387814
    return SplatScene(
        positions=positions,
        rotations=quats,
        scales=rng.uniform(0.015, 0.05, size=(n, 3)),
        opacities=rng.uniform(0.55, 0.9, n),
        sh_coeffs=sh,
        source_convention=Convention.ENGINE,
    )


def main():
    maze = canonical_maze()
    scene = splat_backdrop(maze)
    print(f"backdrop: {len(scene)} splats sampled over the maze surfaces")

    robot_pose = (0.35, -0.45, 2.4)  # plan (x, y, heading)
    intr = StereoIntrinsics.from_fov(baseline=0.063, width=320, height=180)
    cam_pose = depth_camera_pose(robot_pose)
    frame = render_depth(maze, cam_pose, intr, seq=1)
    valid = int(frame.valid_mask().sum())
    print(f"depth frame: {valid}/{intr.width * intr.height} valid pixels "
          f"(85 x 54 degree FoV)")

    cloud = frame_to_cloud(frame, intr, stride=2)
    span = cloud.points.max(axis=0) - cloud.points.min(axis=0)
    print(f"live cloud: {len(cloud)} points spanning "
          f"{span[0]:.2f} x {span[1]:.2f} x {span[2]:.2f} m of world space")

    view = CameraModel(pose=default_exo_pose(maze), viewport=(480, 360), vertical_fov=54.0)
    backdrop = render(scene, view, workers=4)
    fused = composite(backdrop, cloud, view, point_px=2)
    taken = int(((fused.depth < backdrop.depth) | (np.isinf(backdrop.depth)
                 & np.isfinite(fused.depth))).sum())
    print(f"composite: live points won {taken} pixels over the splat backdrop")

    from PIL import Image

    Image.fromarray(backdrop.to_srgb_u8((0.06, 0.06, 0.08))).save(OUT / "backdrop.png")
    Image.fromarray(fused.to_srgb_u8((0.06, 0.06, 0.08))).save(OUT / "fused.png")
    print(f"wrote {OUT / 'backdrop.png'} and {OUT / 'fused.png'}")


if __name__ == "__main__":
    main()
