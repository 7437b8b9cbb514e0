"""Drive the four mission trajectories headlessly and compare metrics.

Generates the canonical course and its four equal-difficulty trajectories,
builds a waypoint-following twist script for each, and runs deterministic
sessions with odometry noise so the estimate visibly drifts from ground
truth. Prints per-trajectory metrics and an ASCII plan of route 1.

Run:  python demos/03_maze_drive.py
"""

import math

import numpy as np

from splatteleop import LinkModel, canonical_maze, generate_trajectories
from splatteleop.fusion import StereoIntrinsics
from splatteleop.session import SessionConfig, ViewMode, run_session, script_for_route


def ascii_plan(maze, path, width=44, height=22):
    """Plan view: walls #, obstacles X, driven path ., start S, end E."""
    grid = [[" "] * width for _ in range(height)]

    def cell(x, y):
        cx = int((x - maze.outer.x0) / maze.outer.width * (width - 1))
        cy = int((maze.outer.y1 - y) / maze.outer.height * (height - 1))
        return min(max(cy, 0), height - 1), min(max(cx, 0), width - 1)

    for r in maze.solid_rects():
        mark = "X" if r in maze.obstacles else "#"
        for x in np.linspace(r.x0, r.x1, 60):
            for y in np.linspace(r.y0, r.y1, 30):
                i, j = cell(x, y)
                grid[i][j] = mark
    for _, x, y, _ in path:
        i, j = cell(x, y)
        grid[i][j] = "."
    for pose, mark in ((path[0], "S"), (path[-1], "E")):
        i, j = cell(pose[1], pose[2])
        grid[i][j] = mark
    return "\n".join("".join(row) for row in grid)


def main():
    maze = canonical_maze()
    trajectories = generate_trajectories(maze)
    print("canonical course: 2.2 x 2.2 m, three 0.6 x 0.15 m obstacles, "
          "two 0.6 x 0.875 m pathways")
    idx = [t.difficulty_index() for t in trajectories]
    print(f"difficulty index sum(A/W) per trajectory: "
          f"{', '.join(f'{v:.6f}' for v in idx)} (spread {max(idx) - min(idx):.1e})\n")

    results = []
    for traj in trajectories:
        cfg = SessionConfig(
            mode=ViewMode.EXO_FUSION,
            trajectory=traj,
            link=LinkModel(40.0, 8.0, 0.0, seed=traj.entrance_id),
            maze=maze,
            intrinsics=StereoIntrinsics.from_fov(baseline=0.063, width=32, height=18),
            odom_noise=(0.004, 0.004),
            odom_seed=traj.entrance_id,
            frame_hz=15.0,
        )
        script = script_for_route(traj, cfg.limits, tick_s=0.02)
        res = run_session(cfg, script)
        results.append(res)
        m = res.metrics
        drift = max(
            math.hypot(g[1] - o[1], g[2] - o[2])
            for g, o in zip(res.gt_path, res.odom_path)
        )
        print(f"trajectory {traj.entrance_id}: completed={m.completed} "
              f"elapsed={m.elapsed_s:.1f}s splits="
              f"{'/'.join(f'{s:.1f}' for s in m.goal_splits_s)}s "
              f"collisions={m.collision_count} commands={m.command_count} "
              f"peak odom drift={drift * 100:.1f} cm")

    print("\nroute 1 ground-truth path (plan view):")
    print(ascii_plan(maze, results[0].gt_path))


if __name__ == "__main__":
    main()
