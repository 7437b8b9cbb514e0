"""Steering-law task model: trajectory generation over the canonical maze,
difficulty indexing, and goal sequencing.

Each of the four trajectories enters at its own opening, crosses to the far
pathway, threads it, and exits on the opposite side; the four are pairwise
congruent (mirror about the y axis and route reversal), which makes the
per-trajectory difficulty index sum(A/W) identical by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maze import ENTRANCE_WIDTH, ENTRANCE_X, MazeSpec


class MissionError(ValueError):
    pass


def steering_time(A: float, W: float, a: float = 0.0, b: float = 1.0) -> float:
    """Predicted tunnel traversal time T = a + b * A / W."""
    if W <= 0:
        raise MissionError(f"tunnel width must be positive, got {W}")
    if A < 0:
        raise MissionError(f"tunnel length must be non-negative, got {A}")
    return a + b * A / W


@dataclass(frozen=True)
class Subpath:
    """Marked lane: centerline polyline with a task width."""

    polyline: tuple[tuple[float, float], ...]
    width: float

    @property
    def length(self) -> float:
        pts = np.asarray(self.polyline)
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

    def difficulty(self) -> float:
        return self.length / self.width


@dataclass(frozen=True)
class TrajectorySpec:
    entrance_id: int  # 1..4
    start_pose: tuple[float, float, float]
    subpaths: tuple[Subpath, Subpath, Subpath]
    goals: tuple[tuple[float, float, float], ...]  # T1, T2, T3 poses

    def difficulty_index(self) -> float:
        return sum(sp.difficulty() for sp in self.subpaths)


# Route template for entrance 1 (south-west opening, crossing to the east
# pathway): approach elbow, pathway thread, exit run. Widths are task-design
# gates: the entrance opening for the open-hall legs, the pathway width for
# the thread.
_EAST = ENTRANCE_X
_APPROACH_Y = -0.55
_START_Y = 0.95
_PATH_Y0, _PATH_Y1 = 0.1, 0.7


def _heading(dx: float, dy: float) -> float:
    return math.atan2(dy, dx)


def _base_route() -> tuple[tuple, tuple, tuple]:
    sp1 = (
        (-_EAST, -_START_Y),
        (-_EAST, _APPROACH_Y),
        (_EAST, _APPROACH_Y),
        (_EAST, _PATH_Y0),
    )
    sp2 = ((_EAST, _PATH_Y0), (_EAST, _PATH_Y1))
    sp3 = ((_EAST, _PATH_Y1), (_EAST, _START_Y))
    return sp1, sp2, sp3


def _mirror_x(poly):
    return tuple((-x, y) for x, y in poly)


def _reverse_route(route):
    sp1, sp2, sp3 = route
    return tuple(reversed(sp3)), tuple(reversed(sp2)), tuple(reversed(sp1))


def generate_trajectories(maze: MazeSpec) -> list[TrajectorySpec]:
    """Four congruent three-subpath trajectories over the canonical layout."""
    pathway_width = maze.pathways[0].width  # 0.875 on the canonical course
    widths = (ENTRANCE_WIDTH, pathway_width, ENTRANCE_WIDTH)

    base = _base_route()
    routes = [
        (1, base),
        (2, tuple(_mirror_x(p) for p in base)),
        (3, _reverse_route(base)),
        (4, tuple(_mirror_x(p) for p in _reverse_route(base))),
    ]
    out = []
    for entrance_id, route in routes:
        subpaths = tuple(Subpath(poly, w) for poly, w in zip(route, widths))
        start = route[0][0]
        head = _heading(route[0][1][0] - start[0], route[0][1][1] - start[1])
        goals = []
        for sp in subpaths:
            gx, gy = sp.polyline[-1]
            prev = sp.polyline[-2]
            goals.append((gx, gy, _heading(gx - prev[0], gy - prev[1])))
        out.append(
            TrajectorySpec(
                entrance_id=entrance_id,
                start_pose=(start[0], start[1], head),
                subpaths=subpaths,
                goals=tuple(goals),
            )
        )
    spread = max(t.difficulty_index() for t in out) - min(t.difficulty_index() for t in out)
    assert spread <= 1e-9, f"trajectory difficulty spread {spread}"
    return out


def goal_step(current_goal_idx: int, robot_pose, goals, tolerance: float = 0.05):
    """Advance at most one goal per call; returns (new_idx, reached)."""
    if tolerance <= 0:
        raise MissionError("goal tolerance must be positive")
    if current_goal_idx >= len(goals):
        return current_goal_idx, False
    gx, gy = goals[current_goal_idx][0], goals[current_goal_idx][1]
    dist = math.hypot(robot_pose[0] - gx, robot_pose[1] - gy)
    if dist <= tolerance:
        return current_goal_idx + 1, True
    return current_goal_idx, False
