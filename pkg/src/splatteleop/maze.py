"""Maze geometry: layout schema, canonical course, and collision queries.

Plan coordinates are 2D (x, y) meters with the maze centered on the
origin; headings are CCW radians from +x. The engine world embedding maps
plan (x, y) at height h to world (-x, h, y), so plan rectangles stay
axis-aligned world boxes (world is Y-up).

The canonical course is a reconstruction: the source material fixes the
outer size (2.2 m square), obstacle areas (three 0.6 x 0.15 m boxes), the
two 0.6 x 0.875 m pathways they form, and four symmetric entrances, but
not the coordinates. This layout places the obstacle band north of center
(keeping the center open) and is mirror-symmetric about the y axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

SCHEMA = "maze-layout/1"


class MazeError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    """Axis-aligned plan rectangle [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise MazeError(f"degenerate rect {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, x, y) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def distance_to_point(self, x, y) -> float:
        dx = max(self.x0 - x, 0.0, x - self.x1)
        dy = max(self.y0 - y, 0.0, y - self.y1)
        return float(np.hypot(dx, dy))

    def overlaps(self, other: "Rect") -> bool:
        return not (
            self.x1 <= other.x0 or other.x1 <= self.x0
            or self.y1 <= other.y0 or other.y1 <= self.y0
        )

    def as_list(self) -> list[float]:
        return [self.x0, self.x1, self.y0, self.y1]


@dataclass(frozen=True)
class Entrance:
    side: str  # north | south | east | west
    center: float  # along-wall coordinate of the opening center
    width: float


@dataclass(frozen=True)
class MazeSpec:
    outer: Rect
    obstacles: tuple[Rect, ...]
    entrances: tuple[Entrance, ...]
    pathways: tuple[Rect, ...]
    wall_height: float = 0.5
    wall_thickness: float = 0.06
    notes: str = ""

    def __post_init__(self):
        for ob in self.obstacles:
            if not (self.outer.x0 <= ob.x0 and ob.x1 <= self.outer.x1
                    and self.outer.y0 <= ob.y0 and ob.y1 <= self.outer.y1):
                raise MazeError(f"obstacle {ob} extends outside the outer bounds")
        for pw in self.pathways:
            for ob in self.obstacles:
                if pw.overlaps(ob):
                    raise MazeError(f"pathway {pw} overlaps obstacle {ob}")
        if self.wall_height <= 0 or self.wall_thickness <= 0:
            raise MazeError("wall height/thickness must be positive")

    def wall_rects(self) -> list[Rect]:
        """Outer wall segments (plan rects) with entrance openings cut out."""
        t = self.wall_thickness
        o = self.outer
        rects = []
        for side in ("south", "north", "west", "east"):
            horizontal = side in ("south", "north")
            lo, hi = (o.x0 - t, o.x1 + t) if horizontal else (o.y0, o.y1)
            openings = sorted(
                (e.center - e.width / 2, e.center + e.width / 2)
                for e in self.entrances
                if e.side == side
            )
            spans = []
            cur = lo
            for a, b in openings:
                if a > cur:
                    spans.append((cur, a))
                cur = max(cur, b)
            if cur < hi:
                spans.append((cur, hi))
            for a, b in spans:
                if side == "south":
                    rects.append(Rect(a, b, o.y0 - t, o.y0))
                elif side == "north":
                    rects.append(Rect(a, b, o.y1, o.y1 + t))
                elif side == "west":
                    rects.append(Rect(o.x0 - t, o.x0, a, b))
                else:
                    rects.append(Rect(o.x1, o.x1 + t, a, b))
        return rects

    def solid_rects(self) -> list[Rect]:
        return list(self.obstacles) + self.wall_rects()

    def world_boxes(self, include_floor: bool = True):
        """Solid geometry as world AABBs (min, max) with box colors."""
        boxes = []
        colors = []
        for ob in self.obstacles:
            boxes.append(_plan_rect_to_world(ob, 0.0, self.wall_height))
            colors.append((0.75, 0.35, 0.25))
        for wr in self.wall_rects():
            boxes.append(_plan_rect_to_world(wr, 0.0, self.wall_height))
            colors.append((0.8, 0.8, 0.78))
        if include_floor:
            t = self.wall_thickness
            floor = Rect(self.outer.x0 - t, self.outer.x1 + t,
                         self.outer.y0 - t, self.outer.y1 + t)
            boxes.append(_plan_rect_to_world(floor, -0.06, 0.0))
            colors.append((0.45, 0.47, 0.5))
        return np.array([b[0] for b in boxes]), np.array([b[1] for b in boxes]), np.array(colors)

    def save(self, path) -> None:
        doc = {
            "schema": SCHEMA,
            "outer": self.outer.as_list(),
            "wall_height": self.wall_height,
            "wall_thickness": self.wall_thickness,
            "obstacles": [r.as_list() for r in self.obstacles],
            "pathways": [r.as_list() for r in self.pathways],
            "entrances": [
                {"side": e.side, "center": e.center, "width": e.width}
                for e in self.entrances
            ],
            "notes": self.notes,
        }
        Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))

    @classmethod
    def load(cls, path) -> "MazeSpec":
        doc = yaml.safe_load(Path(path).read_text())
        if doc.get("schema") != SCHEMA:
            raise MazeError(f"unsupported maze schema {doc.get('schema')!r}")
        return cls(
            outer=Rect(*doc["outer"]),
            obstacles=tuple(Rect(*r) for r in doc["obstacles"]),
            pathways=tuple(Rect(*r) for r in doc["pathways"]),
            entrances=tuple(Entrance(**e) for e in doc["entrances"]),
            wall_height=float(doc.get("wall_height", 0.5)),
            wall_thickness=float(doc.get("wall_thickness", 0.06)),
            notes=doc.get("notes", ""),
        )


def _plan_rect_to_world(r: Rect, z0: float, z1: float):
    lo = np.array([-r.x1, z0, r.y0])
    hi = np.array([-r.x0, z1, r.y1])
    return lo, hi


def world_from_plan(x, y, height=0.0) -> np.ndarray:
    """Embed plan (x, y) at the given height into engine world coords."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h = np.broadcast_to(np.asarray(height, dtype=np.float64), x.shape)
    return np.stack([-x, h, y], axis=-1)


# Pathway centers sit at x = +-0.5125; entrances align with them so each
# route threads one pathway. Dimensions: band y in [0.1, 0.7] (0.6 m tall),
# outer slabs hug the side walls, middle slab is offset off the center.
_BAND_Y0, _BAND_Y1 = 0.1, 0.7
ENTRANCE_X = 0.5125
ENTRANCE_WIDTH = 0.44


def canonical_maze() -> MazeSpec:
    """The reconstructed course satisfying all published dimensions."""
    half = 1.1
    return MazeSpec(
        outer=Rect(-half, half, -half, half),
        obstacles=(
            Rect(-1.1, -0.95, _BAND_Y0, _BAND_Y1),
            Rect(-0.075, 0.075, _BAND_Y0, _BAND_Y1),
            Rect(0.95, 1.1, _BAND_Y0, _BAND_Y1),
        ),
        pathways=(
            Rect(-0.95, -0.075, _BAND_Y0, _BAND_Y1),
            Rect(0.075, 0.95, _BAND_Y0, _BAND_Y1),
        ),
        entrances=(
            Entrance("south", -ENTRANCE_X, ENTRANCE_WIDTH),
            Entrance("south", ENTRANCE_X, ENTRANCE_WIDTH),
            Entrance("north", ENTRANCE_X, ENTRANCE_WIDTH),
            Entrance("north", -ENTRANCE_X, ENTRANCE_WIDTH),
        ),
        notes=(
            "Reconstructed layout: published dimensions fix the outer square, "
            "obstacle and pathway sizes but not their coordinates. The obstacle "
            "band is placed north of center so the center stays open; symmetry "
            "is a mirror about the y axis."
        ),
    )


def check_collision(maze: MazeSpec, pose, footprint_radius: float) -> bool:
    """True iff a robot disc at pose (x, y[, theta]) hits a wall or obstacle."""
    if footprint_radius <= 0:
        raise MazeError("footprint_radius must be positive")
    x, y = float(pose[0]), float(pose[1])
    return any(r.distance_to_point(x, y) < footprint_radius for r in maze.solid_rects())
