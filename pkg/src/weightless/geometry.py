"""Support polygons, containment, contact detection and height sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .kinematics import FkResult, KinematicTree, gravity_projection

SCENE_FORMAT_VERSION = 1

# closed-set tolerance for containment tests, meters
CONTAIN_TOL = 1e-9

HEIGHT_GRID_ROWS = 8  # along the base's forward axis
HEIGHT_GRID_COLS = 4  # along the base's left axis
HEIGHT_GRID_SPAN = 0.5


@dataclass(frozen=True)
class Box:
    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_extents", tuple(float(h) for h in self.half_extents))
        if min(self.half_extents) <= 0:
            raise ValueError("box half extents must be positive")

    @property
    def top(self) -> float:
        return self.center[2] + self.half_extents[2]

    def to_local(self, points) -> np.ndarray:
        """Express world points in the box frame (yaw about +z)."""
        p = np.asarray(points, dtype=float) - np.asarray(self.center)
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        x = c * p[..., 0] + s * p[..., 1]
        y = -s * p[..., 0] + c * p[..., 1]
        return np.stack([x, y, p[..., 2]], axis=-1)

    def signed_distance(self, points) -> np.ndarray:
        """Euclidean signed distance, negative inside."""
        local = self.to_local(points)
        d = np.abs(local) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(d.max(axis=-1), 0.0)
        return outside + inside

    def covers_xy(self, points) -> np.ndarray:
        local = self.to_local(points)
        hx, hy, _ = self.half_extents
        return (np.abs(local[..., 0]) <= hx) & (np.abs(local[..., 1]) <= hy)


@dataclass(frozen=True)
class TerrainScene:
    ground_height: float = 0.0
    boxes: tuple[Box, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def signed_distances(self, points) -> np.ndarray:
        """Per-primitive signed distances, shape ``(n_primitives, *points.shape[:-1])``.

        Row 0 is the ground plane, rows 1.. follow ``boxes``.
        """
        points = np.asarray(points, dtype=float)
        rows = [points[..., 2] - self.ground_height]
        rows.extend(b.signed_distance(points) for b in self.boxes)
        return np.stack(rows)

    def signed_distance(self, points) -> np.ndarray:
        return self.signed_distances(points).min(axis=0)


@dataclass(frozen=True)
class SupportPolygon:
    """Counter-clockwise convex polygon; 0, 1 or 2 vertices are degenerate cases."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return self.vertices.shape[0]

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def area(self) -> float:
        if len(self) < 3:
            return 0.0
        x, y = self.vertices.T
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> SupportPolygon:
    """Andrew's monotone chain; collinear points are pruned."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return SupportPolygon(np.zeros((0, 2)))
    uniq = sorted(set(map(tuple, pts.tolist())))
    if len(uniq) <= 2:
        return SupportPolygon(np.array(uniq))

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(uniq)
    upper = half(reversed(uniq))
    hull = lower[:-1] + upper[:-1]
    return SupportPolygon(np.array(hull))


def _dist_to_segment(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def point_in_polygon(p, poly: SupportPolygon) -> bool:
    """Closed containment; boundary points count as inside."""
    p = np.asarray(p, dtype=float)
    v = poly.vertices
    n = len(v)
    if n == 0:
        return False
    if n == 1:
        return float(np.linalg.norm(p - v[0])) <= CONTAIN_TOL
    if n == 2:
        return _dist_to_segment(p, v[0], v[1]) <= CONTAIN_TOL
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        edge = b - a
        # signed distance of p to the edge's supporting line, positive to the left
        d = (edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])) / np.hypot(*edge)
        if d < -CONTAIN_TOL:
            return False
    return True


def contact_distances(tree: KinematicTree, fk: FkResult, scene: TerrainScene, indices=None) -> dict[int, float]:
    idx = sorted(tree.contact_point_indices if indices is None else indices)
    if not idx:
        return {}
    d = scene.signed_distance(fk.world_positions[idx])
    return dict(zip(idx, d.tolist()))


def detect_contacts(tree: KinematicTree, fk: FkResult, scene: TerrainScene, eps: float = 0.02) -> frozenset[int]:
    """Contact-eligible joints whose point lies within ``eps`` of any surface."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return frozenset(i for i, d in contact_distances(tree, fk, scene).items() if d <= eps)


def support_polygon(tree: KinematicTree, fk: FkResult, scene: TerrainScene, eps: float = 0.02) -> SupportPolygon:
    if not eps > 0:
        raise ValueError("eps must be positive")
    feet = sorted(tree.feet_indices)
    if not feet:
        return SupportPolygon(np.zeros((0, 2)))
    pts = fk.world_positions[feet]
    touching = scene.signed_distance(pts) <= eps
    return convex_hull(gravity_projection(pts[touching]))


def height_grid_local() -> np.ndarray:
    """Sample offsets in the base frame, ``(32, 2)`` row-major (forward rows, left columns)."""
    step_f = HEIGHT_GRID_SPAN / HEIGHT_GRID_ROWS
    step_l = HEIGHT_GRID_SPAN / HEIGHT_GRID_COLS
    f = -0.5 * HEIGHT_GRID_SPAN + (np.arange(HEIGHT_GRID_ROWS) + 0.5) * step_f
    l = -0.5 * HEIGHT_GRID_SPAN + (np.arange(HEIGHT_GRID_COLS) + 0.5) * step_l
    ff, ll = np.meshgrid(f, l, indexing="ij")
    return np.stack([ff.ravel(), ll.ravel()], axis=-1)


def height_grid_world(base_position, base_yaw: float) -> np.ndarray:
    local = height_grid_local()
    c, s = np.cos(base_yaw), np.sin(base_yaw)
    x = np.asarray(base_position, dtype=float)[0] + c * local[:, 0] - s * local[:, 1]
    y = np.asarray(base_position, dtype=float)[1] + s * local[:, 0] + c * local[:, 1]
    return np.stack([x, y], axis=-1)


def sample_height_map(scene: TerrainScene, base_position, base_yaw: float) -> np.ndarray:
    """Tallest surface height under each of the 32 grid points."""
    xy = height_grid_world(base_position, base_yaw)
    pts = np.concatenate([xy, np.zeros((xy.shape[0], 1))], axis=1)
    h = np.full(xy.shape[0], float(scene.ground_height))
    for box in scene.boxes:
        h = np.where(box.covers_xy(pts), np.maximum(h, box.top), h)
    return h


# -- file format ------------------------------------------------------------

def scene_to_dict(scene: TerrainScene) -> dict:
    return {
        "format_version": SCENE_FORMAT_VERSION,
        "ground_height": scene.ground_height,
        "boxes": [
            {"center": list(b.center), "half_extents": list(b.half_extents), "yaw": b.yaw}
            for b in scene.boxes
        ],
    }


def scene_from_dict(d: dict) -> TerrainScene:
    if d.get("format_version") != SCENE_FORMAT_VERSION:
        raise FormatError(f"unsupported scene format_version {d.get('format_version')!r}")
    boxes = tuple(Box(b["center"], b["half_extents"], float(b.get("yaw", 0.0))) for b in d.get("boxes", []))
    return TerrainScene(float(d.get("ground_height", 0.0)), boxes)


def load_scene(path) -> TerrainScene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))


def save_scene(scene: TerrainScene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")
