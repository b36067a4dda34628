"""Workspace, obstacles and the dilated occupancy grid.

Cell ``(r, c)`` covers ``[c*delta, (c+1)*delta] x [r*delta, (r+1)*delta]``;
row index grows with the y coordinate. Grid nodes (cell corners) are indexed
the same way, ``node (r, c)`` sitting at ``(c*delta, r*delta)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull

from .errors import InputError, IoError, NonPositiveResolution, ObstacleOutsideWorkspace

# relative slack used when comparing coordinates against grid lines
GRID_EPS = 1e-9


@dataclass(frozen=True)
class Obstacle:
    kind: str
    center: tuple[float, float]
    width: float = 0.0
    height: float = 0.0
    radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.kind == "rectangle":
            if not (self.width > 0 and self.height > 0):
                raise InputError("rectangle width and height must be positive")
        elif self.kind == "circle":
            if not self.radius > 0:
                raise InputError("circle radius must be positive")
        else:
            raise InputError(f"unknown obstacle kind {self.kind!r}")

    @classmethod
    def rectangle(cls, center, width, height) -> "Obstacle":
        return cls("rectangle", tuple(center), width=float(width), height=float(height))

    @classmethod
    def circle(cls, center, radius) -> "Obstacle":
        return cls("circle", tuple(center), radius=float(radius))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the obstacle."""
        cx, cy = self.center
        if self.kind == "rectangle":
            hw, hh = self.width / 2, self.height / 2
        else:
            hw = hh = self.radius
        return cx - hw, cy - hh, cx + hw, cy + hh

    @property
    def area(self) -> float:
        if self.kind == "rectangle":
            return self.width * self.height
        return math.pi * self.radius**2

    def distance(self, points) -> np.ndarray:
        """Euclidean distance from each point to the obstacle (0 inside)."""
        p = np.asarray(points, dtype=float)
        cx, cy = self.center
        if self.kind == "rectangle":
            dx = np.maximum(np.abs(p[..., 0] - cx) - self.width / 2, 0.0)
            dy = np.maximum(np.abs(p[..., 1] - cy) - self.height / 2, 0.0)
            return np.hypot(dx, dy)
        return np.maximum(np.hypot(p[..., 0] - cx, p[..., 1] - cy) - self.radius, 0.0)

    def to_dict(self) -> dict:
        if self.kind == "rectangle":
            return {"kind": "rectangle", "center": list(self.center),
                    "width": self.width, "height": self.height}
        return {"kind": "circle", "center": list(self.center), "radius": self.radius}

    @classmethod
    def from_dict(cls, d: dict) -> "Obstacle":
        kind = d.get("kind")
        try:
            if kind == "rectangle":
                return cls.rectangle(d["center"], d["width"], d["height"])
            if kind == "circle":
                return cls.circle(d["center"], d["radius"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed obstacle {d!r}") from exc
        raise InputError(f"unknown obstacle kind {kind!r}")


@dataclass(frozen=True)
class Workspace:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InputError("workspace width and height must be positive")

    def contains(self, points, tol: float = GRID_EPS) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return ((p[..., 0] >= -tol) & (p[..., 0] <= self.width + tol)
                & (p[..., 1] >= -tol) & (p[..., 1] <= self.height + tol))


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon with counterclockwise vertices, shape (k, 2)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InputError("polygon needs at least three 2-D vertices")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        e.setflags(write=False)
        return e

    @cached_property
    def outward_normals(self) -> np.ndarray:
        e = self.edges
        n = np.column_stack([e[:, 1], -e[:, 0]])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        n.setflags(write=False)
        return n

    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


@dataclass(frozen=True)
class Footprint:
    """Dilated cells of a single obstacle: boolean ``mask`` anchored at (row0, col0).

    The mask is not clipped to the grid, so anchors may be negative and cells
    may lie beyond the walls.
    """

    row0: int
    col0: int
    mask: np.ndarray


@dataclass(frozen=True, eq=False)
class GridEnvironment:
    workspace: Workspace
    delta: float
    rows: int
    cols: int
    occupied: np.ndarray
    obstacles: tuple[Obstacle, ...]
    d_min: float
    dilation_cells: int
    footprints: tuple[Footprint, ...] = field(repr=False)

    def cell_bounds(self, r: int, c: int) -> tuple[float, float, float, float]:
        d = self.delta
        return c * d, r * d, (c + 1) * d, (r + 1) * d

    @property
    def occupied_count(self) -> int:
        return int(self.occupied.sum())

    def to_dict(self) -> dict:
        return {
            "workspace": {"width": self.workspace.width, "height": self.workspace.height},
            "delta": self.delta,
            "d_min": self.d_min,
            "obstacles": [o.to_dict() for o in self.obstacles],
        }


def dilation_radius_cells(delta: float, d_min: float) -> int:
    """Number of cells added around each obstacle: ceil(d_min/delta) + 1."""
    return int(math.ceil(d_min / delta - GRID_EPS)) + 1


def _cell_range(lo: float, hi: float, delta: float, n: int) -> tuple[int, int]:
    # cells whose open interval overlaps the open interval (lo, hi)
    eps = GRID_EPS
    first = int(math.floor(lo / delta + eps))
    last = int(math.ceil(hi / delta - eps)) - 1
    return max(first, 0), min(last, n - 1)


def _raster_obstacle(ob: Obstacle, delta: float, rows: int, cols: int):
    xmin, ymin, xmax, ymax = ob.bounds
    c0, c1 = _cell_range(xmin, xmax, delta, cols)
    r0, r1 = _cell_range(ymin, ymax, delta, rows)
    if c1 < c0 or r1 < r0:
        return r0, c0, np.zeros((0, 0), dtype=bool)
    if ob.kind == "rectangle":
        return r0, c0, np.ones((r1 - r0 + 1, c1 - c0 + 1), dtype=bool)
    # circle: the open disk must overlap the cell, i.e. the closed cell is
    # strictly closer than the radius
    cs = np.arange(c0, c1 + 1)
    rs = np.arange(r0, r1 + 1)
    cx, cy = ob.center
    dx = np.maximum(np.maximum(cs * delta - cx, cx - (cs + 1) * delta), 0.0)
    dy = np.maximum(np.maximum(rs * delta - cy, cy - (rs + 1) * delta), 0.0)
    dist = np.hypot(dy[:, None], dx[None, :])
    return r0, c0, dist < ob.radius * (1 - GRID_EPS)


def rasterize_and_dilate(workspace: Workspace, obstacles: Sequence[Obstacle],
                         delta: float, d_min: float) -> GridEnvironment:
    """Rasterize obstacles onto a ``delta`` grid and grow them by whole cells.

    A cell is marked when its interior overlaps an obstacle's interior (cells
    merely touching an obstacle edge are not marked). The marked set is then
    grown by ``ceil(d_min/delta) + 1`` cells in Chebyshev distance.
    """
    if not delta > 0:
        raise NonPositiveResolution(f"delta must be positive, got {delta}")
    if d_min < 0:
        raise InputError(f"d_min must be non-negative, got {d_min}")
    obstacles = tuple(obstacles)
    for ob in obstacles:
        xmin, ymin, xmax, ymax = ob.bounds
        tol = GRID_EPS * max(workspace.width, workspace.height)
        if xmin < -tol or ymin < -tol or xmax > workspace.width + tol or ymax > workspace.height + tol:
            raise ObstacleOutsideWorkspace(f"obstacle {ob} leaves the workspace")

    rows = max(int(round(workspace.height / delta)), 1)
    cols = max(int(round(workspace.width / delta)), 1)
    radius = dilation_radius_cells(delta, d_min)
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)

    occupied = np.zeros((rows, cols), dtype=bool)
    footprints = []
    for ob in obstacles:
        r0, c0, mask = _raster_obstacle(ob, delta, rows, cols)
        if mask.size == 0 or not mask.any():
            footprints.append(Footprint(r0, c0, np.zeros((0, 0), dtype=bool)))
            continue
        padded = np.pad(mask, radius)
        grown = ndimage.binary_dilation(padded, structure=structure)
        grown.setflags(write=False)
        gr0, gc0 = r0 - radius, c0 - radius
        # the footprint keeps cells beyond the walls; only the grid is clipped
        footprints.append(Footprint(gr0, gc0, grown))
        top, left = max(0, -gr0), max(0, -gc0)
        bottom = min(grown.shape[0], rows - gr0)
        right = min(grown.shape[1], cols - gc0)
        occupied[gr0 + top:gr0 + bottom, gc0 + left:gc0 + right] |= grown[top:bottom, left:right]

    occupied.setflags(write=False)
    return GridEnvironment(workspace, float(delta), rows, cols, occupied, obstacles,
                           float(d_min), radius, tuple(footprints))


def environment_from_occupancy(occupied, delta: float = 1.0) -> GridEnvironment:
    """Wrap a ready-made occupancy grid (row = y) without obstacles or hulls."""
    if not delta > 0:
        raise NonPositiveResolution(f"delta must be positive, got {delta}")
    occ = np.array(occupied, dtype=bool)
    if occ.ndim != 2 or occ.size == 0:
        raise InputError("occupancy must be a non-empty 2-D array")
    occ.setflags(write=False)
    rows, cols = occ.shape
    ws = Workspace(cols * delta, rows * delta)
    return GridEnvironment(ws, float(delta), rows, cols, occ, (), 0.0, 0, ())


def _touching_indices(u: float, n: int) -> list[int]:
    # cell indices whose closed interval [i, i+1] contains coordinate u (grid units)
    i = math.floor(u)
    out = [i]
    if abs(u - round(u)) <= GRID_EPS * max(1.0, abs(u)):
        k = int(round(u))
        out = [k - 1, k]
    return [j for j in out if 0 <= j < n]


def point_in_dilated(env: GridEnvironment, p) -> bool:
    """True if ``p`` lies in a (closed) occupied cell or outside the workspace."""
    x, y = float(p[0]), float(p[1])
    if not env.workspace.contains((x, y)):
        return True
    cs = _touching_indices(x / env.delta, env.cols)
    rs = _touching_indices(y / env.delta, env.rows)
    return any(env.occupied[r, c] for r in rs for c in cs)


def points_in_dilated(env: GridEnvironment, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.array([point_in_dilated(env, p) for p in pts], dtype=bool)


def _closed_range(lo: float, hi: float, n: int) -> tuple[int, int]:
    # cells [i, i+1] meeting the closed interval [lo, hi], grid units
    first = int(math.ceil(lo - 1 - GRID_EPS))
    last = int(math.floor(hi + GRID_EPS))
    return max(first, 0), min(last, n - 1)


def segment_collision_free(env: GridEnvironment, p, q) -> bool:
    """True iff the closed segment pq touches no occupied cell and stays in the workspace.

    Every cell whose closed square meets the segment is inspected (supercover
    traversal), column strip by column strip.
    """
    ws = env.workspace
    if not (ws.contains(p) and ws.contains(q)):
        return False
    d = env.delta
    x0, y0 = p[0] / d, p[1] / d
    x1, y1 = q[0] / d, q[1] / d
    if x1 < x0:
        x0, y0, x1, y1 = x1, y1, x0, y0
    occ = env.occupied
    c_first, c_last = _closed_range(x0, x1, env.cols)
    dx = x1 - x0
    for c in range(c_first, c_last + 1):
        if dx > 0:
            xa, xb = max(x0, c), min(x1, c + 1)
            if xa > xb:
                xa = xb = min(max(x0, c), x1)
            ya = y0 + (y1 - y0) * (xa - x0) / dx
            yb = y0 + (y1 - y0) * (xb - x0) / dx
        else:
            ya, yb = y0, y1
        r_first, r_last = _closed_range(min(ya, yb), max(ya, yb), env.rows)
        if r_last >= r_first and occ[r_first:r_last + 1, c].any():
            return False
    return True


def clearance(p, obstacles: Iterable[Obstacle]) -> float:
    """Distance from ``p`` to the nearest obstacle; +inf without obstacles."""
    best = math.inf
    for ob in obstacles:
        best = min(best, float(ob.distance(p)))
    return best


def clearances(points, obstacles: Iterable[Obstacle]) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(len(pts), np.inf)
    for ob in obstacles:
        out = np.minimum(out, ob.distance(pts))
    return out


def dilated_obstacle_hulls(env: GridEnvironment) -> list[ConvexPolygon]:
    """Convex hull of each obstacle's dilated cells, one polygon per obstacle."""
    hulls = []
    d = env.delta
    for fp in env.footprints:
        if fp.mask.size == 0 or not fp.mask.any():
            continue
        rr, cc = np.nonzero(fp.mask)
        rr = rr + fp.row0
        cc = cc + fp.col0
        if fp.mask.all():
            # rectangular block: the hull is its bounding box
            x0, x1 = cc.min() * d, (cc.max() + 1) * d
            y0, y1 = rr.min() * d, (rr.max() + 1) * d
            hulls.append(ConvexPolygon(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])))
            continue
        corners = np.concatenate([
            np.column_stack([cc, rr]), np.column_stack([cc + 1, rr]),
            np.column_stack([cc, rr + 1]), np.column_stack([cc + 1, rr + 1]),
        ]).astype(float)
        corners = np.unique(corners, axis=0)
        hull = ConvexHull(corners)
        hulls.append(ConvexPolygon(corners[hull.vertices] * d))
    return hulls


# --- environment files -----------------------------------------------------

def environment_from_dict(data: dict) -> GridEnvironment:
    try:
        ws = Workspace(float(data["workspace"]["width"]), float(data["workspace"]["height"]))
        delta = float(data["delta"])
        d_min = float(data.get("d_min", 0.0))
        obstacles = [Obstacle.from_dict(o) for o in data.get("obstacles", [])]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed environment description: {exc}") from exc
    return rasterize_and_dilate(ws, obstacles, delta, d_min)


def load_environment(path) -> GridEnvironment:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read environment file {path}: {exc}") from exc
    return environment_from_dict(data)


def save_environment(env: GridEnvironment, path) -> None:
    try:
        Path(path).write_text(json.dumps(env.to_dict(), indent=2))
    except OSError as exc:
        raise IoError(f"cannot write environment file {path}: {exc}") from exc
