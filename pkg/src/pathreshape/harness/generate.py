"""Random obstacle fields with the area law A0 / i**1.1."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import zeta

from ..env import Obstacle, Workspace, point_in_dilated, rasterize_and_dilate
from ..errors import PlacementFailed
from ..roadmap import build_roadmap, snap_to_free_node

AREA_EXPONENT = 1.1
ASPECT_RANGE = (1 / 2.5, 2.5)
MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class EnvSpec:
    seed: int
    q: int
    shape: str = "rectangle"
    width: float = 9.0
    height: float = 6.0
    delta: float = 0.1
    d_min: float = 0.1
    start: tuple[float, float] = (0.0, 0.0)
    goal: tuple[float, float] = (9.0, 0.0)

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q must be non-negative")
        if self.shape not in ("rectangle", "circle"):
            raise ValueError(f"unknown obstacle shape {self.shape!r}")

    @property
    def workspace(self) -> Workspace:
        return Workspace(self.width, self.height)


def base_area(workspace: Workspace, exponent: float = AREA_EXPONENT) -> float:
    """A0 such that the infinite series of obstacle areas fills the workspace."""
    return workspace.width * workspace.height / float(zeta(exponent))


def trial_seed(base_seed: int, *keys: int) -> int:
    """Portable 64-bit seed for one trial, derived with numpy's SeedSequence."""
    ss = np.random.SeedSequence([int(base_seed) & (2**64 - 1), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _overlap(a: Obstacle, b: Obstacle) -> bool:
    if a.kind == "rectangle" and b.kind == "rectangle":
        ax0, ay0, ax1, ay1 = a.bounds
        bx0, by0, bx1, by1 = b.bounds
        return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1
    if a.kind == "circle" and b.kind == "circle":
        return math.dist(a.center, b.center) < a.radius + b.radius
    rect, circ = (a, b) if a.kind == "rectangle" else (b, a)
    return float(rect.distance(circ.center)) < circ.radius


def _well_posed(spec: EnvSpec, obstacles: list[Obstacle]) -> bool:
    # endpoints free and joined by the grid roadmap
    env = rasterize_and_dilate(spec.workspace, obstacles, spec.delta, spec.d_min)
    if point_in_dilated(env, spec.start) or point_in_dilated(env, spec.goal):
        return False
    graph = build_roadmap(env)
    labels, _ = ndimage.label(graph.free)
    s = snap_to_free_node(graph, spec.start)
    g = snap_to_free_node(graph, spec.goal)
    return labels[s] == labels[g]


def generate_environment(spec: EnvSpec) -> list[Obstacle]:
    """Place ``spec.q`` non-overlapping obstacles by rejection sampling.

    Obstacle ``i`` (1-based) has area ``A0 / i**1.1``; rectangles draw their
    aspect ratio from U[0.4, 2.5]; centers are uniform over the workspace.
    Placements that leave the workspace, overlap an earlier obstacle, or cut
    the start off from the goal on the grid roadmap are rejected.
    """
    rng = np.random.default_rng(spec.seed)
    ws = spec.workspace
    a0 = base_area(ws)
    placed: list[Obstacle] = []
    for i in range(1, spec.q + 1):
        area = a0 / i**AREA_EXPONENT
        for _ in range(MAX_ATTEMPTS):
            if spec.shape == "rectangle":
                ratio = rng.uniform(*ASPECT_RANGE)
                cx, cy = rng.uniform(0, ws.width), rng.uniform(0, ws.height)
                w, h = math.sqrt(area * ratio), math.sqrt(area / ratio)
                ob = Obstacle.rectangle((cx, cy), w, h)
            else:
                cx, cy = rng.uniform(0, ws.width), rng.uniform(0, ws.height)
                ob = Obstacle.circle((cx, cy), math.sqrt(area / math.pi))
            x0, y0, x1, y1 = ob.bounds
            if x0 < 0 or y0 < 0 or x1 > ws.width or y1 > ws.height:
                continue
            if any(_overlap(ob, other) for other in placed):
                continue
            if not _well_posed(spec, placed + [ob]):
                continue
            placed.append(ob)
            break
        else:
            raise PlacementFailed(f"could not place obstacle {i} after {MAX_ATTEMPTS} attempts")
    return placed
