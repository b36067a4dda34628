"""Segment-wise reshaping of a grid initial path with boundary-velocity continuity.

The initial path is cut into segments of at most ``m`` steps that share
their boundary waypoints. Each segment is reshaped with CFS in order; from
the second segment on, the first step is pinned to the last step of the
already reshaped predecessor. When a segment cannot be reshaped, the
boundary in front of it is replaced by two boundaries halfway into the
adjoining segments and reshaping restarts one segment earlier.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cfs import CfsConfig, CfsStatus, PackedHulls, build_objective, cfs_reshape
from .env import GridEnvironment, dilated_obstacle_hulls
from .errors import SegmentTooSmall, TooFewWaypoints
from .roadmap import build_roadmap, initial_path


@dataclass(frozen=True)
class Segmentation:
    boundaries: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.boundaries) - 1

    def segment(self, i: int) -> tuple[int, int]:
        return self.boundaries[i], self.boundaries[i + 1]


@dataclass(frozen=True)
class RprConfig:
    m: int | None = 60  # None reshapes the whole path at once (RPR-ALL)
    cfs: CfsConfig = CfsConfig()
    max_alternations: int = 10  # per boundary
    lam: float = 1.0

    def __post_init__(self):
        if self.m is not None and self.m < 3:
            raise ValueError("m must be at least 3")


class PlanStatus(str, enum.Enum):
    SUCCESS = "Success"
    FALLBACK = "InitialPathFallback"


@dataclass
class PlanMetrics:
    init_time_s: float = 0.0
    reshape_time_s: float = 0.0
    iterations: int = 0
    alternations: int = 0
    curvature_sweeps: int = 0
    segments: int = 0
    boundaries: tuple[int, ...] = ()
    waypoints: int = 0
    objective: float = float("nan")
    failure: str = ""
    traces: list[list[float]] = field(default_factory=list)
    curvature_log: list[tuple[int, int, float]] = field(default_factory=list)


@dataclass
class PlanResult:
    path: np.ndarray
    status: PlanStatus
    metrics: PlanMetrics
    initial: np.ndarray

    @property
    def success(self) -> bool:
        return self.status is PlanStatus.SUCCESS

    def report(self) -> dict:
        return {
            "status": self.status.value,
            "waypoints": [[float(a), float(b)] for a, b in self.path],
            "init_time_s": self.metrics.init_time_s,
            "reshape_time_s": self.metrics.reshape_time_s,
            "iterations": self.metrics.iterations,
            "alternations": self.metrics.alternations,
        }


def segment_path(path, m: int) -> Segmentation:
    n1 = len(path)
    if n1 < 2:
        raise TooFewWaypoints("a path needs at least two waypoints")
    if m < 3:
        raise ValueError("m must be at least 3")
    n = n1 - 1
    d = math.ceil(n1 / m) if n1 > m else 1
    b = [j * m for j in range(d)] + [n]
    # a trailing segment with fewer than 3 waypoints joins its predecessor
    while len(b) > 2 and b[-1] - b[-2] + 1 < 3:
        del b[-2]
    return Segmentation(tuple(b))


def alter_boundary(seg: Segmentation, j: int) -> Segmentation:
    """Replace interior boundary ``j`` by two boundaries halfway into its neighbours.

    Segment sizes ``m1``, ``m2`` count steps between boundaries, so a segment
    with ``k`` waypoints has size ``k - 1``.
    """
    b = list(seg.boundaries)
    if not 0 < j < len(b) - 1:
        raise IndexError(f"boundary {j} is not an interior boundary")
    m1 = b[j] - b[j - 1]
    m2 = b[j + 1] - b[j]
    if m1 + 1 <= 3 or m2 + 1 <= 3:
        raise SegmentTooSmall(f"segments around boundary {j} have {m1 + 1} and {m2 + 1} waypoints")
    left = b[j] - math.ceil(m1 / 2)
    right = b[j] + math.ceil(m2 / 2)
    return Segmentation(tuple(b[:j] + [left, right] + b[j + 1:]))


def reshape_segment(env: GridEnvironment, hulls, segment, inbound_velocity, model, cfg: CfsConfig):
    """CFS on one segment; with ``inbound_velocity`` v the first step is pinned to v.

    The pinned waypoint ``x0 + v`` is fully determined by the predecessor, so
    it is only checked against obstacles, not against the workspace box: a
    predecessor that meets a wall at a shallow angle would otherwise make
    every later segment along that wall infeasible.
    """
    seg = np.array(segment, dtype=float)
    extra = None
    exempt: tuple[int, ...] = ()
    if inbound_velocity is not None:
        v = np.asarray(inbound_velocity, dtype=float)
        dim = 2 * len(seg)
        E = np.zeros((2, dim))
        E[0, 2], E[0, 0] = 1.0, -1.0
        E[1, 3], E[1, 1] = 1.0, -1.0
        extra = (E, v.copy())
        if len(seg) > 2:
            seg[1] = seg[0] + v
            exempt = (1,)
    return cfs_reshape(env, hulls, seg, model, cfg, extra_eq=extra, box_exempt=exempt)


def reshape_path(env: GridEnvironment, hulls, initial, cfg: RprConfig, metrics: PlanMetrics):
    """Run the segment loop; returns the reshaped path or None on failure."""
    initial = np.asarray(initial, dtype=float)
    m = cfg.m if cfg.m is not None else len(initial)
    seg = segment_path(initial, max(m, 3))
    # alternations that produced each boundary; its replacements inherit depth + 1
    depth = [0] * len(seg.boundaries)
    done: list[np.ndarray] = []
    i = 0
    while i < seg.count:
        b0, b1 = seg.segment(i)
        part = initial[b0:b1 + 1]
        v = None if i == 0 else done[-1][-1] - done[-1][-2]
        model = build_objective(len(part) - 1, cfg.lam)
        res = reshape_segment(env, hulls, part, v, model, cfg.cfs)
        metrics.iterations += res.iterations
        metrics.traces.append(res.objective_trace)
        if res.status is not CfsStatus.CONVERGED:
            if i == 0 or depth[i] >= cfg.max_alternations:
                metrics.failure = f"segment {i}: {res.status.value}"
                metrics.segments = seg.count
                return None
            try:
                seg = alter_boundary(seg, i)
            except SegmentTooSmall:
                metrics.failure = f"segment {i}: {res.status.value}, cannot alter boundary"
                metrics.segments = seg.count
                return None
            depth[i:i + 1] = [depth[i] + 1] * 2
            metrics.alternations += 1
            i -= 1
            del done[i:]
            continue
        done.append(res.path)
        i += 1
    metrics.segments = seg.count
    metrics.boundaries = seg.boundaries
    out = [done[0]] + [p[1:] for p in done[1:]]
    return np.concatenate(out)


def rpr_plan(env: GridEnvironment, start, goal, cfg: RprConfig = RprConfig()) -> PlanResult:
    """Grid initial path + segment-wise CFS reshaping.

    Raises ``Unreachable`` when no grid path exists. A reshaping failure
    returns the initial path with status ``InitialPathFallback``.
    """
    metrics = PlanMetrics()
    t0 = time.perf_counter()
    graph = build_roadmap(env)
    init = initial_path(env, start, goal, graph)
    metrics.init_time_s = time.perf_counter() - t0
    return reshape_initial(env, init, cfg, metrics)


def reshape_initial(env: GridEnvironment, init, cfg: RprConfig, metrics: PlanMetrics) -> PlanResult:
    t1 = time.perf_counter()
    hulls = PackedHulls.from_polygons(dilated_obstacle_hulls(env))
    path = reshape_path(env, hulls, init, cfg, metrics)
    metrics.reshape_time_s = time.perf_counter() - t1
    if path is None:
        metrics.waypoints = len(init)
        return PlanResult(np.array(init, dtype=float), PlanStatus.FALLBACK, metrics, init)
    metrics.waypoints = len(path)
    metrics.objective = build_objective(len(path) - 1, cfg.lam)(path)
    return PlanResult(path, PlanStatus.SUCCESS, metrics, init)
