"""Uniform front end for the benchmark planners.

Planner names: ``cfs-line``, ``rpr-all``, ``rpr-<m>`` and ``erpr-<m>``.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field

import numpy as np

from ..cfs import CfsConfig, PackedHulls, build_objective, cfs_reshape
from ..curvature import CurvatureConfig, erpr_plan
from ..env import GridEnvironment, dilated_obstacle_hulls
from ..errors import InputError, Unreachable
from ..roadmap import build_roadmap, initial_path
from ..rpr import PlanMetrics, PlanResult, PlanStatus, RprConfig, rpr_plan

_NAME = re.compile(r"^(cfs-line|rpr-all|rpr-(\d+)|erpr-(\d+))$")


@dataclass(frozen=True)
class PlannerSpec:
    kind: str  # "cfs-line", "rpr" or "erpr"
    m: int | None = None

    @property
    def name(self) -> str:
        if self.kind == "cfs-line":
            return "cfs-line"
        return f"{self.kind}-{'all' if self.m is None else self.m}"


def parse_planner(name: str) -> PlannerSpec:
    mt = _NAME.match(name.strip().lower())
    if not mt:
        raise InputError(f"unknown planner {name!r}; expected cfs-line, rpr-all, rpr-<m> or erpr-<m>")
    if mt.group(1) == "cfs-line":
        return PlannerSpec("cfs-line")
    if mt.group(1) == "rpr-all":
        return PlannerSpec("rpr")
    m = int(mt.group(2) or mt.group(3))
    if m < 3:
        raise InputError("segment size m must be at least 3")
    return PlannerSpec("rpr" if mt.group(2) else "erpr", m)


def parse_planners(text: str) -> list[PlannerSpec]:
    return [parse_planner(s) for s in text.split(",") if s.strip()]


@dataclass
class PlannerOutcome:
    """What a planner returned, whether or not it succeeded."""

    planner: str
    status: str  # Success, InitialPathFallback, Unreachable
    path: np.ndarray | None
    metrics: PlanMetrics
    initial: np.ndarray | None = None
    traces: list[list[float]] = field(default_factory=list)

    @property
    def reported_success(self) -> bool:
        return self.status == PlanStatus.SUCCESS.value

    def report(self) -> dict:
        wp = [] if self.path is None else [[float(a), float(b)] for a, b in self.path]
        return {
            "status": self.status,
            "waypoints": wp,
            "init_time_s": self.metrics.init_time_s,
            "reshape_time_s": self.metrics.reshape_time_s,
            "iterations": self.metrics.iterations,
            "alternations": self.metrics.alternations,
        }


def cfs_line_plan(env: GridEnvironment, start, goal, n_waypoints: int | None = None,
                  cfg: CfsConfig = CfsConfig(), lam: float = 1.0):
    """CFS from the straight start-goal segment.

    ``n_waypoints`` defaults to the length of the grid initial path, so the
    baseline gets as many waypoints as the grid-initialized planners.
    Returns ``(PlanResult, CfsResult)``.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if n_waypoints is None:
        n_waypoints = len(initial_path(env, start, goal, build_roadmap(env)))
    n_waypoints = max(int(n_waypoints), 2)
    line = np.linspace(start, goal, n_waypoints)
    line[0], line[-1] = start, goal
    metrics = PlanMetrics()
    t0 = time.perf_counter()
    hulls = PackedHulls.from_polygons(dilated_obstacle_hulls(env))
    model = build_objective(n_waypoints - 1, lam)
    res = cfs_reshape(env, hulls, line, model, cfg)
    metrics.reshape_time_s = time.perf_counter() - t0
    metrics.iterations = res.iterations
    metrics.traces.append(res.objective_trace)
    metrics.waypoints = len(res.path)
    status = PlanStatus.SUCCESS if res.converged else PlanStatus.FALLBACK
    if res.converged:
        metrics.objective = model(res.path)
    else:
        metrics.failure = res.status.value
    return PlanResult(res.path, status, metrics, line), res


def run_planner(spec: PlannerSpec, env: GridEnvironment, start, goal,
                theta_max: float = math.radians(30), cfs: CfsConfig = CfsConfig(),
                line_waypoints: int | None = None) -> PlannerOutcome:
    """Run one planner; a missing initial path becomes status ``Unreachable``."""
    try:
        if spec.kind == "cfs-line":
            res, _ = cfs_line_plan(env, start, goal, line_waypoints, cfs)
        elif spec.kind == "rpr":
            res = rpr_plan(env, start, goal, RprConfig(m=spec.m, cfs=cfs))
        elif spec.kind == "erpr":
            res = erpr_plan(env, start, goal, RprConfig(m=spec.m, cfs=cfs),
                            CurvatureConfig(theta_max=theta_max))
        else:
            raise InputError(f"unknown planner kind {spec.kind!r}")
    except Unreachable as exc:
        m = PlanMetrics(failure=str(exc))
        return PlannerOutcome(spec.name, "Unreachable", None, m)
    return PlannerOutcome(spec.name, res.status.value, res.path, res.metrics, res.initial,
                          res.metrics.traces)
