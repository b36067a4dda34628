"""Batch benchmark over random obstacle fields.

Each (group, trial) pair gets its own environment seed derived from the base
seed, so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..cfs import CfsConfig, build_objective
from ..env import rasterize_and_dilate
from ..errors import Unreachable
from ..roadmap import build_roadmap, initial_path
from .audit import audit_path
from .generate import EnvSpec, generate_environment, trial_seed
from .planners import PlannerSpec, run_planner

CSV_HEADER = ["group", "trial", "planner", "q", "seed", "status", "total_time_s",
              "init_time_s", "waypoints", "J_final", "max_angle_deg"]


@dataclass
class TrialRow:
    group: int
    trial: int
    planner: str
    q: int
    seed: int
    status: str
    total_time_s: float
    init_time_s: float
    waypoints: int
    J_final: float
    max_angle_deg: float
    # not written to the CSV
    reshape_time_s: float = 0.0
    initial_waypoints: int = 0
    clearance: float = math.nan
    traces: list[list[float]] = field(default_factory=list, repr=False)
    path: np.ndarray | None = field(default=None, repr=False)

    @property
    def success(self) -> bool:
        return self.status == "success"

    def csv_fields(self, timing: bool = True) -> list[str]:
        t = (lambda v: f"{v:.6f}") if timing else (lambda v: "")
        return [str(self.group), str(self.trial), self.planner, str(self.q), str(self.seed),
                self.status, t(self.total_time_s), t(self.init_time_s), str(self.waypoints),
                repr(float(self.J_final)), repr(float(self.max_angle_deg))]


@dataclass
class GroupSummary:
    planner: str
    q: int
    solved: int
    total: int
    avg_total_time_s: float
    avg_init_time_s: float
    avg_waypoints: float


@dataclass
class BenchmarkResult:
    rows: list[TrialRow]
    groups: list[tuple[int, int]]
    planners: list[str]

    def summary(self) -> list[GroupSummary]:
        acc = defaultdict(list)
        for r in self.rows:
            acc[r.planner, r.q].append(r)
        out = []
        for name in self.planners:
            for q, _ in self.groups:
                rs = acc.get((name, q), [])
                if not rs:
                    continue
                ok = [r for r in rs if r.success]
                out.append(GroupSummary(
                    name, q, len(ok), len(rs),
                    float(np.mean([r.total_time_s for r in ok])) if ok else math.nan,
                    float(np.mean([r.init_time_s for r in ok])) if ok else math.nan,
                    float(np.mean([r.waypoints for r in ok])) if ok else math.nan))
        return out

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields(timing))
        return buf.getvalue()

    def write_csv(self, path, timing: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv(timing))

    def format_table(self) -> str:
        lines = [f"{'planner':<10} {'q':>3} {'solved':>12} {'total s (init s)':>22} {'waypoints':>10}"]
        for s in self.summary():
            rate = f"{s.solved}/{s.total}({100 * s.solved / s.total:.1f}%)"
            times = "-" if s.solved == 0 else f"{s.avg_total_time_s:.3f} ({s.avg_init_time_s:.3f})"
            wp = "-" if s.solved == 0 else f"{s.avg_waypoints:.1f}"
            lines.append(f"{s.planner:<10} {s.q:>3} {rate:>12} {times:>22} {wp:>10}")
        return "\n".join(lines)


@dataclass(frozen=True)
class BenchConfig:
    shape: str = "rectangle"
    theta_max: float = math.radians(30)
    cfs: CfsConfig = CfsConfig()
    angle_tol: float = 1e-6
    start: tuple[float, float] = (0.0, 0.0)
    goal: tuple[float, float] = (9.0, 0.0)


def run_trial(group: int, q: int, trial: int, base_seed: int, planners: Sequence[PlannerSpec],
              cfg: BenchConfig = BenchConfig()) -> list[TrialRow]:
    seed = trial_seed(base_seed, q, trial)
    spec = EnvSpec(seed, q, cfg.shape, start=cfg.start, goal=cfg.goal)
    env = rasterize_and_dilate(spec.workspace, generate_environment(spec), spec.delta, spec.d_min)
    line_n = None
    if any(p.kind == "cfs-line" for p in planners):
        try:
            line_n = len(initial_path(env, spec.start, spec.goal, build_roadmap(env)))
        except Unreachable:
            line_n = None
    rows = []
    for p in planners:
        if p.kind == "cfs-line" and line_n is None:
            out = None
        else:
            out = run_planner(p, env, spec.start, spec.goal, cfg.theta_max, cfg.cfs, line_n)
        if out is None or out.path is None:
            rows.append(TrialRow(group, trial, p.name, q, seed, "Unreachable", 0.0, 0.0, 0,
                                 math.nan, math.nan))
            continue
        m = out.metrics
        limit = cfg.theta_max if p.kind == "erpr" else None
        audit = audit_path(out.path, spec.start, spec.goal, env.obstacles, spec.d_min,
                           limit, cfg.angle_tol)
        if not out.reported_success:
            status = out.status
        elif not audit.ok:
            status = "AuditFailed"
        else:
            status = "success"
        J = build_objective(len(out.path) - 1, 1.0)(out.path) if len(out.path) > 1 else 0.0
        rows.append(TrialRow(
            group, trial, p.name, q, seed, status,
            m.init_time_s + m.reshape_time_s, m.init_time_s, len(out.path), J,
            math.degrees(audit.max_angle),
            reshape_time_s=m.reshape_time_s,
            initial_waypoints=0 if out.initial is None else len(out.initial),
            clearance=audit.clearance, traces=out.traces, path=out.path))
    return rows


def _trial_task(args):
    return run_trial(*args)


def run_benchmark(groups: Sequence[tuple[int, int]], planners: Sequence[PlannerSpec], base_seed: int,
                  cfg: BenchConfig = BenchConfig(), jobs: int = 1) -> BenchmarkResult:
    """Run every planner on ``trials`` environments per ``(q, trials)`` group.

    Rows come out in (group, trial, planner) order regardless of ``jobs``.
    """
    tasks = [(g, q, t, base_seed, tuple(planners), cfg)
             for g, (q, trials) in enumerate(groups, start=1) for t in range(trials)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_trial_task, tasks))
    else:
        chunks = [_trial_task(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    return BenchmarkResult(rows, list(groups), [p.name for p in planners])
