"""Turn-angle (discrete curvature) checking and per-waypoint convex repair.

The turn at waypoint ``x_{i-1}`` is the angle between ``x_{i-1} - x_{i-2}``
and ``x_i - x_{i-1}``; it is reported under index ``i`` (i = 2..n). Keeping
it below ``theta_max`` while moving ``x_i`` alone is the wedge
``|cross| <= tan(theta_max) * dot``, i.e. two half-planes in ``x_i``.
"""

from __future__ import annotations

import csv
import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .beamlet import beamlet_shortest_path, build_beamlet_graph, densify
from .cfs import PackedHulls, build_objective, feasible_halfplanes
from .env import GridEnvironment, dilated_obstacle_hulls
from .errors import DegenerateStep, InputError
from .qp import QuadraticProgram, solve_qp
from .rpr import PlanMetrics, PlanResult, PlanStatus, RprConfig, reshape_path


class CurvatureMode(str, enum.Enum):
    WEDGE_ONLY = "wedge-only"  # constrain only the turn at x_{i-1}
    EXTENDED = "extended"  # also the turns at x_i and x_{i+1}


@dataclass(frozen=True)
class CurvatureConfig:
    theta_max: float = math.radians(30)
    maxiter: int | None = None  # sweeps; None means the waypoint count
    qp_tol: float = 1e-8
    mode: CurvatureMode = CurvatureMode.EXTENDED
    lens_points: int = 8  # vertices per arc of the inscribed polygon for the turn at x_i
    angle_tol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.theta_max < math.pi / 2:
            raise InputError("theta_max must lie strictly between 0 and pi/2")
        if self.lens_points < 2:
            raise InputError("lens_points must be at least 2")

    @property
    def c1(self) -> float:
        return math.tan(self.theta_max)


def turn_angles(path) -> np.ndarray:
    """Turn angles ``theta_i`` for i = 2..n as an array of length n - 1."""
    p = np.asarray(path, dtype=float)
    if len(p) < 3:
        return np.zeros(0)
    d = np.diff(p, axis=0)
    if np.any(np.all(d == 0, axis=1)):
        k = int(np.flatnonzero(np.all(d == 0, axis=1))[0])
        raise DegenerateStep(f"waypoints {k} and {k + 1} coincide")
    u, v = d[:-1], d[1:]
    cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    dot = np.einsum("ij,ij->i", u, v)
    return np.arctan2(np.abs(cross), dot)


def check_curvature(path, theta_max: float, tol: float = 0.0) -> list[int]:
    """Indices ``i`` (2..n) whose turn angle exceeds ``theta_max + tol``."""
    ang = turn_angles(path)
    return [int(k) + 2 for k in np.flatnonzero(ang > theta_max + tol)]


def curvature_halfplanes(x_prev2, x_prev1, theta_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Wedge at ``x_prev1`` keeping the next turn within ``theta_max``, as ``a @ x <= b``.

    With ``d = x_prev1 - x_prev2`` and ``w = x - x_prev1`` the rows are
    ``-c1 * (d . w) + (d x w) <= 0`` and ``-c1 * (d . w) - (d x w) <= 0``.
    """
    p2 = np.asarray(x_prev2, dtype=float)
    p1 = np.asarray(x_prev1, dtype=float)
    d = p1 - p2
    if not np.any(d):
        raise DegenerateStep("wedge direction is undefined for coinciding waypoints")
    c1 = math.tan(theta_max)
    perp = np.array([-d[1], d[0]])  # d x w = perp . w
    a = np.array([-c1 * d + perp, -c1 * d - perp])
    return a, a @ p1


def lens_halfplanes(a, b, theta_max: float, k: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Inscribed polygon of the points ``x`` whose turn from ``a -> x`` to ``x -> b`` is at most ``theta_max``.

    That set is bounded by two circular arcs through ``a`` and ``b`` on which
    the segment ``ab`` subtends ``pi - theta_max``. The polygon uses ``k``
    points per arc, ends included, so it lies inside the exact set.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    chord = b - a
    L = float(np.hypot(*chord))
    if L == 0:
        raise DegenerateStep("lens endpoints coincide")
    # circle through a, b with inscribed angle pi - theta: radius L / (2 sin theta)
    R = L / (2 * math.sin(theta_max))
    h = math.sqrt(max(R * R - (L / 2) ** 2, 0.0))
    mid = (a + b) / 2
    nrm = np.array([-chord[1], chord[0]]) / L
    half = math.asin(min(1.0, L / (2 * R)))  # half the arc angle seen from the center
    t = np.linspace(-half, half, k)
    pts = [a]
    for side in (1.0, -1.0):
        # the center lies opposite the arc it bounds
        center = mid - side * h * nrm
        base = math.atan2(side * nrm[1], side * nrm[0])
        arc = center + R * np.column_stack([np.cos(base + t), np.sin(base + t)])
        pts.append(arc[1:-1])
    pts.append(b[None, :])
    P = np.vstack([pts[0][None, :], pts[1], pts[3], pts[2]])
    # order counterclockwise around the centroid
    ctr = P.mean(axis=0)
    P = P[np.argsort(np.arctan2(P[:, 1] - ctr[1], P[:, 0] - ctr[0]))]
    E = np.roll(P, -1, axis=0) - P
    normals = np.column_stack([E[:, 1], -E[:, 0]])
    keep = np.hypot(normals[:, 0], normals[:, 1]) > 1e-15
    normals = normals[keep] / np.hypot(normals[keep, 0], normals[keep, 1])[:, None]
    return normals, np.einsum("ij,ij->i", normals, P[keep])


class AdjustStatus(str, enum.Enum):
    ADJUSTED = "Adjusted"
    RELAXED = "Relaxed"  # extended subproblem infeasible; solved with the wedge at x_{i-1} only
    INFEASIBLE = "InfeasibleSubproblem"


@dataclass
class AdjustResult:
    point: np.ndarray
    status: AdjustStatus


def _subproblem(model, path, i):
    H = model.H
    x = np.asarray(path, dtype=float).ravel()
    rows = slice(2 * i, 2 * i + 2)
    Hii = H[rows, rows]
    c = 2.0 * (H[rows] @ x - Hii @ x[rows])
    return 2.0 * Hii, c


def adjust_waypoint(env: GridEnvironment, hulls, path, i: int, model, cfg: CurvatureConfig) -> AdjustResult:
    """Move waypoint ``i`` to minimize J with every other waypoint fixed.

    Constraints: the feasible set of the current ``x_i`` and the wedge at
    ``x_{i-1}``; in extended mode also the turns at ``x_i`` (inscribed lens)
    and at ``x_{i+1}`` (wedge). An infeasible extended subproblem is retried
    with the wedge at ``x_{i-1}`` only; if that fails too the point is kept.
    """
    p = np.asarray(path, dtype=float)
    n = len(p) - 1
    if not 2 <= i <= n - 2:
        raise IndexError(f"waypoint {i} is outside the adjustable range 2..{n - 2}")
    hs = feasible_halfplanes(env, hulls, p[i:i + 1])
    if hs.empty[0]:
        return AdjustResult(p[i].copy(), AdjustStatus.INFEASIBLE)
    base_G, base_h = hs.normals, hs.offsets
    wa, wb = curvature_halfplanes(p[i - 2], p[i - 1], cfg.theta_max)
    Q, c = _subproblem(model, p, i)

    # a solution at a wedge apex would leave a zero-length step and an undefined turn
    min_step = 1e-3 * min(np.hypot(*(p[i] - p[i - 1])), np.hypot(*(p[i + 1] - p[i])))

    def solve(G, h):
        sol = solve_qp(QuadraticProgram(Q, c, None, None, G, h), tol=cfg.qp_tol, x0=p[i], check_psd=False)
        if not sol.ok:
            return None
        x = sol.x_star
        if min(np.hypot(*(x - p[i - 1])), np.hypot(*(p[i + 1] - x))) <= min_step:
            return None
        return x

    if cfg.mode is CurvatureMode.EXTENDED:
        la, lb = lens_halfplanes(p[i - 1], p[i + 1], cfg.theta_max, cfg.lens_points)
        # turn at x_{i+1}: x_{i+1} - x must lie within theta of x_{i+2} - x_{i+1},
        # i.e. x lies in the wedge at x_{i+1} with axis x_{i+1} - x_{i+2}
        ba, bb = curvature_halfplanes(p[i + 2], p[i + 1], cfg.theta_max)
        G = np.vstack([base_G, wa, la, ba])
        h = np.concatenate([base_h, wb, lb, bb])
        x = solve(G, h)
        if x is not None:
            return AdjustResult(x, AdjustStatus.ADJUSTED)
        x = solve(np.vstack([base_G, wa]), np.concatenate([base_h, wb]))
        if x is not None:
            return AdjustResult(x, AdjustStatus.RELAXED)
        return AdjustResult(p[i].copy(), AdjustStatus.INFEASIBLE)
    x = solve(np.vstack([base_G, wa]), np.concatenate([base_h, wb]))
    if x is not None:
        return AdjustResult(x, AdjustStatus.ADJUSTED)
    return AdjustResult(p[i].copy(), AdjustStatus.INFEASIBLE)


class CurvatureStatus(str, enum.Enum):
    SATISFIED = "Satisfied"
    FAILED = "Failed"


@dataclass
class CurvatureResult:
    path: np.ndarray
    status: CurvatureStatus
    sweeps: int
    log: list[tuple[int, int, float]] = field(default_factory=list)  # (sweep, violations, J)
    infeasible: int = 0

    @property
    def ok(self) -> bool:
        return self.status is CurvatureStatus.SATISFIED

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", "violations", "J"])
            for row in self.log:
                w.writerow([row[0], row[1], repr(row[2])])


def enforce_curvature(env: GridEnvironment, hulls, path, model=None,
                      cfg: CurvatureConfig = CurvatureConfig()) -> CurvatureResult:
    """Sweep waypoints 2..n-2 in order, repairing those next to a violated turn.

    Stops as soon as no turn exceeds ``theta_max + angle_tol`` or after
    ``maxiter`` sweeps.
    """
    p = np.array(path, dtype=float)
    n = len(p) - 1
    model = model or build_objective(n, 1.0)
    hulls = hulls if isinstance(hulls, PackedHulls) else PackedHulls.from_polygons(hulls)
    maxiter = cfg.maxiter if cfg.maxiter is not None else n + 1
    limit = cfg.theta_max + cfg.angle_tol
    log = []
    infeasible = 0
    for sweep in range(maxiter + 1):
        ang = turn_angles(p)  # ang[k] is theta_{k+2}
        bad = ang > limit
        log.append((sweep, int(bad.sum()), float(model(p))))
        if not bad.any():
            return CurvatureResult(p, CurvatureStatus.SATISFIED, sweep, log, infeasible)
        if sweep == maxiter:
            break
        for i in range(2, n - 1):
            # x_i enters theta_i, theta_{i+1}, theta_{i+2}
            if not np.any(turn_angles(p[max(i - 2, 0):min(i + 3, n + 1)]) > limit):
                continue
            res = adjust_waypoint(env, hulls, p, i, model, cfg)
            if res.status is AdjustStatus.INFEASIBLE:
                infeasible += 1
            p[i] = res.point
    return CurvatureResult(p, CurvatureStatus.FAILED, maxiter, log, infeasible)


def erpr_plan(env: GridEnvironment, start, goal, rpr_cfg: RprConfig = RprConfig(),
              curv_cfg: CurvatureConfig = CurvatureConfig(), max_spacing: float | None = None) -> PlanResult:
    """Turn-limited initial path, segment-wise reshaping, then turn repair.

    Raises ``Unreachable`` when no turn-admissible beamlet path exists. A
    reshaping or repair failure returns the beamlet initial path with status
    ``InitialPathFallback``.
    """
    metrics = PlanMetrics()
    t0 = time.perf_counter()
    graph = build_beamlet_graph(env, theta_max=curv_cfg.theta_max)
    init = beamlet_shortest_path(graph, start, goal)
    init = densify(init, max_spacing if max_spacing is not None else 2 * env.delta)
    metrics.init_time_s = time.perf_counter() - t0

    t1 = time.perf_counter()
    hulls = PackedHulls.from_polygons(dilated_obstacle_hulls(env))
    path = reshape_path(env, hulls, init, rpr_cfg, metrics)
    if path is not None and len(path) >= 5:
        model = build_objective(len(path) - 1, rpr_cfg.lam)
        cres = enforce_curvature(env, hulls, path, model, curv_cfg)
        metrics.curvature_sweeps = cres.sweeps
        metrics.curvature_log = cres.log
        if not cres.ok:
            metrics.failure = f"curvature: {len(check_curvature(cres.path, curv_cfg.theta_max, curv_cfg.angle_tol))} turns above limit"
            path = None
        else:
            path = cres.path
    elif path is not None and check_curvature(path, curv_cfg.theta_max, curv_cfg.angle_tol):
        metrics.failure = "curvature: path too short to repair"
        path = None
    metrics.reshape_time_s = time.perf_counter() - t1
    if path is None:
        metrics.waypoints = len(init)
        return PlanResult(np.array(init, dtype=float), PlanStatus.FALLBACK, metrics, init)
    metrics.waypoints = len(path)
    metrics.objective = build_objective(len(path) - 1, rpr_cfg.lam)(path)
    return PlanResult(path, PlanStatus.SUCCESS, metrics, init)
