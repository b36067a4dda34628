"""Convex feasible set path reshaping.

A path is an ``(n+1, 2)`` array; stacked vectors interleave coordinates as
``[x0, y0, x1, y1, ...]``. The objective is ``J(x) = |Vx|^2 + lam |Ax|^2`` with
``V`` the first-difference and ``A`` the second-difference operator.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .env import ConvexPolygon, GridEnvironment
from .errors import DimensionMismatch
from .qp import QuadraticProgram, solve_qp

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ObjectiveModel:
    n: int
    lam: float
    V: np.ndarray
    A: np.ndarray
    H: np.ndarray  # V'V + lam A'A

    def __call__(self, path) -> float:
        return evaluate_objective(self, path)


@lru_cache(maxsize=64)
def build_objective(n: int, lam: float = 1.0) -> ObjectiveModel:
    if n < 1:
        raise ValueError("need at least two waypoints (n >= 1)")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    d1 = np.diff(np.eye(n + 1), axis=0)  # rows x_{i+1} - x_i
    d2 = np.diff(np.eye(n + 1), n=2, axis=0)  # rows x_{i+1} - 2x_i + x_{i-1}
    eye2 = np.eye(2)
    V = np.kron(d1, eye2)
    A = np.kron(d2, eye2) if n >= 2 else np.zeros((0, 2 * (n + 1)))
    H = V.T @ V + lam * (A.T @ A)
    for arr in (V, A, H):
        arr.setflags(write=False)
    return ObjectiveModel(n, float(lam), V, A, H)


def evaluate_objective(model: ObjectiveModel, path) -> float:
    x = np.asarray(path, dtype=float)
    if x.shape != (model.n + 1, 2):
        raise DimensionMismatch(f"path has shape {x.shape}, model expects ({model.n + 1}, 2)")
    # same value as x' H x, but exact for constant and affine paths
    d1 = np.diff(x, axis=0)
    d2 = np.diff(x, n=2, axis=0)
    return float(np.sum(d1 * d1) + model.lam * np.sum(d2 * d2))


# --- feasible sets ---------------------------------------------------------

@dataclass
class ConvexRegion:
    """Intersection of half-planes ``normals @ y <= offsets``; ``empty`` marks F = {}."""

    normals: np.ndarray
    offsets: np.ndarray
    empty: bool = False

    def contains(self, y, tol: float = 1e-9) -> bool:
        if self.empty:
            return False
        return bool(np.all(self.normals @ np.asarray(y, dtype=float) <= self.offsets + tol))


def workspace_halfplanes(env: GridEnvironment) -> tuple[np.ndarray, np.ndarray]:
    w, h = env.workspace.width, env.workspace.height
    normals = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
    offsets = np.array([0.0, w, 0.0, h])
    return normals, offsets


@dataclass(frozen=True, eq=False)
class PackedHulls:
    """Polygons padded to a common vertex count for batched projection.

    Padding repeats the last vertex; ``valid`` flags real edges.
    """

    vertices: np.ndarray  # (H, K, 2)
    edges: np.ndarray
    normals: np.ndarray
    valid: np.ndarray  # (H, K)

    @classmethod
    def from_polygons(cls, polys: Sequence[ConvexPolygon]) -> "PackedHulls":
        polys = list(polys)
        K = max((len(p.vertices) for p in polys), default=3)
        H = len(polys)
        V = np.zeros((H, K, 2))
        E = np.zeros((H, K, 2))
        N = np.zeros((H, K, 2))
        valid = np.zeros((H, K), dtype=bool)
        for h, p in enumerate(polys):
            k = len(p.vertices)
            V[h, :k] = p.vertices
            V[h, k:] = p.vertices[-1]
            E[h, :k] = p.edges
            N[h, :k] = p.outward_normals
            valid[h, :k] = True
        return cls(V, E, N, valid)

    def __len__(self) -> int:
        return len(self.vertices)


def _pack(hulls) -> PackedHulls:
    return hulls if isinstance(hulls, PackedHulls) else PackedHulls.from_polygons(hulls)


def project_to_polygons(points: np.ndarray, hulls):
    """Closest hull points, distances and separating normals for many points and hulls.

    Returns ``(proj, dist, normal, inside)`` with shapes ``(P, H, 2)``,
    ``(P, H)``, ``(P, H, 2)`` and ``(P, H)``. ``normal`` is the unit outward
    direction of the supporting line at ``proj``: ``(p - proj)/|p - proj|`` for
    points strictly outside, the face normal (or normalized sum of the two face
    normals at a vertex) for points on the boundary, zero for points inside.
    """
    pk = _pack(hulls)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    V, E, N, valid = pk.vertices, pk.edges, pk.normals, pk.valid
    rel = pts[:, None, None, :] - V[None]  # (P, H, K, 2)
    side = np.where(valid[None], np.einsum("phkj,hkj->phk", rel, N), -np.inf)
    inside = side.max(axis=2) < -BOUNDARY_TOL

    elen2 = np.einsum("hkj,hkj->hk", E, E)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("phkj,hkj->phk", rel, E) / elen2
    t = np.clip(np.nan_to_num(t), 0.0, 1.0)
    foot = V[None] + t[..., None] * E[None]
    d2 = np.sum((pts[:, None, None, :] - foot) ** 2, axis=3)
    d2 = np.where(valid[None], d2, np.inf)
    k = d2.argmin(axis=2)
    proj = np.take_along_axis(foot, k[..., None, None], axis=2)[:, :, 0, :]
    dist = np.sqrt(np.take_along_axis(d2, k[..., None], axis=2)[..., 0])

    normal = np.zeros_like(proj)
    far = dist > BOUNDARY_TOL
    diff = pts[:, None, :] - proj
    with np.errstate(divide="ignore", invalid="ignore"):
        normal = np.where(far[..., None], diff / dist[..., None], 0.0)
    on = ~far & ~inside
    if on.any():
        pi, hi = np.nonzero(on)
        active = side[pi, hi] >= -BOUNDARY_TOL
        summed = np.einsum("rk,rkj->rj", active.astype(float), N[hi])
        normal[pi, hi] = summed / np.linalg.norm(summed, axis=1, keepdims=True)
        proj[pi, hi] = pts[pi]
    return proj, dist, normal, inside


def project_to_polygon(points: np.ndarray, poly: ConvexPolygon):
    """Single-polygon form of :func:`project_to_polygons`; arrays drop the hull axis."""
    proj, dist, normal, inside = project_to_polygons(points, [poly])
    return proj[:, 0], dist[:, 0], normal[:, 0], inside[:, 0]


@dataclass
class HalfplaneSet:
    """Flat storage of feasible sets for many waypoints: row ``j`` belongs to ``owner[j]``."""

    owner: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    empty: np.ndarray  # per-waypoint flag

    def region(self, i: int) -> ConvexRegion:
        sel = self.owner == i
        return ConvexRegion(self.normals[sel], self.offsets[sel], bool(self.empty[i]))


def feasible_halfplanes(env: GridEnvironment, hulls, points,
                        influence_radius: float | None = None,
                        box_exempt: Sequence[int] = ()) -> HalfplaneSet:
    """Half-planes of every waypoint's feasible set.

    ``hulls`` is a sequence of polygons or a :class:`PackedHulls`. Waypoints
    listed in ``box_exempt`` get no workspace half-planes and may lie outside
    the workspace; obstacle half-planes still apply to them.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P = len(pts)
    boxed = np.ones(P, dtype=bool)
    boxed[list(box_exempt)] = False
    bidx = np.flatnonzero(boxed)
    wn, wo = workspace_halfplanes(env)
    owners = [np.repeat(bidx, 4)]
    normals = [np.tile(wn, (len(bidx), 1))]
    offsets = [np.tile(wo, len(bidx))]
    # a waypoint outside the workspace is not in its own feasible set
    empty = ~env.workspace.contains(pts) & boxed
    pk = _pack(hulls)
    if len(pk):
        proj, dist, normal, inside = project_to_polygons(pts, pk)
        empty |= inside.any(axis=1)
        keep = ~inside
        if influence_radius is not None:
            keep &= dist <= influence_radius
        pi, hi = np.nonzero(keep)  # row-major: grouped by waypoint, hulls in order
        # stay on the far side of the supporting line: normal . y >= normal . proj
        a = -normal[pi, hi]
        owners.append(pi)
        normals.append(a)
        offsets.append(np.einsum("ij,ij->i", a, proj[pi, hi]))
    return HalfplaneSet(np.concatenate(owners), np.concatenate(normals),
                        np.concatenate(offsets), empty)


def compute_feasible_set(env: GridEnvironment, hulls: Sequence[ConvexPolygon], x,
                         influence_radius: float | None = None) -> ConvexRegion:
    hs = feasible_halfplanes(env, hulls, np.asarray(x, dtype=float)[None, :], influence_radius)
    return hs.region(0)


# --- reshaping loop --------------------------------------------------------

class CfsStatus(str, enum.Enum):
    CONVERGED = "Converged"
    EMPTY_FEASIBLE_SET = "EmptyFeasibleSet"
    MAX_ITERATIONS = "MaxIterations"
    QP_FAILURE = "QPFailure"


@dataclass(frozen=True)
class CfsConfig:
    epsilon: float = 1e-3
    max_iterations: int = 100
    qp_tol: float = 1e-8
    influence_radius: float | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class CfsResult:
    path: np.ndarray
    status: CfsStatus
    iterations: int
    objective_trace: list[float]
    step_norms: list[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is CfsStatus.CONVERGED

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "J", "step_norm"])
            for k, J in enumerate(self.objective_trace):
                step = self.step_norms[k - 1] if k > 0 else 0.0
                w.writerow([k, repr(J), repr(step)])


def cfs_reshape(env: GridEnvironment, hulls: Sequence[ConvexPolygon], initial,
                model: ObjectiveModel, cfg: CfsConfig = CfsConfig(),
                extra_eq: tuple[np.ndarray, np.ndarray] | None = None,
                box_exempt: Sequence[int] = ()) -> CfsResult:
    """Iteratively minimize J over the convex feasible sets of the current path.

    Endpoints stay fixed exactly (they are eliminated from the QP).
    ``extra_eq = (E, f)`` adds equalities ``E @ x = f`` on the stacked path.
    ``box_exempt`` lists waypoints freed from the workspace half-planes.
    """
    x = np.array(initial, dtype=float)
    hulls = _pack(hulls)
    n1 = len(x)
    if x.shape != (model.n + 1, 2):
        raise DimensionMismatch(f"path has shape {x.shape}, model expects ({model.n + 1}, 2)")
    dim = 2 * n1
    free = np.arange(2, dim - 2)
    fixed = np.r_[0, 1, dim - 2, dim - 1]
    Q2 = 2.0 * model.H
    Qff = Q2[np.ix_(free, free)]
    Qfx = Q2[np.ix_(free, fixed)]

    E_red = f_red = None
    if extra_eq is not None:
        E, f = extra_eq
        E = np.atleast_2d(np.asarray(E, dtype=float))
        f = np.asarray(f, dtype=float).ravel()
        if E.shape[1] != dim:
            raise DimensionMismatch("extra equality has wrong width")
    J = evaluate_objective(model, x)
    trace = [J]
    steps: list[float] = []

    if n1 <= 2:
        status = CfsStatus.CONVERGED
        if extra_eq is not None and np.abs(E @ x.ravel() - f).max() > cfg.qp_tol:
            status = CfsStatus.QP_FAILURE
        return CfsResult(x, status, 0, trace, steps)

    for k in range(cfg.max_iterations):
        hs = feasible_halfplanes(env, hulls, x, cfg.influence_radius, box_exempt)
        if hs.empty.any():
            return CfsResult(x, CfsStatus.EMPTY_FEASIBLE_SET, k, trace, steps)
        xs = x.ravel()
        xfix = xs[fixed]
        rows = hs.owner[(hs.owner > 0) & (hs.owner < n1 - 1)]
        sel = (hs.owner > 0) & (hs.owner < n1 - 1)
        nrm = hs.normals[sel]
        # column of the x coordinate of waypoint i in the reduced vector is 2(i-1)
        cols = 2 * (rows - 1)
        m = len(rows)
        G = sp.csr_matrix(
            (nrm.ravel(), (np.repeat(np.arange(m), 2), np.column_stack([cols, cols + 1]).ravel())),
            shape=(m, len(free)))
        h = hs.offsets[sel]
        c = Qfx @ xfix
        if extra_eq is not None:
            E_red = E[:, free]
            f_red = f - E[:, fixed] @ xfix
        qp = QuadraticProgram(Qff, c, E_red, f_red, G, h)
        sol = solve_qp(qp, tol=cfg.qp_tol, x0=xs[free], check_psd=False)
        if not sol.ok:
            return CfsResult(x, CfsStatus.QP_FAILURE, k, trace, steps)
        new = xs.copy()
        new[free] = sol.x_star
        new = new.reshape(-1, 2)
        J_new = evaluate_objective(model, new)
        step = float(np.linalg.norm(new - x))
        trace.append(J_new)
        steps.append(step)
        x = new
        if abs(J_new - J) < cfg.epsilon or step < cfg.epsilon:
            return CfsResult(x, CfsStatus.CONVERGED, k + 1, trace, steps)
        J = J_new
    return CfsResult(x, CfsStatus.MAX_ITERATIONS, cfg.max_iterations, trace, steps)
