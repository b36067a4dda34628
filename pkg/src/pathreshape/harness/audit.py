"""Independent re-verification of planner output.

Nothing here reuses the planners' geometry: distances are computed segment
by segment against the original obstacle descriptions, and turn angles via
``arccos`` of normalized dot products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _point_segment_distance(p, a, b) -> np.ndarray:
    """Distance from each point ``p`` (k, 2) to segment ``ab``."""
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.linalg.norm(p - a, axis=-1)
    t = np.clip(((p - a) @ ab) / L2, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 <= 0) and (o3 * o4 <= 0)


def segment_rectangle_distance(a, b, lo, hi) -> float:
    """Distance between segment ``ab`` and the closed box ``[lo, hi]``; 0 if they meet."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    for p in (a, b):
        if np.all(p >= lo) and np.all(p <= hi):
            return 0.0
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    for k in range(4):
        if _segments_cross(a, b, corners[k], corners[(k + 1) % 4]):
            return 0.0
    # disjoint: the minimum is attained at an endpoint of one of the segments
    d = _point_segment_distance(corners, a, b).min()
    for p in (a, b):
        q = np.minimum(np.maximum(p, lo), hi)
        d = min(d, float(np.linalg.norm(p - q)))
    return float(d)


def segment_circle_distance(a, b, center, radius) -> float:
    d = float(_point_segment_distance(np.asarray(center, dtype=float)[None, :],
                                      np.asarray(a, dtype=float), np.asarray(b, dtype=float))[0])
    return max(0.0, d - radius)


def path_clearance(path, obstacles) -> float:
    """Smallest distance between any path segment and any obstacle (inf without obstacles)."""
    p = np.asarray(path, dtype=float)
    segs = [(p[0], p[0])] if len(p) == 1 else list(zip(p[:-1], p[1:]))
    best = math.inf
    for ob in obstacles:
        if ob.kind == "rectangle":
            cx, cy = ob.center
            lo = (cx - ob.width / 2, cy - ob.height / 2)
            hi = (cx + ob.width / 2, cy + ob.height / 2)
            for a, b in segs:
                best = min(best, segment_rectangle_distance(a, b, lo, hi))
        else:
            for a, b in segs:
                best = min(best, segment_circle_distance(a, b, ob.center, ob.radius))
    return best


def max_turn_angle(path) -> float:
    """Largest turn angle (radians) between consecutive steps; 0 for fewer than three points."""
    p = np.asarray(path, dtype=float)
    if len(p) < 3:
        return 0.0
    d = np.diff(p, axis=0)
    norms = np.linalg.norm(d, axis=1)
    if np.any(norms == 0):
        return math.pi
    u = d / norms[:, None]
    cosines = np.clip(np.sum(u[:-1] * u[1:], axis=1), -1.0, 1.0)
    return float(np.arccos(cosines).max())


@dataclass
class AuditReport:
    clearance: float
    endpoint_error: float
    max_angle: float
    inside_workspace: bool
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def audit_path(path, start, goal, obstacles, d_min: float, theta_max: float | None = None,
               angle_tol: float = 1e-6, workspace=None) -> AuditReport:
    """Check clearance >= d_min, exact endpoints and (optionally) turn angles.

    ``workspace`` containment is reported but does not fail the audit.
    """
    p = np.asarray(path, dtype=float)
    clr = path_clearance(p, obstacles)
    err = max(float(np.abs(p[0] - np.asarray(start, dtype=float)).max()),
              float(np.abs(p[-1] - np.asarray(goal, dtype=float)).max()))
    ang = max_turn_angle(p)
    inside = True
    if workspace is not None:
        inside = bool(np.all(p >= 0) and np.all(p[:, 0] <= workspace.width) and np.all(p[:, 1] <= workspace.height))
    failures = []
    if clr < d_min - 1e-9:
        failures.append(f"clearance {clr:.6g} below {d_min}")
    if err != 0.0:
        failures.append(f"endpoints off by {err:.3g}")
    if theta_max is not None and ang > theta_max + angle_tol:
        failures.append(f"turn of {math.degrees(ang):.4g} deg above limit")
    return AuditReport(clr, err, ang, inside, failures)
