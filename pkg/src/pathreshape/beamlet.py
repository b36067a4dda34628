"""Quadtree (dyadic square) decomposition, beamlet graph and turn-limited search.

A beamlet is a straight chord between two free grid nodes on the boundary of
one obstacle-free dyadic square. Search states are directed beamlets; a
beamlet ``BC`` may follow ``AB`` only when the turn angle between them is at
most ``theta_max``, so every path found respects the turn bound at each
beamlet joint.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .env import GridEnvironment, point_in_dilated
from .errors import InputError, Unreachable
from .roadmap import attach_endpoints, build_roadmap, snap_to_free_node


@dataclass(frozen=True)
class DyadicSquare:
    """Square block of ``side`` cells with lower-left cell (row0, col0)."""

    row0: int
    col0: int
    side: int

    @property
    def row1(self) -> int:
        return self.row0 + self.side

    @property
    def col1(self) -> int:
        return self.col0 + self.side

    def boundary_nodes(self) -> np.ndarray:
        """Grid nodes (row, col) on the square's boundary, counterclockwise from the lower-left corner."""
        s = self.side
        k = np.arange(s)
        bottom = np.column_stack([np.full(s, self.row0), self.col0 + k])
        right = np.column_stack([self.row0 + k, np.full(s, self.col1)])
        top = np.column_stack([np.full(s, self.row1), self.col1 - k])
        left = np.column_stack([self.row1 - k, np.full(s, self.col0)])
        return np.concatenate([bottom, right, top, left])


def _next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


def build_dyadic_decomposition(env: GridEnvironment) -> list[DyadicSquare]:
    """Free leaves of a quadtree over the occupancy grid.

    Each axis is padded with occupied cells up to a power of two; the padded
    grid is tiled by root squares whose side is the smaller padded extent.
    A square is split into four until it holds no occupied cell or is a
    single cell. Only obstacle-free leaves are returned, in depth-first order.
    """
    R, C = _next_pow2(env.rows), _next_pow2(env.cols)
    occ = np.ones((R, C), dtype=bool)
    occ[:env.rows, :env.cols] = env.occupied
    sat = np.zeros((R + 1, C + 1), dtype=np.int64)
    sat[1:, 1:] = occ.cumsum(0).cumsum(1)

    def count(r0, c0, s):
        return sat[r0 + s, c0 + s] - sat[r0, c0 + s] - sat[r0 + s, c0] + sat[r0, c0]

    side = min(R, C)
    stack = [(r, c, side) for r in range(R - side, -1, -side) for c in range(C - side, -1, -side)]
    leaves: list[DyadicSquare] = []
    while stack:
        r0, c0, s = stack.pop()
        k = count(r0, c0, s)
        if k == 0:
            leaves.append(DyadicSquare(r0, c0, s))
        elif s > 1:
            h = s // 2
            # pushed in reverse so quadrants pop as SW, SE, NW, NE
            stack.extend([(r0 + h, c0 + h, h), (r0 + h, c0, h), (r0, c0 + h, h), (r0, c0, h)])
    return leaves


def turn_angle(u, v) -> np.ndarray:
    """Angle between direction vectors ``u`` and ``v`` (broadcasting), in [0, pi]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dot = np.sum(u * v, axis=-1)
    return np.arctan2(np.abs(cross), dot)


@dataclass(frozen=True, eq=False)
class BeamletGraph:
    """Directed beamlets over the grid nodes of ``env``.

    Beamlet ``k`` runs from node ``start[k]`` to node ``end[k]`` (flat node
    ids ``row * (cols + 1) + col``); beamlets ``k`` and ``k ^ 1`` are the two
    directions of one chord. Outgoing beamlets of node ``v`` are
    ``order[offsets[v]:offsets[v + 1]]``.
    """

    env: GridEnvironment
    theta_max: float
    squares: tuple[DyadicSquare, ...]
    start: np.ndarray
    end: np.ndarray
    direction: np.ndarray  # unit vectors
    length: np.ndarray
    order: np.ndarray
    offsets: np.ndarray

    @property
    def node_cols(self) -> int:
        return self.env.cols + 1

    @property
    def count(self) -> int:
        return len(self.start)

    def node_id(self, node) -> int:
        r, c = node
        return int(r) * self.node_cols + int(c)

    def node_rc(self, nid) -> tuple[int, int]:
        return divmod(int(nid), self.node_cols)

    def node_point(self, nid) -> np.ndarray:
        r, c = self.node_rc(nid)
        return np.array([c * self.env.delta, r * self.env.delta])

    def outgoing(self, nid: int) -> np.ndarray:
        return self.order[self.offsets[nid]:self.offsets[nid + 1]]

    def endpoint_mask(self) -> np.ndarray:
        """Boolean (rows+1, cols+1) mask of nodes that start some beamlet."""
        mask = np.zeros((self.env.rows + 1) * self.node_cols, dtype=bool)
        mask[self.start] = True
        return mask.reshape(self.env.rows + 1, self.node_cols)

    def has_arc(self, a: int, b: int) -> bool:
        """True iff beamlet ``b`` may follow beamlet ``a``."""
        if self.end[a] != self.start[b]:
            return False
        return bool(turn_angle(self.direction[a], self.direction[b]) <= self.theta_max)

    def arc_weight(self, a: int, b: int) -> float:
        if not self.has_arc(a, b):
            raise KeyError(f"no arc from beamlet {a} to beamlet {b}")
        return float(self.length[b])

    def to_json(self) -> dict:
        """Chords with endpoints and lengths plus, per chord direction, its admissible successors."""
        beamlets = []
        for k in range(self.count):
            a = self.node_rc(self.start[k])
            b = self.node_rc(self.end[k])
            succ = self.successors(k)
            beamlets.append({
                "id": k, "from": list(a), "to": list(b), "length": float(self.length[k]),
                "arcs": [[int(s), float(self.length[s])] for s in succ],
            })
        return {
            "delta": self.env.delta,
            "theta_max_deg": math.degrees(self.theta_max),
            "squares": [[s.row0, s.col0, s.side] for s in self.squares],
            "beamlets": beamlets,
        }

    def successors(self, k: int) -> np.ndarray:
        out = self.outgoing(self.end[k])
        ok = turn_angle(self.direction[k], self.direction[out]) <= self.theta_max
        return out[ok]


def _leaf_chords(sq: DyadicSquare, free: np.ndarray, row_blocked: np.ndarray,
                 col_blocked: np.ndarray) -> np.ndarray:
    """Collision-free chords, as (row_a, col_a, row_b, col_b), on one free leaf's boundary.

    A chord crossing the leaf interior is free whenever both endpoints are
    free nodes (the leaf's cells are free and every other touched cell
    touches an endpoint). A chord along one boundary line is free iff every
    node it covers is free. Chords between adjacent nodes coincide with grid
    arcs; they are kept so the graph is at least as connected as the roadmap.
    """
    nodes = sq.boundary_nodes()
    nodes = nodes[free[nodes[:, 0], nodes[:, 1]]]
    i, j = np.triu_indices(len(nodes), k=1)
    a, b = nodes[i], nodes[j]
    horiz = (a[:, 0] == b[:, 0]) & ((a[:, 0] == sq.row0) | (a[:, 0] == sq.row1))
    vert = (a[:, 1] == b[:, 1]) & ((a[:, 1] == sq.col0) | (a[:, 1] == sq.col1))
    ok = np.ones(len(a), dtype=bool)
    r, c0, c1 = a[:, 0], np.minimum(a[:, 1], b[:, 1]), np.maximum(a[:, 1], b[:, 1])
    ok &= ~(horiz & (row_blocked[r, c1 + 1] - row_blocked[r, c0] > 0))
    c, r0, r1 = a[:, 1], np.minimum(a[:, 0], b[:, 0]), np.maximum(a[:, 0], b[:, 0])
    ok &= ~(vert & (col_blocked[r1 + 1, c] - col_blocked[r0, c] > 0))
    return np.column_stack([a[ok], b[ok]])


def build_beamlet_graph(env: GridEnvironment, squares=None, theta_max: float = math.radians(30)) -> BeamletGraph:
    """Beamlets of all free leaves, deduplicated, as a directed graph.

    ``theta_max`` is the largest admissible turn (radians), 0 < theta_max < pi/2.
    """
    if not 0 < theta_max < math.pi / 2:
        raise InputError("theta_max must lie strictly between 0 and pi/2")
    if squares is None:
        squares = build_dyadic_decomposition(env)
    free = build_roadmap(env).free
    ncols = env.cols + 1
    blocked = (~free).astype(np.int64)
    row_blocked = np.pad(blocked.cumsum(1), ((0, 0), (1, 0)))
    col_blocked = np.pad(blocked.cumsum(0), ((1, 0), (0, 0)))
    parts = [_leaf_chords(sq, free, row_blocked, col_blocked) for sq in squares]
    quads = np.concatenate(parts) if parts else np.zeros((0, 4), dtype=np.int64)
    chords = np.column_stack([quads[:, 0] * ncols + quads[:, 1], quads[:, 2] * ncols + quads[:, 3]])
    chords = np.sort(chords, axis=1)
    chords = np.unique(chords, axis=0)
    start = np.empty(2 * len(chords), dtype=np.int64)
    end = np.empty_like(start)
    start[0::2], end[0::2] = chords[:, 0], chords[:, 1]
    start[1::2], end[1::2] = chords[:, 1], chords[:, 0]
    d = env.delta
    sr, sc = np.divmod(start, ncols)
    er, ec = np.divmod(end, ncols)
    vec = np.column_stack([(ec - sc) * d, (er - sr) * d])
    length = np.hypot(vec[:, 0], vec[:, 1])
    direction = vec / length[:, None] if len(vec) else vec
    order = np.argsort(start, kind="stable")
    nnodes = (env.rows + 1) * ncols
    offsets = np.searchsorted(start[order], np.arange(nnodes + 1))
    for arr in (start, end, direction, length, order, offsets):
        arr.setflags(write=False)
    return BeamletGraph(env, float(theta_max), tuple(squares), start, end, direction, length,
                        order, offsets)


@dataclass
class BeamletPath:
    nodes: list[tuple[int, int]]
    beamlets: list[int]
    cost: float


def beamlet_search(graph: BeamletGraph, start_node, goal_node) -> BeamletPath:
    """Dijkstra over directed beamlets from ``start_node`` to ``goal_node``.

    Starting beamlets cost their own length; each further beamlet adds its
    length; reaching the goal node is free. The cost is therefore the
    geometric length of the beamlet chain.
    """
    s = graph.node_id(start_node)
    g = graph.node_id(goal_node)
    if s == g:
        return BeamletPath([tuple(start_node)], [], 0.0)
    dist = np.full(graph.count, np.inf)
    prev = np.full(graph.count, -1, dtype=np.int64)
    done = np.zeros(graph.count, dtype=bool)
    first = graph.outgoing(s)
    dist[first] = graph.length[first]
    heap = [(float(dist[k]), int(k)) for k in first]
    heapq.heapify(heap)
    L, U = graph.length, graph.direction
    found = -1
    while heap:
        dk, k = heapq.heappop(heap)
        if done[k] or dk > dist[k]:
            continue
        done[k] = True
        if graph.end[k] == g:
            found = k
            break
        out = graph.outgoing(graph.end[k])
        if not len(out):
            continue
        u = U[k]
        w = U[out]
        cross = np.abs(u[0] * w[:, 1] - u[1] * w[:, 0])
        ok = np.arctan2(cross, w @ u) <= graph.theta_max
        cand = out[ok]
        nd = dk + L[cand]
        better = nd < dist[cand]
        cand, nd = cand[better], nd[better]
        dist[cand] = nd
        prev[cand] = k
        for kk, dd in zip(cand.tolist(), nd.tolist()):
            heapq.heappush(heap, (dd, kk))
    if found < 0:
        raise Unreachable(f"no turn-admissible beamlet path from {tuple(start_node)} to {tuple(goal_node)}")
    chain = [found]
    while prev[chain[-1]] >= 0:
        chain.append(int(prev[chain[-1]]))
    chain.reverse()
    nodes = [graph.node_rc(graph.start[chain[0]])] + [graph.node_rc(graph.end[k]) for k in chain]
    return BeamletPath(nodes, chain, float(dist[found]))


def beamlet_shortest_path(graph: BeamletGraph, start, goal) -> np.ndarray:
    """Turn-limited initial path between two points with exact endpoints.

    Start and goal are snapped to the nearest free node that ends some
    beamlet; the exact points are then attached as in the grid planner.
    """
    if point_in_dilated(graph.env, start) or point_in_dilated(graph.env, goal):
        raise Unreachable("start or goal lies inside the dilated obstacle region")
    rm = build_roadmap(graph.env)
    mask = graph.endpoint_mask()
    s = snap_to_free_node(rm, start, mask)
    g = snap_to_free_node(rm, goal, mask)
    res = beamlet_search(graph, s, g)
    pts = np.array([rm.point(n) for n in res.nodes])
    return attach_endpoints(pts, start, goal)


def densify(path, max_spacing: float) -> np.ndarray:
    """Split every step longer than ``max_spacing`` into equal collinear parts."""
    if not max_spacing > 0:
        raise ValueError("max_spacing must be positive")
    p = np.asarray(path, dtype=float)
    if len(p) < 2:
        return p.copy()
    out = [p[:1]]
    for a, b in zip(p[:-1], p[1:]):
        L = float(np.hypot(*(b - a)))
        k = max(1, math.ceil(L / max_spacing - 1e-9))
        t = np.arange(1, k + 1)[:, None] / k
        seg = a + t * (b - a)
        seg[-1] = b
        out.append(seg)
    return np.concatenate(out)


def save_graph_json(graph: BeamletGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(graph.to_json(), fh)
