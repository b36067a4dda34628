"""4-connected grid roadmap over free cell corners and Dijkstra search on it."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .env import GridEnvironment, point_in_dilated
from .errors import NoFreeNode, Unreachable

# expansion order N, E, S, W as (d_row, d_col); north is +y
NEIGHBORS = ((1, 0), (0, 1), (-1, 0), (0, -1))

Node = tuple[int, int]


@dataclass(frozen=True, eq=False)
class RoadmapGraph:
    env: GridEnvironment
    free: np.ndarray  # (rows+1, cols+1) flags

    @property
    def delta(self) -> float:
        return self.env.delta

    @property
    def shape(self) -> tuple[int, int]:
        return self.free.shape

    def point(self, node: Node) -> np.ndarray:
        r, c = node
        return np.array([c * self.env.delta, r * self.env.delta])

    def is_free(self, node: Node) -> bool:
        r, c = node
        return 0 <= r < self.free.shape[0] and 0 <= c < self.free.shape[1] and bool(self.free[r, c])

    def neighbors(self, node: Node):
        r, c = node
        for dr, dc in NEIGHBORS:
            nb = (r + dr, c + dc)
            if self.is_free(nb):
                yield nb

    @property
    def free_count(self) -> int:
        return int(self.free.sum())


def build_roadmap(env: GridEnvironment) -> RoadmapGraph:
    """Flag every grid node that touches no occupied cell."""
    occ = np.pad(env.occupied, 1, constant_values=False)
    blocked = occ[:-1, :-1] | occ[:-1, 1:] | occ[1:, :-1] | occ[1:, 1:]
    free = ~blocked
    free.setflags(write=False)
    return RoadmapGraph(env, free)


def snap_to_free_node(graph: RoadmapGraph, p, candidates: np.ndarray | None = None) -> Node:
    """Nearest free node to ``p``; ties go to the lower row, then the lower column.

    ``candidates`` optionally restricts the search to a boolean node mask.
    """
    mask = graph.free if candidates is None else (graph.free & candidates)
    rows, cols = np.nonzero(mask)
    if len(rows) == 0:
        raise NoFreeNode("the roadmap has no free node")
    d = graph.delta
    dist = np.hypot(cols * d - float(p[0]), rows * d - float(p[1]))
    best = dist.min()
    tie = dist <= best + 1e-12 * max(1.0, best)
    # np.nonzero is row-major so the first tied entry has the lowest (row, col)
    k = int(np.flatnonzero(tie)[0])
    return int(rows[k]), int(cols[k])


def shortest_path_nodes(graph: RoadmapGraph, start: Node, goal: Node) -> list[Node]:
    """Dijkstra over the 4-connected roadmap with unit (delta) arc weights."""
    if not graph.is_free(start) or not graph.is_free(goal):
        raise Unreachable("start or goal node is blocked")
    dist = {start: 0}
    prev: dict[Node, Node] = {}
    counter = itertools.count()
    heap = [(0, next(counter), start)]
    settled = set()
    while heap:
        g, _, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == goal:
            break
        for nb in graph.neighbors(node):
            nd = g + 1
            if nd < dist.get(nb, nd + 1):
                dist[nb] = nd
                prev[nb] = node
                heapq.heappush(heap, (nd, next(counter), nb))
    if goal not in settled:
        raise Unreachable(f"no roadmap path from {start} to {goal}")
    nodes = [goal]
    while nodes[-1] != start:
        nodes.append(prev[nodes[-1]])
    return nodes[::-1]


def shortest_path(graph: RoadmapGraph, start: Node, goal: Node) -> np.ndarray:
    """Shortest roadmap path as an (N, 2) array of waypoints."""
    nodes = shortest_path_nodes(graph, start, goal)
    return np.array([graph.point(n) for n in nodes])


def path_length(path) -> float:
    p = np.asarray(path, dtype=float)
    if len(p) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def attach_endpoints(nodes_path: np.ndarray, start, goal) -> np.ndarray:
    """Replace the snapped end nodes by the exact start/goal points.

    A snapped node that differs from its endpoint is kept as the second (or
    second-to-last) waypoint.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    pts = [np.asarray(p, dtype=float) for p in nodes_path]
    if np.array_equal(start, goal):
        return start[None, :].copy()
    if len(pts) == 1:
        keep = not (np.array_equal(pts[0], start) or np.array_equal(pts[0], goal))
        return np.array([start] + pts * keep + [goal])
    head = [start] if np.array_equal(pts[0], start) else [start, pts[0]]
    tail = [goal] if np.array_equal(pts[-1], goal) else [pts[-1], goal]
    return np.array(head + pts[1:-1] + tail)


def initial_path(env: GridEnvironment, start, goal, graph: RoadmapGraph | None = None) -> np.ndarray:
    """Grid initial path from ``start`` to ``goal`` with exact endpoints."""
    if point_in_dilated(env, start):
        raise Unreachable(f"start {tuple(start)} lies inside the dilated obstacle region")
    if point_in_dilated(env, goal):
        raise Unreachable(f"goal {tuple(goal)} lies inside the dilated obstacle region")
    graph = graph or build_roadmap(env)
    s = snap_to_free_node(graph, start)
    g = snap_to_free_node(graph, goal)
    return attach_endpoints(shortest_path(graph, s, g), start, goal)
