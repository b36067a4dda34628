"""Acceptance criteria 1-10. Each test records PASS/FAIL in conftest.ACCEPTANCE before asserting."""

import math

import numpy as np
import pytest

import conftest
from oracles import lattice_qp_min, random_box_qp, turn_angle_arccos
from test_roadmap import bfs_hops, random_grid_case

from pathreshape.beamlet import build_beamlet_graph
from pathreshape.cfs import feasible_halfplanes
from pathreshape.cli import main
from pathreshape.curvature import curvature_halfplanes
from pathreshape.env import dilated_obstacle_hulls, environment_from_occupancy, rasterize_and_dilate
from pathreshape.errors import Unreachable
from pathreshape.harness.bench import BenchConfig, run_benchmark
from pathreshape.harness.generate import EnvSpec, generate_environment, trial_seed
from pathreshape.harness.planners import parse_planners
from pathreshape.qp import QuadraticProgram, solve_qp
from pathreshape.roadmap import build_roadmap, initial_path, shortest_path_nodes

pytestmark = pytest.mark.slow

SEED = 1
RECT_GROUPS = [(5, 50), (10, 50), (15, 50), (20, 50), (30, 50)]
CIRCLE_GROUPS = [(5, 50), (10, 50), (15, 50), (20, 50)]
THETA = math.radians(30)


def record(k, ok, detail):
    conftest.ACCEPTANCE[k] = (bool(ok), detail)
    assert ok, detail


def max_angle_scan(path):
    p = np.asarray(path, dtype=float)
    d = np.diff(p, axis=0)
    if np.any(np.hypot(d[:, 0], d[:, 1]) == 0):
        return math.pi  # a repeated waypoint has no defined turn
    return max((turn_angle_arccos(u, v) for u, v in zip(d[:-1], d[1:])), default=0.0)


@pytest.fixture(scope="module")
def rect_bench():
    return run_benchmark(RECT_GROUPS, parse_planners("cfs-line,rpr-all,rpr-60"), SEED)


@pytest.fixture(scope="module")
def circle_bench():
    return run_benchmark(CIRCLE_GROUPS, parse_planners("erpr-60,rpr-60"), SEED, BenchConfig(shape="circle"))


def rate(rows, planner, q, pred=lambda r: r.success):
    rs = [r for r in rows if r.planner == planner and r.q == q]
    return sum(1 for r in rs if pred(r)) / len(rs)


def test_criterion_1_initial_waypoints_have_feasible_sets():
    violations = checked = 0
    for q, trials in RECT_GROUPS:
        for t in range(trials):
            spec = EnvSpec(trial_seed(SEED, q, t), q)
            env = rasterize_and_dilate(spec.workspace, generate_environment(spec), spec.delta, spec.d_min)
            path = initial_path(env, spec.start, spec.goal)
            hs = feasible_halfplanes(env, dilated_obstacle_hulls(env), path)
            violations += int(hs.empty.sum())
            checked += len(path)
    record(1, violations == 0, f"{violations} empty feasible sets over {checked} waypoints in 250 environments")


def test_criterion_2_rpr_always_succeeds(rect_bench):
    rows = rect_bench.rows
    solved = {p: sum(r.success for r in rows if r.planner == p) for p in ("rpr-all", "rpr-60")}
    n = sum(t for _, t in RECT_GROUPS)
    min_clear = min(r.clearance for r in rows if r.planner != "cfs-line" and r.success)
    record(2, all(v == n for v in solved.values()),
           f"rpr-all {solved['rpr-all']}/{n}, rpr-60 {solved['rpr-60']}/{n}, min clearance {min_clear:.4f}")


def test_criterion_3_line_baseline_degrades(rect_bench):
    qs = [q for q, _ in RECT_GROUPS]
    rates = [rate(rect_bench.rows, "cfs-line", q) for q in qs]
    inversions = sum(b > a for a, b in zip(rates, rates[1:]))
    ok = inversions <= 1 and rates[-1] <= 0.60
    shown = ", ".join(f"q={q}: {100 * r:.0f}%" for q, r in zip(qs, rates))
    record(3, ok, f"cfs-line {shown}; {inversions} inversion(s)")


def test_criterion_4_objective_descent(rect_bench):
    worst, runs = -math.inf, 0
    for r in rect_bench.rows:
        for trace in r.traces:
            runs += 1
            if len(trace) > 1:
                worst = max(worst, float(np.max(np.diff(trace))))
    record(4, runs > 0 and worst <= 1e-6, f"{runs} CFS runs, largest J(k+1) - J(k) = {worst:.3g}")


def test_criterion_5_segmented_reshaping_is_faster(rect_bench):
    by_trial = {}
    for r in rect_bench.rows:
        if r.q == 30 and r.planner in ("rpr-all", "rpr-60"):
            by_trial.setdefault(r.trial, {})[r.planner] = r
    eligible = [d for d in by_trial.values() if d["rpr-all"].initial_waypoints >= 100]
    wins = sum(d["rpr-60"].reshape_time_s < d["rpr-all"].reshape_time_s for d in eligible)
    frac = wins / len(eligible) if eligible else 0.0
    record(5, eligible and frac >= 0.8, f"rpr-60 faster in {wins}/{len(eligible)} q=30 trials ({100 * frac:.0f}%)")


def test_criterion_6_curvature_soundness(circle_bench):
    rows = circle_bench.rows
    worst = max((max_angle_scan(r.path) for r in rows if r.planner == "erpr-60" and r.success), default=0.0)
    sound = worst <= THETA + 1e-4

    def turn_ok(r):
        return r.success and max_angle_scan(r.path) <= THETA + 1e-4

    held, parts = 0, []
    for q, _ in CIRCLE_GROUPS:
        e, p = rate(rows, "erpr-60", q, turn_ok), rate(rows, "rpr-60", q, turn_ok)
        held += e >= p
        parts.append(f"q={q}: {100 * e:.0f}% vs {100 * p:.0f}%")
    record(6, sound and held >= 3,
           f"max ERPR turn {math.degrees(worst):.4f} deg; erpr-60 vs rpr-60 {', '.join(parts)}; "
           f"ordering in {held}/4 groups")


def test_criterion_7_wedge_equivalence():
    rng = np.random.default_rng(7)
    n = 100_000
    thetas = rng.uniform(1e-3, math.pi / 2 - 1e-3, n)
    a, b, x = (rng.normal(size=(n, 2)) for _ in range(3))
    agree = 0
    for k in range(n):
        G, h = curvature_halfplanes(a[k], b[k], thetas[k])
        lhs = bool(np.all(G @ x[k] <= h))
        d, w = b[k] - a[k], x[k] - b[k]
        dot = d[0] * w[0] + d[1] * w[1]
        cross = d[0] * w[1] - d[1] * w[0]
        rhs = dot > 0 and abs(cross) <= math.tan(thetas[k]) * dot
        agree += lhs == rhs
    record(7, agree == n, f"{agree}/{n} triples agree")


def test_criterion_8_search_oracles():
    rng = np.random.default_rng(8)
    grids = matched = 0
    while grids < 100:
        occ, free, s, g = random_grid_case(rng)
        if s is None:
            continue
        grids += 1
        hops = bfs_hops(free, s, g)
        graph = build_roadmap(environment_from_occupancy(occ))
        try:
            got = len(shortest_path_nodes(graph, s, g)) - 1
        except Unreachable:
            got = None
        matched += got == hops
    pairs = agree = 0
    while pairs < 10_000:
        occ = rng.random((16, 16)) < 0.15
        theta = rng.uniform(0.05, math.pi / 2 - 0.05)
        bg = build_beamlet_graph(environment_from_occupancy(occ), theta_max=theta)
        for _ in range(1000):
            k = int(rng.integers(bg.count))
            out = bg.outgoing(bg.end[k])
            j = int(rng.choice(out))
            u = bg.node_point(bg.end[k]) - bg.node_point(bg.start[k])
            v = bg.node_point(bg.end[j]) - bg.node_point(bg.start[j])
            direct = math.atan2(abs(u[0] * v[1] - u[1] * v[0]), u[0] * v[0] + u[1] * v[1]) <= theta
            agree += bg.has_arc(k, j) == direct
            pairs += 1
    record(8, matched == 100 and agree == pairs,
           f"Dijkstra = BFS on {matched}/100 grids; arc rule agrees on {agree}/{pairs} beamlet pairs")


def test_criterion_9_qp_lattice_oracle():
    rng = np.random.default_rng(9)
    worst_x = worst_f = 0.0
    for _ in range(100):
        Q, c, G, h = random_box_qp(rng)
        sol = solve_qp(QuadraticProgram(Q, c, G=G, h=h))
        x_ref, f_ref = lattice_qp_min(Q, c, (-1, -1), (1, 1))
        worst_x = max(worst_x, float(np.abs(sol.x_star - x_ref).max()))
        worst_f = max(worst_f, abs(sol.objective - f_ref))
    record(9, worst_x <= 2e-3 and worst_f <= 1e-5,
           f"100 QPs: max |x - x_lattice| = {worst_x:.2e}, max |f - f_lattice| = {worst_f:.2e}")


def test_criterion_10_bench_is_deterministic(tmp_path):
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for f in outs:
        code = main(["bench", "--groups", "5,10", "--trials", "3", "--seed", "42", "--out-csv", str(f),
                     "--no-timing", "--quiet"])
        assert code == 0
    a, b = (f.read_bytes() for f in outs)
    record(10, a == b and len(a) > 0, f"two bench runs, {len(a)} bytes each, identical={a == b}")
