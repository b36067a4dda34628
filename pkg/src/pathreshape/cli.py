"""Command line entry points: plan, bench, render.

Exit codes: 0 success, 1 planning failure, 2 bad input or unwritable output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .beamlet import build_beamlet_graph, save_graph_json
from .cfs import CfsConfig
from .env import load_environment
from .errors import InputError, IoError, PlanningError
from .harness.bench import BenchConfig, run_benchmark
from .harness.pathio import load_path, save_path
from .harness.planners import PlannerSpec, cfs_line_plan, parse_planners, run_planner
from .harness.render import FINAL_STYLE, INITIAL_STYLE, render_svg

EXIT_OK, EXIT_PLAN_FAILED, EXIT_INPUT = 0, 1, 2


def _point(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}")
    return x, y


def _write_json(obj, out) -> None:
    try:
        Path(out).write_text(json.dumps(obj, indent=2))
    except OSError as exc:
        raise IoError(f"cannot write {out}: {exc}") from exc


def _guard_write(fn, out) -> None:
    try:
        fn(out)
    except OSError as exc:
        raise IoError(f"cannot write {out}: {exc}") from exc


def cmd_plan(args) -> int:
    env = load_environment(args.env)
    start = args.start or (0.0, 0.0)
    goal = args.goal or (env.workspace.width, 0.0)
    if not 0 < args.theta_max < 90:
        raise InputError("--theta-max must lie strictly between 0 and 90 degrees")
    if args.m is not None and args.m != 0 and args.m < 3:
        raise InputError("--m must be 0 (whole path) or at least 3")
    m = None if not args.m else args.m
    theta = math.radians(args.theta_max)
    cfs = CfsConfig(epsilon=args.epsilon)
    if args.trace and args.planner != "cfs":
        raise InputError("--trace is only available for --planner cfs")
    if (args.curvature_log or args.beamlet_json) and args.planner != "erpr":
        raise InputError("--curvature-log and --beamlet-json need --planner erpr")

    if args.planner == "cfs":
        res, cres = cfs_line_plan(env, start, goal, cfg=cfs)
        report = res.report()
        path, initial, ok = res.path, res.initial, res.success
        if args.trace:
            _guard_write(cres.write_trace, args.trace)
    else:
        out = run_planner(PlannerSpec(args.planner, m), env, start, goal, theta, cfs)
        report = out.report()
        path, initial, ok = out.path, out.initial, out.reported_success
        if args.curvature_log:
            _guard_write(lambda p: _write_curvature_log(out.metrics.curvature_log, p), args.curvature_log)
        if args.beamlet_json:
            graph = build_beamlet_graph(env, theta_max=theta)
            _guard_write(lambda p: save_graph_json(graph, p), args.beamlet_json)
        if out.metrics.failure:
            print(out.metrics.failure, file=sys.stderr)

    if args.out.lower().endswith(".json"):
        _write_json(report, args.out)
    elif path is not None:
        save_path(path, args.out)
    if args.svg:
        paths, styles = [], []
        if initial is not None:
            paths.append(initial)
            styles.append(INITIAL_STYLE)
        if path is not None and ok:
            paths.append(path)
            styles.append(FINAL_STYLE)
        render_svg(env, paths, args.svg, styles)
    print(f"{report['status']}: {len(report['waypoints'])} waypoints, "
          f"init {report['init_time_s']:.3f} s, reshape {report['reshape_time_s']:.3f} s")
    return EXIT_OK if ok else EXIT_PLAN_FAILED


def _write_curvature_log(log, out) -> None:
    with open(out, "w") as fh:
        fh.write("sweep,violations,J\n")
        for sweep, viol, J in log:
            fh.write(f"{sweep},{viol},{J!r}\n")


def _parse_groups(text: str) -> list[int]:
    try:
        qs = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--groups must be comma separated integers, got {text!r}")
    if not qs or any(q < 0 for q in qs):
        raise InputError("--groups needs at least one non-negative obstacle count")
    return qs


def cmd_bench(args) -> int:
    qs = _parse_groups(args.groups)
    if args.trials < 1:
        raise InputError("--trials must be positive")
    if not 0 < args.theta_max < 90:
        raise InputError("--theta-max must lie strictly between 0 and 90 degrees")
    planners = parse_planners(args.planners)
    if not planners:
        raise InputError("--planners is empty")
    cfg = BenchConfig(shape=args.shape, theta_max=math.radians(args.theta_max))
    result = run_benchmark([(q, args.trials) for q in qs], planners, args.seed, cfg, jobs=args.jobs)
    _guard_write(lambda p: result.write_csv(p, timing=not args.no_timing), args.out_csv)
    if not args.quiet:
        print(result.format_table())
    return EXIT_OK


def cmd_render(args) -> int:
    env = load_environment(args.env)
    paths = [load_path(p) for p in args.paths]
    render_svg(env, paths, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pathreshape", description="2-D path planning and reshaping toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one path in an environment file")
    p.add_argument("--env", required=True, help="environment JSON")
    p.add_argument("--planner", choices=["cfs", "rpr", "erpr"], default="rpr")
    p.add_argument("--m", type=int, default=60, help="segment size; 0 reshapes the whole path at once")
    p.add_argument("--theta-max", type=float, default=30.0, help="turn limit in degrees (erpr)")
    p.add_argument("--out", required=True, help="report .json, or path .csv")
    p.add_argument("--svg", help="also render the initial and final paths")
    p.add_argument("--start", type=_point, help="X,Y (default 0,0)")
    p.add_argument("--goal", type=_point, help="X,Y (default workspace width,0)")
    p.add_argument("--epsilon", type=float, default=1e-3, help="CFS stopping threshold")
    p.add_argument("--trace", help="CSV of the CFS objective per iteration (cfs only)")
    p.add_argument("--curvature-log", help="CSV of turn repair sweeps (erpr only)")
    p.add_argument("--beamlet-json", help="dump the beamlet graph (erpr only)")
    p.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="benchmark planners on random environments")
    b.add_argument("--groups", default="5,10,15,20,30", help="obstacle counts, comma separated")
    b.add_argument("--trials", type=int, default=50)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--planners", default="cfs-line,rpr-all,rpr-60",
                   help="comma separated: cfs-line, rpr-all, rpr-M, erpr-M")
    b.add_argument("--out-csv", required=True)
    b.add_argument("--shape", choices=["rectangle", "circle"], default="rectangle")
    b.add_argument("--theta-max", type=float, default=30.0, help="turn limit in degrees (erpr)")
    b.add_argument("--jobs", type=int, default=1, help="worker processes")
    b.add_argument("--no-timing", action="store_true", help="leave time columns empty (byte-stable CSV)")
    b.add_argument("--quiet", action="store_true")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("render", help="draw an environment and paths as SVG")
    r.add_argument("--env", required=True)
    r.add_argument("--paths", nargs="+", default=[])
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PlanningError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_PLAN_FAILED


if __name__ == "__main__":
    sys.exit(main())
