import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathreshape.env import (ConvexPolygon, Obstacle, Workspace, clearance, clearances,
                             dilated_obstacle_hulls, dilation_radius_cells, environment_from_dict,
                             environment_from_occupancy, load_environment, point_in_dilated,
                             rasterize_and_dilate, save_environment, segment_collision_free)
from pathreshape.errors import InputError, IoError, NonPositiveResolution, ObstacleOutsideWorkspace


def test_grid_dimensions(ws96):
    env = rasterize_and_dilate(ws96, [], 0.1, 0.1)
    assert (env.rows, env.cols) == (60, 90)


def test_empty_has_no_occupied_cells(empty_env):
    assert empty_env.occupied_count == 0


def test_dilation_radius_is_ceil_plus_one():
    assert dilation_radius_cells(0.1, 0.1) == 2
    assert dilation_radius_cells(0.1, 0.15) == 3
    assert dilation_radius_cells(0.1, 0.0) == 1


def _chebyshev_block_oracle(rows, cols, r0, r1, c0, c1, radius):
    # cell (r, c) is occupied iff its Chebyshev distance to the block [r0..r1] x [c0..c1] is <= radius
    out = np.zeros((rows, cols), dtype=bool)
    for r in range(rows):
        for c in range(cols):
            dr = max(r0 - r, 0, r - r1)
            dc = max(c0 - c, 0, c - c1)
            out[r, c] = max(dr, dc) <= radius
    return out


def test_centered_square_becomes_14x14_block(box_env):
    # the 1x1 square covers cells rows 25..34, cols 40..49; grown by 2 cells
    oracle = _chebyshev_block_oracle(60, 90, 25, 34, 40, 49, 2)
    assert np.array_equal(box_env.occupied, oracle)
    rr, cc = np.nonzero(box_env.occupied)
    assert (rr.max() - rr.min() + 1, cc.max() - cc.min() + 1) == (14, 14)


def test_errors(ws96):
    with pytest.raises(NonPositiveResolution):
        rasterize_and_dilate(ws96, [], 0.0, 0.1)
    with pytest.raises(ObstacleOutsideWorkspace):
        rasterize_and_dilate(ws96, [Obstacle.rectangle((0.2, 3.0), 1.0, 1.0)], 0.1, 0.1)
    with pytest.raises(InputError):
        Obstacle.circle((1, 1), -1.0)
    with pytest.raises(InputError):
        Workspace(0, 1)


def test_point_in_dilated(box_env, empty_env):
    assert point_in_dilated(box_env, (-0.5, 1.0))
    assert point_in_dilated(empty_env, (9.01, 1.0))
    assert not point_in_dilated(empty_env, (4.5, 3.0))
    assert point_in_dilated(box_env, (4.5, 3.0))
    # closed cells: a point on the outer edge of the dilated block counts as inside
    assert point_in_dilated(box_env, (3.8, 3.0))
    assert not point_in_dilated(box_env, (3.79, 3.0))


def test_segment_collision_free_examples(box_env, empty_env):
    assert segment_collision_free(box_env, (1.0, 1.0), (1.0, 1.0))
    assert not segment_collision_free(box_env, (1.0, 3.05), (8.0, 3.05))
    assert segment_collision_free(empty_env, (1.0, 2.0), (8.0, 2.0))
    # passes just outside the dilated block's corner
    assert segment_collision_free(box_env, (3.0, 2.2), (6.0, 2.2))
    # touching the block's closed boundary counts as a collision
    assert not segment_collision_free(box_env, (3.0, 2.3), (6.0, 2.3))


def _sampled_hits(env, p, q, k=4001):
    t = np.linspace(0, 1, k)[:, None]
    pts = np.asarray(p) + t * (np.asarray(q) - np.asarray(p))
    c = np.clip(np.floor(pts[:, 0] / env.delta).astype(int), 0, env.cols - 1)
    r = np.clip(np.floor(pts[:, 1] / env.delta).astype(int), 0, env.rows - 1)
    return env.occupied[r, c].any()


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(0.0, 9.0), st.floats(0.0, 6.0)] * 2))
def test_segment_check_symmetric_and_conservative(box_env, coords):
    p, q = coords[:2], coords[2:]
    a = segment_collision_free(box_env, p, q)
    assert a == segment_collision_free(box_env, q, p)
    # any sampled point inside an occupied cell means a collision must be reported
    if _sampled_hits(box_env, p, q):
        assert not a


def test_clearance_examples():
    rect = Obstacle.rectangle((4.5, 2.5), 1.0, 1.0)  # [4,5] x [2,3]
    assert clearance((5.0, 2.7), [rect]) == 0.0
    assert clearance((3.0, 0.0), [Obstacle.circle((0.0, 0.0), 1.0)]) == pytest.approx(2.0)
    assert clearance((6.0, 4.0), [rect]) == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert clearance((1.0, 1.0), []) == math.inf
    np.testing.assert_allclose(clearances([[6.0, 4.0], [4.5, 2.5]], [rect]), [math.sqrt(2), 0.0])


def test_rectangle_hull_matches_block(box_env):
    (hull,) = dilated_obstacle_hulls(box_env)
    lo, hi = hull.vertices.min(axis=0), hull.vertices.max(axis=0)
    np.testing.assert_allclose(lo, [3.8, 2.3], atol=1e-12)
    np.testing.assert_allclose(hi, [5.2, 3.7], atol=1e-12)
    assert len(hull.vertices) == 4


def test_circle_hull_contains_grown_circle(ws96):
    env = rasterize_and_dilate(ws96, [Obstacle.circle((3.33, 2.71), 0.8)], 0.1, 0.1)
    (hull,) = dilated_obstacle_hulls(env)
    t = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    pts = np.column_stack([3.33 + 0.9 * np.cos(t), 2.71 + 0.9 * np.sin(t)])
    s = pts[:, None, :] - hull.vertices[None, :, :]
    side = hull.outward_normals[None] * s
    assert np.all(side.sum(axis=2) <= 1e-12)


def test_single_cell_hull(ws96):
    env = rasterize_and_dilate(ws96, [Obstacle.rectangle((2.05, 2.05), 0.1, 0.1)], 0.1, 0.0)
    (hull,) = dilated_obstacle_hulls(env)
    # one cell grown by one cell on each side: a 3x3 block
    np.testing.assert_allclose(hull.vertices.min(axis=0), [1.9, 1.9], atol=1e-12)
    np.testing.assert_allclose(hull.vertices.max(axis=0), [2.2, 2.2], atol=1e-12)


def test_convex_polygon_normals_outward():
    sq = ConvexPolygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
    np.testing.assert_allclose(sq.outward_normals, [[0, -1], [1, 0], [0, 1], [-1, 0]], atol=1e-15)


obstacle_st = st.one_of(
    st.builds(lambda x, y, w, h: Obstacle.rectangle((x, y), w, h),
              st.floats(2.0, 7.0), st.floats(2.0, 4.0), st.floats(0.05, 1.5), st.floats(0.05, 1.5)),
    st.builds(lambda x, y, r: Obstacle.circle((x, y), r),
              st.floats(2.0, 7.0), st.floats(2.0, 4.0), st.floats(0.05, 0.9)),
)


@settings(max_examples=40, deadline=None)
@given(obstacle_st, st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_dilation_monotone(ob, a, b):
    ws = Workspace(9.0, 6.0)
    lo, hi = sorted((a, b))
    small = rasterize_and_dilate(ws, [ob], 0.1, lo).occupied
    big = rasterize_and_dilate(ws, [ob], 0.1, hi).occupied
    assert not np.any(small & ~big)


@settings(max_examples=40, deadline=None)
@given(obstacle_st, st.integers(0, 2**32 - 1))
def test_dilation_conservative(ob, seed):
    ws = Workspace(9.0, 6.0)
    env = rasterize_and_dilate(ws, [ob], 0.1, 0.1)
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = ob.bounds
    pts = rng.uniform([x0 - 0.1, y0 - 0.1], [x1 + 0.1, y1 + 0.1], size=(300, 2))
    near = ob.distance(pts) <= 0.1
    assert all(point_in_dilated(env, p) for p in pts[near])


@settings(max_examples=25, deadline=None)
@given(st.lists(obstacle_st, max_size=3))
def test_free_nodes_keep_one_cell_from_occupancy(obs):
    from scipy import ndimage

    ws = Workspace(9.0, 6.0)
    env = rasterize_and_dilate(ws, obs, 0.1, 0.1)
    from pathreshape.roadmap import build_roadmap

    free = build_roadmap(env).free
    if env.occupied_count == 0:
        return
    # distance (in cells) from every node to the nearest occupied cell centre, minus half a cell
    occ_nodes = np.zeros((env.rows + 1, env.cols + 1), dtype=bool)
    rr, cc = np.nonzero(env.occupied)
    for dr in (0, 1):
        for dc in (0, 1):
            occ_nodes[rr + dr, cc + dc] = True
    # nodes on an occupied cell's corner are blocked; all others are at least one cell away
    gap = ndimage.distance_transform_cdt(~occ_nodes, metric="chessboard")
    assert np.all(gap[free] >= 1)


def test_environment_json_roundtrip(tmp_path, box_env):
    f = tmp_path / "env.json"
    save_environment(box_env, f)
    back = load_environment(f)
    assert np.array_equal(back.occupied, box_env.occupied)
    assert back.obstacles == box_env.obstacles
    data = json.loads(f.read_text())
    assert data["obstacles"][0] == {"kind": "rectangle", "center": [4.5, 3.0], "width": 1.0, "height": 1.0}


def test_environment_file_errors(tmp_path, box_env):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_environment(bad)
    with pytest.raises(InputError):
        environment_from_dict({"delta": 0.1})
    with pytest.raises(InputError):
        environment_from_dict({"workspace": {"width": 9, "height": 6}, "delta": 0.1,
                               "obstacles": [{"kind": "hexagon"}]})
    with pytest.raises(IoError):
        save_environment(box_env, tmp_path / "missing" / "env.json")


def test_environment_from_occupancy():
    env = environment_from_occupancy([[0, 1], [0, 0]], delta=0.5)
    assert (env.rows, env.cols) == (2, 2)
    assert env.workspace.width == 1.0
    assert point_in_dilated(env, (0.75, 0.25))
