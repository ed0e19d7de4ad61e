import json

import numpy as np
import pytest

import helpers
from geocontact import (
    Axis,
    PatchError,
    PatchParam,
    TraceTruncationError,
    default_axis,
    parameterize_axis,
    parameterize_patch,
    reconstruct_axis,
    reconstruct_patch,
    transfer_patch,
)
from geocontact.geodesic import GeodesicEngine
from geocontact.shapes import cylinder_point, grid_point


def gp(mesh, x, y):
    return grid_point(mesh, 20, 20, 2.0, 2.0, x, y)


def cp(mesh, theta, z):
    return cylinder_point(mesh, 64, 32, 1.0, 2.0, theta, z)


def unit_dir(mesh, p, v3):
    z = mesh.encode_direction(p, np.asarray(v3, dtype=float))
    return z / abs(z)


@pytest.fixture(scope="module")
def grid_engine(big_grid):
    return GeodesicEngine(big_grid)


@pytest.fixture(scope="module")
def cyl_engine(cyl):
    return GeodesicEngine(cyl)


def assert_units(axis):
    # interior angles and tangents must stay on the unit circle
    assert np.max(np.abs(np.abs(axis.turning) - 1.0)) <= 1e-12
    assert np.max(np.abs(np.abs(axis.tangents) - 1.0)) <= 1e-12


def test_straight_axis_measurements(big_grid, grid_engine):
    axis = parameterize_axis(
        big_grid, [gp(big_grid, 0.25, 0.25), gp(big_grid, 0.75, 0.25)], grid_engine
    )
    assert len(axis) >= 2
    assert np.sum(axis.lengths) == pytest.approx(0.5, abs=1e-9)
    assert axis.lengths[-1] == 0.0
    # a straight run has no turning anywhere, and every tangent points +x
    assert np.allclose(axis.turning, 1.0, atol=1e-9)
    for p, t in zip(axis.points, axis.tangents):
        _, d = big_grid.decode_direction(p, t)
        assert np.allclose(d, [1.0, 0.0, 0.0], atol=1e-9)
    assert_units(axis)


def test_collinear_waypoints_have_unit_turning(big_grid, grid_engine):
    pts = [gp(big_grid, 0.2, 0.3), gp(big_grid, 0.9, 0.3), gp(big_grid, 1.6, 0.3)]
    axis = parameterize_axis(big_grid, pts, grid_engine)
    assert np.allclose(axis.turning, 1.0, atol=1e-9)
    assert np.sum(axis.lengths) == pytest.approx(1.4, abs=1e-9)


def test_l_axis_quarter_turn(big_grid, grid_engine):
    pts = [gp(big_grid, 0.1, 0.1), gp(big_grid, 0.9, 0.1), gp(big_grid, 0.9, 0.9)]
    axis = parameterize_axis(big_grid, pts, grid_engine)
    assert np.sum(axis.lengths) == pytest.approx(1.6, abs=1e-9)
    corner = [
        i
        for i, p in enumerate(axis.points)
        if np.allclose(big_grid.position(p), [0.9, 0.1, 0.0], atol=1e-12)
    ]
    assert len(corner) == 1
    k = corner[0]
    assert 0 < k < len(axis) - 1
    # left turn from +x to +y is a quarter turn counterclockwise
    assert axis.turning[k] == pytest.approx(np.exp(1j * np.pi / 2), abs=1e-9)
    others = np.delete(axis.turning, k)
    assert np.allclose(others, 1.0, atol=1e-9)
    assert_units(axis)


def test_patch_point_perpendicular_offset(big_grid, grid_engine):
    axis = parameterize_axis(
        big_grid, [gp(big_grid, 0.5, 0.5), gp(big_grid, 1.5, 0.5)], grid_engine
    )
    param = parameterize_patch(big_grid, [gp(big_grid, 1.0, 0.7)], axis, grid_engine)
    j = int(param.closest[0])
    assert np.allclose(big_grid.position(axis.points[j]), [1.0, 0.5, 0.0], atol=1e-9)
    # 0.2 to the left of an axis running +x: distance 0.2, angle +90 degrees
    assert param.z[0] == pytest.approx(0.2j, abs=1e-9)


def test_patch_point_on_axis_is_zero(big_grid, grid_engine):
    axis = parameterize_axis(
        big_grid, [gp(big_grid, 0.5, 0.5), gp(big_grid, 1.5, 0.5)], grid_engine
    )
    param = parameterize_patch(big_grid, [gp(big_grid, 0.9, 0.5)], axis, grid_engine)
    assert param.z[0] == 0.0
    assert np.allclose(
        big_grid.position(axis.points[int(param.closest[0])]),
        [0.9, 0.5, 0.0],
        atol=1e-12,
    )


def test_axis_round_trip_flat(big_grid, grid_engine):
    pts = [gp(big_grid, 0.1, 0.1), gp(big_grid, 0.9, 0.1), gp(big_grid, 0.9, 0.9)]
    axis = parameterize_axis(big_grid, pts, grid_engine)
    redo = reconstruct_axis(
        big_grid, axis.lengths, axis.turning, axis.points[0], axis.tangents[0]
    )
    assert len(redo) == len(axis)
    err = [
        np.linalg.norm(big_grid.position(a) - big_grid.position(b))
        for a, b in zip(axis.points, redo.points)
    ]
    assert max(err) <= 1e-6
    assert np.array_equal(redo.lengths, axis.lengths)
    assert_units(redo)


def test_axis_round_trip_cylinder(cyl, cyl_engine):
    pts = [cp(cyl, 0.3, 0.4), cp(cyl, 1.7, 1.0), cp(cyl, 2.9, 1.6)]
    axis = parameterize_axis(cyl, pts, cyl_engine)
    redo = reconstruct_axis(
        cyl, axis.lengths, axis.turning, axis.points[0], axis.tangents[0]
    )
    tol = 1e-4 * cyl.bbox_diagonal()
    err = [
        np.linalg.norm(cyl.position(a) - cyl.position(b))
        for a, b in zip(axis.points, redo.points)
    ]
    assert max(err) <= tol
    assert_units(axis)
    assert_units(redo)


def test_patch_round_trip_flat(big_grid, grid_engine):
    axis = parameterize_axis(
        big_grid, [gp(big_grid, 0.5, 0.7), gp(big_grid, 1.5, 0.7)], grid_engine
    )
    angles = np.linspace(0.0, 2 * np.pi, 8, endpoint=False)
    patch = [
        gp(big_grid, 1.0 + 0.25 * np.cos(a), 0.7 + 0.25 * np.sin(a)) for a in angles
    ]
    patch.append(gp(big_grid, 1.2, 0.95))
    param = parameterize_patch(big_grid, patch, axis, grid_engine)
    redone, skipped = reconstruct_patch(big_grid, axis, param)
    assert skipped == []
    err = [
        np.linalg.norm(big_grid.position(a) - big_grid.position(b))
        for a, b in zip(patch, redone)
    ]
    assert max(err) <= 1e-6


def test_patch_round_trip_cylinder(cyl, cyl_engine):
    axis = parameterize_axis(cyl, [cp(cyl, 0.4, 0.5), cp(cyl, 2.2, 1.3)], cyl_engine)
    patch = [
        cp(cyl, 0.7, 0.9),
        cp(cyl, 1.3, 0.6),
        cp(cyl, 1.6, 1.2),
        cp(cyl, 2.0, 0.8),
        cp(cyl, 1.1, 1.1),
    ]
    param = parameterize_patch(cyl, patch, axis, cyl_engine)
    redone, skipped = reconstruct_patch(cyl, axis, param)
    assert skipped == []
    tol = 1e-4 * cyl.bbox_diagonal()
    err = [
        np.linalg.norm(cyl.position(a) - cyl.position(b))
        for a, b in zip(patch, redone)
    ]
    assert max(err) <= tol


def test_mirrored_axis_is_planar_reflection(big_grid, grid_engine):
    pts = [gp(big_grid, 0.5, 1.0), gp(big_grid, 1.3, 1.0), gp(big_grid, 1.3, 1.4)]
    axis = parameterize_axis(big_grid, pts, grid_engine)
    mirrored = reconstruct_axis(
        big_grid, axis.lengths, axis.turning, axis.points[0], axis.tangents[0],
        mirror=True,
    )
    want = helpers.reflect_across_line(
        [big_grid.position(p)[:2] for p in axis.points], [0.5, 1.0], [1.0, 0.0]
    )
    got = np.array([big_grid.position(p)[:2] for p in mirrored.points])
    assert np.max(np.linalg.norm(got - want, axis=1)) <= 1e-6
    # the left turn came out as a right turn
    assert np.allclose(big_grid.position(mirrored.points[-1]), [1.3, 0.6, 0.0], atol=1e-6)


def test_transfer_same_plane_reflects_patch(big_grid, grid_engine):
    axis_pts = [gp(big_grid, 0.5, 1.0), gp(big_grid, 1.5, 1.0)]
    angles = np.linspace(0.0, 2 * np.pi, 8, endpoint=False)
    patch = [
        gp(big_grid, 1.0 + 0.3 * np.cos(a), 1.0 + 0.3 * np.sin(a)) for a in angles
    ]
    patch.append(gp(big_grid, 0.8, 1.25))
    start = gp(big_grid, 0.5, 1.0)
    t1 = unit_dir(big_grid, start, [1.0, 0.0, 0.0])
    moved, axis2, param, skipped = transfer_patch(
        big_grid, patch, axis_pts, big_grid, start, t1, grid_engine
    )
    assert skipped == []
    assert len(moved) == len(patch)
    want = helpers.reflect_across_line(
        [big_grid.position(p)[:2] for p in patch], [0.5, 1.0], [1.0, 0.0]
    )
    got = np.array([big_grid.position(p)[:2] for p in moved])
    assert np.max(np.linalg.norm(got - want, axis=1)) <= 1e-6


def test_double_transfer_is_identity(big_grid, grid_engine):
    axis_pts = [gp(big_grid, 0.5, 1.0), gp(big_grid, 1.5, 1.0)]
    patch = [
        gp(big_grid, 0.9, 1.2),
        gp(big_grid, 1.1, 0.8),
        gp(big_grid, 1.3, 1.1),
        gp(big_grid, 0.7, 0.9),
    ]
    start = gp(big_grid, 0.5, 1.0)
    t1 = unit_dir(big_grid, start, [1.0, 0.0, 0.0])
    once, _, _, sk1 = transfer_patch(
        big_grid, patch, axis_pts, big_grid, start, t1, grid_engine
    )
    twice, _, _, sk2 = transfer_patch(
        big_grid, once, axis_pts, big_grid, start, t1, grid_engine
    )
    assert sk1 == [] and sk2 == []
    err = [
        np.linalg.norm(big_grid.position(a) - big_grid.position(b))
        for a, b in zip(patch, twice)
    ]
    assert max(err) <= 1e-6


def test_transfer_plane_to_cylinder(big_grid, grid_engine, cyl, cyl_engine):
    """Unrolling the cylinder predicts where each point must land, and the
    per-point distance to the axis must carry over within one percent."""
    axis_pts = [gp(big_grid, 0.4, 1.0), gp(big_grid, 1.6, 1.0)]
    rng = np.random.default_rng(11)
    uv = rng.uniform([0.5, 0.6], [1.5, 1.4], size=(10, 2))
    patch = [gp(big_grid, u, v) for u, v in uv]
    theta0, z0 = 1.0, 0.4
    start = cp(cyl, theta0, z0)
    t1 = unit_dir(cyl, start, [0.0, 0.0, 1.0])
    moved, axis2, param, skipped = transfer_patch(
        big_grid, patch, axis_pts, cyl, start, t1, grid_engine
    )
    assert skipped == []
    for (u, v), p in zip(uv, moved):
        # mirror flips the source's left offset to the target's right, which
        # on this cylinder is the +theta side
        want = np.array(
            [np.cos(theta0 + (v - 1.0)), np.sin(theta0 + (v - 1.0)), z0 + (u - 0.4)]
        )
        assert np.linalg.norm(cyl.position(p) - want) <= 5e-3
    for i, p in enumerate(moved):
        r_src = abs(param.z[i])
        anchor = axis2.points[int(param.closest[i])]
        r_dst = cyl_engine.path(anchor, p).length
        assert r_dst == pytest.approx(r_src, rel=0.01)


def test_transferred_axis_lengths_are_exact(big_grid, grid_engine, cyl, cyl_engine):
    axis_pts = [gp(big_grid, 0.4, 1.0), gp(big_grid, 1.6, 1.0)]
    axis = parameterize_axis(big_grid, axis_pts, grid_engine)
    start = cp(cyl, 2.0, 0.3)
    t1 = unit_dir(cyl, start, [0.0, 0.0, 1.0])
    axis2 = reconstruct_axis(cyl, axis.lengths, axis.turning, start, t1, mirror=True)
    assert np.array_equal(axis2.lengths, axis.lengths)
    for i in range(len(axis2) - 1):
        realized = cyl_engine.path(axis2.points[i], axis2.points[i + 1]).length
        assert realized == pytest.approx(float(axis.lengths[i]), abs=1e-9)


def test_reconstruct_patch_skips_points_leaving_surface(big_grid, grid_engine):
    axis = parameterize_axis(
        big_grid, [gp(big_grid, 1.0, 1.05), gp(big_grid, 1.5, 1.05)], grid_engine
    )
    param = PatchParam(
        closest=np.array([0, 0], dtype=np.int64),
        z=np.array([0.3j, 5.0 + 0.0j]),
    )
    points, skipped = reconstruct_patch(big_grid, axis, param)
    assert skipped == [1]
    assert len(points) == 1
    assert np.allclose(big_grid.position(points[0]), [1.0, 1.35, 0.0], atol=1e-9)


def test_default_axis_two_points(big_grid, grid_engine):
    a = gp(big_grid, 0.3, 0.4)
    b = gp(big_grid, 1.2, 0.9)
    pts = default_axis(big_grid, [a, b], grid_engine)
    assert np.allclose(big_grid.position(pts[0]), big_grid.position(a), atol=1e-12)
    assert np.allclose(big_grid.position(pts[-1]), big_grid.position(b), atol=1e-12)
    axis = parameterize_axis(big_grid, pts, grid_engine)
    assert np.sum(axis.lengths) == pytest.approx(np.hypot(0.9, 0.5), abs=1e-9)


def test_default_axis_picks_farthest_pair(big_grid, grid_engine):
    rng = np.random.default_rng(3)
    xy = rng.uniform(0.1, 1.9, size=(9, 2))
    patch = [gp(big_grid, x, y) for x, y in xy]
    pts = default_axis(big_grid, patch, grid_engine)
    # flat mesh: the farthest geodesic pair is the farthest planar pair
    best = max(
        ((i, j) for i in range(len(xy)) for j in range(i + 1, len(xy))),
        key=lambda ij: np.linalg.norm(xy[ij[0]] - xy[ij[1]]),
    )
    assert np.allclose(big_grid.position(pts[0])[:2], xy[best[0]], atol=1e-9)
    assert np.allclose(big_grid.position(pts[-1])[:2], xy[best[1]], atol=1e-9)


def test_default_axis_collinear_extremes(big_grid, grid_engine):
    xs = [0.5, 0.3, 0.8, 1.2]
    patch = [gp(big_grid, x, 0.7) for x in xs]
    pts = default_axis(big_grid, patch, grid_engine)
    ends = sorted([big_grid.position(pts[0])[0], big_grid.position(pts[-1])[0]])
    assert ends == pytest.approx([0.3, 1.2], abs=1e-12)


def test_default_axis_errors(big_grid, grid_engine):
    p = gp(big_grid, 0.5, 0.5)
    with pytest.raises(PatchError):
        default_axis(big_grid, [p], grid_engine)
    with pytest.raises(PatchError):
        default_axis(big_grid, [p, p, p], grid_engine)


def test_parameterize_axis_errors(big_grid, grid_engine):
    p = gp(big_grid, 0.5, 0.5)
    with pytest.raises(PatchError):
        parameterize_axis(big_grid, [p], grid_engine)
    with pytest.raises(PatchError):
        parameterize_axis(big_grid, [p, p], grid_engine)


def test_reconstruct_axis_errors(big_grid):
    p = gp(big_grid, 0.5, 0.5)
    with pytest.raises(PatchError):
        reconstruct_axis(big_grid, [1.0], [1.0 + 0.0j], p, 1.0 + 0.0j)
    with pytest.raises(PatchError):
        reconstruct_axis(big_grid, [1.0, 0.0], [1, 1], p, 0.0j)


def test_reconstruct_axis_truncation_carries_partial(big_grid):
    start = gp(big_grid, 1.0, 1.05)
    t1 = unit_dir(big_grid, start, [1.0, 0.0, 0.0])
    with pytest.raises(TraceTruncationError) as info:
        reconstruct_axis(big_grid, [3.0, 0.0], [1, 1], start, t1)
    partial = info.value.partial
    assert isinstance(partial, Axis)
    # the grid ends at x = 2, one unit away from the start
    assert np.sum(partial.lengths) == pytest.approx(1.0, abs=1e-9)


def test_reconstruct_patch_index_out_of_range(big_grid, grid_engine):
    axis = parameterize_axis(
        big_grid, [gp(big_grid, 1.0, 1.0), gp(big_grid, 1.2, 1.0)], grid_engine
    )
    bad = PatchParam(closest=np.array([99]), z=np.array([0.1 + 0.0j]))
    with pytest.raises(PatchError):
        reconstruct_patch(big_grid, axis, bad)


def test_axis_serialization_round_trip(big_grid, grid_engine):
    pts = [gp(big_grid, 0.1, 0.1), gp(big_grid, 0.9, 0.1), gp(big_grid, 0.9, 0.9)]
    axis = parameterize_axis(big_grid, pts, grid_engine)
    blob = json.dumps(axis.to_dict())
    redo = Axis.from_dict(json.loads(blob))
    assert [p.key() for p in redo.points] == [p.key() for p in axis.points]
    assert np.array_equal(redo.lengths, axis.lengths)
    assert np.array_equal(redo.turning, axis.turning)
    assert np.array_equal(redo.tangents, axis.tangents)


def test_patch_param_serialization_round_trip(big_grid, grid_engine):
    axis = parameterize_axis(
        big_grid, [gp(big_grid, 0.5, 0.5), gp(big_grid, 1.5, 0.5)], grid_engine
    )
    patch = [gp(big_grid, 1.0, 0.7), gp(big_grid, 0.8, 0.3), gp(big_grid, 1.2, 0.5)]
    param = parameterize_patch(big_grid, patch, axis, grid_engine)
    blob = json.dumps(param.to_dict())
    redo = PatchParam.from_dict(json.loads(blob))
    assert np.array_equal(redo.closest, param.closest)
    assert np.array_equal(redo.z, param.z)


def test_serialization_rejects_unknown_format(big_grid, grid_engine):
    axis = parameterize_axis(
        big_grid, [gp(big_grid, 0.5, 0.5), gp(big_grid, 1.5, 0.5)], grid_engine
    )
    data = axis.to_dict()
    data["format"] = 2
    with pytest.raises(PatchError):
        Axis.from_dict(data)
    with pytest.raises(PatchError):
        PatchParam.from_dict({"closest": [], "z": []})
