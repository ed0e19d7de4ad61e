import numpy as np
import pytest

import helpers
from geocontact import DisconnectedPointsError, Mesh, SurfacePoint
from geocontact.geodesic import GeodesicEngine, exact_geodesic, geodesic_distance
from geocontact.paths import parallel_transport
from geocontact.shapes import cylinder_point, grid_point, plane_grid


def test_degenerate_same_point(grid):
    p = SurfacePoint.face(3, (0.2, 0.3, 0.5))
    path = exact_geodesic(grid, p, p)
    assert path.length == 0.0
    assert path.is_degenerate()


def test_degenerate_coincident_points(grid):
    # an edge endpoint and the vertex itself are the same location
    e = 0
    a = int(grid.edge_vertices[e][0])
    path = exact_geodesic(grid, SurfacePoint.edge(e, 0.0), SurfacePoint.vertex(a))
    assert path.length == 0.0


def test_single_face_segment(square):
    p = SurfacePoint.face(0, (0.6, 0.3, 0.1))
    q = SurfacePoint.face(0, (0.1, 0.2, 0.7))
    path = exact_geodesic(square, p, q)
    oracle = np.linalg.norm(square.position(p) - square.position(q))
    assert path.length == pytest.approx(oracle, abs=1e-15)
    assert len(path.points) == 2


def test_planar_distances_match_euclidean(big_grid):
    """On a flat mesh every unfolded straight line is realizable, so the
    exact geodesic equals the planar distance."""
    rng = np.random.default_rng(42)
    engine = GeodesicEngine(big_grid)
    for _ in range(60):
        x0, y0, x1, y1 = rng.uniform(0.02, 1.98, size=4)
        p = grid_point(big_grid, 20, 20, 2.0, 2.0, x0, y0)
        q = grid_point(big_grid, 20, 20, 2.0, 2.0, x1, y1)
        want = helpers.planar_distance([x0, y0, 0], [x1, y1, 0])
        got = engine.path(p, q).length
        assert got == pytest.approx(want, abs=1e-9), (x0, y0, x1, y1)


def test_planar_path_points_are_collinear(big_grid):
    p = grid_point(big_grid, 20, 20, 2.0, 2.0, 0.15, 0.17)
    q = grid_point(big_grid, 20, 20, 2.0, 2.0, 1.83, 1.64)
    path = GeodesicEngine(big_grid).path(p, q)
    pos = path.positions()
    d = pos[-1] - pos[0]
    d /= np.linalg.norm(d)
    for x in pos[1:-1]:
        off = (x - pos[0]) - ((x - pos[0]) @ d) * d
        assert np.linalg.norm(off) < 1e-9


def test_cylinder_closed_form(cyl):
    """Smooth-cylinder unrolling agrees with the polyhedral result to
    tessellation accuracy (64 segments: well under 1%)."""
    rng = np.random.default_rng(3)
    engine = GeodesicEngine(cyl)
    for _ in range(25):
        t0, t1 = rng.uniform(0, 2 * np.pi, size=2)
        z0, z1 = rng.uniform(0.1, 1.9, size=2)
        p = cylinder_point(cyl, 64, 32, 1.0, 2.0, t0, z0)
        q = cylinder_point(cyl, 64, 32, 1.0, 2.0, t1, z1)
        want = helpers.cylinder_distance(t0, z0, t1, z1)
        got = engine.path(p, q).length
        assert got == pytest.approx(want, rel=0.01)
        assert got <= want * 1.01 + 1e-12


def test_cylinder_quarter_turn_vertex_pair(cyl):
    # quarter turn plus unit rise between exact mesh vertices
    p = SurfacePoint.vertex(0)
    q = SurfacePoint.vertex(16 + 16 * 64)  # theta index 16 of ring 16
    want = helpers.cylinder_distance(0.0, 0.0, np.pi / 2, 1.0)
    got = geodesic_distance(cyl, p, q)
    assert got == pytest.approx(want, rel=0.005)


def test_geodesic_symmetry_exact(cyl, big_grid):
    rng = np.random.default_rng(11)
    for mesh, mk in (
        (cyl, lambda r: cylinder_point(cyl, 64, 32, 1.0, 2.0, r.uniform(0, 2 * np.pi), r.uniform(0.1, 1.9))),
        (big_grid, lambda r: grid_point(big_grid, 20, 20, 2.0, 2.0, r.uniform(0.05, 1.95), r.uniform(0.05, 1.95))),
    ):
        engine = GeodesicEngine(mesh)
        for _ in range(15):
            p, q = mk(rng), mk(rng)
            ab = engine.path(p, q)
            ba = engine.path(q, p)
            assert ab.length == ba.length  # bit-for-bit
            assert [pt.key() for pt in ab.points] == [pt.key() for pt in reversed(ba.points)]


def test_antipodal_two_classes_tie(cyl):
    """Antipodal points on the cylinder have equal-length paths both ways
    around; the engine must still report the true minimum."""
    engine = GeodesicEngine(cyl)
    for z0, z1 in [(1.0, 1.0), (0.5, 1.5)]:
        p = cylinder_point(cyl, 64, 32, 1.0, 2.0, 0.0, z0)
        q = cylinder_point(cyl, 64, 32, 1.0, 2.0, np.pi, z1)
        want = helpers.cylinder_distance(0.0, z0, np.pi, z1)
        got = engine.path(p, q).length
        assert got == pytest.approx(want, rel=0.01)


def test_never_beats_chord_and_never_loses_to_dijkstra(cyl):
    """Two-sided sandwich: chord <= exact <= edge-graph Dijkstra."""
    rng = np.random.default_rng(5)
    engine = GeodesicEngine(cyl)
    for _ in range(12):
        va, vb = rng.integers(0, cyl.n_vertices, size=2)
        if va == vb:
            continue
        p, q = SurfacePoint.vertex(int(va)), SurfacePoint.vertex(int(vb))
        exact = engine.path(p, q).length
        chord = float(np.linalg.norm(cyl.vertices[va] - cyl.vertices[vb]))
        graph = helpers.dijkstra_edge_distance(cyl, int(va), int(vb))
        assert chord - 1e-12 <= exact <= graph + 1e-9


def test_path_endpoint_directions_point_along_path(big_grid):
    p = grid_point(big_grid, 20, 20, 2.0, 2.0, 0.3, 0.3)
    q = grid_point(big_grid, 20, 20, 2.0, 2.0, 1.7, 0.9)
    path = GeodesicEngine(big_grid).path(p, q)
    f, d3 = big_grid.decode_direction(p, path.initial_dir)
    want = np.array([1.7 - 0.3, 0.9 - 0.3, 0.0])
    want /= np.linalg.norm(want)
    assert np.allclose(d3, want, atol=1e-9)
    f, d3 = big_grid.decode_direction(q, path.ending_dir)
    assert np.allclose(d3, want, atol=1e-9)


def test_disconnected_components_raise():
    v = [
        (0, 0, 0), (1, 0, 0), (0, 1, 0),
        (5, 0, 0), (6, 0, 0), (5, 1, 0),
    ]
    f = [(0, 1, 2), (3, 4, 5)]
    m = Mesh(v, f)
    with pytest.raises(DisconnectedPointsError):
        exact_geodesic(m, SurfacePoint.vertex(0), SurfacePoint.vertex(3))


def test_closest_brute_force_with_ties(big_grid):
    """closest() must match exhaustive search exactly, including the
    lowest-index rule on ties."""
    engine = GeodesicEngine(big_grid)
    axis = [grid_point(big_grid, 20, 20, 2.0, 2.0, x, 1.0) for x in (0.4, 0.8, 1.2, 1.6)]
    rng = np.random.default_rng(17)
    queries = [
        grid_point(
            big_grid, 20, 20, 2.0, 2.0, rng.uniform(0.05, 1.95), rng.uniform(0.05, 1.95)
        )
        for _ in range(25)
    ]
    # a point equidistant from axis[1] and axis[2] exercises the tie rule
    queries.append(grid_point(big_grid, 20, 20, 2.0, 2.0, 1.0, 0.3))
    for qpt in queries:
        got_j, got_path = engine.closest(axis, qpt)
        lengths = [engine.path(a, qpt).length for a in axis]
        best = min(lengths)
        want_j = lengths.index(best)  # first index attaining the minimum
        assert got_j == want_j
        assert got_path.length == lengths[want_j]


def test_parallel_transport_flat_is_identity(big_grid):
    """Transport on a flat surface never rotates: the carried complex keeps
    its angle relative to a fixed planar frame."""
    rng = np.random.default_rng(23)
    engine = GeodesicEngine(big_grid)
    for _ in range(10):
        x0, y0, x1, y1 = rng.uniform(0.1, 1.9, size=4)
        p = grid_point(big_grid, 20, 20, 2.0, 2.0, x0, y0)
        q = grid_point(big_grid, 20, 20, 2.0, 2.0, x1, y1)
        path = engine.path(p, q)
        if path.is_degenerate():
            continue
        ang = rng.uniform(0, 2 * np.pi)
        v3 = np.array([np.cos(ang), np.sin(ang), 0.0])
        fp = big_grid.faces_of_point(p)[0]
        fq = big_grid.faces_of_point(q)[0]
        z = big_grid.encode_direction(p, v3, face=fp)
        carried = parallel_transport(path, z)
        _, back = big_grid.decode_direction(q, carried)
        assert np.allclose(back, v3, atol=1e-9)
        assert abs(carried) == pytest.approx(abs(z), abs=1e-12)


def test_parallel_transport_round_trip_magnitude(cyl):
    engine = GeodesicEngine(cyl)
    p = cylinder_point(cyl, 64, 32, 1.0, 2.0, 0.3, 0.5)
    q = cylinder_point(cyl, 64, 32, 1.0, 2.0, 2.1, 1.4)
    path = engine.path(p, q)
    z = 0.73 * np.exp(1j * 1.1)
    there = parallel_transport(path, z)
    back = parallel_transport(path.reversed(), there)
    assert abs(there) == pytest.approx(abs(z), abs=1e-12)
    assert back == pytest.approx(z, abs=1e-9)


def test_transport_zero_length_path_is_identity(grid):
    p = SurfacePoint.face(0, (0.5, 0.25, 0.25))
    path = exact_geodesic(grid, p, p)
    z = 1.5 - 0.25j
    assert parallel_transport(path, z) == z
