"""Straightest-geodesic tracing.

A trace walks a straight line through a rolling planar unfolding of the
faces it crosses. At a vertex the walk continues at equal rescaled angle on
both sides, which on a flat fan is a straight line through the vertex.
"""

import numpy as np

from .errors import GeoContactError, InvalidPointError, TraceTruncationError
from .mesh import SurfacePoint
from .paths import GeodesicPath

_STEP_EPS = 1e-12
_HIT_SNAP = 1e-9


def _fresh_chart(mesh, f):
    _, _, _, corners = mesh.face_chart(f)
    return {int(v): corners[k].copy() for k, v in enumerate(mesh.faces[f])}


def _chart_frames(mesh, f, corners):
    vs = [int(v) for v in mesh.faces[f]]
    P = mesh.vertices[vs]
    C = np.array([corners[v] for v in vs])
    E3 = np.stack([P[1] - P[0], P[2] - P[0]])
    E2 = np.stack([C[1] - C[0], C[2] - C[0]])
    return vs, C, E3, E2


def _dir_to_3d(mesh, f, corners, d2):
    _, _, E3, E2 = _chart_frames(mesh, f, corners)
    a = np.linalg.solve(E2.T, d2)
    return E3.T @ a


def _dir_to_2d(mesh, f, corners, d3):
    _, _, E3, E2 = _chart_frames(mesh, f, corners)
    a = np.linalg.solve(E3 @ E3.T, E3 @ d3)
    return E2.T @ a


def _point_2d(mesh, f, corners, point):
    w = mesh.point_in_face(point, f)
    _, C, _, _ = _chart_frames(mesh, f, corners)
    return w @ C


def _bary_2d(mesh, f, corners, xy):
    _, C, _, E2 = _chart_frames(mesh, f, corners)
    st = np.linalg.solve(E2.T, np.asarray(xy) - C[0])
    return np.array([1.0 - st[0] - st[1], st[0], st[1]])


def _ray_segment(p, d, a, b):
    """Intersect ray p + t*d with segment a..b; returns (t, u) or None."""
    m = np.array([[d[0], a[0] - b[0]], [d[1], a[1] - b[1]]])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det) < 1e-300:
        return None
    rhs = a - p
    t = (rhs[0] * m[1, 1] - rhs[1] * m[0, 1]) / det
    u = (m[0, 0] * rhs[1] - m[1, 0] * rhs[0]) / det
    return t, u


def trace_geodesic(mesh, start, direction, length=None):
    """Walk straight from ``start`` along chart direction ``direction``.

    The distance walked is ``abs(direction)`` unless ``length`` overrides
    it. Returns a GeodesicPath whose points include every edge crossing and
    vertex passage. Walking off an open boundary raises
    TraceTruncationError carrying the partial path.
    """
    z = complex(direction)
    total = abs(z) if length is None else float(length)
    if total < 0:
        raise GeoContactError("trace length must not be negative")
    if total == 0 or z == 0:
        return GeodesicPath(mesh, [start])
    z_unit = z / abs(z)

    try:
        f, d3 = mesh.decode_direction(start, z_unit)
    except InvalidPointError:
        on_rim = (start.kind == "edge" and mesh.boundary_edge[start.index]) or (
            start.kind == "vertex" and mesh.boundary_vertex[start.index]
        )
        if not on_rim:
            raise
        # a boundary start with an exiting direction leaves the surface
        # before taking a single step
        raise TraceTruncationError(GeodesicPath(mesh, [start])) from None
    corners = _fresh_chart(mesh, f)
    p2 = _point_2d(mesh, f, corners, start)
    d2 = _dir_to_2d(mesh, f, corners, d3)
    d2 = d2 / np.linalg.norm(d2)

    points = [start]
    remaining = total
    max_steps = 10000 + 100 * mesh.n_faces
    for _ in range(max_steps):
        vs = [int(v) for v in mesh.faces[f]]
        best = None
        for k in range(3):
            a, b = vs[k], vs[(k + 1) % 3]
            hit = _ray_segment(p2, d2, corners[a], corners[b])
            if hit is None:
                continue
            t, u = hit
            if t > _STEP_EPS and -_HIT_SNAP <= u <= 1.0 + _HIT_SNAP:
                if best is None or t < best[0]:
                    best = (t, u, a, b)
        if best is None:
            raise GeoContactError("trace lost its containing face")
        t_exit, u, a, b = best

        if t_exit >= remaining:
            end2 = p2 + remaining * d2
            w = _bary_2d(mesh, f, corners, end2)
            pt = mesh.classify_face_point(f, np.clip(w, 0.0, None))
            points.append(pt)
            d3 = _dir_to_3d(mesh, f, corners, d2)
            # encode the backward direction, which lies inside f even when
            # the endpoint snaps onto its rim, then rotate by pi
            end_dir = -mesh.encode_direction(pt, -d3, face=f)
            return GeodesicPath(mesh, _dedupe(points), z_unit, end_dir)

        if u <= _HIT_SNAP or u >= 1.0 - _HIT_SNAP:
            v = a if u <= _HIT_SNAP else b
            hit2 = np.asarray(corners[v], dtype=float)
            step = float(np.linalg.norm(hit2 - p2))
            if step <= _STEP_EPS:
                raise GeoContactError("trace stalled at a vertex")
            remaining -= step
            points.append(SurfacePoint.vertex(v))
            back3 = -_dir_to_3d(mesh, f, corners, d2)
            zb = mesh.encode_direction(SurfacePoint.vertex(v), back3, face=f)
            if remaining <= _STEP_EPS:
                # the length expires here; the backward direction lies in
                # the arrival face, not in the onward wedge
                return GeodesicPath(mesh, _dedupe(points), z_unit, -zb)
            theta_out = (np.angle(zb) + np.pi) % (2.0 * np.pi)
            f, d3 = mesh.decode_direction(
                SurfacePoint.vertex(v), complex(np.cos(theta_out), np.sin(theta_out))
            )
            corners = _fresh_chart(mesh, f)
            p2 = corners[v]
            d2 = _dir_to_2d(mesh, f, corners, d3)
            d2 = d2 / np.linalg.norm(d2)
            continue

        e = mesh.edge_index(a, b)
        ea, eb = (int(x) for x in mesh.edge_vertices[e])
        u_canon = u if (ea, eb) == (a, b) else 1.0 - u
        u_canon = min(max(u_canon, 0.0), 1.0)
        hit2 = (1.0 - u_canon) * corners[ea] + u_canon * corners[eb]
        step = float(np.linalg.norm(hit2 - p2))
        remaining -= step
        pt = SurfacePoint.edge(e, u_canon)
        points.append(pt)
        if remaining <= _STEP_EPS or mesh.boundary_edge[e]:
            d3 = _dir_to_3d(mesh, f, corners, d2)
            end_dir = -mesh.encode_direction(pt, -d3, face=f)
            path = GeodesicPath(mesh, _dedupe(points), z_unit, end_dir)
            if remaining <= _STEP_EPS:
                # the length expires exactly on this crossing
                return path
            raise TraceTruncationError(path)
        f, placed = mesh.unfold_across(f, corners, e)
        corners = placed
        p2 = hit2
    raise GeoContactError("trace exceeded its step budget")


def _dedupe(points):
    out = [points[0]]
    for p in points[1:]:
        if p.key() != out[-1].key():
            out.append(p)
    return out
