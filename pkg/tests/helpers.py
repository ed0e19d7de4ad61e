"""Independent oracles for the test suite.

Everything here is implemented from first principles, without calling the
library code under test, so expected values come from a second route.
"""

import heapq

import numpy as np


def planar_distance(p3, q3):
    """Geodesic distance on a flat z=0 mesh is the planar Euclidean one."""
    return float(np.linalg.norm(np.asarray(p3)[:2] - np.asarray(q3)[:2]))


def cylinder_distance(theta_p, z_p, theta_q, z_q, radius=1.0):
    """Unroll the cylinder to a plane: min over the two winding directions."""
    d = (theta_q - theta_p) % (2.0 * np.pi)
    arc = min(d, 2.0 * np.pi - d) * radius
    return float(np.hypot(arc, z_q - z_p))


def dijkstra_edge_distance(mesh, src_vertex, dst_vertex):
    """Plain Dijkstra over the edge graph; an upper bound for exact geodesics."""
    dist = {src_vertex: 0.0}
    heap = [(0.0, src_vertex)]
    adj = [[] for _ in range(mesh.n_vertices)]
    for (a, b), ln in zip(mesh.edge_vertices, mesh.edge_lengths):
        adj[int(a)].append((int(b), float(ln)))
        adj[int(b)].append((int(a), float(ln)))
    seen = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in seen:
            continue
        if u == dst_vertex:
            return d
        seen.add(u)
        for w, ln in adj[u]:
            nd = d + ln
            if nd < dist.get(w, np.inf):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return np.inf


def reflect_across_line(points_xy, origin_xy, dir_xy):
    """Mirror 2D points across the line through origin_xy along dir_xy."""
    d = np.asarray(dir_xy, dtype=float)
    d = d / np.linalg.norm(d)
    o = np.asarray(origin_xy, dtype=float)
    rel = np.asarray(points_xy, dtype=float) - o
    along = rel @ d
    perp = rel - np.outer(along, d)
    return o + np.outer(along, d) - perp


def rotate_about(points_xy, center_xy, angle):
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    rel = np.asarray(points_xy, dtype=float) - np.asarray(center_xy, dtype=float)
    return rel @ R.T + np.asarray(center_xy, dtype=float)


def two_link_ik(l1, l2, target_xy):
    """Planar two-link reach: joint angles (shoulder, elbow), elbow-down."""
    x, y = target_xy
    r2 = x * x + y * y
    c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    c2 = np.clip(c2, -1.0, 1.0)
    t2 = -np.arccos(c2)
    t1 = np.arctan2(y, x) - np.arctan2(l2 * np.sin(t2), l1 + l2 * np.cos(t2))
    return float(t1), float(t2)


def finite_difference_gradient(fun, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def euler_xyz(rx, ry, rz):
    """Intrinsic XYZ rotation matrix, written out directly."""
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rx @ Ry @ Rz
