"""Procedural meshes and a small demo rig.

These builders back the test suite and the ``geocontact`` demo assets; run
``python -m geocontact.shapes OUTDIR`` to write them to disk.
"""

import json
import sys

import numpy as np

from .mesh import Mesh, SurfacePoint, save_mesh


def unit_square():
    """Two triangles covering [0,1]^2 in the z=0 plane."""
    v = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
    f = [(0, 1, 2), (0, 2, 3)]
    return Mesh(v, f)


def plane_grid(nx=8, ny=8, width=1.0, height=1.0):
    """Regular triangulated grid in the z=0 plane with nx*ny cells."""
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    verts = [(x, y, 0.0) for y in ys for x in xs]
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + nx + 2
            d = a + nx + 1
            faces.append((a, b, c))
            faces.append((a, c, d))
    return Mesh(verts, faces)


def grid_point(mesh, nx, ny, width, height, x, y):
    """SurfacePoint at planar coordinates (x, y) on a plane_grid mesh."""
    i = min(int(x / width * nx), nx - 1)
    j = min(int(y / height * ny), ny - 1)
    f0 = 2 * (j * nx + i)
    for f in (f0, f0 + 1):
        w = mesh.chart_2d_to_bary(f, mesh.to_chart_2d(f, np.array([x, y, 0.0])))
        if w.min() >= -1e-12:
            return mesh.classify_face_point(f, np.clip(w, 0.0, None))
    raise ValueError(f"({x}, {y}) not inside cell ({i}, {j})")


def cylinder(n_theta=64, n_z=32, radius=1.0, height=2.0):
    """Open cylinder, seam-free in theta, boundary rings at both ends."""
    verts = []
    for j in range(n_z + 1):
        z = height * j / n_z
        for i in range(n_theta):
            t = 2.0 * np.pi * i / n_theta
            verts.append((radius * np.cos(t), radius * np.sin(t), z))
    faces = []
    for j in range(n_z):
        for i in range(n_theta):
            a = j * n_theta + i
            b = j * n_theta + (i + 1) % n_theta
            c = (j + 1) * n_theta + (i + 1) % n_theta
            d = (j + 1) * n_theta + i
            faces.append((a, b, c))
            faces.append((a, c, d))
    return Mesh(verts, faces)


def cylinder_point(mesh, n_theta, n_z, radius, height, theta, z):
    """SurfacePoint at cylindrical coordinates (theta, z)."""
    theta = theta % (2.0 * np.pi)
    i = min(int(theta / (2.0 * np.pi) * n_theta), n_theta - 1)
    j = min(int(z / height * n_z), n_z - 1)
    target = np.array([radius * np.cos(theta), radius * np.sin(theta), z])
    best = None
    for f in (2 * (j * n_theta + i), 2 * (j * n_theta + i) + 1):
        tri = mesh.vertices[mesh.faces[f]]
        # least squares barycentric fit, then project back to the face
        A = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
        st, *_ = np.linalg.lstsq(A, target - tri[0], rcond=None)
        w = np.array([1.0 - st.sum(), st[0], st[1]])
        pen = -min(w.min(), 0.0)
        if best is None or pen < best[0]:
            best = (pen, f, w)
    _, f, w = best
    return mesh.classify_face_point(f, np.clip(w, 0.0, None))


def cube():
    """Axis-aligned unit cube, two triangles per side, outward normals."""
    v = [
        (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
        (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
    ]
    quads = [
        (3, 2, 1, 0),  # bottom, normal -z
        (4, 5, 6, 7),  # top, normal +z
        (0, 1, 5, 4),  # front, normal -y
        (2, 3, 7, 6),  # back, normal +y
        (1, 2, 6, 5),  # right, normal +x
        (3, 0, 4, 7),  # left, normal -x
    ]
    f = []
    for a, b, c, d in quads:
        f.append((a, b, c))
        f.append((a, c, d))
    return Mesh(v, f)


def uv_sphere(n_u=24, n_v=16, radius=1.0, center=(0.0, 0.0, 0.0), scale=(1.0, 1.0, 1.0)):
    """Closed UV sphere; optionally anisotropically scaled (an ellipsoid)."""
    center = np.asarray(center, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    verts = [center + scale * np.array([0.0, 0.0, radius])]
    for j in range(1, n_v):
        phi = np.pi * j / n_v
        for i in range(n_u):
            t = 2.0 * np.pi * i / n_u
            p = radius * np.array([np.sin(phi) * np.cos(t), np.sin(phi) * np.sin(t), np.cos(phi)])
            verts.append(center + scale * p)
    verts.append(center + scale * np.array([0.0, 0.0, -radius]))
    south = len(verts) - 1
    ring = lambda j: 1 + (j - 1) * n_u
    faces = []
    for i in range(n_u):
        faces.append((0, ring(1) + i, ring(1) + (i + 1) % n_u))
    for j in range(1, n_v - 1):
        for i in range(n_u):
            a = ring(j) + i
            b = ring(j) + (i + 1) % n_u
            c = ring(j + 1) + (i + 1) % n_u
            d = ring(j + 1) + i
            faces.append((a, c, b))
            faces.append((a, d, c))
    for i in range(n_u):
        faces.append((south, ring(n_v - 1) + (i + 1) % n_u, ring(n_v - 1) + i))
    return Mesh(verts, faces)


def mitt(n_u=28, n_v=20):
    """Hand-like manipulator: an elongated rounded slab with a thumb bump.

    Closed, manifold, genus zero. The palm is roughly the region x > 0.3.
    """
    base = uv_sphere(n_u, n_v, radius=1.0)
    v = base.vertices.copy()
    # flatten into a slab and stretch along x
    v[:, 2] *= 0.35
    v[:, 0] *= 1.6
    # thumb: push the -y side outward near (x ~ 0.5, y ~ -0.7)
    d = np.linalg.norm(v[:, :2] - np.array([0.5, -0.7]), axis=1)
    bump = np.exp(-((d / 0.5) ** 2))
    side = np.minimum(np.clip(-v[:, 1], 0.0, None) / 0.4, 1.0)
    v[:, 1] -= 0.45 * bump * side
    return Mesh(v, base.faces)


def ball(n_u=20, n_v=14, radius=0.8, center=(0.0, 0.0, 1.6)):
    """Grasp target for the demo scene."""
    return uv_sphere(n_u, n_v, radius=radius, center=center)


def demo_rig(mesh):
    """Three-joint chain along +x with smooth skinning weights.

    Returns ``(rig, binding)`` dicts in the on-disk formats that scene
    files reference: joints carry rest rotations (unit quaternions,
    ``[w, x, y, z]``) and translations relative to their parent, and the
    binding lists sparse ``[joint, weight]`` pairs per vertex.
    """
    xs = mesh.vertices[:, 0]
    lo, hi = float(xs.min()), float(xs.max())
    span = hi - lo
    stations = [lo + 0.1 * span, lo + 0.45 * span, lo + 0.8 * span]
    identity = [1.0, 0.0, 0.0, 0.0]
    joints = [
        {"name": "root", "parent": -1, "rotation": identity,
         "translation": [stations[0], 0.0, 0.0]},
        {"name": "mid", "parent": 0, "rotation": identity,
         "translation": [stations[1] - stations[0], 0.0, 0.0]},
        {"name": "tip", "parent": 1, "rotation": identity,
         "translation": [stations[2] - stations[1], 0.0, 0.0]},
    ]
    weights = []
    for x in xs:
        if x <= stations[0]:
            row = [(0, 1.0)]
        elif x >= stations[2]:
            row = [(2, 1.0)]
        elif x <= stations[1]:
            t = (x - stations[0]) / (stations[1] - stations[0])
            row = [(0, 1.0 - t), (1, t)]
        else:
            t = (x - stations[1]) / (stations[2] - stations[1])
            row = [(1, 1.0 - t), (2, t)]
        weights.append([[j, float(w)] for j, w in row if w > 0.0])
    rig = {"format": 1, "joints": joints}
    binding = {"format": 1, "weights": weights}
    return rig, binding


def write_demo_assets(outdir):
    """Write a ready-to-load demo scene under ``outdir``.

    The scene pairs a rigged hand (``manipulator``) with a ball floating
    above it (``object``) and starts with no patches or contacts. Returns
    the path of the scene file, which ``load_scene`` accepts as-is.
    """
    import os

    os.makedirs(outdir, exist_ok=True)
    hand = mitt()
    save_mesh(os.path.join(outdir, "hand.obj"), hand)
    save_mesh(os.path.join(outdir, "ball.obj"), ball())
    rig, binding = demo_rig(hand)
    scene = {
        "format": 1,
        "meshes": {"manipulator": "hand.obj", "object": "ball.obj"},
        "rig": "rig.json",
        "binding": "binding.json",
        "patches": {},
        "links": {},
        "contacts": [],
    }
    for name, payload in (
        ("rig.json", rig),
        ("binding.json", binding),
        ("scene.json", scene),
    ):
        with open(os.path.join(outdir, name), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return os.path.join(outdir, "scene.json")


if __name__ == "__main__":
    write_demo_assets(sys.argv[1] if len(sys.argv) > 1 else "demo_assets")
