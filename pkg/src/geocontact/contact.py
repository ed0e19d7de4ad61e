"""Axis-based contact patches: parameterization, reconstruction, transfer.

A patch is a set of surface points described relative to an open piecewise
geodesic axis. The axis is stored as turning angles and segment lengths,
which pin it down up to a starting point and direction; each patch point is
stored as a log-map value (distance plus departure angle) at its closest
axis point. Re-tracing the axis and re-shooting the points reconstructs the
patch anywhere, on any mesh.

All angles live in per-point tangent charts as unit complex numbers, so
"rotate by the turning angle" is one multiplication and "mirror" is one
conjugation.
"""

import dataclasses

import numpy as np

from .errors import PatchError, TraceTruncationError
from .geodesic import GeodesicEngine
from .mesh import SurfacePoint
from .tracing import trace_geodesic


@dataclasses.dataclass
class Axis:
    """A dense axis: points, per-segment lengths, per-point turning angles
    and tangents.

    ``lengths[i]`` is the segment a_i -> a_{i+1} (last entry unused and
    zero). ``turning[i]`` rotates the incoming arrival direction onto the
    outgoing departure direction at interior points, and is one at the
    endpoints. ``tangents[i]`` is the departure direction at a_i; the last
    entry is the arrival direction at the end point.
    """

    points: list
    lengths: np.ndarray
    turning: np.ndarray
    tangents: np.ndarray

    def __len__(self):
        return len(self.points)

    def to_dict(self):
        return {
            "format": 1,
            "points": [p.to_dict() for p in self.points],
            "lengths": [float(x) for x in self.lengths],
            "turning": [_complex_to_dict(z) for z in self.turning],
            "tangents": [_complex_to_dict(z) for z in self.tangents],
        }

    @classmethod
    def from_dict(cls, data):
        _check_format(data, "axis")
        return cls(
            points=[SurfacePoint.from_dict(d) for d in data["points"]],
            lengths=np.array(data["lengths"], dtype=float),
            turning=np.array([_complex_from_dict(d) for d in data["turning"]]),
            tangents=np.array([_complex_from_dict(d) for d in data["tangents"]]),
        )


@dataclasses.dataclass
class PatchParam:
    """Log-map record per patch point: closest axis index and z, where |z|
    is the geodesic distance from that axis point and arg(z) the departure
    direction relative to the axis tangent."""

    closest: np.ndarray
    z: np.ndarray

    def __len__(self):
        return len(self.closest)

    def to_dict(self):
        return {
            "format": 1,
            "closest": [int(j) for j in self.closest],
            "z": [_complex_to_dict(z) for z in self.z],
        }

    @classmethod
    def from_dict(cls, data):
        _check_format(data, "patch parameterization")
        return cls(
            closest=np.array(data["closest"], dtype=np.int64),
            z=np.array([_complex_from_dict(d) for d in data["z"]]),
        )


def _complex_to_dict(z):
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def _complex_from_dict(d):
    return complex(d["re"], d["im"])


def _check_format(data, what):
    if data.get("format") != 1:
        raise PatchError(f"unsupported {what} format: {data.get('format')!r}")


def densify_axis(mesh, points, engine=None):
    """Expand user waypoints into a dense axis point list by inserting every
    edge crossing and vertex passage of the connecting geodesics."""
    if len(points) < 2:
        raise PatchError("an axis needs at least two points")
    engine = engine or GeodesicEngine(mesh)
    out = [mesh.normalize_point(points[0])]
    for raw in points[1:]:
        path = engine.path(out[-1], raw)
        if path.is_degenerate():
            raise PatchError("consecutive axis points coincide")
        out.extend(path.points[1:])
    return out


def parameterize_axis(mesh, points, engine=None):
    """Measure turning angles, segment lengths, and tangents of the axis
    through ``points`` (densified first). The end point's tangent is the
    arrival direction of the last segment."""
    engine = engine or GeodesicEngine(mesh)
    pts = densify_axis(mesh, points, engine)
    m = len(pts)
    lengths = np.zeros(m)
    turning = np.ones(m, dtype=complex)
    tangents = np.zeros(m, dtype=complex)
    s_prev = None
    for i in range(m - 1):
        g = engine.path(pts[i], pts[i + 1])
        if g.is_degenerate():
            raise PatchError("consecutive axis points coincide")
        lengths[i] = g.length
        tangents[i] = g.initial_dir
        if i > 0:
            turning[i] = g.initial_dir / s_prev
        s_prev = g.ending_dir
    tangents[m - 1] = s_prev
    return Axis(pts, lengths, turning, tangents)


def parameterize_patch(mesh, patch_points, axis, engine=None):
    """Log-map each patch point at its geodesically closest axis point."""
    engine = engine or GeodesicEngine(mesh)
    n = len(patch_points)
    closest = np.zeros(n, dtype=np.int64)
    zs = np.zeros(n, dtype=complex)
    for i, p in enumerate(patch_points):
        j, path = engine.closest(axis.points, p)
        closest[i] = j
        if path.is_degenerate():
            zs[i] = 0.0
        else:
            zs[i] = path.length * path.initial_dir / axis.tangents[j]
    return PatchParam(closest, zs)


def reconstruct_axis(mesh, lengths, turning, start, t1, mirror=False):
    """Re-trace an axis on ``mesh`` from ``start`` along direction ``t1``.

    With ``mirror`` the turning angles are conjugated, producing the mirror
    image (the transfer convention); without it they are used verbatim.
    Walking off an open boundary raises TraceTruncationError carrying the
    partial Axis.
    """
    m = len(lengths)
    if m < 2:
        raise PatchError("an axis needs at least two points")
    start = mesh.normalize_point(start)
    t1 = complex(t1)
    if t1 == 0:
        raise PatchError("axis start direction must be nonzero")
    t1 = t1 / abs(t1)
    pts = [start]
    tangents = np.zeros(m, dtype=complex)
    used = np.ones(m, dtype=complex)
    s = None
    for i in range(m - 1):
        if i == 0:
            d = t1
        else:
            phi = np.conj(turning[i]) if mirror else complex(turning[i])
            used[i] = phi
            d = s * phi
        try:
            g = trace_geodesic(mesh, pts[-1], d * float(lengths[i]))
        except TraceTruncationError as err:
            combined = pts + err.partial.points[1:]
            partial = parameterize_axis(mesh, combined) if len(combined) > 1 else None
            raise TraceTruncationError(
                partial, f"axis left the surface while tracing segment {i}"
            ) from None
        pts.append(g.end)
        tangents[i] = g.initial_dir
        s = g.ending_dir
    tangents[m - 1] = s
    return Axis(pts, np.array(lengths, dtype=float), used, tangents)


def reconstruct_patch(mesh, axis, param, mirror=False):
    """Shoot each parameterized point from the axis on ``mesh``.

    Returns (points, skipped): points whose trace ran off an open boundary
    are dropped and their indices reported, so one unreachable point does
    not abort the rest.
    """
    points = []
    skipped = []
    for i in range(len(param)):
        j = int(param.closest[i])
        if j >= len(axis.points):
            raise PatchError(
                f"parameterization references axis point {j} of {len(axis.points)}"
            )
        z = complex(param.z[i])
        r = abs(z)
        if r == 0.0:
            points.append(axis.points[j])
            continue
        rel = np.conj(z) if mirror else z
        d = (rel / r) * axis.tangents[j]
        try:
            g = trace_geodesic(mesh, axis.points[j], d * r)
        except TraceTruncationError:
            skipped.append(i)
            continue
        points.append(g.end)
    return points, skipped


def transfer_patch(mesh_src, patch_points, axis_points, mesh_dst, start, t1, engine=None):
    """Carry a patch from one mesh to another: parameterize on the source,
    re-trace the axis from (start, t1) on the target, and reconstruct the
    mirror image there.

    Returns (points, axis, param, skipped); point order follows the input
    minus the reported skips.
    """
    axis = parameterize_axis(mesh_src, axis_points, engine)
    param = parameterize_patch(mesh_src, patch_points, axis, engine)
    axis2 = reconstruct_axis(mesh_dst, axis.lengths, axis.turning, start, t1, mirror=True)
    points, skipped = reconstruct_patch(mesh_dst, axis2, param, mirror=True)
    return points, axis2, param, skipped


def default_axis(mesh, patch_points, engine=None):
    """Axis waypoints for a patch with none: the shortest geodesic between
    the farthest pair of patch points, already dense with edge crossings.

    The pair search is exhaustive; ties keep the first pair in index order.
    """
    if len(patch_points) < 2:
        raise PatchError("a default axis needs at least two patch points")
    engine = engine or GeodesicEngine(mesh)
    best = None
    for i in range(len(patch_points)):
        for j in range(i + 1, len(patch_points)):
            path = engine.path(patch_points[i], patch_points[j])
            if best is None or path.length > best[0]:
                best = (path.length, path)
    if best[0] == 0.0:
        raise PatchError("all patch points coincide")
    return list(best[1].points)
