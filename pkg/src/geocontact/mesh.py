"""Halfedge triangle mesh, barycentric surface points, and tangent charts.

Conventions used throughout the package:

* Faces are counterclockwise. Halfedge ``3*f + k`` runs from ``faces[f, k]``
  to ``faces[f, (k + 1) % 3]``; ``twin`` is -1 along open boundaries.
* Edges are unordered vertex pairs ``(a, b)`` with ``a < b``. Barycentric
  coordinates on an edge weight ``a`` then ``b``.
* Directions in a tangent chart are complex numbers: magnitude is a length
  in model units, argument an angle measured from the chart's reference
  direction. Vertex charts rescale incident corner angles so the total
  angle at the vertex maps to exactly 2*pi; the reference direction is the
  lowest-index outgoing halfedge.
"""

import dataclasses

import numpy as np

from .errors import InvalidPointError, MeshLoadError, NonManifoldError

BARY_EPS = 1e-9
SNAP_EPS = 1e-12

_KIND_RANK = {"vertex": 0, "edge": 1, "face": 2}
_KIND_SHORT = {"vertex": "v", "edge": "e", "face": "f"}
_SHORT_KIND = {v: k for k, v in _KIND_SHORT.items()}


@dataclasses.dataclass(frozen=True)
class SurfacePoint:
    """A point on a mesh: a vertex, a point on an edge, or a point in a face.

    ``bary`` is empty for vertices, ``(w_a, w_b)`` for edge points and
    ``(w_0, w_1, w_2)`` for face points. Weights are clamped to [0, 1] at
    tolerance 1e-9 and normalized to sum to one; anything further out is
    rejected.
    """

    kind: str
    index: int
    bary: tuple = ()

    def __post_init__(self):
        if self.kind not in _KIND_RANK:
            raise InvalidPointError(f"unknown point kind {self.kind!r}")
        want = {"vertex": 0, "edge": 2, "face": 3}[self.kind]
        bary = tuple(float(b) for b in self.bary)
        if len(bary) != want:
            raise InvalidPointError(
                f"{self.kind} point takes {want} barycentric coordinates, got {len(bary)}"
            )
        if self.index < 0:
            raise InvalidPointError(f"negative element index {self.index}")
        if bary:
            if min(bary) < -BARY_EPS or max(bary) > 1.0 + BARY_EPS:
                raise InvalidPointError(f"barycentric coordinates out of range: {bary}")
            s = sum(bary)
            if abs(s - 1.0) > len(bary) * BARY_EPS:
                raise InvalidPointError(f"barycentric coordinates sum to {s}, expected 1")
            bary = tuple(min(1.0, max(0.0, b)) for b in bary)
            s = sum(bary)
            bary = tuple(b / s for b in bary)
        object.__setattr__(self, "bary", bary)
        object.__setattr__(self, "index", int(self.index))

    @staticmethod
    def vertex(i):
        return SurfacePoint("vertex", i)

    @staticmethod
    def edge(e, t):
        """Point at parameter ``t`` along edge ``e``, measured a -> b."""
        return SurfacePoint("edge", e, (1.0 - t, t))

    @staticmethod
    def face(f, bary):
        return SurfacePoint("face", f, tuple(bary))

    def key(self):
        """Deterministic sort key; also usable as a dict key."""
        return (_KIND_RANK[self.kind], self.index, self.bary)

    def to_dict(self):
        return {"kind": self.kind, "index": self.index, "bary": list(self.bary)}

    @staticmethod
    def from_dict(d):
        try:
            return SurfacePoint(d["kind"], d["index"], tuple(d.get("bary", ())))
        except (KeyError, TypeError) as exc:
            raise InvalidPointError(f"malformed surface point record: {d!r}") from exc

    def __str__(self):
        tail = ":".join(f"{b:.17g}" for b in self.bary)
        s = f"{_KIND_SHORT[self.kind]}:{self.index}"
        return f"{s}:{tail}" if tail else s

    @staticmethod
    def parse(text):
        """Parse ``kind:index[:bary...]`` as produced by ``__str__``."""
        parts = text.strip().split(":")
        if len(parts) < 2 or parts[0] not in _SHORT_KIND:
            raise InvalidPointError(f"cannot parse surface point {text!r}")
        try:
            index = int(parts[1])
            bary = tuple(float(p) for p in parts[2:])
        except ValueError as exc:
            raise InvalidPointError(f"cannot parse surface point {text!r}") from exc
        return SurfacePoint(_SHORT_KIND[parts[0]], index, bary)


class Mesh:
    """Triangle mesh with halfedge connectivity and cached intrinsic data.

    Parameters
    ----------
    vertices : (V, 3) float array
    faces : (F, 3) int array
        Counterclockwise vertex indices.

    Raises
    ------
    MeshLoadError
        For out-of-range indices, repeated vertices in a face, or
        zero-area faces.
    NonManifoldError
        For edges with more than two incident faces, inconsistently
        oriented face pairs, or vertices whose faces do not form a
        single fan.
    """

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64).reshape(-1, 3))
        self.faces = np.ascontiguousarray(np.asarray(faces, dtype=np.int64).reshape(-1, 3))
        self._validate_elements()
        self._build_halfedges()
        self._build_vertex_fans()
        self._build_angles()
        self._face_charts = {}
        self._adjacency = None

    # ---------------------------------------------------------------- build

    def _validate_elements(self):
        V, F = len(self.vertices), len(self.faces)
        if F == 0:
            raise MeshLoadError("mesh has no faces")
        if not np.isfinite(self.vertices).all():
            raise MeshLoadError("mesh has non-finite vertex coordinates")
        if self.faces.min(initial=0) < 0 or self.faces.max(initial=-1) >= V:
            raise MeshLoadError("face references a vertex index out of range")
        for f in range(F):
            i, j, k = self.faces[f]
            if i == j or j == k or i == k:
                raise MeshLoadError(f"face {f} repeats a vertex")
        p = self.vertices
        cross = np.cross(
            p[self.faces[:, 1]] - p[self.faces[:, 0]],
            p[self.faces[:, 2]] - p[self.faces[:, 0]],
        )
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        edge_scale = max(np.linalg.norm(p[self.faces[:, 1]] - p[self.faces[:, 0]], axis=1).max(), 1e-300)
        bad = np.nonzero(areas <= 1e-14 * edge_scale**2)[0]
        if bad.size:
            raise MeshLoadError(f"zero-area face {int(bad[0])}")
        self.face_areas = areas
        self.face_normals = cross / (2.0 * areas)[:, None]

    def _build_halfedges(self):
        F = len(self.faces)
        H = 3 * F
        self.he_origin = self.faces[:, [0, 1, 2]].reshape(-1)
        self.he_dest = self.faces[:, [1, 2, 0]].reshape(-1)
        self.he_twin = np.full(H, -1, dtype=np.int64)

        by_pair = {}
        for h in range(H):
            a, b = int(self.he_origin[h]), int(self.he_dest[h])
            by_pair.setdefault((min(a, b), max(a, b)), []).append(h)

        edge_vertices = []
        edge_halfedges = []
        self.he_edge = np.full(H, -1, dtype=np.int64)
        for pair in sorted(by_pair):
            hs = by_pair[pair]
            if len(hs) > 2:
                faces = sorted(h // 3 for h in hs)
                raise NonManifoldError(
                    "edge", pair, f"edge {pair} is shared by {len(hs)} faces: {faces}"
                )
            if len(hs) == 2:
                h0, h1 = hs
                if self.he_origin[h0] == self.he_origin[h1]:
                    raise NonManifoldError(
                        "edge",
                        pair,
                        f"faces {h0 // 3} and {h1 // 3} disagree on orientation across edge {pair}",
                    )
                self.he_twin[h0], self.he_twin[h1] = h1, h0
            e = len(edge_vertices)
            edge_vertices.append(pair)
            edge_halfedges.append(tuple(hs))
            for h in hs:
                self.he_edge[h] = e

        self.edge_vertices = np.array(edge_vertices, dtype=np.int64)
        self.edge_halfedges = edge_halfedges
        self.edge_lengths = np.linalg.norm(
            self.vertices[self.edge_vertices[:, 1]] - self.vertices[self.edge_vertices[:, 0]],
            axis=1,
        )
        self.boundary_edge = np.array([len(hs) == 1 for hs in edge_halfedges])

    @staticmethod
    def he_face(h):
        return h // 3

    @staticmethod
    def he_next(h):
        return h - h % 3 + (h + 1) % 3

    @staticmethod
    def he_prev(h):
        return h - h % 3 + (h + 2) % 3

    def _build_vertex_fans(self):
        """Order each vertex's outgoing halfedges counterclockwise.

        Boundary fans start at the halfedge with no clockwise predecessor.
        A vertex whose halfedges form more than one fan is non-manifold.
        """
        V = len(self.vertices)
        outgoing = [[] for _ in range(V)]
        for h in range(3 * len(self.faces)):
            outgoing[self.he_origin[h]].append(h)

        self.vertex_fans = []
        self.boundary_vertex = np.zeros(V, dtype=bool)
        for v in range(V):
            hs = outgoing[v]
            if not hs:
                self.vertex_fans.append([])
                continue
            nxt = {}
            has_pred = set()
            for h in hs:
                t = self.he_twin[self.he_prev(h)]
                if t >= 0:
                    nxt[h] = t  # t is the next outgoing halfedge counterclockwise
                    has_pred.add(t)
            starts = [h for h in hs if h not in has_pred]
            if len(starts) > 1:
                raise NonManifoldError(
                    "vertex", v, f"vertex {v} has {len(starts)} incident fans"
                )
            if starts:
                self.boundary_vertex[v] = True
                fan = [starts[0]]
            else:
                fan = [min(hs)]
            # walk the counterclockwise chain
            while len(fan) < len(hs):
                h = nxt.get(fan[-1])
                if h is None or h == fan[0]:
                    break
                fan.append(h)
            if len(fan) != len(hs):
                raise NonManifoldError(
                    "vertex", v, f"vertex {v} has disconnected incident fans"
                )
            self.vertex_fans.append(fan)

    def _build_angles(self):
        p = self.vertices
        F = self.faces
        angles = np.empty((len(F), 3))
        for k in range(3):
            u = p[F[:, (k + 1) % 3]] - p[F[:, k]]
            w = p[F[:, (k + 2) % 3]] - p[F[:, k]]
            nu = np.linalg.norm(u, axis=1)
            nw = np.linalg.norm(w, axis=1)
            c = np.clip((u * w).sum(axis=1) / (nu * nw), -1.0, 1.0)
            angles[:, k] = np.arccos(c)
        self.corner_angles = angles

        V = len(self.vertices)
        self.vertex_angle = np.zeros(V)
        self._fan_cum = []  # raw cumulative angle before each fan halfedge
        for v in range(V):
            cum = np.zeros(len(self.vertex_fans[v]))
            total = 0.0
            for i, h in enumerate(self.vertex_fans[v]):
                cum[i] = total
                total += self.corner_angles[h // 3, h % 3]
            self.vertex_angle[v] = total
            self._fan_cum.append(cum)
        with np.errstate(divide="ignore"):
            self.vertex_scale = np.where(self.vertex_angle > 0, 2.0 * np.pi / self.vertex_angle, 0.0)

    # ------------------------------------------------------------ accessors

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edge_vertices)

    def bbox_diagonal(self):
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def edge_index(self, a, b):
        """Edge id for the vertex pair (a, b), or -1."""
        key = (min(a, b), max(a, b))
        if not hasattr(self, "_edge_lookup"):
            self._edge_lookup = {tuple(e): i for i, e in enumerate(map(tuple, self.edge_vertices))}
        return self._edge_lookup.get(key, -1)

    def faces_of_edge(self, e):
        return tuple(h // 3 for h in self.edge_halfedges[e])

    def faces_of_vertex(self, v):
        return [h // 3 for h in self.vertex_fans[v]]

    def faces_of_point(self, point):
        """All faces containing the point."""
        self._check_point(point)
        if point.kind == "face":
            return (point.index,)
        if point.kind == "edge":
            return self.faces_of_edge(point.index)
        return tuple(self.faces_of_vertex(point.index))

    def vertices_of_point(self, point):
        if point.kind == "vertex":
            return (point.index,)
        if point.kind == "edge":
            return tuple(int(x) for x in self.edge_vertices[point.index])
        return tuple(int(x) for x in self.faces[point.index])

    def common_face(self, p, q):
        """Lowest-index face containing both points, or -1."""
        fp = set(self.faces_of_point(p))
        shared = sorted(fp.intersection(self.faces_of_point(q)))
        return shared[0] if shared else -1

    def _check_point(self, point):
        limit = {"vertex": self.n_vertices, "edge": self.n_edges, "face": self.n_faces}[point.kind]
        if point.index >= limit:
            raise InvalidPointError(
                f"{point.kind} index {point.index} out of range (mesh has {limit})"
            )

    def position(self, point):
        """3D position of a surface point."""
        self._check_point(point)
        if point.kind == "vertex":
            return self.vertices[point.index].copy()
        if point.kind == "edge":
            a, b = self.edge_vertices[point.index]
            wa, wb = point.bary
            return wa * self.vertices[a] + wb * self.vertices[b]
        w = np.asarray(point.bary)
        return w @ self.vertices[self.faces[point.index]]

    def point_in_face(self, point, f):
        """Rewrite a point as barycentric coordinates of face ``f``.

        Returns a length-3 weight array; raises if the point is not on ``f``.
        """
        self._check_point(point)
        fv = [int(x) for x in self.faces[f]]
        w = np.zeros(3)
        if point.kind == "vertex":
            if point.index not in fv:
                raise InvalidPointError(f"vertex {point.index} is not on face {f}")
            w[fv.index(point.index)] = 1.0
        elif point.kind == "edge":
            a, b = (int(x) for x in self.edge_vertices[point.index])
            if a not in fv or b not in fv:
                raise InvalidPointError(f"edge {point.index} is not on face {f}")
            w[fv.index(a)] = point.bary[0]
            w[fv.index(b)] = point.bary[1]
        else:
            if point.index != f:
                raise InvalidPointError(f"face point on {point.index} is not on face {f}")
            w[:] = point.bary
        return w

    def normalize_point(self, point, snap=BARY_EPS):
        """Snap near-degenerate barycentrics onto the lower-dimensional
        element, so coincident points compare equal by key."""
        self._check_point(point)
        if point.kind == "vertex":
            return point
        if point.kind == "edge":
            wa, wb = point.bary
            a, b = self.edge_vertices[point.index]
            if wb <= snap:
                return SurfacePoint.vertex(int(a))
            if wa <= snap:
                return SurfacePoint.vertex(int(b))
            return point
        return self.classify_face_point(point.index, point.bary, snap=snap)

    def classify_face_point(self, f, w, snap=SNAP_EPS):
        """Make a SurfacePoint from face barycentrics, snapping to edges and
        vertices within ``snap`` so downstream code sees exact element kinds."""
        w = np.asarray(w, dtype=np.float64)
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        small = w <= snap
        if small.sum() == 2:
            return SurfacePoint.vertex(int(self.faces[f, int(np.argmax(w))]))
        if small.sum() == 1:
            k = int(np.nonzero(small)[0][0])
            i, j = (k + 1) % 3, (k + 2) % 3
            a, b = int(self.faces[f, i]), int(self.faces[f, j])
            e = self.edge_index(a, b)
            t = w[j] / (w[i] + w[j])
            if a > b:
                t = 1.0 - t
            return SurfacePoint.edge(e, float(t))
        return SurfacePoint.face(f, tuple(w))

    # ---------------------------------------------------------- face charts

    def face_chart(self, f):
        """Orthonormal 2D chart of face ``f``: (origin, ex, ey, corners2d).

        ex runs along the face's first edge; ey completes a right-handed
        frame with the face normal, so counterclockwise in the chart matches
        the face orientation.
        """
        chart = self._face_charts.get(f)
        if chart is None:
            i, j, k = self.faces[f]
            p0 = self.vertices[i]
            ex = self.vertices[j] - p0
            ex = ex / np.linalg.norm(ex)
            n = self.face_normals[f]
            ey = np.cross(n, ex)
            corners = np.zeros((3, 2))
            for c, v in enumerate((i, j, k)):
                d = self.vertices[v] - p0
                corners[c] = (d @ ex, d @ ey)
            chart = (p0.copy(), ex, ey, corners)
            self._face_charts[f] = chart
        return chart

    def to_chart_2d(self, f, x3):
        p0, ex, ey, _ = self.face_chart(f)
        d = np.asarray(x3) - p0
        return np.array([d @ ex, d @ ey])

    def bary_to_2d(self, f, w):
        _, _, _, corners = self.face_chart(f)
        return np.asarray(w) @ corners

    def chart_2d_to_bary(self, f, xy):
        _, _, _, c = self.face_chart(f)
        m = np.array([c[1] - c[0], c[2] - c[0]]).T
        st = np.linalg.solve(m, np.asarray(xy) - c[0])
        return np.array([1.0 - st[0] - st[1], st[0], st[1]])

    def dir_to_3d(self, f, xy):
        _, ex, ey, _ = self.face_chart(f)
        return xy[0] * ex + xy[1] * ey

    def dir_to_2d(self, f, v3):
        _, ex, ey, _ = self.face_chart(f)
        v3 = np.asarray(v3)
        return np.array([v3 @ ex, v3 @ ey])

    # -------------------------------------------------------- vertex charts

    def fan_position(self, v, h):
        fan = self.vertex_fans[v]
        try:
            return fan.index(h)
        except ValueError:
            raise InvalidPointError(f"halfedge {h} does not leave vertex {v}") from None

    def _vertex_reference_raw(self, v):
        """Raw cumulative angle of the reference (lowest-index) outgoing halfedge."""
        fan = self.vertex_fans[v]
        ref = min(range(len(fan)), key=lambda i: fan[i])
        return self._fan_cum[v][ref]

    def vertex_edge_angle(self, v, h):
        """Rescaled chart angle of outgoing halfedge ``h`` at vertex ``v``."""
        i = self.fan_position(v, h)
        raw = self._fan_cum[v][i] - self._vertex_reference_raw(v)
        return (raw * self.vertex_scale[v]) % (2.0 * np.pi)

    def _corner_direction(self, v, h, alpha):
        """3D unit direction at angle ``alpha`` (raw) into the corner of
        face(h) at v, measured from the outgoing halfedge ``h``."""
        f = h // 3
        d0 = self.vertices[self.he_dest[h]] - self.vertices[v]
        d0 = d0 / np.linalg.norm(d0)
        n = self.face_normals[f]
        perp = np.cross(n, d0)
        return np.cos(alpha) * d0 + np.sin(alpha) * perp

    # --------------------------------------------------- tangent directions

    def encode_direction(self, point, v3, face=None):
        """Express tangent vector ``v3`` at ``point`` as a chart complex.

        ``face`` picks the chart wedge when the point lies on several faces;
        when omitted the incident face whose plane best contains ``v3`` is
        used. The result's magnitude is ``|v3|``.
        """
        self._check_point(point)
        v3 = np.asarray(v3, dtype=np.float64)
        mag = np.linalg.norm(v3)
        if mag == 0.0:
            return 0.0 + 0.0j
        if point.kind == "face":
            f = point.index if face is None else face
            xy = self.dir_to_2d(f, v3)
            return complex(xy[0], xy[1])
        if point.kind == "edge":
            if face is None:
                face = min(
                    self.faces_of_point(point),
                    key=lambda f: abs(float(v3 @ self.face_normals[f])),
                )
            a, b = self.edge_vertices[point.index]
            e3 = self.vertices[b] - self.vertices[a]
            e3 = e3 / np.linalg.norm(e3)
            n = self.face_normals[face]
            # same formula on both sides: the left face of a->b sees its
            # interior at positive argument, the right face at negative
            return complex(float(v3 @ e3), float(v3 @ np.cross(n, e3)))
        return mag * self._encode_vertex(point.index, v3 / mag, face)

    def _encode_vertex(self, v, d3, face):
        """Unit chart complex for unit direction ``d3`` at vertex ``v``.

        Scans the fan for the corner wedge that contains the direction;
        ``face`` restricts the scan to one corner.
        """
        fan = self.vertex_fans[v]
        if face is None:
            candidates = fan
        else:
            candidates = [self._fan_halfedge_for_face(v, face)]
        best = None
        for h in candidates:
            f = h // 3
            n = self.face_normals[f]
            d0 = self.vertices[self.he_dest[h]] - self.vertices[v]
            d0 = d0 / np.linalg.norm(d0)
            inplane = d3 - float(d3 @ n) * n
            if np.linalg.norm(inplane) < 1e-300:
                continue
            alpha = float(np.arctan2(float(inplane @ np.cross(n, d0)), float(inplane @ d0)))
            corner = float(self.corner_angles[f, h % 3])
            miss = max(0.0, -alpha) + max(0.0, alpha - corner)
            score = (miss, abs(float(d3 @ n)))
            if best is None or score < best[0]:
                best = (score, h, min(max(alpha, 0.0), corner))
        if best is None:
            raise InvalidPointError(f"vector is not tangent at vertex {v}")
        _, h, alpha = best
        i = self.fan_position(v, h)
        raw = self._fan_cum[v][i] + alpha - self._vertex_reference_raw(v)
        t = raw * self.vertex_scale[v]
        if self.boundary_vertex[v] and t == 2.0 * np.pi:
            # keep the closing boundary direction distinct from angle zero
            theta = np.nextafter(2.0 * np.pi, 0.0)
        else:
            theta = t % (2.0 * np.pi)
        return complex(np.cos(theta), np.sin(theta))

    def _fan_halfedge_for_face(self, v, f):
        for h in self.vertex_fans[v]:
            if h // 3 == f:
                return h
        raise InvalidPointError(f"face {f} is not incident to vertex {v}")

    def decode_direction(self, point, z):
        """Chart complex ``z`` at ``point`` -> (face, unit 3D direction).

        Inverse of :meth:`encode_direction` up to the magnitude of ``z``.
        Raises InvalidPointError when the direction points off an open
        boundary and no incident face contains it.
        """
        self._check_point(point)
        z = complex(z)
        if z == 0:
            raise InvalidPointError("cannot decode a zero direction")
        theta = float(np.angle(z)) % (2.0 * np.pi)
        if point.kind == "face":
            f = point.index
            d = self.dir_to_3d(f, np.array([np.cos(theta), np.sin(theta)]))
            return f, d / np.linalg.norm(d)
        if point.kind == "edge":
            return self._decode_edge(point.index, theta)
        return self._decode_vertex(point.index, theta)

    def _decode_edge(self, e, theta):
        a, b = self.edge_vertices[e]
        e3 = self.vertices[b] - self.vertices[a]
        e3 = e3 / np.linalg.norm(e3)
        hs = self.edge_halfedges[e]
        left = right = None
        for h in hs:
            if self.he_origin[h] == a:
                left = h // 3
            else:
                right = h // 3
        along = min(abs(theta), abs(theta - np.pi), abs(theta - 2.0 * np.pi))
        if along <= SNAP_EPS:
            f = left if left is not None else right
            sign = 1.0 if abs(theta - np.pi) > 0.5 else -1.0
            return f, sign * e3
        f = left if theta < np.pi else right
        if f is None:
            raise InvalidPointError("direction points off an open boundary edge")
        n = self.face_normals[f]
        d = np.cos(theta) * e3 + np.sin(theta) * np.cross(n, e3)
        return f, d / np.linalg.norm(d)

    def _decode_vertex(self, v, theta):
        fan = self.vertex_fans[v]
        if not fan:
            raise InvalidPointError(f"vertex {v} has no incident faces")
        scale = self.vertex_scale[v]
        total = self.vertex_angle[v]
        # rescaling maps the whole fan onto [0, 2*pi), boundary or not
        raw = (theta / scale + self._vertex_reference_raw(v)) % total
        cum = self._fan_cum[v]
        i = int(np.searchsorted(cum, raw + 1e-15, side="right") - 1)
        i = min(max(i, 0), len(fan) - 1)
        h = fan[i]
        alpha = raw - cum[i]
        corner = self.corner_angles[h // 3, h % 3]
        alpha = min(max(alpha, 0.0), corner)
        d = self._corner_direction(v, h, alpha)
        return h // 3, d / np.linalg.norm(d)

    def reference_direction(self, point):
        """(face, unit 3D vector) realizing chart angle zero at ``point``."""
        return self.decode_direction(point, 1.0 + 0.0j)

    # ----------------------------------------------------------- adjacency

    def vertex_adjacency(self):
        """Per-vertex list of (neighbor, edge length, edge id) triples."""
        if self._adjacency is None:
            adj = [[] for _ in range(self.n_vertices)]
            for e, (a, b) in enumerate(self.edge_vertices):
                ln = float(self.edge_lengths[e])
                adj[a].append((int(b), ln, e))
                adj[b].append((int(a), ln, e))
            self._adjacency = adj
        return self._adjacency

    def unfold_across(self, f_from, corners2d, e):
        """2D position of the far vertex of the face across edge ``e``.

        ``corners2d`` maps the three vertices of ``f_from`` to chart points.
        Returns (f_to, dict of vertex -> 2D point for f_to) placing the new
        vertex on the opposite side of the shared edge.
        """
        hs = self.edge_halfedges[e]
        fs = [h // 3 for h in hs]
        if len(fs) < 2:
            raise InvalidPointError(f"edge {e} is a boundary edge")
        f_to = fs[1] if fs[0] == f_from else fs[0]
        a, b = (int(x) for x in self.edge_vertices[e])
        A, B = np.asarray(corners2d[a]), np.asarray(corners2d[b])
        other = [int(v) for v in self.faces[f_to] if v != a and v != b][0]
        la = np.linalg.norm(self.vertices[other] - self.vertices[a])
        lb = np.linalg.norm(self.vertices[other] - self.vertices[b])
        ab = B - A
        lab = np.linalg.norm(ab)
        x = (la * la - lb * lb + lab * lab) / (2.0 * lab)
        y2 = la * la - x * x
        y = np.sqrt(max(y2, 0.0))
        u = ab / lab
        w = np.array([-u[1], u[0]])
        # place the new corner opposite the old one across the edge line
        old = [int(v) for v in self.faces[f_from] if v != a and v != b][0]
        side = float((np.asarray(corners2d[old]) - A) @ w)
        c = A + x * u + (-y if side > 0 else y) * w
        out = {a: A, b: B, other: c}
        return f_to, out


def load_mesh(path):
    """Read a Wavefront OBJ file. Quads are split on their first diagonal;
    faces with more than four sides are rejected."""
    vertices = []
    faces = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise MeshLoadError(f"cannot open {path}: {exc}") from exc
    with fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshLoadError(f"{path}:{ln}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except ValueError as exc:
                    raise MeshLoadError(f"{path}:{ln}: bad vertex coordinate") from exc
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise MeshLoadError(f"{path}:{ln}: bad face index {tok!r}") from exc
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                if len(idx) == 3:
                    faces.append(idx)
                elif len(idx) == 4:
                    faces.append([idx[0], idx[1], idx[2]])
                    faces.append([idx[0], idx[2], idx[3]])
                else:
                    raise MeshLoadError(f"{path}:{ln}: face with {len(idx)} sides")
    if not vertices:
        raise MeshLoadError(f"{path}: no vertices")
    return Mesh(vertices, faces)


def save_mesh(path, mesh):
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
