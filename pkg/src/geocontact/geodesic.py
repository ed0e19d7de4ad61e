"""Exact shortest geodesics between surface points.

A query runs in three stages:

1. Dijkstra (resumable per source) picks a vertex route, which fixes a
   homotopy class. The graph is the edge graph plus one shortcut per
   interior edge, joining the two opposite vertices of its face pair when
   the unfolded straight segment between them crosses the edge; without
   these the edge graph is anisotropic enough (one diagonal per quad on
   grid-like regions) to route around the wrong side of a handle.
2. The route is widened to a face corridor, unfolded to the plane, and a
   funnel pass pulls the path taut; corners that are not locally shortest
   (angle on the far side below pi) flip the corridor to the other side of
   the vertex and the pass repeats. The result is the exact shortest path
   in its homotopy class.
3. Faces crossed by the result are removed and stages 1-2 rerun, up to
   twice, to check competing classes; the shortest candidate wins. A result
   no longer than the 3D chord is already globally optimal and skips this.
"""

import heapq

import numpy as np

from .errors import DisconnectedPointsError, GeoContactError
from .mesh import SurfacePoint
from .paths import GeodesicPath

_SNAP = 1e-9
_CHORD_GUARD = 1.0 + 1e-12
_MAX_FLIPS = 100


class _Source:
    """Resumable Dijkstra state rooted at one surface point."""

    __slots__ = ("dist", "prev", "via", "heap", "settled")

    def __init__(self, mesh, p):
        V = mesh.n_vertices
        self.dist = np.full(V, np.inf)
        self.prev = np.full(V, -1, dtype=np.int64)
        self.via = {}
        self.heap = []
        self.settled = np.zeros(V, dtype=bool)
        if p.kind == "vertex":
            self.dist[p.index] = 0.0
            heapq.heappush(self.heap, (0.0, p.index))
        else:
            pos = mesh.position(p)
            seeds = set()
            for f in mesh.faces_of_point(p):
                seeds.update(int(v) for v in mesh.faces[f])
            for v in seeds:
                d = float(np.linalg.norm(mesh.vertices[v] - pos))
                if d < self.dist[v]:
                    self.dist[v] = d
                    heapq.heappush(self.heap, (d, v))

    def run_until(self, adj, targets, blocked_edge=None):
        need = {t for t in targets if not self.settled[t]}
        while need and self.heap:
            d, u = heapq.heappop(self.heap)
            if self.settled[u]:
                continue
            self.settled[u] = True
            need.discard(u)
            for w, ln, e, via in adj[u]:
                if blocked_edge is not None and blocked_edge[e]:
                    continue
                nd = d + ln
                if nd < self.dist[w]:
                    self.dist[w] = nd
                    self.prev[w] = u
                    if via is None:
                        self.via.pop(w, None)
                    else:
                        self.via[w] = via
                    heapq.heappush(self.heap, (nd, w))


def _triarea2(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _run_funnel(p2, q2, portals):
    """Shortest polyline through a portal sequence.

    ``portals[i] = (lid, l2, rid, r2)``: left/right endpoint ids and 2D
    positions, left as seen walking the corridor. Returns the corner chain
    ``[(vertex_id_or_None, xy, portal_index), ...]`` from p to q inclusive.
    """
    p2 = np.asarray(p2, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    chain = [(None, p2, -1)]
    n = len(portals)
    if n == 0:
        chain.append((None, q2, 0))
        return chain
    ext = list(portals) + [(None, q2, None, q2)]
    apex, apex_idx = p2, -1
    lid, l2, l_idx = ext[0][0], np.asarray(ext[0][1], float), 0
    rid, r2, r_idx = ext[0][2], np.asarray(ext[0][3], float), 0
    i = 1
    guard = 0
    while i <= n:
        guard += 1
        if guard > 20 * (n + 2):
            raise GeoContactError("funnel failed to converge")
        nlid, nl2, nrid, nr2 = ext[i]
        nl2 = np.asarray(nl2, float)
        nr2 = np.asarray(nr2, float)
        # tighten the right boundary
        if _triarea2(apex, r2, nr2) >= 0.0:
            if np.array_equal(apex, r2) or _triarea2(apex, l2, nr2) < 0.0:
                rid, r2, r_idx = nrid, nr2, i
            else:
                # right sweep crossed the left bound: left corner is a bend
                chain.append((lid, l2, l_idx))
                apex, apex_idx = l2, l_idx
                rid, r2, r_idx = lid, apex, apex_idx
                l2 = apex
                i = apex_idx + 1
                continue
        # tighten the left boundary
        if _triarea2(apex, l2, nl2) <= 0.0:
            if np.array_equal(apex, l2) or _triarea2(apex, r2, nl2) > 0.0:
                lid, l2, l_idx = nlid, nl2, i
            else:
                chain.append((rid, r2, r_idx))
                apex, apex_idx = r2, r_idx
                lid, l2, l_idx = rid, apex, apex_idx
                r2 = apex
                i = apex_idx + 1
                continue
        i += 1
    chain.append((None, q2, n))
    return chain


class GeodesicEngine:
    """Shortest-path queries against one mesh, with per-source caching."""

    def __init__(self, mesh):
        self.mesh = mesh
        self._sources = {}
        self._adj = None

    def _route_adjacency(self):
        """Edge graph plus one unfolded shortcut per interior edge.

        Entries are (neighbor, length, gating edge id, via vertex or None);
        a shortcut is gated by the edge it crosses and remembers one of that
        edge's endpoints so the route can be spliced back into vertices that
        share faces.
        """
        if self._adj is not None:
            return self._adj
        mesh = self.mesh
        adj = [
            [(w, ln, e, None) for w, ln, e in row]
            for row in mesh.vertex_adjacency()
        ]
        zero = np.zeros(2)
        for e in range(mesh.n_edges):
            if mesh.boundary_edge[e]:
                continue
            fL = mesh.edge_halfedges[e][0] // 3
            _, _, _, corners = mesh.face_chart(fL)
            chart = {int(v): corners[k] for k, v in enumerate(mesh.faces[fL])}
            a, b = (int(x) for x in mesh.edge_vertices[e])
            o_l = next(int(v) for v in mesh.faces[fL] if v != a and v != b)
            _, placed = mesh.unfold_across(fL, chart, e)
            o_r = next(v for v in placed if v != a and v != b)
            seg = placed[o_r] - chart[o_l]
            den = _triarea2(zero, seg, chart[b] - chart[a])
            if abs(den) < 1e-300:
                continue
            u = _triarea2(zero, seg, chart[o_l] - chart[a]) / den
            t = _triarea2(zero, chart[b] - chart[a], chart[o_l] - chart[a]) / den
            # only a segment strictly crossing the edge interior realizes
            # this length on the surface
            if not (1e-9 < u < 1.0 - 1e-9 and 1e-9 < t < 1.0 - 1e-9):
                continue
            ln = float(np.linalg.norm(seg))
            via = a if u < 0.5 else b
            adj[o_l].append((o_r, ln, e, via))
            adj[o_r].append((o_l, ln, e, via))
        self._adj = adj
        return adj

    # ------------------------------------------------------------- queries

    def path(self, p, q):
        """Exact shortest geodesic from p to q as a GeodesicPath.

        Inputs with near-degenerate barycentrics are snapped onto the
        lower-dimensional element first, so the endpoints of the returned
        path may be a vertex or edge point standing in for the original.
        """
        mesh = self.mesh
        p = mesh.normalize_point(p)
        q = mesh.normalize_point(q)
        if p.key() == q.key() or np.array_equal(mesh.position(p), mesh.position(q)):
            return GeodesicPath(mesh, [p])
        # canonical endpoint order makes path(p, q) and path(q, p) the same
        # computation bit for bit; swap in place, renormalizing would not be
        # idempotent at the last bit
        flip = q.key() < p.key()
        if flip:
            p, q = q, p
        f = mesh.common_face(p, q)
        if f >= 0:
            best = self._single_face(p, q, f)
            return best.reversed() if flip else best
        best = self._candidate(p, q, None)
        if best is None:
            raise DisconnectedPointsError(f"no surface path from {p} to {q}")
        chord = float(np.linalg.norm(mesh.position(p) - mesh.position(q)))
        blocked = set()
        for _ in range(2):
            if best.length <= chord * _CHORD_GUARD:
                break
            blocked |= self._crossed_faces(best, p, q)
            other = self._candidate(p, q, blocked)
            if other is None or other.length >= best.length:
                break
            best = other
        return best.reversed() if flip else best

    def distance(self, p, q):
        return self.path(p, q).length

    def closest(self, sources, target):
        """Index of the source point geodesically closest to ``target`` and
        the path from it; exact ties take the lowest index.

        Pruning by 3D chord is sound because the chord never exceeds the
        geodesic distance.
        """
        if not sources:
            raise GeoContactError("closest() needs at least one source point")
        tpos = self.mesh.position(target)
        chords = [
            float(np.linalg.norm(self.mesh.position(s) - tpos)) for s in sources
        ]
        order = sorted(range(len(sources)), key=lambda j: (chords[j], j))
        best_j, best_path = -1, None
        for j in order:
            if best_path is not None and chords[j] > best_path.length:
                continue
            path = self.path(sources[j], target)
            if (
                best_path is None
                or path.length < best_path.length
                or (path.length == best_path.length and j < best_j)
            ):
                best_j, best_path = j, path
        return best_j, best_path

    # ---------------------------------------------------------- internals

    def _single_face(self, p, q, f):
        mesh = self.mesh
        v3 = mesh.position(q) - mesh.position(p)
        ini = mesh.encode_direction(p, v3, face=f)
        end = -mesh.encode_direction(q, -v3, face=f)
        return GeodesicPath(mesh, [p, q], ini, end)

    def _candidate(self, p, q, blocked):
        nodes = self._vertex_route(p, q, blocked)
        if nodes is None:
            return None
        sleeve = self._sleeve(nodes)
        return self._funnel_relax(sleeve, p, q)

    def _vertex_route(self, p, q, blocked):
        mesh = self.mesh
        if blocked:
            state = _Source(mesh, p)
            blocked_edge = np.array(
                [all(f in blocked for f in mesh.faces_of_edge(e)) for e in range(mesh.n_edges)]
            )
        else:
            state = self._sources.get(p.key())
            if state is None:
                state = _Source(mesh, p)
                self._sources[p.key()] = state
            blocked_edge = None
        if q.kind == "vertex":
            targets = {q.index}
        else:
            targets = set()
            for f in mesh.faces_of_point(q):
                targets.update(int(v) for v in mesh.faces[f])
        state.run_until(self._route_adjacency(), targets, blocked_edge)
        qpos = mesh.position(q)
        best_u, best_total = -1, np.inf
        for u in sorted(targets):
            if np.isfinite(state.dist[u]):
                total = state.dist[u] + float(np.linalg.norm(mesh.vertices[u] - qpos))
                if total < best_total:
                    best_u, best_total = u, total
        if best_u < 0:
            return None
        chain = []
        u = best_u
        while u >= 0:
            chain.append(u)
            via = state.via.get(u)
            if via is not None and state.prev[u] >= 0:
                chain.append(via)
            u = int(state.prev[u])
        chain.reverse()
        nodes = [p] + [SurfacePoint.vertex(v) for v in chain] + [q]
        out = [nodes[0]]
        for nd in nodes[1:]:
            if nd.key() != out[-1].key():
                out.append(nd)
        return out

    def _fan_arcs(self, v, fa, fb):
        """Both face arcs strictly between incident faces fa and fb around
        vertex v, each with its swept angle; arcs crossing a boundary gap
        are omitted."""
        mesh = self.mesh
        fan = mesh.faces_of_vertex(v)
        corners = [
            float(mesh.corner_angles[h // 3, h % 3]) for h in mesh.vertex_fans[v]
        ]
        ia, ib = fan.index(fa), fan.index(fb)
        n = len(fan)
        arcs = []
        # counterclockwise ia -> ib
        if ia <= ib or not mesh.boundary_vertex[v]:
            ccw = []
            ang = 0.0
            k = ia
            while k != ib:
                ang += corners[k]
                k = (k + 1) % n
                if k != ib:
                    ccw.append(fan[k])
            arcs.append((ang, ccw))
        # clockwise ia -> ib
        if ia >= ib or not mesh.boundary_vertex[v]:
            cw = []
            ang = 0.0
            k = ia
            while k != ib:
                k = (k - 1) % n
                ang += corners[k]
                if k != ib:
                    cw.append(fan[k])
            arcs.append((ang, cw))
        return arcs

    def _sleeve(self, nodes):
        mesh = self.mesh
        cfaces = []
        for a, b in zip(nodes, nodes[1:]):
            shared = sorted(set(mesh.faces_of_point(a)) & set(mesh.faces_of_point(b)))
            if not shared:
                raise GeoContactError("route nodes do not share a face")
            cfaces.append(shared[0])
        sleeve = [cfaces[0]]
        for i in range(1, len(cfaces)):
            v = nodes[i]
            if cfaces[i] != sleeve[-1]:
                arcs = self._fan_arcs(v.index, sleeve[-1], cfaces[i])
                _, arc = min(arcs, key=lambda t: t[0])
                sleeve.extend(arc)
                sleeve.append(cfaces[i])
        return sleeve

    def _doors(self, sleeve):
        mesh = self.mesh
        doors = []
        for f0, f1 in zip(sleeve, sleeve[1:]):
            shared = set(int(v) for v in mesh.faces[f0]) & set(int(v) for v in mesh.faces[f1])
            if len(shared) != 2:
                raise GeoContactError("corridor faces do not share an edge")
            a, b = sorted(shared)
            doors.append((mesh.edge_index(a, b), a, b))
        return doors

    def _embed(self, sleeve, doors):
        mesh = self.mesh
        charts = []
        f0 = sleeve[0]
        _, _, _, c2 = mesh.face_chart(f0)
        charts.append({int(v): c2[k].copy() for k, v in enumerate(mesh.faces[f0])})
        for i, (e, _, _) in enumerate(doors):
            _, placed = mesh.unfold_across(sleeve[i], charts[i], e)
            charts.append(placed)
        return charts

    def _portals(self, sleeve, doors, charts):
        mesh = self.mesh
        portals = []
        for i, (e, a, b) in enumerate(doors):
            A, B = charts[i][a], charts[i][b]
            far = next(int(v) for v in mesh.faces[sleeve[i]] if int(v) not in (a, b))
            beta = charts[i][far]
            mid = 0.5 * (A + B)
            d = mid - beta
            if _triarea2(np.zeros(2), d, A - mid) > 0.0:
                portals.append((a, A, b, B))
            else:
                portals.append((b, B, a, A))
        return portals

    def _on_door(self, point, f0, f1):
        """True when ``point`` lies on the edge shared by faces f0 and f1."""
        mesh = self.mesh
        shared = set(int(v) for v in mesh.faces[f0]) & set(int(v) for v in mesh.faces[f1])
        if point.kind == "vertex":
            return point.index in shared
        if point.kind == "edge" and len(shared) == 2:
            a, b = sorted(shared)
            return point.index == mesh.edge_index(a, b)
        return False

    def _funnel_relax(self, sleeve, p, q):
        mesh = self.mesh
        best = None
        seen = set()
        for _ in range(_MAX_FLIPS):
            # an endpoint exactly on the first or last door would start the
            # funnel with a collinear, zero-area wedge; the neighbor face
            # contains the point too, so shrink the corridor instead
            while len(sleeve) >= 2 and self._on_door(p, sleeve[0], sleeve[1]):
                sleeve = sleeve[1:]
            while len(sleeve) >= 2 and self._on_door(q, sleeve[-1], sleeve[-2]):
                sleeve = sleeve[:-1]
            key = tuple(sleeve)
            if key in seen:
                break
            seen.add(key)
            doors = self._doors(sleeve)
            charts = self._embed(sleeve, doors)
            p2 = mesh.point_in_face(p, sleeve[0]) @ np.array(
                [charts[0][int(v)] for v in mesh.faces[sleeve[0]]]
            )
            q2 = mesh.point_in_face(q, sleeve[-1]) @ np.array(
                [charts[-1][int(v)] for v in mesh.faces[sleeve[-1]]]
            )
            portals = self._portals(sleeve, doors, charts)
            chain = _run_funnel(p2, q2, portals)
            path, recs = self._assemble(doors, charts, chain, p, q)
            if best is None or path.length < best.length:
                best = path
            flip = self._first_bad_bend(sleeve, doors, charts, recs)
            if flip is None:
                break
            sleeve = flip
        return best

    def _first_bad_bend(self, sleeve, doors, charts, recs):
        """Locate a path corner whose far-side angle is below pi and return
        the corridor rerouted around that side, or None.

        ``recs`` parallels the path points: (xy, crossed door index or None,
        corner vertex id or None).
        """
        mesh = self.mesh
        n = len(doors)
        for i in range(1, len(recs) - 1):
            v2, _, vid = recs[i]
            if vid is None:
                continue
            # nearest genuine crossings bracket the fan run at this corner
            d_prev = -1
            for k in range(i - 1, -1, -1):
                if recs[k][1] is not None:
                    d_prev = recs[k][1]
                    break
            d_next = n
            for k in range(i + 1, len(recs)):
                if recs[k][1] is not None:
                    d_next = recs[k][1]
                    break
            s, e = d_prev + 1, d_next - 1
            while s <= e and vid not in (doors[s][1], doors[s][2]):
                s += 1
            while e >= s and vid not in (doors[e][1], doors[e][2]):
                e -= 1
            if s > e or any(
                vid not in (doors[j][1], doors[j][2]) for j in range(s, e + 1)
            ):
                continue
            prev2 = recs[i - 1][0]
            next2 = recs[i + 1][0]
            alpha = self._strip_angle(vid, v2, prev2, next2, sleeve, doors, charts, s, e)
            other = float(mesh.vertex_angle[vid]) - alpha
            if other < np.pi - 1e-12:
                flipped = self._flip(sleeve, vid, s, e)
                if flipped is not None:
                    return flipped
        return None

    def _strip_angle(self, vid, v2, prev2, next2, sleeve, doors, charts, s, e):
        """Angle swept at the corner between incoming and outgoing path
        segments, measured through the corridor side. Intrinsic corner sums
        cover the middle of the fan, so an overlapping unfolding cannot
        corrupt the result."""
        mesh = self.mesh

        def unsigned(u, w):
            cr = abs(u[0] * w[1] - u[1] * w[0])
            dt = u[0] * w[0] + u[1] * w[1]
            return float(np.arctan2(cr, dt))

        _, a_in, b_in = doors[s]
        o_in = b_in if a_in == vid else a_in
        _, a_out, b_out = doors[e]
        o_out = b_out if a_out == vid else a_out
        beta_in = unsigned(prev2 - v2, charts[s][o_in] - v2)
        beta_out = unsigned(charts[e + 1][o_out] - v2, next2 - v2)
        mid = 0.0
        for f in sleeve[s + 1 : e + 1]:
            h = next(h for h in mesh.vertex_fans[vid] if h // 3 == f)
            mid += float(mesh.corner_angles[f, h % 3])
        return beta_in + mid + beta_out

    def _flip(self, sleeve, vid, s, e):
        """Replace the corridor's fan run around ``vid`` (faces s..e+1 stay
        as endpoints) with the complementary arc, when one exists."""
        arcs = self._fan_arcs(vid, sleeve[s], sleeve[e + 1])
        current = sleeve[s + 1 : e + 1]
        for _, arc in arcs:
            if arc != current:
                out = sleeve[: s + 1] + arc + sleeve[e + 1 :]
                # collapse immediate repeats from degenerate arcs
                dedup = [out[0]]
                for f in out[1:]:
                    if f != dedup[-1]:
                        dedup.append(f)
                return dedup
        return None

    def _assemble(self, doors, charts, chain, p, q):
        """Expand the funnel corner chain into the full point sequence, and
        keep (xy, door index, corner id) records for the bend scan."""
        mesh = self.mesh
        points = [p]
        recs = [(chain[0][1], None, None)]
        for k in range(1, len(chain)):
            _, xy_prev, idx_prev = chain[k - 1]
            vid, xy, idx = chain[k]
            lo = max(idx_prev, -1) + 1
            for j in range(lo, min(idx, len(doors))):
                e, a, b = doors[j]
                A, B = charts[j][a], charts[j][b]
                seg = xy - xy_prev
                den = _triarea2(np.zeros(2), seg, B - A)
                if abs(den) < 1e-300:
                    continue
                u = _triarea2(np.zeros(2), seg, xy_prev - A) / den
                t = _triarea2(np.zeros(2), B - A, xy_prev - A) / den
                if t < -1e-6 or t > 1.0 + 1e-6:
                    continue
                u = min(max(u, 0.0), 1.0)
                xy_hit = (1.0 - u) * A + u * B
                if u <= _SNAP:
                    pt, hit_vid = SurfacePoint.vertex(a), a
                elif u >= 1.0 - _SNAP:
                    pt, hit_vid = SurfacePoint.vertex(b), b
                else:
                    pt, hit_vid = SurfacePoint.edge(e, u), None
                points.append(pt)
                recs.append((xy_hit, j, hit_vid))
            # a corner with no vertex id is the terminal point emitted early
            if vid is None:
                points.append(q)
                recs.append((xy, None, None))
            else:
                points.append(SurfacePoint.vertex(vid))
                recs.append((xy, None, vid))
        out = [points[0]]
        out_recs = [recs[0]]
        for pt, rec in zip(points[1:], recs[1:]):
            if pt.key() != out[-1].key():
                out.append(pt)
                out_recs.append(rec)
            else:
                # same point reached as crossing and as corner: merge marks
                xy0, d0, v0 = out_recs[-1]
                _, d1, v1 = rec
                out_recs[-1] = (xy0, d0 if d0 is not None else d1, v0 if v0 is not None else v1)
        # an endpoint lying on a door edge gets a crossing at its own
        # location whose barycentrics differ only in the last ulp; collapse
        # it so no zero-length end segment survives, keeping the endpoint
        tol = 1e-12 * self.mesh.bbox_diagonal()

        def merged(keep, drop):
            xy0, d0, v0 = keep
            _, d1, v1 = drop
            return (xy0, d0 if d0 is not None else d1, v0 if v0 is not None else v1)

        while len(out) >= 2 and float(
            np.linalg.norm(mesh.position(out[0]) - mesh.position(out[1]))
        ) <= tol:
            out_recs[0] = merged(out_recs[0], out_recs[1])
            del out[1], out_recs[1]
        while len(out) >= 2 and float(
            np.linalg.norm(mesh.position(out[-1]) - mesh.position(out[-2]))
        ) <= tol:
            out_recs[-1] = merged(out_recs[-1], out_recs[-2])
            del out[-2], out_recs[-2]
        return self._with_directions(out), out_recs

    def _with_directions(self, points):
        mesh = self.mesh
        if len(points) < 2:
            return GeodesicPath(mesh, points)
        f0 = mesh.common_face(points[0], points[1])
        f1 = mesh.common_face(points[-2], points[-1])
        if f0 < 0 or f1 < 0:
            raise GeoContactError("consecutive path points do not share a face")
        v_ini = mesh.position(points[1]) - mesh.position(points[0])
        v_end = mesh.position(points[-1]) - mesh.position(points[-2])
        ini = mesh.encode_direction(points[0], v_ini, face=f0)
        # the forward direction at the end points out of the last face, so
        # encode the backward one (which lies inside it) and rotate by pi in
        # chart space
        end = -mesh.encode_direction(points[-1], -v_end, face=f1)
        return GeodesicPath(mesh, points, ini, end)

    def _crossed_faces(self, path, p, q):
        mesh = self.mesh
        keep = set(mesh.faces_of_point(p)) | set(mesh.faces_of_point(q))
        crossed = set()
        for a, b in zip(path.points, path.points[1:]):
            crossed.update(
                set(mesh.faces_of_point(a)) & set(mesh.faces_of_point(b))
            )
        return crossed - keep


def exact_geodesic(mesh, p, q):
    """One-shot exact shortest path; build a GeodesicEngine for many queries."""
    return GeodesicEngine(mesh).path(p, q)


def geodesic_distance(mesh, p, q):
    return exact_geodesic(mesh, p, q).length
