"""Interactive patch editing: dragging, rotating, and locally deforming
patches, plus a parent/child hierarchy that lets a family of patches follow
one root patch around the surface.

Edits never touch a patch's parameterization. The axis keeps its segment
lengths and turning angles and the points keep their log-map records; an
edit only moves the axis pose (start point and start direction) or scales
one turning angle, then re-traces. Every committed edit pushes the prior
state onto an undo journal, so undo restores the exact previous objects.
"""

import cmath
import dataclasses

import numpy as np

from .contact import (
    Axis,
    PatchParam,
    _check_format,
    _complex_from_dict,
    _complex_to_dict,
    default_axis,
    parameterize_axis,
    parameterize_patch,
    reconstruct_axis,
)
from .errors import EditError, TraceTruncationError
from .geodesic import GeodesicEngine
from .mesh import SurfacePoint
from .paths import parallel_transport
from .tracing import trace_geodesic


@dataclasses.dataclass
class Patch:
    """A patch bound to one mesh: its points, its axis, and the log-map
    records tying them together.

    ``points`` stays aligned with the parameterization: entry k is None
    while the latest reconstruction dropped point k over an open boundary.
    ``parent`` names the patch this one hangs off, if any.
    """

    mesh_id: str
    points: list
    axis: Axis
    param: PatchParam
    parent: str | None = None

    def __len__(self):
        return len(self.points)

    @property
    def skipped(self):
        """Indices whose points are currently missing."""
        return [k for k, p in enumerate(self.points) if p is None]

    def live_points(self):
        """The points that currently exist, in parameterization order."""
        return [p for p in self.points if p is not None]

    def to_dict(self):
        return {
            "format": 1,
            "mesh": self.mesh_id,
            "points": [None if p is None else p.to_dict() for p in self.points],
            "axis": self.axis.to_dict(),
            "param": self.param.to_dict(),
            "parent": self.parent,
        }

    @classmethod
    def from_dict(cls, data):
        _check_format(data, "patch")
        return cls(
            mesh_id=data["mesh"],
            points=[
                None if d is None else SurfacePoint.from_dict(d)
                for d in data["points"]
            ],
            axis=Axis.from_dict(data["axis"]),
            param=PatchParam.from_dict(data["param"]),
            parent=data.get("parent"),
        )


@dataclasses.dataclass(frozen=True)
class Connection:
    """How a child patch hangs off its parent: the geodesic from the parent
    anchor to the child's axis start, stored intrinsically.

    ``departure`` is the connector's initial direction relative to the
    parent tangent at the anchor; ``start_dir`` is the child's axis
    direction relative to the connector's ending direction. Both are unit
    complex numbers, so the child pose can be re-derived after any motion
    of the parent.
    """

    parent: str
    anchor: int
    length: float
    departure: complex
    start_dir: complex

    def to_dict(self):
        return {
            "format": 1,
            "parent": self.parent,
            "anchor": int(self.anchor),
            "length": float(self.length),
            "departure": _complex_to_dict(self.departure),
            "start_dir": _complex_to_dict(self.start_dir),
        }

    @classmethod
    def from_dict(cls, data):
        _check_format(data, "connection")
        return cls(
            parent=data["parent"],
            anchor=int(data["anchor"]),
            length=float(data["length"]),
            departure=_complex_from_dict(data["departure"]),
            start_dir=_complex_from_dict(data["start_dir"]),
        )


class EditSession:
    """Owns the patches on one mesh and applies reversible edits to them.

    ``patches`` maps patch id to Patch and ``links`` maps child patch id to
    its Connection. Both are replaced, never mutated, on each committed
    edit; the undo journal stores the displaced objects.
    """

    def __init__(self, mesh, mesh_id="mesh", engine=None):
        self.mesh = mesh
        self.mesh_id = mesh_id
        self.engine = engine if engine is not None else GeodesicEngine(mesh)
        self.patches = {}
        self.links = {}
        self._journal = []

    @property
    def undo_depth(self):
        return len(self._journal)

    def _get(self, patch_id):
        try:
            return self.patches[patch_id]
        except KeyError:
            raise EditError(f"unknown patch id {patch_id!r}") from None

    def _commit(self, touched, new_links=None):
        """Apply ``touched`` (patch id -> new Patch, or None to delete)
        after journaling the displaced state. ``new_links`` replaces the
        link table when the hierarchy changed."""
        before = {pid: self.patches.get(pid) for pid in touched}
        self._journal.append((before, self.links))
        if new_links is not None:
            self.links = new_links
        for pid, patch in touched.items():
            if patch is None:
                self.patches.pop(pid, None)
            else:
                self.patches[pid] = patch

    def undo(self):
        """Pop the journal, restoring the previous patch and link objects.
        Returns the affected patch ids."""
        if not self._journal:
            raise EditError("nothing to undo")
        before, links = self._journal.pop()
        for pid, patch in before.items():
            if patch is None:
                self.patches.pop(pid, None)
            else:
                self.patches[pid] = patch
        self.links = links
        return sorted(before)

    def add_patch(self, patch_id, points, axis_points=None):
        """Register a patch under ``patch_id``.

        Without ``axis_points`` the axis defaults to the shortest geodesic
        between the farthest pair of patch points.
        """
        if patch_id in self.patches:
            raise EditError(f"patch id {patch_id!r} already exists")
        pts = [self.mesh.normalize_point(p) for p in points]
        if axis_points is None:
            axis_points = default_axis(self.mesh, pts, self.engine)
        axis = parameterize_axis(self.mesh, axis_points, self.engine)
        param = parameterize_patch(self.mesh, pts, axis, self.engine)
        patch = Patch(self.mesh_id, pts, axis, param)
        self._commit({patch_id: patch})
        return patch

    def remove_patch(self, patch_id):
        """Delete a patch and detach any children it had."""
        self._get(patch_id)
        touched = {patch_id: None}
        new_links = dict(self.links)
        new_links.pop(patch_id, None)
        for cid, conn in self.links.items():
            if conn.parent == patch_id:
                del new_links[cid]
                touched[cid] = dataclasses.replace(self.patches[cid], parent=None)
        self._commit(touched, new_links=new_links)

    def _reshoot(self, axis, param, old_points=None, from_index=0):
        """Shoot patch points from ``axis``, aligned with ``param``.

        Points whose closest axis index is below ``from_index`` are carried
        over from ``old_points`` untouched; points whose trace leaves the
        surface become None.
        """
        if old_points is not None:
            pts = list(old_points)
        else:
            pts = [None] * len(param)
        for k in range(len(param)):
            j = int(param.closest[k])
            if j < from_index:
                continue
            z = complex(param.z[k])
            r = abs(z)
            if r == 0.0:
                pts[k] = axis.points[j]
                continue
            d = (z / r) * axis.tangents[j]
            try:
                pts[k] = trace_geodesic(self.mesh, axis.points[j], d * r).end
            except TraceTruncationError:
                pts[k] = None
        return pts

    def translate_patch(self, patch_id, drag_start, drag_end):
        """Slide a patch along the geodesic from ``drag_start`` to
        ``drag_end``.

        The axis start is carried to the drag endpoint (offset by its
        original displacement from the drag handle, transported along the
        drag), its direction is parallel-transported, and the axis and
        points are re-traced. A zero drag is the identity. If the moved
        axis runs off an open boundary the edit raises and nothing changes.
        """
        patch = self._get(patch_id)
        drag = self.engine.path(drag_start, drag_end)
        if drag.is_degenerate():
            return patch
        a1 = patch.axis.points[0]
        t1 = patch.axis.tangents[0]
        off = self.engine.path(drag.start, a1)
        if off.is_degenerate():
            t1 = parallel_transport(drag, t1)
            new_a1 = drag.end
        else:
            t1 = parallel_transport(off.reversed(), t1)
            t1 = parallel_transport(drag, t1)
            z_off = parallel_transport(drag, off.length * off.initial_dir)
            g = trace_geodesic(self.mesh, drag.end, z_off)
            new_a1 = g.end
            t1 = parallel_transport(g, t1)
        axis = reconstruct_axis(
            self.mesh, patch.axis.lengths, patch.axis.turning, new_a1, t1
        )
        points = self._reshoot(axis, patch.param)
        new = dataclasses.replace(patch, points=points, axis=axis)
        self._commit({patch_id: new})
        return new

    def rotate_patch(self, patch_id, delta):
        """Rotate a patch by ``delta`` radians about its axis start.

        Only the start direction changes; the axis start stays the pivot.
        A zero angle is the identity.
        """
        patch = self._get(patch_id)
        if float(delta) == 0.0:
            return patch
        t1 = patch.axis.tangents[0] * cmath.rect(1.0, float(delta))
        axis = reconstruct_axis(
            self.mesh, patch.axis.lengths, patch.axis.turning,
            patch.axis.points[0], t1,
        )
        points = self._reshoot(axis, patch.param)
        new = dataclasses.replace(patch, points=points, axis=axis)
        self._commit({patch_id: new})
        return new

    def deform_patch(self, patch_id, pivot, delta):
        """Bend a patch at interior axis point ``pivot`` by ``delta``
        radians.

        The turning angle at the pivot is rotated and the axis tail from
        the pivot on is re-traced; everything before the pivot, axis and
        points alike, is untouched. Points re-seat against the new tail
        when their closest axis index is at or past the pivot.
        """
        patch = self._get(patch_id)
        ax = patch.axis
        m = len(ax)
        pivot = int(pivot)
        if not 0 < pivot < m - 1:
            raise EditError(
                f"deformation pivot must be an interior axis index "
                f"(1..{m - 2}), got {pivot}"
            )
        if float(delta) == 0.0:
            return patch
        rot = cmath.rect(1.0, float(delta))
        tail = reconstruct_axis(
            self.mesh, ax.lengths[pivot:], ax.turning[pivot:],
            ax.points[pivot], ax.tangents[pivot] * rot,
        )
        turning = np.array(ax.turning, dtype=complex)
        turning[pivot] = ax.turning[pivot] * rot
        axis = Axis(
            points=list(ax.points[: pivot + 1]) + list(tail.points[1:]),
            lengths=np.array(ax.lengths, dtype=float),
            turning=turning,
            tangents=np.concatenate([ax.tangents[:pivot], tail.tangents]),
        )
        points = self._reshoot(axis, patch.param, patch.points, from_index=pivot)
        new = dataclasses.replace(patch, points=points, axis=axis)
        self._commit({patch_id: new})
        return new

    def attach_child(self, parent_id, child_id):
        """Hang ``child_id`` off ``parent_id`` and return the Connection.

        The connector geodesic runs from the parent's axis start to the
        child's; its length and the two relative angles are stored so
        propagate can re-derive the child after the parent moves.
        Attaching a patch under its own descendant is rejected.
        """
        parent = self._get(parent_id)
        child = self._get(child_id)
        cur = parent_id
        while cur is not None:
            if cur == child_id:
                raise EditError(
                    f"attaching {child_id!r} under {parent_id!r} would "
                    f"create a cycle"
                )
            cur = self._get(cur).parent
        anchor = 0
        t_anchor = parent.axis.tangents[anchor]
        g = self.engine.path(parent.axis.points[anchor], child.axis.points[0])
        if g.is_degenerate():
            conn = Connection(
                parent_id, anchor, 0.0, 1.0 + 0.0j,
                child.axis.tangents[0] / t_anchor,
            )
        else:
            conn = Connection(
                parent_id, anchor, g.length,
                g.initial_dir / t_anchor,
                child.axis.tangents[0] / g.ending_dir,
            )
        new_links = dict(self.links)
        new_links[child_id] = conn
        new_child = dataclasses.replace(child, parent=parent_id)
        self._commit({child_id: new_child}, new_links=new_links)
        return conn

    def detach_child(self, child_id):
        """Remove a child's link to its parent."""
        child = self._get(child_id)
        if child.parent is None:
            raise EditError(f"patch {child_id!r} has no parent")
        new_links = dict(self.links)
        del new_links[child_id]
        self._commit(
            {child_id: dataclasses.replace(child, parent=None)},
            new_links=new_links,
        )

    def propagate(self, parent_id):
        """Re-derive every descendant of ``parent_id`` from its stored
        connection, depth first. Returns the updated patch ids.

        All descendants are recomputed before any is committed, so a
        connector running off the surface leaves the session unchanged.
        """
        self._get(parent_id)
        updated = {}
        self._propagate_into(parent_id, updated)
        if updated:
            self._commit(updated)
        return sorted(updated)

    def _propagate_into(self, parent_id, out):
        parent = out.get(parent_id, self.patches[parent_id])
        children = sorted(
            cid for cid, conn in self.links.items() if conn.parent == parent_id
        )
        for cid in children:
            conn = self.links[cid]
            child = self.patches[cid]
            anchor_pt = parent.axis.points[conn.anchor]
            t_anchor = parent.axis.tangents[conn.anchor]
            if conn.length == 0.0:
                a1 = anchor_pt
                end_dir = t_anchor
            else:
                d = t_anchor * conn.departure
                d = d / abs(d)
                try:
                    g = trace_geodesic(self.mesh, anchor_pt, d * conn.length)
                except TraceTruncationError as err:
                    raise TraceTruncationError(
                        err.partial,
                        f"connector to patch {cid!r} left the surface",
                    ) from None
                a1 = g.end
                end_dir = g.ending_dir
            axis = reconstruct_axis(
                self.mesh, child.axis.lengths, child.axis.turning,
                a1, end_dir * conn.start_dir,
            )
            points = self._reshoot(axis, child.param)
            out[cid] = dataclasses.replace(child, points=points, axis=axis)
            self._propagate_into(cid, out)
