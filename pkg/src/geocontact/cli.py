"""Command line front end: scene assembly, contact operations, and solving.

Every subcommand is a pure file-to-file transform over a JSON scene file
(see :mod:`geocontact.scene` for the schema); no state lives outside the
files, so pipelines are hermetic and identical inputs produce byte
identical outputs.

Surface points on the command line use ``kind:index:barycentrics`` syntax:
``v:12`` (a vertex), ``e:5:0.25,0.75`` (a point on edge 5; a single value
is shorthand for the parameter along the edge), ``f:120:0.3,0.3,0.4`` (a
point inside face 120). Angles are radians.

Exit codes: 0 success, 1 data errors (reported as one JSON object on
stderr naming the failing element), 2 usage errors.
"""

import cmath
import functools
import json
import sys

import click

from .contact import (
    default_axis,
    parameterize_axis,
    parameterize_patch,
    reconstruct_axis,
    reconstruct_patch,
)
from .editing import Patch
from .errors import GeoContactError, InvalidPointError, SceneError
from .mesh import SurfacePoint, load_mesh
from .scene import Contact, load_scene, save_scene
from .solver import solve

_KINDS = {"v": "vertex", "e": "edge", "f": "face",
          "vertex": "vertex", "edge": "edge", "face": "face"}


def parse_point(spec):
    """A SurfacePoint from ``kind:index[:barycentrics]`` syntax."""
    parts = spec.split(":")
    if len(parts) not in (2, 3) or parts[0] not in _KINDS:
        raise ValueError(
            f"expected kind:index[:barycentrics], like v:12 or "
            f"f:120:0.3,0.3,0.4; got {spec!r}"
        )
    kind = _KINDS[parts[0]]
    try:
        index = int(parts[1])
    except ValueError:
        raise ValueError(f"point index must be an integer, got {parts[1]!r}") from None
    bary = ()
    if len(parts) == 3 and parts[2]:
        try:
            bary = tuple(float(tok) for tok in parts[2].split(","))
        except ValueError:
            raise ValueError(
                f"barycentrics must be comma-separated numbers, got {parts[2]!r}"
            ) from None
    if kind == "edge" and len(bary) == 1:
        bary = (1.0 - bary[0], bary[0])
    try:
        return SurfacePoint(kind, index, bary)
    except InvalidPointError as err:
        raise ValueError(str(err)) from None


class PointType(click.ParamType):
    name = "point"

    def convert(self, value, param, ctx):
        if isinstance(value, SurfacePoint):
            return value
        try:
            return parse_point(value)
        except ValueError as err:
            self.fail(str(err), param, ctx)


POINT = PointType()


def data_errors(fn):
    """Map the package's typed errors to exit 1 with a structured report."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except GeoContactError as err:
            payload = {"error": type(err).__name__, "message": str(err)}
            click.echo(json.dumps(payload, sort_keys=True), err=True)
            sys.exit(1)

    return wrapper


def emit(as_json, payload, human):
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(human)


def scene_option(fn):
    return click.option("--scene", "scene_path", required=True,
                        metavar="PATH", help="Scene file to read.")(fn)


def out_option(fn):
    return click.option("--out", "out_path", metavar="PATH", default=None,
                        help="Output scene file (default: rewrite --scene "
                             "in place).")(fn)


def json_option(fn):
    return click.option("--json", "as_json", is_flag=True,
                        help="Print a JSON result on stdout.")(fn)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Geodesic contact patches from the command line.

    Subcommands read a scene file, apply one operation, and write the
    scene back out; see each subcommand's --help for its flags.
    """


def _store(scene, scene_path, out_path):
    save_scene(out_path if out_path is not None else scene_path, scene)


@main.command()
@scene_option
@click.option("--patch", "patch_id", required=True,
              help="Patch id to create or re-parameterize.")
@click.option("--mesh", "role", default="manipulator", show_default=True,
              help="Mesh role for a newly created patch.")
@click.option("--point", "points", type=POINT, multiple=True,
              help="Patch point (repeatable); creates the patch.")
@click.option("--axis-point", "axis_points", type=POINT, multiple=True,
              help="Axis waypoint (repeatable); default: the longest "
                   "geodesic between two patch points.")
@out_option
@json_option
@data_errors
def parameterize(scene_path, patch_id, role, points, axis_points, out_path,
                 as_json):
    """Compute a patch's axis and log-map parameterization."""
    scene = load_scene(scene_path)
    existing = scene.patches.get(patch_id)
    if points:
        if existing is not None:
            raise SceneError(
                f"patch {patch_id!r} already exists; rerun without --point "
                f"to re-parameterize it"
            )
        mesh = scene.get_mesh(role)
        pts = [mesh.normalize_point(p) for p in points]
    else:
        if existing is None:
            raise SceneError(
                f"unknown patch id {patch_id!r}; pass --point to create it"
            )
        role = existing.mesh_id
        mesh = scene.get_mesh(role)
        pts = existing.live_points()
    axis_pts = [mesh.normalize_point(p) for p in axis_points] or None
    if axis_pts is None:
        axis_pts = default_axis(mesh, pts)
    axis = parameterize_axis(mesh, axis_pts)
    param = parameterize_patch(mesh, pts, axis)
    parent = existing.parent if existing is not None else None
    scene.patches[patch_id] = Patch(role, pts, axis, param, parent=parent)
    _store(scene, scene_path, out_path)
    emit(as_json,
         {"patch": patch_id, "mesh": role, "points": len(pts),
          "axis_points": len(axis)},
         f"parameterized {patch_id!r}: {len(pts)} points, "
         f"{len(axis)}-point axis")


@main.command("default-axis")
@scene_option
@click.option("--patch", "patch_id", required=True, help="Patch id.")
@out_option
@json_option
@data_errors
def default_axis_cmd(scene_path, patch_id, out_path, as_json):
    """Re-derive a patch's axis from its points and re-parameterize."""
    scene = load_scene(scene_path)
    existing = scene.get_patch(patch_id)
    mesh = scene.get_mesh(existing.mesh_id)
    pts = existing.live_points()
    axis = parameterize_axis(mesh, default_axis(mesh, pts))
    param = parameterize_patch(mesh, pts, axis)
    scene.patches[patch_id] = Patch(existing.mesh_id, pts, axis, param,
                                    parent=existing.parent)
    _store(scene, scene_path, out_path)
    emit(as_json,
         {"patch": patch_id, "axis_points": len(axis)},
         f"default axis for {patch_id!r}: {len(axis)} points")


@main.command()
@scene_option
@click.option("--patch", "patch_id", required=True, help="Source patch id.")
@click.option("--target-point", required=True, type=POINT,
              help="Axis start a'_1 on the target mesh.")
@click.option("--target-angle", type=float, default=0.0, show_default=True,
              help="Axis start direction t'_1, radians in the tangent "
                   "basis at the target point.")
@click.option("--target-mesh", "target_role", default="object",
              show_default=True, help="Target mesh role.")
@click.option("--as", "new_id", default=None,
              help="Id for the transferred patch "
                   "[default: <patch>@<target-mesh>].")
@click.option("--contact/--no-contact", "make_contact", default=True,
              show_default=True,
              help="Record a contact pairing the source patch with the "
                   "transferred one.")
@click.option("--weight", type=float, default=1.0, show_default=True,
              help="Contact weight.")
@out_option
@json_option
@data_errors
def transfer(scene_path, patch_id, target_point, target_angle, target_role,
             new_id, make_contact, weight, out_path, as_json):
    """Transfer a patch onto another mesh (mirror convention)."""
    scene = load_scene(scene_path)
    src = scene.get_patch(patch_id)
    dst_mesh = scene.get_mesh(target_role)
    start = dst_mesh.normalize_point(target_point)
    t1 = cmath.rect(1.0, target_angle)
    axis = reconstruct_axis(dst_mesh, src.axis.lengths, src.axis.turning,
                            start, t1, mirror=True)
    pts, skipped = reconstruct_patch(dst_mesh, axis, src.param, mirror=True)
    gaps = set(skipped)
    it = iter(pts)
    aligned = [None if k in gaps else next(it) for k in range(len(src.param))]
    if new_id is None:
        new_id = f"{patch_id}@{target_role}"
    scene.patches[new_id] = Patch(target_role, aligned, axis, src.param)
    if make_contact:
        entry = Contact(patch_id, new_id, weight)
        scene.contacts = [c for c in scene.contacts
                          if (c.source, c.target) != (patch_id, new_id)]
        scene.contacts.append(entry)
    _store(scene, scene_path, out_path)
    emit(as_json,
         {"patch": new_id, "source": patch_id, "mesh": target_role,
          "skipped": sorted(gaps), "contact": make_contact},
         f"transferred {patch_id!r} -> {new_id!r} on {target_role!r}"
         + (f" ({len(gaps)} points skipped)" if gaps else ""))


def _edit(scene_path, patch_id, out_path, apply):
    """Load, run one edit plus propagation, absorb, save."""
    scene = load_scene(scene_path)
    patch = scene.get_patch(patch_id)
    sess = scene.session(patch.mesh_id)
    apply(sess)
    updated = [patch_id] + sess.propagate(patch_id)
    scene.absorb(sess)
    _store(scene, scene_path, out_path)
    return sorted(set(updated))


@main.command()
@scene_option
@click.option("--patch", "patch_id", required=True, help="Patch id.")
@click.option("--drag-start", required=True, type=POINT,
              help="Drag handle on the patch's mesh.")
@click.option("--drag-end", required=True, type=POINT,
              help="Where the handle was released.")
@out_option
@json_option
@data_errors
def translate(scene_path, patch_id, drag_start, drag_end, out_path, as_json):
    """Slide a patch along the drag geodesic, carrying its children."""
    updated = _edit(
        scene_path, patch_id, out_path,
        lambda sess: sess.translate_patch(
            patch_id,
            sess.mesh.normalize_point(drag_start),
            sess.mesh.normalize_point(drag_end),
        ),
    )
    emit(as_json, {"patch": patch_id, "updated": updated},
         f"translated {patch_id!r}; updated {', '.join(updated)}")


@main.command()
@scene_option
@click.option("--patch", "patch_id", required=True, help="Patch id.")
@click.option("--angle", required=True, type=float,
              help="Rotation about the axis start, radians.")
@out_option
@json_option
@data_errors
def rotate(scene_path, patch_id, angle, out_path, as_json):
    """Rotate a patch about its axis start, carrying its children."""
    updated = _edit(scene_path, patch_id, out_path,
                    lambda sess: sess.rotate_patch(patch_id, angle))
    emit(as_json, {"patch": patch_id, "angle": angle, "updated": updated},
         f"rotated {patch_id!r} by {angle}; updated {', '.join(updated)}")


@main.command()
@scene_option
@click.option("--patch", "patch_id", required=True, help="Patch id.")
@click.option("--pivot", required=True, type=int,
              help="Interior axis point index the bend happens at.")
@click.option("--angle", required=True, type=float,
              help="Extra turning at the pivot, radians.")
@out_option
@json_option
@data_errors
def deform(scene_path, patch_id, pivot, angle, out_path, as_json):
    """Bend a patch's axis at an interior point, carrying its children."""
    updated = _edit(scene_path, patch_id, out_path,
                    lambda sess: sess.deform_patch(patch_id, pivot, angle))
    emit(as_json,
         {"patch": patch_id, "pivot": pivot, "angle": angle,
          "updated": updated},
         f"deformed {patch_id!r} at pivot {pivot}; "
         f"updated {', '.join(updated)}")


@main.command()
@scene_option
@click.option("--parent", "parent_id", required=True, help="Parent patch id.")
@click.option("--child", "child_id", required=True, help="Child patch id.")
@out_option
@json_option
@data_errors
def attach(scene_path, parent_id, child_id, out_path, as_json):
    """Hang one patch off another so edits to the parent carry it along."""
    scene = load_scene(scene_path)
    parent = scene.get_patch(parent_id)
    sess = scene.session(parent.mesh_id)
    conn = sess.attach_child(parent_id, child_id)
    scene.absorb(sess)
    _store(scene, scene_path, out_path)
    emit(as_json,
         {"parent": parent_id, "child": child_id,
          "connector_length": conn.length},
         f"attached {child_id!r} under {parent_id!r} "
         f"(connector length {conn.length:.6g})")


@main.command("solve")
@scene_option
@click.option("--trace", "trace_path", metavar="PATH", default=None,
              help="Write the objective trace as CSV (iteration,objective).")
@click.option("--plot", "plot_path", metavar="PATH", default=None,
              help="Render the objective trace to an image file.")
@click.option("--lambda-d", type=float, default=None,
              help="Override the distance term weight.")
@click.option("--lambda-n", type=float, default=None,
              help="Override the normal term weight.")
@click.option("--lambda-p", type=float, default=None,
              help="Override the pose term weight.")
@click.option("--max-iterations", type=int, default=None,
              help="Override the iteration cap.")
@click.option("--tolerance", type=float, default=None,
              help="Override the convergence tolerance.")
@out_option
@json_option
@data_errors
def solve_cmd(scene_path, trace_path, plot_path, lambda_d, lambda_n,
              lambda_p, max_iterations, tolerance, out_path, as_json):
    """Solve the scene's contacts for a pose, starting from rest."""
    scene = load_scene(scene_path)
    contact_scene = scene.assemble()
    config = scene.build_config(
        trace=trace_path is not None or plot_path is not None,
        lambda_d=lambda_d, lambda_n=lambda_n, lambda_p=lambda_p,
        max_iterations=max_iterations, tolerance=tolerance,
    )
    result = solve(contact_scene, config)
    scene.pose = result.theta
    _store(scene, scene_path, out_path)
    if trace_path is not None:
        lines = ["iteration,objective"]
        lines.extend(f"{i},{f!r}" for i, f in result.trace)
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    if plot_path is not None:
        _plot_trace(result.trace, plot_path)
    emit(as_json,
         {"converged": result.converged, "iterations": result.iterations,
          "objective": result.objective,
          "contacts": sum(len(p) for p in contact_scene.pairs)},
         f"solved: objective {result.objective:.6g} after "
         f"{result.iterations} iterations"
         + ("" if result.converged else " (iteration cap reached)"))


def _plot_trace(trace, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    iterations = [i for i, _ in trace]
    values = [f for _, f in trace]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(iterations, values, color="tab:blue", linewidth=1.2,
            marker="o", markersize=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    if values and min(values) > 0.0:
        ax.set_yscale("log")
    ax.set_title("solve objective")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


@main.command()
@click.option("--scene", "scene_path", metavar="PATH", default=None,
              help="Scene file to check.")
@click.option("--mesh", "mesh_path", metavar="PATH", default=None,
              help="OBJ file to check.")
@json_option
@data_errors
def validate(scene_path, mesh_path, as_json):
    """Check a mesh or a whole scene; exit 1 naming the first problem."""
    if (scene_path is None) == (mesh_path is None):
        raise click.UsageError("pass exactly one of --scene or --mesh")
    if mesh_path is not None:
        mesh = load_mesh(mesh_path)
        payload = {
            "mesh": mesh_path,
            "vertices": int(mesh.n_vertices),
            "faces": int(len(mesh.faces)),
            "edges": int(len(mesh.edge_vertices)),
            "boundary_edges": int(mesh.boundary_edge.sum()),
        }
        emit(as_json, payload,
             f"{mesh_path}: {payload['vertices']} vertices, "
             f"{payload['faces']} faces, {payload['edges']} edges "
             f"({payload['boundary_edges']} on the boundary)")
        return
    scene = load_scene(scene_path)
    for pid, patch in sorted(scene.patches.items()):
        mesh = scene.get_mesh(patch.mesh_id)
        try:
            for p in patch.live_points():
                mesh.normalize_point(p)
            for p in patch.axis.points:
                mesh.normalize_point(p)
        except InvalidPointError as err:
            raise SceneError(f"patch {pid!r}: {err}") from None
        if len(patch.param) != len(patch.points):
            raise SceneError(
                f"patch {pid!r} has {len(patch.points)} points but "
                f"{len(patch.param)} parameterization entries"
            )
    scene.contact_pairs()
    if scene.binding is not None:
        manip = scene.get_mesh("manipulator")
        if scene.binding.n_vertices != manip.n_vertices:
            raise SceneError(
                f"binding covers {scene.binding.n_vertices} vertices, "
                f"manipulator mesh has {manip.n_vertices}"
            )
    payload = {
        "scene": scene_path,
        "meshes": {
            role: {"vertices": int(m.n_vertices),
                   "faces": int(len(m.faces))}
            for role, m in sorted(scene.meshes.items())
        },
        "patches": len(scene.patches),
        "links": len(scene.links),
        "contacts": len(scene.contacts),
    }
    emit(as_json, payload,
         f"{scene_path}: {len(scene.meshes)} meshes, "
         f"{len(scene.patches)} patches, {len(scene.contacts)} contacts")


if __name__ == "__main__":
    main()
