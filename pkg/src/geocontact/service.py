"""HTTP editing service: sessions, meshes, patch operations, solves.

One process holds any number of independent sessions, each created from
an uploaded scene (the JSON scene document plus the files it references).
Within a session every mutation is serialized under a lock and must carry
the client's revision number; a stale revision is rejected with 409 so a
confused client fails loudly instead of silently interleaving edits. The
revision counter increments once per committed mutation and never goes
backwards.

At most one solve runs per session at a time. A solve works against a
snapshot taken when it starts and commits its pose only if the session
revision is unchanged when it finishes; an edit made mid-solve leaves the
result queryable but uncommitted (status "stale"). Solves can be
cancelled; a cancelled solve never commits.

Mesh geometry travels as a binary frame: a little-endian uint32 header
length, a JSON header, float32 vertex coordinates (x y z per vertex),
then uint32 face indices (three per triangle). Everything else is JSON.
Domain errors surface as 422 with {"error": <type name>, "message": ...};
unknown ids in the URL are 404; revision conflicts and concurrent solves
are 409.

Run with: uvicorn geocontact.service:app
"""

import cmath
import contextlib
import json
import struct
import tempfile
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from . import solver
from .contact import (
    default_axis,
    parameterize_axis,
    parameterize_patch,
    reconstruct_axis,
    reconstruct_patch,
)
from .editing import Patch
from .errors import GeoContactError, SceneError
from .mesh import SurfacePoint
from .scene import _CONFIG_KEYS, Contact, load_scene, surface_normal
from .skeleton import forward_kinematics, skin_mesh


class ApiError(Exception):
    """Transport-level failure with an HTTP status and a stable name."""

    def __init__(self, status, name, message):
        super().__init__(message)
        self.status = status
        self.name = name
        self.message = message


# -- request bodies ----------------------------------------------------------


class CreateSessionBody(BaseModel):
    scene: dict
    files: dict = Field(default_factory=dict)


class CreatePatchBody(BaseModel):
    revision: int
    patch: str
    mesh: str = "manipulator"
    points: list
    axis: list | None = None


class AxisBody(BaseModel):
    revision: int
    points: list | None = None


class TransferBody(BaseModel):
    revision: int
    point: dict
    angle: float = 0.0
    mesh: str = "object"
    new_id: str | None = None
    contact: bool = True
    weight: float = 1.0


class FrameBody(BaseModel):
    point: dict


class TranslateBody(BaseModel):
    revision: int
    drag_start: dict
    drag_end: dict


class RotateBody(BaseModel):
    revision: int
    angle: float


class DeformBody(BaseModel):
    revision: int
    pivot: int
    angle: float


class SolveBody(BaseModel):
    revision: int
    config: dict | None = None


# -- per-session state -------------------------------------------------------


class SolveRecord:
    """Progress and outcome of one background solve."""

    def __init__(self, solve_id, snapshot_revision):
        self.id = solve_id
        self.snapshot_revision = snapshot_revision
        self.status = "running"
        self.iteration = 0
        self.objective = None
        self.pose = None
        self.trace = []
        self.error = None
        self.cancel = threading.Event()

    def progress(self, iteration, objective):
        if iteration >= self.iteration:
            self.iteration = iteration
            self.objective = objective
            self.trace.append([iteration, objective])

    def to_payload(self, revision):
        out = {
            "solve": self.id,
            "status": self.status,
            "iteration": self.iteration,
            "objective": self.objective,
            "trace": [list(entry) for entry in self.trace],
            "revision": revision,
        }
        if self.pose is not None and self.status in ("done", "stale"):
            out["pose"] = self.pose
        if self.error is not None:
            out["error"] = self.error
        return out


class SessionRecord:
    def __init__(self, scene, workspace):
        self.id = uuid.uuid4().hex[:12]
        self.scene = scene
        self.workspace = workspace
        self.lock = threading.Lock()
        self.revision = 0
        self.solves = {}
        self.active_solve = None
        self.solve_seq = 0


@contextlib.contextmanager
def _mutation(record, revision):
    """Revision-checked write scope; commits the revision bump on success."""
    with record.lock:
        if revision != record.revision:
            raise ApiError(
                409,
                "RevisionConflict",
                f"client revision {revision} is stale; session is at "
                f"revision {record.revision}",
            )
        yield record.scene
        record.revision += 1


# -- payload helpers ---------------------------------------------------------


def _load_point(mesh, data):
    try:
        point = SurfacePoint.from_dict(data)
    except (KeyError, TypeError, ValueError):
        raise SceneError(f"bad surface point payload: {data!r}") from None
    return mesh.normalize_point(point)


def _point_payload(mesh, point):
    if point is None:
        return None
    return {
        "point": point.to_dict(),
        "position": [float(x) for x in mesh.position(point)],
    }


def _direction_payload(mesh, point, tangent):
    """Unit 3D departure direction, or None when it points off the mesh."""
    try:
        _face, direction = mesh.decode_direction(point, tangent)
    except GeoContactError:
        return None
    return [float(x) for x in direction]


def _patch_state(scene, patch_id):
    patch = scene.patches[patch_id]
    mesh = scene.get_mesh(patch.mesh_id)
    axis = patch.axis
    return {
        "id": patch_id,
        "mesh": patch.mesh_id,
        "parent": patch.parent,
        "points": [_point_payload(mesh, p) for p in patch.points],
        "axis": {
            "points": [_point_payload(mesh, p) for p in axis.points],
            "directions": [
                _direction_payload(mesh, p, t)
                for p, t in zip(axis.points, axis.tangents)
            ],
        },
    }


def _session_payload(record):
    scene = record.scene
    return {
        "session": record.id,
        "revision": record.revision,
        "meshes": {
            role: {"vertices": int(m.n_vertices), "faces": int(len(m.faces))}
            for role, m in sorted(scene.meshes.items())
        },
        "patches": {
            pid: _patch_state(scene, pid) for pid in sorted(scene.patches)
        },
        "links": {
            cid: {"parent": conn.parent}
            for cid, conn in sorted(scene.links.items())
        },
        "contacts": [c.to_dict() for c in scene.contacts],
        "config": dict(scene.config),
        "pose": None if scene.pose is None
        else [float(x) for x in scene.pose],
        "rig": None if scene.skeleton is None else {
            "joints": int(scene.skeleton.n_joints),
            "dofs": int(scene.skeleton.n_dofs),
            "names": list(scene.skeleton.names),
        },
    }


def _get_patch(scene, patch_id):
    if patch_id not in scene.patches:
        raise ApiError(404, "UnknownPatch", f"no patch {patch_id!r}")
    return scene.patches[patch_id]


def _solve_worker(record, solve_rec, contact_scene, config):
    try:
        result = solver.solve(
            contact_scene,
            config,
            progress=solve_rec.progress,
            should_stop=solve_rec.cancel.is_set,
        )
    except Exception as err:
        with record.lock:
            solve_rec.error = {
                "error": type(err).__name__,
                "message": str(err),
            }
            solve_rec.status = "failed"
            if record.active_solve == solve_rec.id:
                record.active_solve = None
        return
    with record.lock:
        solve_rec.pose = [float(x) for x in result.theta]
        solve_rec.objective = float(result.objective)
        solve_rec.iteration = max(solve_rec.iteration, result.iterations)
        if solve_rec.cancel.is_set():
            solve_rec.status = "cancelled"
        elif record.revision == solve_rec.snapshot_revision:
            record.scene.pose = np.array(result.theta, dtype=float)
            record.revision += 1
            solve_rec.status = "done"
        else:
            solve_rec.status = "stale"
        if record.active_solve == solve_rec.id:
            record.active_solve = None


# -- application -------------------------------------------------------------


def create_app():
    app = FastAPI(title="geocontact service", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.sessions = {}
    app.state.store_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def handle_api_error(_request, err):
        return JSONResponse(
            {"error": err.name, "message": err.message},
            status_code=err.status,
        )

    @app.exception_handler(GeoContactError)
    async def handle_domain_error(_request, err):
        return JSONResponse(
            {"error": type(err).__name__, "message": str(err)},
            status_code=422,
        )

    def get_session(session_id):
        record = app.state.sessions.get(session_id)
        if record is None:
            raise ApiError(404, "UnknownSession", f"no session {session_id!r}")
        return record

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        workspace = tempfile.TemporaryDirectory(prefix="geocontact-session-")
        root = Path(workspace.name)
        for name, text in body.files.items():
            if not isinstance(text, str):
                raise SceneError(f"file {name!r} must be text")
            (root / Path(name).name).write_text(text)
        scene_path = root / "scene.json"
        scene_path.write_text(
            json.dumps(body.scene, indent=2, sort_keys=True) + "\n"
        )
        scene = load_scene(scene_path)
        record = SessionRecord(scene, workspace)
        with app.state.store_lock:
            app.state.sessions[record.id] = record
        return _session_payload(record)

    @app.get("/sessions/{session_id}")
    def get_session_state(session_id: str):
        record = get_session(session_id)
        with record.lock:
            return _session_payload(record)

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        with app.state.store_lock:
            record = app.state.sessions.pop(session_id, None)
        if record is None:
            raise ApiError(404, "UnknownSession", f"no session {session_id!r}")
        for solve_rec in record.solves.values():
            solve_rec.cancel.set()
        record.workspace.cleanup()
        return {"deleted": session_id}

    @app.get("/sessions/{session_id}/mesh/{role}")
    def get_mesh_buffers(session_id: str, role: str, posed: bool = False):
        record = get_session(session_id)
        with record.lock:
            scene = record.scene
            if role not in scene.meshes:
                raise ApiError(404, "UnknownMesh", f"no mesh role {role!r}")
            mesh = scene.meshes[role]
            vertices = np.asarray(mesh.vertices, dtype=float)
            is_posed = False
            if (
                posed
                and role == "manipulator"
                and scene.pose is not None
                and scene.skeleton is not None
                and scene.binding is not None
            ):
                transforms = forward_kinematics(scene.skeleton, scene.pose)
                vertices = skin_mesh(mesh, scene.binding, transforms)
                is_posed = True
            header = {
                "faces": int(len(mesh.faces)),
                "posed": is_posed,
                "revision": record.revision,
                "role": role,
                "vertices": int(mesh.n_vertices),
            }
            header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
            blob = (
                struct.pack("<I", len(header_bytes))
                + header_bytes
                + vertices.astype("<f4").tobytes()
                + np.asarray(mesh.faces).astype("<u4").tobytes()
            )
        return Response(blob, media_type="application/octet-stream")

    @app.post("/sessions/{session_id}/mesh/{role}/frame")
    def tangent_frame(session_id: str, role: str, body: FrameBody):
        """Resolve a surface point into the tangent frame transfers use.

        ``zero_direction`` is the world-space direction a transfer angle
        of zero departs along; angles grow counterclockwise around the
        outward ``normal``. Read-only: takes no revision and changes
        nothing.
        """
        record = get_session(session_id)
        with record.lock:
            scene = record.scene
            if role not in scene.meshes:
                raise ApiError(404, "UnknownMesh", f"no mesh role {role!r}")
            mesh = scene.meshes[role]
            point = _load_point(mesh, body.point)
            _face, zero = mesh.decode_direction(point, 1.0 + 0.0j)
            return {
                "point": point.to_dict(),
                "position": [float(x) for x in mesh.position(point)],
                "zero_direction": [float(x) for x in zero],
                "normal": [float(x) for x in surface_normal(mesh, point)],
            }

    @app.post("/sessions/{session_id}/patches")
    def create_patch(session_id: str, body: CreatePatchBody):
        record = get_session(session_id)
        with _mutation(record, body.revision) as scene:
            if body.patch in scene.patches:
                raise SceneError(f"patch {body.patch!r} already exists")
            mesh = scene.get_mesh(body.mesh)
            points = [_load_point(mesh, d) for d in body.points]
            if body.axis:
                axis_points = [_load_point(mesh, d) for d in body.axis]
            else:
                axis_points = default_axis(mesh, points)
            axis = parameterize_axis(mesh, axis_points)
            param = parameterize_patch(mesh, points, axis)
            scene.patches[body.patch] = Patch(body.mesh, points, axis, param)
            state = _patch_state(scene, body.patch)
        return {"revision": record.revision, "patch": state}

    @app.post("/sessions/{session_id}/patches/{patch_id}/axis")
    def set_axis(session_id: str, patch_id: str, body: AxisBody):
        record = get_session(session_id)
        with _mutation(record, body.revision) as scene:
            patch = _get_patch(scene, patch_id)
            mesh = scene.get_mesh(patch.mesh_id)
            points = patch.live_points()
            if body.points:
                axis_points = [_load_point(mesh, d) for d in body.points]
            else:
                axis_points = default_axis(mesh, points)
            axis = parameterize_axis(mesh, axis_points)
            param = parameterize_patch(mesh, points, axis)
            scene.patches[patch_id] = Patch(
                patch.mesh_id, points, axis, param, parent=patch.parent
            )
            state = _patch_state(scene, patch_id)
        return {"revision": record.revision, "patch": state}

    @app.post("/sessions/{session_id}/patches/{patch_id}/transfer")
    def transfer_patch_endpoint(
        session_id: str, patch_id: str, body: TransferBody
    ):
        record = get_session(session_id)
        with _mutation(record, body.revision) as scene:
            src = _get_patch(scene, patch_id)
            dst_mesh = scene.get_mesh(body.mesh)
            start = _load_point(dst_mesh, body.point)
            t1 = cmath.rect(1.0, body.angle)
            axis = reconstruct_axis(
                dst_mesh, src.axis.lengths, src.axis.turning, start, t1,
                mirror=True,
            )
            points, skipped = reconstruct_patch(
                dst_mesh, axis, src.param, mirror=True
            )
            gaps = set(skipped)
            live = iter(points)
            aligned = [
                None if k in gaps else next(live)
                for k in range(len(src.param))
            ]
            new_id = body.new_id or f"{patch_id}@{body.mesh}"
            scene.patches[new_id] = Patch(body.mesh, aligned, axis, src.param)
            if body.contact:
                entry = Contact(patch_id, new_id, body.weight)
                scene.contacts = [
                    c for c in scene.contacts
                    if (c.source, c.target) != (patch_id, new_id)
                ]
                scene.contacts.append(entry)
            state = _patch_state(scene, new_id)
        return {
            "revision": record.revision,
            "patch": state,
            "skipped": sorted(gaps),
        }

    def apply_edit(record, revision, patch_id, op):
        with _mutation(record, revision) as scene:
            patch = _get_patch(scene, patch_id)
            sess = scene.session(patch.mesh_id)
            op(sess)
            updated = sorted({patch_id, *sess.propagate(patch_id)})
            scene.absorb(sess)
            states = {pid: _patch_state(scene, pid) for pid in updated}
        return {
            "revision": record.revision,
            "updated": updated,
            "patches": states,
        }

    @app.post("/sessions/{session_id}/patches/{patch_id}/translate")
    def translate_patch_endpoint(
        session_id: str, patch_id: str, body: TranslateBody
    ):
        record = get_session(session_id)

        def op(sess):
            sess.translate_patch(
                patch_id,
                _load_point(sess.mesh, body.drag_start),
                _load_point(sess.mesh, body.drag_end),
            )

        return apply_edit(record, body.revision, patch_id, op)

    @app.post("/sessions/{session_id}/patches/{patch_id}/rotate")
    def rotate_patch_endpoint(
        session_id: str, patch_id: str, body: RotateBody
    ):
        record = get_session(session_id)
        return apply_edit(
            record, body.revision, patch_id,
            lambda sess: sess.rotate_patch(patch_id, body.angle),
        )

    @app.post("/sessions/{session_id}/patches/{patch_id}/deform")
    def deform_patch_endpoint(
        session_id: str, patch_id: str, body: DeformBody
    ):
        record = get_session(session_id)
        return apply_edit(
            record, body.revision, patch_id,
            lambda sess: sess.deform_patch(patch_id, body.pivot, body.angle),
        )

    @app.post("/sessions/{session_id}/solve")
    def start_solve(session_id: str, body: SolveBody):
        record = get_session(session_id)
        with record.lock:
            if body.revision != record.revision:
                raise ApiError(
                    409,
                    "RevisionConflict",
                    f"client revision {body.revision} is stale; session is "
                    f"at revision {record.revision}",
                )
            if record.active_solve is not None:
                raise ApiError(
                    409,
                    "SolveInProgress",
                    f"solve {record.active_solve!r} is still running",
                )
            overrides = dict(body.config or {})
            for key in overrides:
                if key not in _CONFIG_KEYS:
                    raise SceneError(f"unknown config key {key!r}")
            contact_scene = record.scene.assemble()
            config = record.scene.build_config(trace=False, **overrides)
            record.solve_seq += 1
            solve_rec = SolveRecord(f"s{record.solve_seq}", record.revision)
            record.solves[solve_rec.id] = solve_rec
            record.active_solve = solve_rec.id
        thread = threading.Thread(
            target=_solve_worker,
            args=(record, solve_rec, contact_scene, config),
            daemon=True,
        )
        thread.start()
        return {"solve": solve_rec.id, "revision": record.revision}

    @app.get("/sessions/{session_id}/solve/{solve_id}")
    def solve_status(session_id: str, solve_id: str):
        record = get_session(session_id)
        solve_rec = record.solves.get(solve_id)
        if solve_rec is None:
            raise ApiError(404, "UnknownSolve", f"no solve {solve_id!r}")
        with record.lock:
            return solve_rec.to_payload(record.revision)

    @app.delete("/sessions/{session_id}/solve/{solve_id}")
    def cancel_solve(session_id: str, solve_id: str):
        record = get_session(session_id)
        solve_rec = record.solves.get(solve_id)
        if solve_rec is None:
            raise ApiError(404, "UnknownSolve", f"no solve {solve_id!r}")
        solve_rec.cancel.set()
        with record.lock:
            return {"solve": solve_id, "status": solve_rec.status}

    return app


app = create_app()
