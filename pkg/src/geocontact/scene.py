"""Scene files: everything one batch run needs, in a single JSON document.

A scene references its meshes, and optionally a rig and a skin binding, by
path (resolved relative to the scene file), and stores patches, hierarchy
links, contact pairs, the solve configuration, and the last solved pose
inline. Saving is deterministic: the same scene always produces the same
bytes.

Schema (format 1)::

    {
      "format": 1,
      "meshes": {"manipulator": "hand.obj", "object": "mug.obj"},
      "rig": "rig.json",                  # optional
      "binding": "binding.json",          # optional, requires "rig"
      "patches": {"palm": {...}},         # editing.Patch dictionaries
      "links": {"child": {...}},          # editing.Connection dictionaries
      "contacts": [{"source": "palm", "target": "palm@object",
                    "weight": 1.0}],
      "config": {"lambda_d": 1.0, ...},   # optional solver overrides
      "pose": [...]                       # optional, written by solve
    }

A contact entry pairs two patches point-by-point: each live point of the
source patch (on the manipulator) is pulled onto the position of the
corresponding live point of the target patch, with the target mesh's
surface normal at that point as the opposing normal.
"""

import dataclasses
import json
from pathlib import Path

import numpy as np

from .editing import Connection, EditSession, Patch
from .errors import SceneError
from .mesh import load_mesh
from .skeleton import SkinBinding, Skeleton
from .solver import ContactPair, ContactScene, SolveConfig

_CONFIG_KEYS = ("lambda_d", "lambda_n", "lambda_p", "max_iterations",
                "tolerance", "mask")


def surface_normal(mesh, point):
    """Area-weighted unit normal at a surface point: the normalized sum of
    cross products over the incident faces (matching the solver's
    convention for skinned normals)."""
    raw = np.zeros(3)
    for f in mesh.faces_of_point(point):
        a, b, c = mesh.faces[f]
        raw += np.cross(mesh.vertices[b] - mesh.vertices[a],
                        mesh.vertices[c] - mesh.vertices[a])
    n = float(np.linalg.norm(raw))
    if n == 0.0:
        raise SceneError(f"degenerate surface normal at {point}")
    return raw / n


@dataclasses.dataclass
class Contact:
    """A point-aligned patch pair contributing contact terms to the solve."""

    source: str
    target: str
    weight: float = 1.0

    def __post_init__(self):
        self.weight = float(self.weight)
        if self.weight < 0:
            raise SceneError(
                f"contact {self.source!r} -> {self.target!r} has a negative "
                f"weight"
            )

    def to_dict(self):
        return {"source": self.source, "target": self.target,
                "weight": self.weight}


class Scene:
    """In-memory scene: loaded meshes plus every inline artifact."""

    def __init__(self, root, mesh_paths, rig_path=None, binding_path=None):
        self.root = Path(root)
        self.mesh_paths = dict(mesh_paths)
        if not self.mesh_paths:
            raise SceneError("scene declares no meshes")
        self.rig_path = rig_path
        self.binding_path = binding_path
        self.meshes = {
            role: load_mesh(self._resolve(path))
            for role, path in sorted(self.mesh_paths.items())
        }
        self.skeleton = None
        self.binding = None
        if rig_path is not None:
            self.skeleton = Skeleton.from_dict(self._read_json(rig_path))
        if binding_path is not None:
            if self.skeleton is None:
                raise SceneError("scene has a binding but no rig")
            self.binding = SkinBinding.from_dict(
                self._read_json(binding_path), self.skeleton)
        self.patches = {}
        self.links = {}
        self.contacts = []
        self.config = {}
        self.pose = None

    def _resolve(self, path):
        p = Path(path)
        full = p if p.is_absolute() else self.root / p
        if not full.exists():
            raise SceneError(f"scene references missing file {str(path)!r}")
        return full

    def _read_json(self, path):
        text = self._resolve(path).read_text(encoding="utf-8")
        try:
            return json.loads(text)
        except ValueError as exc:
            raise SceneError(f"{str(path)!r} is not valid JSON: {exc}") from None

    # -- solver assembly ---------------------------------------------------

    def get_patch(self, patch_id):
        try:
            return self.patches[patch_id]
        except KeyError:
            raise SceneError(f"unknown patch id {patch_id!r}") from None

    def get_mesh(self, role):
        try:
            return self.meshes[role]
        except KeyError:
            raise SceneError(f"scene has no {role!r} mesh") from None

    def contact_pairs(self):
        """Resolve the contact entries into solver ContactPairs."""
        pairs = []
        for c in self.contacts:
            src = self.get_patch(c.source)
            dst = self.get_patch(c.target)
            if len(src.points) != len(dst.points):
                raise SceneError(
                    f"contact {c.source!r} -> {c.target!r} pairs patches of "
                    f"different sizes ({len(src.points)} vs {len(dst.points)})"
                )
            dst_mesh = self.get_mesh(dst.mesh_id)
            points, targets, normals = [], [], []
            for p, q in zip(src.points, dst.points):
                if p is None or q is None:
                    continue
                points.append(p)
                targets.append(dst_mesh.position(q))
                normals.append(surface_normal(dst_mesh, q))
            if not points:
                raise SceneError(
                    f"contact {c.source!r} -> {c.target!r} has no live "
                    f"point pairs"
                )
            pairs.append(ContactPair(points, targets, normals,
                                     weights=[c.weight] * len(points)))
        return pairs

    def build_config(self, trace=False, **overrides):
        fields = dict(self.config)
        for key, value in overrides.items():
            if value is not None:
                fields[key] = value
        return SolveConfig(trace=trace, **fields)

    def assemble(self):
        """The ContactScene this file describes, ready to solve."""
        mesh = self.get_mesh("manipulator")
        if self.skeleton is None or self.binding is None:
            raise SceneError("solving needs both a rig and a binding")
        return ContactScene(mesh, self.skeleton, self.binding,
                            self.contact_pairs())

    # -- edit session plumbing ----------------------------------------------

    def session(self, role):
        """An EditSession over one mesh, seeded with its patches."""
        sess = EditSession(self.get_mesh(role), role)
        sess.patches = {
            pid: p for pid, p in self.patches.items() if p.mesh_id == role
        }
        sess.links = {
            cid: conn for cid, conn in self.links.items()
            if self.patches[conn.parent].mesh_id == role
        }
        return sess

    def absorb(self, sess):
        """Write an edit session's patches and links back into the scene."""
        role = sess.mesh_id
        self.patches = {
            pid: p for pid, p in self.patches.items() if p.mesh_id != role
        }
        self.patches.update(sess.patches)
        self.links = {
            cid: conn for cid, conn in self.links.items()
            if self.patches[conn.parent].mesh_id != role
        }
        self.links.update(sess.links)

    # -- persistence ---------------------------------------------------------

    def to_dict(self):
        data = {
            "format": 1,
            "meshes": dict(self.mesh_paths),
            "patches": {pid: p.to_dict() for pid, p in self.patches.items()},
            "links": {cid: c.to_dict() for cid, c in self.links.items()},
            "contacts": [c.to_dict() for c in self.contacts],
        }
        if self.rig_path is not None:
            data["rig"] = self.rig_path
        if self.binding_path is not None:
            data["binding"] = self.binding_path
        if self.config:
            data["config"] = dict(self.config)
        if self.pose is not None:
            data["pose"] = [float(x) for x in self.pose]
        return data

    @classmethod
    def from_dict(cls, data, root):
        if data.get("format") != 1:
            raise SceneError(
                f"unsupported scene format: {data.get('format')!r}"
            )
        if not isinstance(data.get("meshes"), dict):
            raise SceneError("scene 'meshes' must map roles to paths")
        scene = cls(root, data["meshes"], rig_path=data.get("rig"),
                    binding_path=data.get("binding"))
        for pid, pdata in data.get("patches", {}).items():
            patch = Patch.from_dict(pdata)
            if patch.mesh_id not in scene.meshes:
                raise SceneError(
                    f"patch {pid!r} references unknown mesh "
                    f"{patch.mesh_id!r}"
                )
            scene.patches[pid] = patch
        for cid, cdata in data.get("links", {}).items():
            conn = Connection.from_dict(cdata)
            if cid not in scene.patches:
                raise SceneError(f"link references unknown patch {cid!r}")
            if conn.parent not in scene.patches:
                raise SceneError(
                    f"link for {cid!r} references unknown parent "
                    f"{conn.parent!r}"
                )
            scene.links[cid] = conn
        for cdata in data.get("contacts", []):
            contact = Contact(cdata["source"], cdata["target"],
                              cdata.get("weight", 1.0))
            scene.get_patch(contact.source)
            scene.get_patch(contact.target)
            scene.contacts.append(contact)
        config = data.get("config", {})
        for key in config:
            if key not in _CONFIG_KEYS:
                raise SceneError(f"unknown solve config key {key!r}")
        scene.config = dict(config)
        if scene.config:
            scene.build_config()  # validate the stored values eagerly
        pose = data.get("pose")
        if pose is not None:
            pose = np.asarray(pose, dtype=float)
            if (scene.skeleton is not None
                    and pose.shape != (scene.skeleton.n_dofs,)):
                raise SceneError(
                    f"pose has {pose.size} entries, rig has "
                    f"{scene.skeleton.n_dofs} DOFs"
                )
            scene.pose = pose
        return scene


def load_scene(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SceneError(f"cannot open {path}: {exc}") from None
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise SceneError(f"{path} is not valid JSON: {exc}") from None
    return Scene.from_dict(data, path.parent)


def scene_text(scene):
    """The scene's canonical file content: sorted keys, two-space indent."""
    return json.dumps(scene.to_dict(), indent=2, sort_keys=True) + "\n"


def save_scene(path, scene):
    Path(path).write_text(scene_text(scene), encoding="utf-8")
