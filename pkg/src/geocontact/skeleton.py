"""Articulated skeletons and linear blend skinning.

A skeleton is a joint tree with one 6-DOF root (three translations plus
three rotations) and 3-DOF ball joints everywhere else. Rotational DOFs
are intrinsic XYZ Euler angles applied after the joint's rest rotation, so
a zero pose vector reproduces the rest transforms exactly. Bindings skin a
mesh against per-joint world transforms the usual way:
v' = sum_k w_k T_k B_k^{-1} v.
"""

import numpy as np

from .errors import SceneError, SolveError


def quat_to_matrix(q):
    """Unit rotation matrix for a (w, x, y, z) quaternion of any length."""
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise SolveError("zero quaternion has no rotation")
    w, x, y, z = q / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1.0, 0], [-s, 0, c]])


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def _drot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[0.0, 0, 0], [0, -s, -c], [0, c, -s]])


def _drot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, 0, c], [0, 0.0, 0], [-c, 0, -s]])


def _drot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, -c, 0], [c, -s, 0], [0, 0, 0.0]])


def _affine(rot, trans):
    m = np.eye(4)
    m[:3, :3] = rot
    m[:3, 3] = trans
    return m


class Skeleton:
    """Joint tree with a 6-DOF root and 3-DOF ball joints.

    DOF layout: [0:3] root translation (x, y, z), [3:6] root rotation,
    then three rotations per further joint in joint order. Rotations are
    intrinsic XYZ Euler angles in radians.
    """

    def __init__(self, names, parents, rotations, translations,
                 lower=None, upper=None, rest=None):
        self.names = list(names)
        self.parents = np.asarray(parents, dtype=np.int64)
        self.rest_quats = np.asarray(rotations, dtype=float).reshape(-1, 4)
        self.rest_translations = np.asarray(translations, dtype=float).reshape(-1, 3)
        j = len(self.names)
        if not (len(self.parents) == len(self.rest_quats)
                == len(self.rest_translations) == j) or j == 0:
            raise SolveError("skeleton arrays must share one joint count")
        if self.parents[0] != -1 or np.any(self.parents[1:] < 0):
            raise SolveError("joint 0 must be the single root")
        if np.any(self.parents[1:] >= np.arange(1, j)):
            raise SolveError("parents must precede children (tree order)")
        if len(set(self.names)) != j:
            raise SolveError("joint names must be unique")
        self.rest_rotations = np.stack([quat_to_matrix(q) for q in self.rest_quats])

        self.n_joints = j
        self.n_dofs = 6 + 3 * (j - 1)
        self.rest = (np.zeros(self.n_dofs) if rest is None
                     else np.asarray(rest, dtype=float).copy())
        if len(self.rest) != self.n_dofs:
            raise SolveError(
                f"rest pose has {len(self.rest)} entries, skeleton has "
                f"{self.n_dofs} DOFs"
            )
        if lower is None:
            lower = self.rest - np.pi
            lower[0:3] = -np.inf
        if upper is None:
            upper = self.rest + np.pi
            upper[0:3] = np.inf
        self.lower = np.asarray(lower, dtype=float).copy()
        self.upper = np.asarray(upper, dtype=float).copy()
        if len(self.lower) != self.n_dofs or len(self.upper) != self.n_dofs:
            raise SolveError("bounds must have one entry per DOF")
        if np.any(self.lower > self.rest) or np.any(self.rest > self.upper):
            raise SolveError("bounds must bracket the rest pose")

    def joint_index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise SolveError(f"unknown joint {name!r}") from None

    def joint_dofs(self, j):
        """DOF indices owned by joint ``j`` (6 for the root, 3 otherwise)."""
        if j == 0:
            return list(range(6))
        return list(range(6 + 3 * (j - 1), 9 + 3 * (j - 1)))

    def dof_names(self):
        tags = ["tx", "ty", "tz", "rx", "ry", "rz"]
        out = [f"{self.names[0]}:{t}" for t in tags]
        for name in self.names[1:]:
            out.extend(f"{name}:{t}" for t in tags[3:])
        return out

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_dofs,):
            raise SolveError(
                f"pose vector has shape {theta.shape}, expected ({self.n_dofs},)"
            )
        return theta

    def _local_transforms(self, theta):
        out = np.empty((self.n_joints, 4, 4))
        for j in range(self.n_joints):
            if j == 0:
                t = self.rest_translations[0] + theta[0:3]
                a, b, c = theta[3:6]
            else:
                t = self.rest_translations[j]
                a, b, c = theta[6 + 3 * (j - 1): 9 + 3 * (j - 1)]
            rot = self.rest_rotations[j] @ _rot_x(a) @ _rot_y(b) @ _rot_z(c)
            out[j] = _affine(rot, t)
        return out

    def to_dict(self):
        joints = []
        for j in range(self.n_joints):
            joints.append({
                "name": self.names[j],
                "parent": int(self.parents[j]),
                "rotation": [float(x) for x in self.rest_quats[j]],
                "translation": [float(x) for x in self.rest_translations[j]],
            })
        # unbounded entries are stored as null: strict JSON has no Infinity
        return {
            "format": 1,
            "joints": joints,
            "rest": [float(x) for x in self.rest],
            "lower": [float(x) if np.isfinite(x) else None for x in self.lower],
            "upper": [float(x) if np.isfinite(x) else None for x in self.upper],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != 1:
            raise SceneError(f"unsupported rig format: {data.get('format')!r}")
        joints = data.get("joints")
        if not joints:
            raise SceneError("rig has no joints")
        names = [j["name"] for j in joints]
        parents = []
        for j in joints:
            p = j["parent"]
            if isinstance(p, str):
                if p not in names:
                    raise SceneError(f"rig parent {p!r} is not a joint name")
                p = names.index(p)
            parents.append(p)
        lower = data.get("lower")
        if lower is not None:
            lower = [-np.inf if v is None else v for v in lower]
        upper = data.get("upper")
        if upper is not None:
            upper = [np.inf if v is None else v for v in upper]
        return cls(
            names,
            parents,
            [j["rotation"] for j in joints],
            [j["translation"] for j in joints],
            lower=lower,
            upper=upper,
            rest=data.get("rest"),
        )


def forward_kinematics(skeleton, theta):
    """World transform of every joint at pose ``theta``, as (J, 4, 4)."""
    theta = skeleton.check_theta(theta)
    local = skeleton._local_transforms(theta)
    world = np.empty_like(local)
    world[0] = local[0]
    for j in range(1, skeleton.n_joints):
        world[j] = world[skeleton.parents[j]] @ local[j]
    return world


def fk_with_partials(skeleton, theta):
    """World transforms plus their derivative along every DOF.

    Returns (world (J,4,4), partials (D,J,4,4)) where partials[d, j] is
    d(world[j])/d(theta[d]).
    """
    theta = skeleton.check_theta(theta)
    nj, nd = skeleton.n_joints, skeleton.n_dofs
    local = skeleton._local_transforms(theta)
    dlocal = np.zeros((nd, 4, 4))
    for j in range(nj):
        dofs = skeleton.joint_dofs(j)
        if j == 0:
            for axis in range(3):
                dlocal[axis, axis, 3] = 1.0
            a, b, c = theta[3:6]
            rots = dofs[3:]
        else:
            a, b, c = theta[dofs[0]: dofs[0] + 3]
            rots = dofs
        r0 = skeleton.rest_rotations[j]
        rx, ry, rz = _rot_x(a), _rot_y(b), _rot_z(c)
        dlocal[rots[0], :3, :3] = r0 @ _drot_x(a) @ ry @ rz
        dlocal[rots[1], :3, :3] = r0 @ rx @ _drot_y(b) @ rz
        dlocal[rots[2], :3, :3] = r0 @ rx @ ry @ _drot_z(c)

    world = np.empty_like(local)
    partials = np.zeros((nd, nj, 4, 4))
    world[0] = local[0]
    for d in skeleton.joint_dofs(0):
        partials[d, 0] = dlocal[d]
    for j in range(1, nj):
        p = skeleton.parents[j]
        world[j] = world[p] @ local[j]
        # chain rule down the tree: either the parent already depends on
        # the DOF, or this joint owns it
        partials[:, j] = partials[:, p] @ local[j]
        for d in skeleton.joint_dofs(j):
            partials[d, j] += world[p] @ dlocal[d]
    return world, partials


class SkinBinding:
    """Sparse per-vertex joint weights plus bind-pose inverses.

    ``vertex_weights[v]`` is a list of (joint, weight) pairs; weights are
    nonnegative and sum to one within 1e-6 per vertex.
    """

    def __init__(self, vertex_weights, inverse_bind):
        self.vertex_weights = [
            [(int(j), float(w)) for j, w in vw] for vw in vertex_weights
        ]
        self.inverse_bind = np.asarray(inverse_bind, dtype=float)
        nj = len(self.inverse_bind)
        for v, vw in enumerate(self.vertex_weights):
            if not vw:
                raise SolveError(f"vertex {v} has no joint weights")
            total = 0.0
            for j, w in vw:
                if not 0 <= j < nj:
                    raise SolveError(f"vertex {v} references unknown joint {j}")
                if w < -1e-12:
                    raise SolveError(f"vertex {v} has a negative weight")
                total += w
            if abs(total - 1.0) > 1e-6:
                raise SolveError(
                    f"vertex {v} weights sum to {total}, expected 1"
                )
        # per-joint gather lists make skinning a few vectorized passes
        self._by_joint = []
        for k in range(nj):
            idx = [v for v, vw in enumerate(self.vertex_weights)
                   if any(j == k for j, _ in vw)]
            ws = [sum(w for j, w in self.vertex_weights[v] if j == k)
                  for v in idx]
            self._by_joint.append(
                (np.array(idx, dtype=np.int64), np.array(ws))
            )

    @property
    def n_vertices(self):
        return len(self.vertex_weights)

    @classmethod
    def for_skeleton(cls, skeleton, vertex_weights):
        """Binding whose bind pose is the skeleton's rest pose."""
        rest_world = forward_kinematics(skeleton, skeleton.rest)
        return cls(vertex_weights, np.linalg.inv(rest_world))

    def to_dict(self):
        return {
            "format": 1,
            "weights": [
                [[j, w] for j, w in vw] for vw in self.vertex_weights
            ],
        }

    @classmethod
    def from_dict(cls, data, skeleton):
        if data.get("format") != 1:
            raise SceneError(
                f"unsupported binding format: {data.get('format')!r}"
            )
        return cls.for_skeleton(skeleton, data["weights"])


def skin_mesh(mesh, binding, transforms):
    """Deformed vertex positions under linear blend skinning."""
    if binding.n_vertices != mesh.n_vertices:
        raise SolveError(
            f"binding covers {binding.n_vertices} vertices, mesh has "
            f"{mesh.n_vertices}"
        )
    blended = np.asarray(transforms, dtype=float) @ binding.inverse_bind
    out = np.zeros((mesh.n_vertices, 3))
    for k, (idx, ws) in enumerate(binding._by_joint):
        if len(idx) == 0:
            continue
        m = blended[k]
        moved = mesh.vertices[idx] @ m[:3, :3].T + m[:3, 3]
        out[idx] += ws[:, None] * moved
    return out
