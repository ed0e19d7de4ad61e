"""Contact-driven pose solving.

The objective pulls tracked points on the skinned manipulator surface onto
fixed object targets, aligns the surface normals against the object
normals, and regularizes every non-root DOF toward its rest value:

    f(theta) = sum_i w_i (l_d ||x_i - y_i||^2 + l_n ||n_i + m_i||^2)
             + sum_{j not root} l_p (theta_j - rest_j)^2

Positions and normals are evaluated on the deformed surface each time:
contact points ride their barycentric coordinates and normals come from
the skinned face geometry (area-weighted over incident faces when the
point sits on an edge or vertex). Gradients are analytic throughout.
"""

import dataclasses

import numpy as np
from scipy.optimize import minimize

from .errors import SolveError
from .skeleton import fk_with_partials, forward_kinematics


@dataclasses.dataclass
class ContactPair:
    """Aligned contacts: point i on the manipulator must land on target i
    with opposed normals. ``normals`` are unit outward object normals;
    ``weights`` scales both contact terms per point (default 1)."""

    points: list
    targets: np.ndarray
    normals: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        n = len(self.points)
        if len(self.targets) != n or len(self.normals) != n:
            raise SolveError(
                f"contact pair has {n} points but {len(self.targets)} targets "
                f"and {len(self.normals)} normals"
            )
        if self.weights is None:
            self.weights = np.ones(n)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.weights) != n:
            raise SolveError("contact weights must match the point count")
        if np.any(self.weights < 0):
            raise SolveError("contact weights must be nonnegative")
        if n and np.max(np.abs(np.linalg.norm(self.normals, axis=1) - 1.0)) > 1e-6:
            raise SolveError("object normals must be unit length")

    def __len__(self):
        return len(self.points)


@dataclasses.dataclass
class SolveConfig:
    """Weights, stopping rules, and the frozen-DOF mask for one solve."""

    lambda_d: float = 1.0
    lambda_n: float = 1.0
    lambda_p: float = 10.0
    max_iterations: int = 500
    tolerance: float = 1e-8
    mask: object = None
    trace: bool = False

    def __post_init__(self):
        if min(self.lambda_d, self.lambda_n, self.lambda_p) < 0:
            raise SolveError("objective weights must be nonnegative")
        if self.max_iterations < 1:
            raise SolveError("max_iterations must be at least 1")
        if self.tolerance < 0:
            raise SolveError("tolerance must be nonnegative")


@dataclasses.dataclass
class ContactScene:
    """Everything one solve needs: the manipulator mesh with its skeleton
    and binding, plus the contact pairs to satisfy."""

    mesh: object
    skeleton: object
    binding: object
    pairs: list

    def __post_init__(self):
        if self.binding.n_vertices != self.mesh.n_vertices:
            raise SolveError(
                f"binding covers {self.binding.n_vertices} vertices, mesh "
                f"has {self.mesh.n_vertices}"
            )
        self.pairs = list(self.pairs)


@dataclasses.dataclass
class SolveResult:
    theta: np.ndarray
    objective: float
    trace: list
    converged: bool
    iterations: int
    stages: list = None


def _frozen_mask(mask, n_dofs):
    if mask is None:
        return np.zeros(n_dofs, dtype=bool)
    mask = np.asarray(mask)
    if mask.size == 0:
        return np.zeros(n_dofs, dtype=bool)
    if mask.dtype == bool:
        if mask.shape != (n_dofs,):
            raise SolveError(
                f"mask has shape {mask.shape}, expected ({n_dofs},)"
            )
        return mask.copy()
    out = np.zeros(n_dofs, dtype=bool)
    idx = mask.astype(np.int64, casting="safe").reshape(-1)
    if len(idx) and (idx.min() < 0 or idx.max() >= n_dofs):
        raise SolveError("mask references a DOF out of range")
    out[idx] = True
    return out


class _Objective:
    """Precomputed contact supports plus value/gradient evaluation."""

    def __init__(self, scene, config):
        self.config = config
        self.skel = scene.skeleton
        self.binv = scene.binding.inverse_bind
        mesh = scene.mesh
        items = []
        for pair in scene.pairs:
            for i in range(len(pair)):
                p = mesh.normalize_point(pair.points[i])
                if p.kind == "face":
                    sup = [
                        (int(v), float(w))
                        for v, w in zip(mesh.faces[p.index], p.bary)
                    ]
                elif p.kind == "edge":
                    a, b = mesh.edge_vertices[p.index]
                    sup = [(int(a), float(p.bary[0])), (int(b), float(p.bary[1]))]
                else:
                    sup = [(int(p.index), 1.0)]
                tris = [
                    tuple(int(v) for v in mesh.faces[f])
                    for f in mesh.faces_of_point(p)
                ]
                items.append(
                    (sup, tris, pair.targets[i].copy(), pair.normals[i].copy(),
                     float(pair.weights[i]))
                )
        self.items = items
        used = {v for sup, tris, *_ in items for v, _ in sup}
        used |= {v for _, tris, *_ in items for tri in tris for v in tri}
        self.vset = sorted(used)
        self.vweights = {v: scene.binding.vertex_weights[v] for v in self.vset}
        self.vrest = {v: mesh.vertices[v].copy() for v in self.vset}

    def _skinned(self, theta, with_grad):
        nd = self.skel.n_dofs
        if with_grad:
            world, parts = fk_with_partials(self.skel, theta)
            dblend = parts @ self.binv
        else:
            world = forward_kinematics(self.skel, theta)
            dblend = None
        blend = world @ self.binv
        pos, dpos = {}, {}
        for v in self.vset:
            x = self.vrest[v]
            acc = np.zeros(3)
            dacc = np.zeros((nd, 3)) if with_grad else None
            for j, w in self.vweights[v]:
                m = blend[j]
                acc += w * (m[:3, :3] @ x + m[:3, 3])
                if with_grad:
                    dm = dblend[:, j]
                    dacc += w * (dm[:, :3, :3] @ x + dm[:, :3, 3])
            pos[v] = acc
            if with_grad:
                dpos[v] = dacc
        return pos, dpos

    def _evaluate(self, theta, with_grad):
        theta = self.skel.check_theta(theta)
        cfg = self.config
        nd = self.skel.n_dofs
        pos, dpos = self._skinned(theta, with_grad)
        f = 0.0
        grad = np.zeros(nd) if with_grad else None
        for sup, tris, target, m_obj, weight in self.items:
            x = np.zeros(3)
            dx = np.zeros((nd, 3)) if with_grad else None
            for v, w in sup:
                x += w * pos[v]
                if with_grad:
                    dx += w * dpos[v]
            diff = x - target
            f += weight * cfg.lambda_d * float(diff @ diff)
            if with_grad:
                grad += weight * cfg.lambda_d * 2.0 * (dx @ diff)
            if cfg.lambda_n == 0.0:
                continue
            raw = np.zeros(3)
            draw = np.zeros((nd, 3)) if with_grad else None
            for a, b, c in tris:
                e1 = pos[b] - pos[a]
                e2 = pos[c] - pos[a]
                raw += np.cross(e1, e2)
                if with_grad:
                    de1 = dpos[b] - dpos[a]
                    de2 = dpos[c] - dpos[a]
                    draw += np.cross(de1, e2) + np.cross(e1, de2)
            r = float(np.linalg.norm(raw))
            if r == 0.0:
                raise SolveError("contact normal degenerated to zero")
            n = raw / r
            mis = n + m_obj
            f += weight * cfg.lambda_n * float(mis @ mis)
            if with_grad:
                dn = (draw - np.outer(draw @ n, n)) / r
                grad += weight * cfg.lambda_n * 2.0 * (dn @ mis)
        if cfg.lambda_p > 0.0:
            dev = theta[6:] - self.skel.rest[6:]
            f += cfg.lambda_p * float(dev @ dev)
            if with_grad:
                grad[6:] += 2.0 * cfg.lambda_p * dev
        if with_grad:
            return f, grad
        return f

    def value(self, theta):
        return self._evaluate(theta, False)

    def value_and_grad(self, theta):
        return self._evaluate(theta, True)


def objective(theta, scene, config=None):
    """Eq. objective value at pose ``theta``."""
    return _Objective(scene, config or SolveConfig()).value(theta)


def objective_gradient(theta, scene, config=None):
    """Objective value and its analytic gradient, as (f, (D,))."""
    return _Objective(scene, config or SolveConfig()).value_and_grad(theta)


def _effective_bounds(scene):
    """Per-DOF box: skeleton bounds, with unbounded root translations
    replaced by rest +- twice the mesh bounding-box diagonal."""
    skel = scene.skeleton
    lower = skel.lower.copy()
    upper = skel.upper.copy()
    span = 2.0 * scene.mesh.bbox_diagonal()
    for d in range(3):
        if not np.isfinite(lower[d]):
            lower[d] = skel.rest[d] - span
        if not np.isfinite(upper[d]):
            upper[d] = skel.rest[d] + span
    return lower, upper


def solve(scene, config=None, theta0=None, progress=None, should_stop=None):
    """Box-constrained local minimization of the contact objective.

    Starts from the rest pose unless ``theta0`` supplies a prior (free
    DOFs are clipped into bounds). Masked DOFs keep their initial values
    exactly. Runs the optimizer in 5-iteration bursts and stops once the
    objective decrease over a burst falls below the configured tolerance;
    hitting the iteration cap sets ``converged=False`` on the result
    instead of raising.

    ``progress(iteration, objective)`` is invoked after every optimizer
    iteration (and once for the initial pose); ``should_stop()`` is
    polled between bursts and ends the solve early with
    ``converged=False`` when it returns true.
    """
    config = config if config is not None else SolveConfig()
    skel = scene.skeleton
    base = np.array(skel.rest if theta0 is None else theta0, dtype=float)
    skel.check_theta(base)
    lower, upper = _effective_bounds(scene)
    frozen = _frozen_mask(config.mask, skel.n_dofs)
    free = ~frozen
    base[free] = np.clip(base[free], lower[free], upper[free])

    obj = _Objective(scene, config)
    f0 = obj.value(base)
    if not np.isfinite(f0):
        raise SolveError("objective is not finite at the initial pose")
    trace = [(0, float(f0))]
    if progress is not None:
        progress(0, float(f0))
    if not np.any(free):
        return SolveResult(base, float(f0), trace if config.trace else [],
                           True, 0)

    def reduced(x):
        th = base.copy()
        th[free] = x
        f, g = obj.value_and_grad(th)
        return f, g[free]

    bounds = list(zip(lower[free], upper[free]))
    x = base[free].copy()
    it = 0
    f_prev = f0
    f_now = f0
    converged = False
    burst = 5
    while it < config.max_iterations:
        if should_stop is not None and should_stop():
            break
        chunk = min(burst, config.max_iterations - it)
        seen = []

        def record(xk):
            th = base.copy()
            th[free] = xk
            fv = float(obj.value(th))
            seen.append(fv)
            if progress is not None:
                progress(it + len(seen), fv)

        res = minimize(
            reduced, x, jac=True, method="L-BFGS-B", bounds=bounds,
            callback=record,
            options={"maxiter": chunk, "ftol": 0.0, "gtol": 1e-14,
                     "maxls": 60},
        )
        x = np.asarray(res.x, dtype=float)
        for fv in seen:
            it += 1
            trace.append((it, float(fv)))
        f_now = float(res.fun)
        if not np.isfinite(f_now):
            raise SolveError("objective became non-finite during the solve")
        if f_prev - f_now < config.tolerance:
            converged = True
            break
        if res.nit < chunk:
            # the optimizer gave up inside the burst; no further progress
            converged = True
            break
        f_prev = f_now
    theta = base.copy()
    theta[free] = x
    return SolveResult(theta, f_now, trace if config.trace else [],
                       converged, it)


def staged_solve(scene, stages, theta0=None):
    """Run ``stages`` (each a SolveConfig, typically with its own mask) in
    order, warm-starting each from the previous result. Returns the final
    SolveResult with per-stage results attached and traces concatenated."""
    if not stages:
        raise SolveError("staged solve needs at least one stage")
    theta = theta0
    results = []
    for config in stages:
        results.append(solve(scene, config, theta))
        theta = results[-1].theta
    last = results[-1]
    trace = []
    offset = 0
    for r in results:
        trace.extend((offset + i, f) for i, f in r.trace)
        offset += r.iterations
    return SolveResult(last.theta, last.objective, trace, last.converged,
                       sum(r.iterations for r in results), stages=results)
