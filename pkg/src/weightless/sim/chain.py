"""Planar articulated bodies with penalty contact.

Everything lives in the world x-z plane. Angles follow a right-handed
rotation about +y, so a body at angle ``phi`` maps its rest direction
``(dx, dz)`` to ``(cos(phi) dx + sin(phi) dz, -sin(phi) dx + cos(phi) dz)``.
This matches :func:`weightless.kinematics.forward_kinematics` for joints with
axis ``(0, 1, 0)``, which is what lets :meth:`PlanarChain.to_tree` hand the
same robot to the labeling code.

Each body is a uniform rod. The base rod is floating with coordinates
``(x, z, pitch)``; every other rod hangs off a parent rod at a fraction of
the parent's length through a revolute joint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import DimensionError, SimulationDiverged
from ..geometry import TerrainScene
from ..kinematics import FIXED, REVOLUTE, Joint, KinematicTree

GRAVITY = 9.81
CONTACT_STIFFNESS = 2e4  # N/m
CONTACT_DAMPING = 200.0  # N s/m
TANGENT_DAMPING = 1000.0  # N s/m, viscous stick model under the Coulomb cap
DT = 1e-3


@dataclass(frozen=True)
class Rod:
    name: str
    length: float
    mass: float
    direction: tuple[float, float] = (0.0, -1.0)
    parent: int = -1  # body index; -1 only for the base
    attach: float = 1.0

    def __post_init__(self):
        if not (self.length > 0 and self.mass > 0):
            raise ValueError(f"rod {self.name!r} needs positive length and mass")
        d = np.asarray(self.direction, dtype=float)
        object.__setattr__(self, "direction", tuple(d / np.linalg.norm(d)))


@dataclass(frozen=True)
class PlanarChain:
    base: Rod
    links: tuple[Rod, ...]
    kp: np.ndarray
    kd: np.ndarray
    effort_limit: np.ndarray
    joint_damping: np.ndarray | None = None
    joint_names: tuple[str, ...] | None = None
    contact_points: tuple[tuple[int, float], ...] | None = None
    fixed_base: bool = False
    contact_stiffness: float = CONTACT_STIFFNESS
    contact_damping: float = CONTACT_DAMPING
    tangent_damping: float = TANGENT_DAMPING
    friction: float = 1.0
    gravity: float = GRAVITY

    def __post_init__(self):
        links = tuple(self.links)
        n = len(links)
        if n < 1:
            raise ValueError("a chain needs at least one joint")
        object.__setattr__(self, "links", links)
        for b, link in enumerate(links, start=1):
            if not 0 <= link.parent < b:
                raise ValueError(f"link {link.name!r} must attach to an earlier body")
        for name in ("kp", "kd", "effort_limit"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            if a.shape == (1,):
                a = np.repeat(a, n)
            if a.shape != (n,):
                raise DimensionError(f"{name} must have {n} entries")
            object.__setattr__(self, name, a)
        jd = np.zeros(n) if self.joint_damping is None else np.broadcast_to(
            np.asarray(self.joint_damping, dtype=float), (n,)).copy()
        object.__setattr__(self, "joint_damping", jd)
        if self.joint_names is None:
            object.__setattr__(self, "joint_names", tuple(link.name for link in links))
        if self.contact_points is None:
            cps = [(0, 0.0), (0, 1.0)]
            for b, link in enumerate(links, start=1):
                if link.attach not in (0.0, 1.0):
                    cps.append((b, 0.0))
                cps.append((b, 1.0))
            object.__setattr__(self, "contact_points", tuple(cps))

    @property
    def n_joints(self) -> int:
        return len(self.links)

    @property
    def n_dof(self) -> int:
        return 3 + self.n_joints

    @property
    def bodies(self) -> tuple[Rod, ...]:
        return (self.base, *self.links)

    def arrays(self) -> dict:
        bodies = self.bodies
        mass = np.array([b.mass for b in bodies])
        length = np.array([b.length for b in bodies])
        return dict(
            parent=np.array([-1] + [link.parent for link in self.links], dtype=np.int32),
            attach=np.array([0.0] + [link.attach for link in self.links]),
            length=length,
            mass=mass,
            inertia=mass * length ** 2 / 12.0,
            direction=np.array([b.direction for b in bodies], dtype=float),
            cp_body=np.array([b for b, _ in self.contact_points], dtype=np.int32),
            cp_frac=np.array([f for _, f in self.contact_points], dtype=float),
        )

    def contact_point_names(self) -> list[str]:
        names = []
        for b, f in self.contact_points:
            body = self.bodies[b].name
            names.append(f"{body}_tip" if f == 1.0 else body if f == 0.0 else f"{body}@{f:g}")
        return names

    # -- kinematics ---------------------------------------------------------

    def body_frames(self, x):
        """Joint points ``(nb, 2)``, rod directions ``(nb, 2)`` and absolute angles."""
        x = np.asarray(x, dtype=float)
        nb = len(self.bodies)
        phi = np.empty(nb)
        P = np.empty((nb, 2))
        U = np.empty((nb, 2))
        for b, body in enumerate(self.bodies):
            if b == 0:
                phi[0] = x[2]
                P[0] = x[:2]
            else:
                p = body.parent
                phi[b] = phi[p] + x[2 + b]
                P[b] = P[p] + body.attach * self.bodies[p].length * U[p]
            c, s = np.cos(phi[b]), np.sin(phi[b])
            dx, dz = body.direction
            U[b] = (c * dx + s * dz, -s * dx + c * dz)
        return P, U, phi

    def contact_point_positions(self, x) -> np.ndarray:
        P, U, _ = self.body_frames(x)
        return np.array([P[b] + f * self.bodies[b].length * U[b] for b, f in self.contact_points])

    def com(self, x) -> np.ndarray:
        P, U, _ = self.body_frames(x)
        m = np.array([b.mass for b in self.bodies])
        pts = np.array([P[b] + 0.5 * body.length * U[b] for b, body in enumerate(self.bodies)])
        return (m[:, None] * pts).sum(0) / m.sum()

    def body_velocities(self, x, v):
        """COM velocities ``(nb, 2)`` and absolute angular rates ``(nb,)``."""
        P, U, _ = self.body_frames(x)
        nb = len(self.bodies)
        dphi = np.empty(nb)
        Pd = np.empty((nb, 2))
        cv = np.empty((nb, 2))
        for b, body in enumerate(self.bodies):
            if b == 0:
                dphi[0] = v[2]
                Pd[0] = v[:2]
            else:
                p = body.parent
                dphi[b] = dphi[p] + v[2 + b]
                r = body.attach * self.bodies[p].length
                Pd[b] = Pd[p] + r * dphi[p] * np.array([U[p, 1], -U[p, 0]])
            h = 0.5 * body.length
            cv[b] = Pd[b] + h * dphi[b] * np.array([U[b, 1], -U[b, 0]])
        return cv, dphi

    def energy(self, state: "SimState", scene: TerrainScene | None = None) -> float:
        """Kinetic + gravitational + penalty-spring energy."""
        x, v = state.x, state.v
        P, U, _ = self.body_frames(x)
        cv, dphi = self.body_velocities(x, v)
        ke = pe = 0.0
        for b, body in enumerate(self.bodies):
            c = P[b] + 0.5 * body.length * U[b]
            ke += 0.5 * body.mass * float(cv[b] @ cv[b]) + 0.5 * body.mass * body.length ** 2 / 12.0 * dphi[b] ** 2
            pe += body.mass * self.gravity * c[1]
        se = 0.0
        if scene is not None:
            rects = planar_rects(scene)
            for p in self.contact_point_positions(x):
                d = [p[1] - scene.ground_height] + [_rect_sd(p, r) for r in rects]
                se += sum(0.5 * self.contact_stiffness * min(di, 0.0) ** 2 for di in d)
        return ke + pe + se

    def with_params(self, **kw) -> "PlanarChain":
        from dataclasses import replace
        return replace(self, **kw)

    # -- tree export --------------------------------------------------------

    def to_tree(self, waist: str, feet: tuple[str, ...], contact_points: tuple[str, ...] | None = None) -> KinematicTree:
        """Equivalent 3-D kinematic tree with revolute joints about +y.

        Rod tips become fixed joints named ``<rod>_tip``. The base rod's
        proximal end is the tree root.
        """
        bodies = self.bodies
        joints = []
        index_of_body = {}
        for b, body in enumerate(bodies):
            com = (0.5 * body.length * body.direction[0], 0.0, 0.5 * body.length * body.direction[1])
            if b == 0:
                joints.append(Joint(body.name, None, (0.0, 0.0, 0.0), mass=body.mass, com_local=com, kind=FIXED))
            else:
                par = bodies[body.parent]
                r = body.attach * par.length
                off = (r * par.direction[0], 0.0, r * par.direction[1])
                joints.append(Joint(
                    self.joint_names[b - 1], index_of_body[body.parent], off, axis=(0.0, 1.0, 0.0),
                    mass=body.mass, com_local=com, kind=REVOLUTE, effort_limit=float(self.effort_limit[b - 1]),
                ))
            index_of_body[b] = len(joints) - 1
        for b, body in enumerate(bodies):
            tip = (body.length * body.direction[0], 0.0, body.length * body.direction[1])
            joints.append(Joint(f"{body.name}_tip", index_of_body[b], tip, kind=FIXED))
        names = [j.name for j in joints]
        lookup = {n: i for i, n in enumerate(names)}
        if contact_points is None:
            contact_points = tuple(names)
        return KinematicTree(
            joints=tuple(joints),
            waist_index=lookup[waist],
            feet_indices=frozenset(lookup[f] for f in feet),
            contact_point_indices=frozenset(lookup[c] for c in contact_points),
            name="planar_chain",
        )


@dataclass(frozen=True)
class ContactReport:
    normal_force: np.ndarray  # per contact point, N
    penetration: np.ndarray  # per contact point, m, >= 0
    primitive: np.ndarray  # -1 none, 0 ground, i >= 1 scene box i-1

    def touching(self, primitive: int | None = None) -> np.ndarray:
        if primitive is None:
            return self.primitive >= 0
        return self.primitive == primitive


@dataclass(frozen=True)
class SimState:
    x: np.ndarray  # (x, z, pitch, q...)
    v: np.ndarray
    time: float = 0.0
    contacts: ContactReport | None = field(default=None, compare=False)

    @property
    def q(self):
        return self.x[3:]

    @property
    def qd(self):
        return self.v[3:]


def initial_state(chain: PlanarChain, base=(0.0, 1.0, 0.0), q=None) -> SimState:
    q = np.zeros(chain.n_joints) if q is None else np.asarray(q, dtype=float)
    if q.shape != (chain.n_joints,):
        raise DimensionError(f"q must have {chain.n_joints} entries")
    x = np.concatenate([np.asarray(base, dtype=float), q])
    return SimState(x, np.zeros(chain.n_dof), 0.0)


def planar_rects(scene: TerrainScene) -> np.ndarray:
    """Cross-sections of the scene's boxes with the plane y = 0, as (x0, x1, z0, z1)."""
    rects = []
    for box in scene.boxes:
        cx, cy, cz = box.center
        hx, hy, hz = box.half_extents
        c, s = np.cos(box.yaw), np.sin(box.yaw)
        # points (x, 0) with |c(x-cx) + s(-cy)| <= hx and |-s(x-cx) + c(-cy)| <= hy
        lo, hi = -np.inf, np.inf
        # box-frame coordinates of (x, 0): |c X - s cy| <= hx and |-s X - c cy| <= hy, X = x - cx
        for a, b0, h in ((c, -s * cy, hx), (-s, -c * cy, hy)):
            if abs(a) < 1e-15:
                if abs(b0) > h:
                    lo, hi = np.inf, -np.inf
                continue
            e1 = (-h - b0) / a
            e2 = (h - b0) / a
            lo = max(lo, min(e1, e2))
            hi = min(hi, max(e1, e2))
        if hi >= lo:
            rects.append((cx + lo, cx + hi, cz - hz, cz + hz))
    return np.array(rects, dtype=float).reshape(-1, 4)


def _rect_sd(p, rect):
    d, _, _ = kernels.python_backend._rect_contact(float(p[0]), float(p[1]), rect)
    return d


def step(chain: PlanarChain, state: SimState, torques, scene: TerrainScene, dt: float = DT,
         substeps: int = 1, q_des=None, w=None, friction: float | None = None,
         backend=None) -> SimState:
    """Advance ``substeps`` integration steps of length ``dt``.

    Joint torque each substep is ``w * clip(kp (q_des - q) - kd qd + torques)``
    when ``q_des`` is given, and ``w * clip(torques)`` otherwise.
    """
    if not 0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01]")
    n = chain.n_joints
    tau_ff = np.zeros(n) if torques is None else np.array(torques, dtype=float).reshape(n)
    if not np.all(np.isfinite(tau_ff)):
        raise ValueError("torques must be finite")
    if q_des is None:
        q_des = np.zeros(n)
        kp = kd = np.zeros(n)
    else:
        q_des = np.array(q_des, dtype=float).reshape(n)
        kp, kd = chain.kp, chain.kd
    w = np.ones(n) if w is None else np.array(w, dtype=float).reshape(n)
    arr = chain.arrays()
    x = state.x.copy()
    v = state.v.copy()
    ncp = len(chain.contact_points)
    fn = np.zeros(ncp)
    pen = np.zeros(ncp)
    prim = np.full(ncp, -1, dtype=np.int32)
    impl = backend or kernels
    status = impl.planar_substeps(
        x, v, arr["parent"], arr["attach"], arr["length"], arr["mass"], arr["inertia"],
        np.ascontiguousarray(arr["direction"]), arr["cp_body"], arr["cp_frac"],
        np.ascontiguousarray(planar_rects(scene)), float(scene.ground_height),
        np.ascontiguousarray(q_des), np.ascontiguousarray(kp, dtype=float), np.ascontiguousarray(kd, dtype=float),
        np.ascontiguousarray(chain.effort_limit), np.ascontiguousarray(w), tau_ff,
        np.ascontiguousarray(chain.joint_damping),
        float(chain.gravity), float(chain.contact_stiffness), float(chain.contact_damping),
        float(chain.tangent_damping), float(chain.friction if friction is None else friction),
        float(dt), int(substeps), bool(chain.fixed_base), fn, pen, prim,
    )
    if status:
        raise SimulationDiverged(f"non-finite state near t={state.time + substeps * dt:.4f}s")
    return SimState(x, v, state.time + substeps * dt, ContactReport(fn, pen, prim))
