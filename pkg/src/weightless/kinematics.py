"""Kinematic trees, forward kinematics and center of mass.

A tree is a topologically ordered list of joints. Joint 0 is the floating
root (pelvis); every other joint is either ``revolute`` (actuated, one
entry in ``q``) or ``fixed`` (a contact site such as a toe or a hand tip).
Joint ``i`` sits at ``local_offset`` in its parent's frame and rotates its
own frame, and therefore every descendant, by ``q`` about ``axis``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError
from .rotations import quat_from_axis_angle, quat_mul, quat_normalize, quat_to_matrix

TREE_FORMAT_VERSION = 1

REVOLUTE = "revolute"
FIXED = "fixed"


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None
    local_offset: tuple[float, float, float]
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    mass: float = 0.0
    com_local: tuple[float, float, float] | None = None
    kind: str = REVOLUTE
    effort_limit: float = float("inf")
    default_q: float = 0.0


@dataclass(frozen=True)
class KinematicTree:
    joints: tuple[Joint, ...]
    waist_index: int
    feet_indices: frozenset[int]
    contact_point_indices: frozenset[int]
    name: str = "tree"

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "feet_indices", frozenset(self.feet_indices))
        object.__setattr__(self, "contact_point_indices", frozenset(self.contact_point_indices))
        n = len(self.joints)
        if n == 0:
            raise ValueError("tree has no joints")
        if self.joints[0].parent is not None:
            raise ValueError("joint 0 must be the root")
        for i, j in enumerate(self.joints[1:], start=1):
            if j.parent is None:
                raise ValueError(f"joint {j.name!r} is a second root")
            if not 0 <= j.parent < i:
                raise ValueError(f"joint {j.name!r} has parent {j.parent} not earlier in the list")
            if j.kind not in (REVOLUTE, FIXED):
                raise ValueError(f"joint {j.name!r} has unknown kind {j.kind!r}")
            if j.kind == REVOLUTE and not np.isclose(np.linalg.norm(j.axis), 1.0, atol=1e-9):
                raise ValueError(f"joint {j.name!r} axis is not unit length")
        masses = np.array([j.mass for j in self.joints])
        if np.any(masses < 0) or not np.any(masses > 0):
            raise ValueError("masses must be >= 0 with at least one positive")
        for idx in (self.waist_index, *self.feet_indices, *self.contact_point_indices):
            if not 0 <= idx < n:
                raise ValueError(f"joint index {idx} out of range")

    def __len__(self):
        return len(self.joints)

    @cached_property
    def actuated(self) -> tuple[int, ...]:
        """Tree indices of the revolute joints, in ``q`` order."""
        return tuple(i for i, j in enumerate(self.joints) if i > 0 and j.kind == REVOLUTE)

    @property
    def K(self) -> int:
        return len(self.actuated)

    @cached_property
    def q_slot(self) -> dict[int, int]:
        return {ji: k for k, ji in enumerate(self.actuated)}

    @cached_property
    def parents(self) -> np.ndarray:
        return np.array([-1 if j.parent is None else j.parent for j in self.joints])

    @cached_property
    def masses(self) -> np.ndarray:
        return np.array([j.mass for j in self.joints])

    @cached_property
    def com_locals(self) -> np.ndarray:
        # default: half the mean child offset, which does not depend on sibling order
        out = np.zeros((len(self.joints), 3))
        child_sum = np.zeros((len(self.joints), 3))
        child_count = np.zeros(len(self.joints))
        for j in self.joints[1:]:
            child_sum[j.parent] += j.local_offset
            child_count[j.parent] += 1
        for i, j in enumerate(self.joints):
            if j.com_local is not None:
                out[i] = j.com_local
            elif child_count[i]:
                out[i] = 0.5 * child_sum[i] / child_count[i]
        return out

    @cached_property
    def effort_limits(self) -> np.ndarray:
        return np.array([self.joints[i].effort_limit for i in self.actuated])

    @cached_property
    def default_q(self) -> np.ndarray:
        return np.array([self.joints[i].default_q for i in self.actuated])

    def index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(name)

    def children(self, i: int) -> list[int]:
        return [c for c, j in enumerate(self.joints) if j.parent == i]

    @cached_property
    def feet_actuated_mask(self) -> np.ndarray:
        """Boolean K-mask of actuated joints designated as feet."""
        return np.array([ji in self.feet_indices for ji in self.actuated], dtype=bool)


@dataclass(frozen=True)
class Pose:
    root_position: np.ndarray
    root_orientation: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        rp = np.array(self.root_position, dtype=float).reshape(3)
        ro = np.array(self.root_orientation, dtype=float).reshape(4)
        q = np.array(self.q, dtype=float).reshape(-1)
        if abs(np.linalg.norm(ro) - 1.0) > 1e-9:
            raise ValueError(f"root orientation norm {np.linalg.norm(ro)} is not 1")
        for a in (rp, ro, q):
            a.setflags(write=False)
        object.__setattr__(self, "root_position", rp)
        object.__setattr__(self, "root_orientation", ro)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class FkResult:
    world_positions: np.ndarray
    world_orientations: np.ndarray
    world_rotations: np.ndarray = field(repr=False)


def _axis_rotation(axis, angle):
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def forward_kinematics(tree: KinematicTree, pose: Pose) -> FkResult:
    q = pose.q
    if q.shape != (tree.K,):
        raise DimensionError(f"pose has {q.shape[0]} joint values, tree expects K={tree.K}")
    n = len(tree.joints)
    pos = np.empty((n, 3))
    rot = np.empty((n, 3, 3))
    quat = np.empty((n, 4))
    pos[0] = pose.root_position
    quat[0] = pose.root_orientation
    rot[0] = quat_to_matrix(pose.root_orientation)
    slot = tree.q_slot
    for i in range(1, n):
        j = tree.joints[i]
        p = j.parent
        pos[i] = pos[p] + rot[p] @ np.asarray(j.local_offset)
        if j.kind == REVOLUTE:
            angle = q[slot[i]]
            rot[i] = rot[p] @ _axis_rotation(j.axis, angle)
            quat[i] = quat_normalize(quat_mul(quat[p], quat_from_axis_angle(j.axis, angle)))
        else:
            rot[i] = rot[p]
            quat[i] = quat[p]
    for a in (pos, quat, rot):
        a.setflags(write=False)
    return FkResult(pos, quat, rot)


def link_com_points(tree: KinematicTree, fk: FkResult) -> np.ndarray:
    return fk.world_positions + np.einsum("nij,nj->ni", fk.world_rotations, tree.com_locals)


def center_of_mass(tree: KinematicTree, fk: FkResult) -> np.ndarray:
    m = tree.masses
    total = m.sum()
    if total <= 0:
        raise ValueError("zero total mass")
    return (m[:, None] * link_com_points(tree, fk)).sum(axis=0) / total


def gravity_projection(com) -> np.ndarray:
    """Ground-plane projection of a point under gravity along -z."""
    com = np.asarray(com, dtype=float)
    return com[..., :2].copy()


# -- file format ------------------------------------------------------------

def tree_to_dict(tree: KinematicTree) -> dict:
    joints = []
    for j in tree.joints:
        d = {
            "name": j.name,
            "parent": j.parent,
            "kind": j.kind,
            "local_offset": list(j.local_offset),
            "axis": list(j.axis),
            "mass": j.mass,
        }
        if j.com_local is not None:
            d["com_local"] = list(j.com_local)
        if np.isfinite(j.effort_limit):
            d["effort_limit"] = j.effort_limit
        if j.default_q:
            d["default_q"] = j.default_q
        joints.append(d)
    return {
        "format_version": TREE_FORMAT_VERSION,
        "name": tree.name,
        "joints": joints,
        "waist": tree.joints[tree.waist_index].name,
        "feet": [tree.joints[i].name for i in sorted(tree.feet_indices)],
        "contact_points": [tree.joints[i].name for i in sorted(tree.contact_point_indices)],
    }


def tree_from_dict(d: dict) -> KinematicTree:
    version = d.get("format_version")
    if version != TREE_FORMAT_VERSION:
        raise FormatError(f"unsupported tree format_version {version!r}")
    names = [j["name"] for j in d["joints"]]
    lookup = {n: i for i, n in enumerate(names)}

    def ref(v):
        if v is None or isinstance(v, int):
            return v
        return lookup[v]

    joints = []
    for jd in d["joints"]:
        joints.append(Joint(
            name=jd["name"],
            parent=ref(jd.get("parent")),
            local_offset=tuple(float(x) for x in jd["local_offset"]),
            axis=tuple(float(x) for x in jd.get("axis", (0.0, 0.0, 1.0))),
            mass=float(jd.get("mass", 0.0)),
            com_local=tuple(float(x) for x in jd["com_local"]) if "com_local" in jd else None,
            kind=jd.get("kind", REVOLUTE if jd.get("parent") is not None else FIXED),
            effort_limit=float(jd.get("effort_limit", float("inf"))),
            default_q=float(jd.get("default_q", 0.0)),
        ))
    return KinematicTree(
        joints=tuple(joints),
        waist_index=ref(d["waist"]),
        feet_indices=frozenset(ref(v) for v in d.get("feet", [])),
        contact_point_indices=frozenset(ref(v) for v in d.get("contact_points", [])),
        name=d.get("name", "tree"),
    )


def load_tree(path) -> KinematicTree:
    with open(path) as fh:
        return tree_from_dict(json.load(fh))


def save_tree(tree: KinematicTree, path) -> None:
    Path(path).write_text(json.dumps(tree_to_dict(tree), indent=2) + "\n")


def example_tree_path() -> Path:
    return Path(__file__).parent / "data" / "g1_23dof.json"


def load_example_tree() -> KinematicTree:
    return load_tree(example_tree_path())
