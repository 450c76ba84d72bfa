"""Tracking rewards, termination and actor/critic observation vectors."""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import DimensionError
from .geometry import HEIGHT_GRID_COLS, HEIGHT_GRID_ROWS
from .kinematics import KinematicTree, forward_kinematics
from .motion import MotionSequence
from .rotations import geodesic_angle, quat_rotate, quat_conj, wrap_angle, yaw_of

OBS_FORMAT_VERSION = 1
HEIGHT_DIM = HEIGHT_GRID_ROWS * HEIGHT_GRID_COLS
DEFAULT_HISTORY = 5
GRAVITY_DIR = np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True)
class RewardWeights:
    keypoint_position: float = 3.00
    root_rotation: float = 0.5
    root_velocity: float = 0.75
    joint_position_no_feet: float = 32.0
    joint_velocity_no_feet: float = 0.5
    termination: float = -200.0
    joint_acceleration: float = -2.5e-8
    joint_velocity: float = -0.001
    action_rate: float = -0.5
    torque: float = -1e-6
    feet_orientation: float = -62.5
    feet_heading: float = -1e-5

    def to_dict(self) -> dict:
        return asdict(self)


TERMS = tuple(f.name for f in fields(RewardWeights))
TASK_TERMS = TERMS[:5]


def _arr(a, shape=None, name="array"):
    a = np.asarray(a, dtype=float)
    if shape is not None and a.shape != shape:
        raise DimensionError(f"{name} has shape {a.shape}, expected {shape}")
    return a


@dataclass(frozen=True)
class FrameState:
    """What the simulator knows about the robot at one control step."""

    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    root_orientation: np.ndarray  # (4,) wxyz
    root_velocity: np.ndarray  # (3,) world
    root_angular_velocity: np.ndarray  # (3,) base frame
    keypoints: np.ndarray  # (J, 3)
    action: np.ndarray
    prev_action: np.ndarray
    torque: np.ndarray
    feet_orientations: np.ndarray  # (F, 4)
    terminated: bool = False

    def __post_init__(self):
        K = _arr(self.q).reshape(-1).shape[0]
        for name in ("q", "qd", "qdd", "action", "prev_action", "torque"):
            object.__setattr__(self, name, _arr(getattr(self, name), (K,), name))
        object.__setattr__(self, "root_orientation", _arr(self.root_orientation, (4,), "root_orientation"))
        object.__setattr__(self, "root_velocity", _arr(self.root_velocity, (3,), "root_velocity"))
        object.__setattr__(self, "root_angular_velocity",
                           _arr(self.root_angular_velocity, (3,), "root_angular_velocity"))
        kp = _arr(self.keypoints)
        if kp.ndim != 2 or kp.shape[1] != 3:
            raise DimensionError(f"keypoints must be (J, 3), got {kp.shape}")
        object.__setattr__(self, "keypoints", kp)
        fo = _arr(self.feet_orientations).reshape(-1, 4)
        object.__setattr__(self, "feet_orientations", fo)
        object.__setattr__(self, "terminated", bool(self.terminated))

    @property
    def K(self) -> int:
        return self.q.shape[0]

    def projected_gravity(self) -> np.ndarray:
        """Gravity direction in the base frame."""
        return quat_rotate(quat_conj(self.root_orientation), GRAVITY_DIR)

    @classmethod
    def zeros(cls, K: int, n_keypoints: int = 1, n_feet: int = 0) -> "FrameState":
        z = np.zeros(K)
        feet = np.tile([1.0, 0.0, 0.0, 0.0], (n_feet, 1))
        return cls(z, z, z, np.array([1.0, 0, 0, 0]), np.zeros(3), np.zeros(3), np.zeros((n_keypoints, 3)),
                   z, z, z, feet)


@dataclass(frozen=True)
class ReferenceFrame:
    """Targets for one step. ``d``/``d_dot`` cover the joints where ``feet_mask`` is False."""

    keypoints: np.ndarray
    root_orientation: np.ndarray
    root_velocity: np.ndarray
    d: np.ndarray
    d_dot: np.ndarray
    feet_mask: np.ndarray  # (K,) bool
    q: np.ndarray | None = None  # full reference joints, for observations
    qd: np.ndarray | None = None

    def __post_init__(self):
        mask = np.asarray(self.feet_mask, dtype=bool).reshape(-1)
        object.__setattr__(self, "feet_mask", mask)
        nd = int((~mask).sum())
        object.__setattr__(self, "d", _arr(self.d, (nd,), "d"))
        object.__setattr__(self, "d_dot", _arr(self.d_dot, (nd,), "d_dot"))
        object.__setattr__(self, "keypoints", _arr(self.keypoints))
        object.__setattr__(self, "root_orientation", _arr(self.root_orientation, (4,), "root_orientation"))
        object.__setattr__(self, "root_velocity", _arr(self.root_velocity, (3,), "root_velocity"))
        K = mask.shape[0]
        for name in ("q", "qd"):
            v = getattr(self, name)
            object.__setattr__(self, name, np.zeros(K) if v is None else _arr(v, (K,), name))

    @classmethod
    def from_state(cls, s: FrameState, feet_mask) -> "ReferenceFrame":
        """The reference that ``s`` tracks perfectly."""
        m = np.asarray(feet_mask, dtype=bool)
        return cls(s.keypoints, s.root_orientation, s.root_velocity, s.q[~m], s.qd[~m], m, s.q, s.qd)


def _feet_gravity_xy(s: FrameState) -> float:
    total = 0.0
    for qf in s.feet_orientations:
        g = quat_rotate(quat_conj(qf), GRAVITY_DIR)
        total += float(np.hypot(g[0], g[1]))
    return total


def _feet_heading(s: FrameState) -> float:
    root_yaw = yaw_of(s.root_orientation)
    return float(sum(abs(wrap_angle(yaw_of(qf) - root_yaw)) for qf in s.feet_orientations))


def reward_term(name: str, s: FrameState, ref: ReferenceFrame) -> float:
    """Unweighted value of one reward row."""
    if name not in TERMS:
        raise KeyError(f"unknown reward term {name!r}; known: {', '.join(TERMS)}")
    if ref.feet_mask.shape[0] != s.K:
        raise DimensionError(f"reference feet mask has {ref.feet_mask.shape[0]} joints, state has {s.K}")
    keep = ~ref.feet_mask
    if name == "keypoint_position":
        if ref.keypoints.shape != s.keypoints.shape:
            raise DimensionError(f"keypoints {s.keypoints.shape} vs reference {ref.keypoints.shape}")
        return float(np.exp(-0.1 * np.sum((s.keypoints - ref.keypoints) ** 2)))
    if name == "root_rotation":
        return float(np.exp(-1.0 * geodesic_angle(s.root_orientation, ref.root_orientation)))
    if name == "root_velocity":
        return float(np.exp(-1.0 * np.linalg.norm(s.root_velocity - ref.root_velocity)))
    if name == "joint_position_no_feet":
        return float(np.exp(-1.0 * np.sum((s.q[keep] - ref.d) ** 2)))
    if name == "joint_velocity_no_feet":
        return float(np.exp(-1.0 * np.sum((s.qd[keep] - ref.d_dot) ** 2)))
    if name == "termination":
        return 1.0 if s.terminated else 0.0
    if name == "joint_acceleration":
        return float(np.linalg.norm(s.qdd))
    if name == "joint_velocity":
        return float(np.linalg.norm(s.qd))
    if name == "action_rate":
        return float(np.linalg.norm(s.action - s.prev_action))
    if name == "torque":
        return float(np.linalg.norm(s.torque))
    if name == "feet_orientation":
        return _feet_gravity_xy(s)
    return _feet_heading(s)


def total_reward(s: FrameState, ref: ReferenceFrame,
                 weights: RewardWeights = RewardWeights()) -> tuple[float, dict[str, float]]:
    """Weighted sum and the weighted per-row breakdown, in row order.

    A terminated step earns the termination penalty alone; the other rows
    are reported as zero.
    """
    w = weights.to_dict()
    if s.terminated:
        breakdown = {name: 0.0 for name in TERMS}
        breakdown["termination"] = w["termination"] * 1.0
        return float(breakdown["termination"]), breakdown
    breakdown = {name: w[name] * reward_term(name, s, ref) for name in TERMS}
    return float(sum(breakdown.values())), breakdown


def write_breakdown_csv(rows, path) -> None:
    """``rows``: iterable of ``(total, breakdown)`` pairs, one per frame."""
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["frame", *TERMS, "total"])
        for t, (total, br) in enumerate(rows):
            wr.writerow([t, *(repr(float(br[n])) for n in TERMS), repr(float(total))])


# -- sequence-pair evaluation ---------------------------------------------------

def frame_states(seq: MotionSequence, tree: KinematicTree) -> list[FrameState]:
    """States read off a motion: FK keypoints, differentiated velocities.

    Actions and torques are not part of a motion file and are taken as zero.
    """
    if seq.K != tree.K:
        raise DimensionError(f"sequence K={seq.K} vs tree K={tree.K}")
    qd = seq.velocities()
    qdd = np.gradient(qd, 1.0 / seq.fps, axis=0) if len(seq) > 1 else np.zeros_like(qd)
    vroot = seq.root_velocities()
    feet = sorted(tree.feet_indices)
    zero = np.zeros(seq.K)
    out = []
    for t in range(len(seq)):
        fk = forward_kinematics(tree, seq.pose(t))
        out.append(FrameState(seq.q[t], qd[t], qdd[t], seq.root_orientations[t], vroot[t], np.zeros(3),
                              fk.world_positions, zero, zero, zero, fk.world_orientations[feet]))
    return out


def sequence_rewards(result: MotionSequence, reference: MotionSequence, tree: KinematicTree,
                     weights: RewardWeights = RewardWeights()) -> list[tuple[float, dict]]:
    if len(result) != len(reference) or result.fps != reference.fps:
        raise DimensionError("result and reference must share length and fps")
    mask = tree.feet_actuated_mask
    refs = [ReferenceFrame.from_state(r, mask) for r in frame_states(reference, tree)]
    return [total_reward(s, r, weights) for s, r in zip(frame_states(result, tree), refs)]


# -- observations ------------------------------------------------------------------

@dataclass(frozen=True)
class ObsLayout:
    K: int
    n_history: int = DEFAULT_HISTORY
    critic: bool = False

    @property
    def step_blocks(self) -> tuple[tuple[str, int], ...]:
        K = self.K
        return (("q", K), ("qd", K), ("root_angular_velocity", 3), ("projected_gravity", 3),
                ("prev_action", K), ("ref_q", K), ("ref_qd", K), ("height_map", HEIGHT_DIM))

    @property
    def step_size(self) -> int:
        return sum(n for _, n in self.step_blocks)

    @property
    def privileged_blocks(self) -> tuple[tuple[str, int], ...]:
        return (("root_velocity", 3), ("friction", 1), ("external_force", 3)) if self.critic else ()

    @property
    def actor_size(self) -> int:
        return self.step_size * (1 + self.n_history)

    @property
    def size(self) -> int:
        return self.actor_size + sum(n for _, n in self.privileged_blocks)

    def entries(self) -> list[dict]:
        """Flat manifest: name, offset, size, and whether the field is privileged."""
        out, off = [], 0
        for name, n in self.step_blocks:
            out.append({"name": name, "offset": off, "size": n, "privileged": False})
            off += n
        for k in range(self.n_history):
            lag = self.n_history - k
            out.append({"name": f"history[t-{lag}]", "offset": off, "size": self.step_size, "privileged": False})
            off += self.step_size
        for name, n in self.privileged_blocks:
            out.append({"name": name, "offset": off, "size": n, "privileged": True})
            off += n
        return out

    def to_dict(self) -> dict:
        return {"format_version": OBS_FORMAT_VERSION, "K": self.K, "n_history": self.n_history,
                "critic": self.critic, "step_size": self.step_size, "size": self.size,
                "entries": self.entries()}

    def write_manifest(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    def parse(self, vec) -> dict:
        """Split a flat vector into named blocks; history comes back as a list, oldest first."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.size,):
            raise DimensionError(f"observation has shape {vec.shape}, layout expects ({self.size},)")
        out = {}
        off = 0
        for name, n in self.step_blocks:
            out[name] = vec[off:off + n].copy()
            off += n
        hist = []
        for _ in range(self.n_history):
            hist.append(vec[off:off + self.step_size].copy())
            off += self.step_size
        out["history"] = hist
        for name, n in self.privileged_blocks:
            out[name] = vec[off:off + n].copy()
            off += n
        return out


class ObsHistory:
    """The last ``n`` single-step observations; zero-filled until ``n`` pushes."""

    def __init__(self, n: int, step_size: int):
        if n < 0:
            raise ValueError("history length must be >= 0")
        self.n = n
        self.step_size = step_size
        self.buf = deque([np.zeros(step_size) for _ in range(n)], maxlen=n or None)
        self.pushed = 0

    @property
    def ready(self) -> bool:
        return self.pushed >= self.n

    def push(self, step_obs) -> None:
        step_obs = _arr(step_obs, (self.step_size,), "step observation")
        self.pushed += 1
        if self.n:
            self.buf.append(step_obs.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate(list(self.buf)) if self.n else np.zeros(0)


def single_step_obs(s: FrameState, ref: ReferenceFrame, height_map) -> np.ndarray:
    h = _arr(height_map).reshape(-1)
    if h.shape[0] != HEIGHT_DIM:
        raise DimensionError(f"height map has {h.shape[0]} samples, expected {HEIGHT_DIM}")
    return np.concatenate([s.q, s.qd, s.root_angular_velocity, s.projected_gravity(),
                           s.prev_action, ref.q, ref.qd, h])


def build_actor_obs(s: FrameState, ref: ReferenceFrame, height_map, history: ObsHistory | None = None,
                    update: bool = True) -> np.ndarray:
    """Current step block followed by the history, oldest first.

    With ``update`` the current step is pushed into ``history`` afterwards,
    so the next call sees it as ``t-1``.
    """
    cur = single_step_obs(s, ref, height_map)
    if history is None:
        return cur
    if history.step_size != cur.shape[0]:
        raise DimensionError(f"history step size {history.step_size} vs observation {cur.shape[0]}")
    out = np.concatenate([cur, history.flat()])
    if update:
        history.push(cur)
    return out


def build_critic_obs(actor_obs, root_velocity, friction: float, external_force) -> np.ndarray:
    return np.concatenate([np.asarray(actor_obs, dtype=float), _arr(root_velocity, (3,), "root_velocity"),
                           [float(friction)], _arr(external_force, (3,), "external_force")])
