"""A small planar humanoid and synthetic sit-down motions for it.

The robot has four revolute joints (waist, hip, knee, ankle) on five
rods. The base rod is the pelvis: its proximal end is the hip point and it
extends backward to the seat bone, so when the robot sits both pelvis ends
rest on the chair. Torso and thigh both hang off the hip point.

Sit motions keep the foot planted flat: the ankle joint sits at ``(0, 0)``
and the toe at ``(foot_length, 0)`` in every frame. A sit
runs through three phases: a balanced squat that ends exactly when the
center of mass passes behind the heel, a drop onto the chair, and a seated
phase where the torso straightens up.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import Box, TerrainScene
from .motion import MotionSequence
from .rotations import quat_from_pitch
from .sim.chain import PlanarChain, Rod

JOINTS = ("waist", "hip", "knee", "ankle")
FEET = ("shin_tip", "foot_tip")
CONTACT_POINTS = ("pelvis", "pelvis_tip", "torso_tip", "thigh_tip", "shin_tip", "foot_tip")

PELVIS_LENGTH = 0.3
THIGH_LENGTH = 0.4
SHIN_LENGTH = 0.4
FOOT_LENGTH = 0.2


def toy_chain(**overrides) -> PlanarChain:
    kw = dict(
        base=Rod("pelvis", PELVIS_LENGTH, 10.0, (-1.0, 0.0)),
        links=(
            Rod("torso", 0.5, 8.0, (0.0, 1.0), parent=0, attach=0.0),
            Rod("thigh", THIGH_LENGTH, 4.0, (0.0, -1.0), parent=0, attach=0.0),
            Rod("shin", SHIN_LENGTH, 3.0, (0.0, -1.0), parent=2, attach=1.0),
            Rod("foot", FOOT_LENGTH, 1.0, (1.0, 0.0), parent=3, attach=1.0),
        ),
        kp=[1000.0, 1500.0, 1500.0, 600.0],
        kd=[30.0, 40.0, 40.0, 8.0],
        effort_limit=[200.0, 300.0, 300.0, 150.0],
        joint_damping=[1.0, 1.0, 1.0, 1.0],
        joint_names=JOINTS,
    )
    kw.update(overrides)
    return PlanarChain(**kw)


def toy_tree():
    return toy_chain().to_tree("waist", FEET, CONTACT_POINTS)


def pose_from_angles(thigh: float, shin: float, torso: float, pitch: float = 0.0):
    """Chain coordinates ``(x, z, pitch, q)`` with the ankle at the origin and the foot flat.

    ``thigh``, ``shin`` and ``torso`` are absolute body angles; a negative
    thigh angle swings the knee forward, a positive shin angle puts the knee
    ahead of the ankle and a positive torso angle leans forward.
    """
    q = np.array([torso - pitch, thigh - pitch, shin - thigh, -shin])
    # ankle = hip + thigh vector + shin vector
    thigh_vec = THIGH_LENGTH * np.array([-np.sin(thigh), -np.cos(thigh)])
    shin_vec = SHIN_LENGTH * np.array([-np.sin(shin), -np.cos(shin)])
    hip = -(thigh_vec + shin_vec)
    return np.concatenate([hip, [pitch], q])


@dataclass(frozen=True)
class SitProfile:
    """Shape and timing of one synthetic sit-down."""

    n_frames: int = 200
    exit_frame: int = 80
    contact_frame: int = 100
    fps: float = 50.0
    start: tuple[float, float, float] = (-0.6, 0.95, 0.45)  # thigh, shin, torso at frame 0
    seat: tuple[float, float, float] = (-1.45, 0.35, 0.35)  # at the contact frame
    upright: float = 0.1  # torso angle reached after sitting
    straighten_frames: int = 25
    chair_depth: float = 0.3

    def __post_init__(self):
        if not 0 < self.exit_frame < self.contact_frame < self.n_frames:
            raise ValueError("need 0 < exit_frame < contact_frame < n_frames")


def _angles(profile: SitProfile, s: float):
    a = np.asarray(profile.start)
    b = np.asarray(profile.seat)
    return a + s * (b - a)


def _com_x(chain, x):
    return chain.com(x)[0]


def _exit_progress(chain, profile: SitProfile) -> float:
    """Progress ``s`` at which the center of mass crosses the heel (x = 0)."""
    f = lambda s: _com_x(chain, pose_from_angles(*_angles(profile, s)))
    lo, hi = 0.0, 1.0
    if not (f(lo) > 0.0 > f(hi)):
        raise ValueError("profile must start balanced and end with the center of mass behind the heel")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def _pelvis_height(chain, x) -> float:
    pts = chain.contact_point_positions(x)
    return float(min(pts[0, 1], pts[1, 1]))


def sit_states(profile: SitProfile = SitProfile(), chain: PlanarChain | None = None,
               min_clearance: float = 0.025) -> np.ndarray:
    """Per-frame chain coordinates ``(n_frames, 3 + 4)``.

    The drop between ``exit_frame`` and ``contact_frame`` accelerates as
    ``u**p``; ``p`` grows until the frame before contact clears the chair
    by more than ``min_clearance``, so contact starts exactly on time.
    """
    chain = chain or toy_chain()
    s_star = _exit_progress(chain, profile)
    e, c = profile.exit_frame, profile.contact_frame
    # frame e is the first with s >= s_star; frames before stay strictly balanced
    s_exit = s_star + 0.25 * s_star / e
    seat_height = _pelvis_height(chain, pose_from_angles(*_angles(profile, 1.0)))
    power = 3.0
    while True:
        u = (c - 1 - e) / (c - e)
        s_prev = s_exit + (1.0 - s_exit) * u ** power
        if _pelvis_height(chain, pose_from_angles(*_angles(profile, s_prev))) - seat_height > min_clearance:
            break
        power += 1.0
        if power > 50:
            raise ValueError("cannot schedule the drop; widen the gap between exit and seat poses")
    out = []
    for t in range(profile.n_frames):
        torso_extra = 0.0
        if t <= e:
            s = s_exit * t / e
        elif t <= c:
            s = s_exit + (1.0 - s_exit) * ((t - e) / (c - e)) ** power
        else:
            s = 1.0
            u = min((t - c) / profile.straighten_frames, 1.0)
            torso_extra = (profile.upright - profile.seat[2]) * (0.5 - 0.5 * np.cos(np.pi * u))
        thigh, shin, torso = _angles(profile, s)
        out.append(pose_from_angles(thigh, shin, torso + torso_extra))
    return np.array(out)


def chair_for(profile: SitProfile, chain: PlanarChain | None = None) -> TerrainScene:
    """A chair whose top meets the pelvis exactly at the contact frame."""
    chain = chain or toy_chain()
    x = pose_from_angles(*_angles(profile, 1.0))
    pts = dict(zip(chain.contact_point_names(), chain.contact_point_positions(x)))
    hip, seat = pts["pelvis"], pts["pelvis_tip"]
    top = min(hip[1], seat[1])
    front = hip[0] + 0.02
    back = seat[0] - profile.chair_depth + PELVIS_LENGTH
    box = Box(center=((front + back) / 2, 0.0, top / 2), half_extents=((front - back) / 2, 0.25, top / 2))
    return TerrainScene(0.0, (box,))


def states_to_motion(states, fps: float) -> MotionSequence:
    states = np.asarray(states, dtype=float)
    pos = np.stack([states[:, 0], np.zeros(len(states)), states[:, 1]], axis=1)
    quats = np.array([quat_from_pitch(p) for p in states[:, 2]])
    return MotionSequence(fps, pos, quats, states[:, 3:])


def motion_to_states(seq: MotionSequence) -> np.ndarray:
    from .rotations import quat_to_matrix
    pitch = []
    for qt in seq.root_orientations:
        R = quat_to_matrix(qt)
        pitch.append(np.arctan2(R[0, 2], R[0, 0]))
    return np.concatenate([seq.root_positions[:, [0, 2]], np.array(pitch)[:, None], seq.q], axis=1)


def sit_sequence(profile: SitProfile = SitProfile()) -> tuple[MotionSequence, TerrainScene]:
    """The sit-down motion and its chair."""
    chain = toy_chain()
    return states_to_motion(sit_states(profile, chain), profile.fps), chair_for(profile, chain)


def sit_corpus(n: int = 20, seed: int = 0) -> list[tuple[MotionSequence, TerrainScene, SitProfile]]:
    """Sit-downs with varied chair heights, lean and timing."""
    rng = np.random.default_rng(seed)
    out = []
    base = SitProfile()
    for _ in range(n):
        exit_frame = int(rng.integers(50, 111))
        drop = int(rng.integers(12, 31))
        seat = (
            float(rng.uniform(-1.55, -1.3)),
            float(rng.uniform(0.25, 0.45)),
            float(rng.uniform(0.25, 0.45)),
        )
        start = (
            float(rng.uniform(-0.7, -0.5)),
            float(rng.uniform(0.85, 1.05)),
            float(rng.uniform(0.35, 0.55)),
        )
        prof = replace(base, exit_frame=exit_frame, contact_frame=exit_frame + drop, seat=seat, start=start,
                       upright=float(rng.uniform(0.0, 0.2)), straighten_frames=int(rng.integers(15, 40)))
        seq, scene = sit_sequence(prof)
        out.append((seq, scene, prof))
    return out
