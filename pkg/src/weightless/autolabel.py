"""Automatic weightless-state annotation of motion sequences.

A frame is weightless-eligible when the ground projection of the center
of mass leaves the feet's support polygon while some body part other than
the feet touches the environment. Inside such intervals every actuated
joint that is not on an ancestor path from a contact joint to the waist
is labeled weightless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .geometry import TerrainScene, detect_contacts, point_in_polygon, support_polygon
from .kinematics import KinematicTree, center_of_mass, forward_kinematics, gravity_projection
from .motion import MotionSequence

DEFAULT_EPS = 0.02
DEFAULT_DELTA_T = 20


@dataclass(frozen=True)
class FrameEvidence:
    com_outside: np.ndarray  # (n,) bool
    contacts: tuple[frozenset[int], ...]  # per frame, feet filtered per mode


@dataclass(frozen=True)
class WeightlessAnnotation:
    intervals: tuple[tuple[int, int], ...]
    labels: np.ndarray  # (n, K) uint8, 1 = weightless
    active_sets: tuple[frozenset[int], ...]  # actuated tree indices; all of them outside intervals
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.uint8)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "intervals", tuple((int(a), int(b)) for a, b in self.intervals))
        object.__setattr__(self, "active_sets", tuple(frozenset(s) for s in self.active_sets))

    def __len__(self):
        return self.labels.shape[0]

    def in_interval(self) -> np.ndarray:
        mask = np.zeros(len(self), dtype=bool)
        for a, b in self.intervals:
            mask[a:b] = True
        return mask

    def activation_targets(self) -> np.ndarray:
        """Relaxation-level targets: 1 = fully active, 0 = weightless."""
        return 1.0 - self.labels.astype(float)


def frame_evidence(seq: MotionSequence, tree: KinematicTree, scene: TerrainScene,
                   eps: float = DEFAULT_EPS, include_feet: bool = False) -> FrameEvidence:
    if seq.K != tree.K:
        raise DimensionError(f"sequence has K={seq.K}, tree has K={tree.K}")
    outside = np.zeros(len(seq), dtype=bool)
    contacts = []
    for t in range(len(seq)):
        fk = forward_kinematics(tree, seq.pose(t))
        p = gravity_projection(center_of_mass(tree, fk))
        outside[t] = not point_in_polygon(p, support_polygon(tree, fk, scene, eps))
        c = detect_contacts(tree, fk, scene, eps)
        if not include_feet:
            c = c - tree.feet_indices
        contacts.append(c)
    return FrameEvidence(outside, tuple(contacts))


def _runs(mask) -> list[tuple[int, int]]:
    runs = []
    start = None
    for t, m in enumerate(mask):
        if m and start is None:
            start = t
        elif not m and start is not None:
            runs.append((start, t))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def weightless_interval(seq: MotionSequence, tree: KinematicTree, scene: TerrainScene,
                        eps: float = DEFAULT_EPS, include_feet: bool = False,
                        evidence: FrameEvidence | None = None) -> list[tuple[int, int]]:
    """Maximal half-open frame ranges where both predicates hold."""
    ev = evidence or frame_evidence(seq, tree, scene, eps, include_feet)
    mask = ev.com_outside & np.array([bool(c) for c in ev.contacts])
    return _runs(mask)


def perturb_interval(ranges, delta_t: int, rng: np.random.Generator, n_frames: int) -> list[tuple[int, int]]:
    """Shift each start and end by an independent uniform integer in ``[-delta_t, delta_t]``."""
    if delta_t < 0:
        raise ValueError("delta_t must be >= 0")
    out = []
    for a, b in ranges:
        da, db = rng.integers(-delta_t, delta_t, size=2, endpoint=True)
        a2 = min(max(a + int(da), 0), n_frames)
        b2 = min(max(b + int(db), 0), n_frames)
        if b2 > a2:
            out.append((a2, b2))
    # overlapping shifted ranges are merged so the result stays disjoint
    out.sort()
    merged = []
    for a, b in out:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def parent_path(tree: KinematicTree, c: int) -> list[int]:
    """Actuated joints from ``c`` up to and including the waist (or the root)."""
    path = []
    i = c
    while i is not None:
        if i in tree.q_slot:
            path.append(i)
        if i == tree.waist_index:
            break
        i = tree.joints[i].parent
    return path


def waist_group(tree: KinematicTree) -> set[int]:
    """The waist joint plus any actuated ancestors between it and the root."""
    out = set()
    i = tree.waist_index
    while i is not None:
        if i in tree.q_slot:
            out.add(i)
        i = tree.joints[i].parent
    return out


def active_joints(tree: KinematicTree, contacts) -> frozenset[int]:
    active = waist_group(tree)
    for c in contacts:
        if not 0 <= c < len(tree.joints):
            raise IndexError(f"contact index {c} not in tree")
        active.update(parent_path(tree, c))
    return frozenset(active)


def weightless_labels(tree: KinematicTree, active) -> np.ndarray:
    return np.array([0 if ji in active else 1 for ji in tree.actuated], dtype=np.uint8)


def annotate_sequence(seq: MotionSequence, tree: KinematicTree, scene: TerrainScene,
                      eps: float = DEFAULT_EPS, delta_t: int = DEFAULT_DELTA_T,
                      rng: np.random.Generator | None = None, include_feet: bool = False,
                      seed: int | None = None) -> WeightlessAnnotation:
    if rng is None:
        rng = np.random.default_rng(seed)
    ev = frame_evidence(seq, tree, scene, eps, include_feet)
    raw = weightless_interval(seq, tree, scene, eps, include_feet, evidence=ev)
    intervals = perturb_interval(raw, delta_t, rng, len(seq))

    contact_frames = np.array([t for t, c in enumerate(ev.contacts) if c])
    n = len(seq)
    labels = np.zeros((n, tree.K), dtype=np.uint8)
    active_sets = [frozenset(tree.actuated)] * n
    for a, b in intervals:
        for t in range(a, b):
            c = ev.contacts[t]
            if not c and contact_frames.size:
                # nearest frame with contacts; ties go to the earlier frame
                c = ev.contacts[int(contact_frames[np.argmin(np.abs(contact_frames - t))])]
            act = active_joints(tree, c)
            active_sets[t] = act
            labels[t] = weightless_labels(tree, act)
    params = {"eps": eps, "delta_t": delta_t, "include_feet": include_feet}
    if seed is not None:
        params["seed"] = seed
    return WeightlessAnnotation(tuple(intervals), labels, tuple(active_sets), params)
