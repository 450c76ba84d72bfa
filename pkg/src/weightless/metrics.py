"""Tracking error metrics between a performed motion and its reference."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError
from .kinematics import KinematicTree, forward_kinematics
from .motion import MotionSequence
from .rotations import geodesic_angle


@dataclass(frozen=True)
class TrackingMetrics:
    mpjpe: float  # m
    mpjae: float  # rad
    mpjve: float  # m/s
    root_p: float  # m
    root_r: float  # rad
    root_v: float  # m/s

    def to_dict(self) -> dict:
        return asdict(self)


def keypoint_trajectory(seq: MotionSequence, tree: KinematicTree) -> np.ndarray:
    """World positions of every tree joint, ``(n, J, 3)``."""
    return np.stack([forward_kinematics(tree, seq.pose(t)).world_positions for t in range(len(seq))])


def compute_metrics(result: MotionSequence, reference: MotionSequence, tree: KinematicTree) -> TrackingMetrics:
    """Frame-averaged errors; keypoint velocities come from central differences."""
    if len(result) != len(reference):
        raise DimensionError(f"length mismatch: {len(result)} vs {len(reference)} frames")
    if result.fps != reference.fps:
        raise DimensionError(f"fps mismatch: {result.fps} vs {reference.fps}")
    if result.K != tree.K or reference.K != tree.K:
        raise DimensionError(f"sequences must have K={tree.K}")
    p = keypoint_trajectory(result, tree)
    ph = keypoint_trajectory(reference, tree)
    if len(result) > 1:
        dt = 1.0 / result.fps
        pv = np.gradient(p, dt, axis=0)
        phv = np.gradient(ph, dt, axis=0)
    else:
        pv = phv = np.zeros_like(p)
    return TrackingMetrics(
        mpjpe=float(np.linalg.norm(p - ph, axis=-1).mean()),
        mpjae=float(np.abs(result.q - reference.q).mean()),
        mpjve=float(np.linalg.norm(pv - phv, axis=-1).mean()),
        root_p=float(np.linalg.norm(result.root_positions - reference.root_positions, axis=-1).mean()),
        root_r=float(np.mean([geodesic_angle(a, b) for a, b in
                              zip(result.root_orientations, reference.root_orientations)])),
        root_v=float(np.linalg.norm(result.root_velocities() - reference.root_velocities(), axis=-1).mean()),
    )
