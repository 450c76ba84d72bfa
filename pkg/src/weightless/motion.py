"""Timed motion sequences stored as dense arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .kinematics import Pose


def _frozen(a, shape_tail, name):
    a = np.array(a, dtype=float)
    if a.ndim != 1 + len(shape_tail) or (shape_tail and a.shape[1:] != shape_tail):
        raise DimensionError(f"{name} has shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MotionSequence:
    """Root trajectory plus joint positions, one row per frame.

    ``qd`` is optional; when absent :meth:`velocities` differentiates ``q``.
    """

    fps: float
    root_positions: np.ndarray
    root_orientations: np.ndarray
    q: np.ndarray
    qd: np.ndarray | None = None

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] < 1:
            raise DimensionError(f"q must be (frames, K) with >= 1 frame, got {q.shape}")
        n, k = q.shape
        q.setflags(write=False)
        object.__setattr__(self, "fps", float(self.fps))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "root_positions", _frozen(self.root_positions, (3,), "root_positions"))
        ro = _frozen(self.root_orientations, (4,), "root_orientations")
        norms = np.linalg.norm(ro, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("root orientations must be unit quaternions")
        object.__setattr__(self, "root_orientations", ro)
        if self.root_positions.shape[0] != n or ro.shape[0] != n:
            raise DimensionError("root trajectory length differs from q")
        if self.qd is not None:
            qd = _frozen(self.qd, (k,), "qd")
            if qd.shape[0] != n:
                raise DimensionError("qd length differs from q")
            object.__setattr__(self, "qd", qd)

    def __len__(self):
        return self.q.shape[0]

    @property
    def K(self) -> int:
        return self.q.shape[1]

    @property
    def duration(self) -> float:
        """Time spanned by the frames, ``n / fps`` seconds (each frame lasts one period)."""
        return len(self) / self.fps

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.fps

    def pose(self, t: int) -> Pose:
        return Pose(self.root_positions[t], self.root_orientations[t], self.q[t])

    @property
    def frames(self) -> list[Pose]:
        return [self.pose(t) for t in range(len(self))]

    def velocities(self) -> np.ndarray:
        if self.qd is not None:
            return self.qd
        if len(self) < 2:
            return np.zeros_like(self.q)
        return np.gradient(self.q, 1.0 / self.fps, axis=0)

    def root_velocities(self) -> np.ndarray:
        if len(self) < 2:
            return np.zeros_like(self.root_positions)
        return np.gradient(self.root_positions, 1.0 / self.fps, axis=0)

    @classmethod
    def from_frames(cls, fps, frames, qd=None):
        frames = list(frames)
        if not frames:
            raise DimensionError("a motion sequence needs at least one frame")
        return cls(
            fps=fps,
            root_positions=np.stack([f.root_position for f in frames]),
            root_orientations=np.stack([f.root_orientation for f in frames]),
            q=np.stack([f.q for f in frames]),
            qd=qd,
        )

    def replace(self, **kw) -> "MotionSequence":
        fields = dict(fps=self.fps, root_positions=self.root_positions,
                      root_orientations=self.root_orientations, q=self.q, qd=self.qd)
        fields.update(kw)
        return MotionSequence(**fields)
