"""Retarget smoothing: downsample, causal moving average, median, interpolate back.

Joint channels and root position channels go through every stage. The root
orientation is sign-aligned, averaged as a 4-vector and renormalized; the
median stage leaves it untouched because a per-component median of
quaternions is not a rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .motion import MotionSequence
from .rotations import quat_normalize, slerp


@dataclass(frozen=True)
class SmoothingConfig:
    downsample_factor: int = 2
    ma_window: int = 5
    median_window: int = 5

    def __post_init__(self):
        for name in ("downsample_factor", "ma_window", "median_window"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v}")
        if self.median_window % 2 == 0:
            raise ValueError("median_window must be odd")

    def as_dict(self):
        return {"downsample_factor": self.downsample_factor,
                "ma_window": self.ma_window, "median_window": self.median_window}


def downsample(seq: MotionSequence, factor: int) -> MotionSequence:
    if int(factor) != factor or factor < 1:
        raise ValueError(f"downsample factor must be an integer >= 1, got {factor}")
    s = slice(0, None, int(factor))
    return MotionSequence(
        fps=seq.fps / factor,
        root_positions=seq.root_positions[s],
        root_orientations=seq.root_orientations[s],
        q=seq.q[s],
        qd=None if seq.qd is None else seq.qd[s],
    )


def causal_moving_average(channel, window: int) -> np.ndarray:
    """``out[t] = mean(x[max(0, t-window+1) : t+1])``; the window shrinks at the start."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.ascontiguousarray(channel, dtype=float)
    return kernels.causal_moving_average(x, int(window))


def median_filter(channel, window: int) -> np.ndarray:
    """Centered sliding median with replicated edge samples."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 1, got {window}")
    x = np.ascontiguousarray(channel, dtype=float)
    return kernels.median_filter(x, int(window))


def _apply_columns(fn, arr, window):
    if window == 1:
        return np.array(arr, dtype=float)
    return np.stack([fn(arr[:, j], window) for j in range(arr.shape[1])], axis=1)


def align_quaternion_signs(quats) -> np.ndarray:
    """Flip signs so consecutive quaternions lie in the same hemisphere."""
    out = np.array(quats, dtype=float)
    for t in range(1, len(out)):
        if np.dot(out[t], out[t - 1]) < 0:
            out[t] = -out[t]
    return out


def _sample(values, src_times, times):
    return np.stack([np.interp(times, src_times, values[:, j]) for j in range(values.shape[1])], axis=1)


def interpolate_to_rate(seq: MotionSequence, target_fps: float, n_frames: int | None = None) -> MotionSequence:
    """Resample at ``target_fps`` over the span from the first to the last frame.

    Joint and root-position channels are linear; the root orientation is
    slerped. ``n_frames`` overrides the frame count; samples past the last
    source frame hold its value.
    """
    if not target_fps > 0:
        raise ValueError("target_fps must be positive")
    n = len(seq)
    span = (n - 1) / seq.fps
    if n_frames is None:
        n_frames = int(math.floor(span * target_fps + 1e-9)) + 1
    if n < 2 and n_frames > 1:
        raise ValueError("cannot interpolate a single frame to more than one frame")
    if n_frames == n and target_fps == seq.fps:
        return seq
    times = np.arange(n_frames) / target_fps
    src = np.arange(n) / seq.fps
    q = _sample(seq.q, src, times)
    pos = _sample(seq.root_positions, src, times)
    quats = np.empty((n_frames, 4))
    src_q = seq.root_orientations
    for k, t in enumerate(times):
        u = t * seq.fps
        i = min(int(math.floor(u)), n - 1)
        if i >= n - 1:
            quats[k] = src_q[n - 1]
        else:
            quats[k] = slerp(src_q[i], src_q[i + 1], u - i)
    return MotionSequence(target_fps, pos, quat_normalize(quats), q)


def smooth_pipeline(seq: MotionSequence, config: SmoothingConfig = SmoothingConfig()) -> MotionSequence:
    """Downsample, moving average, median filter, then restore rate and frame count.

    When the input carries joint velocities, the output velocities are central
    differences of the smoothed joint positions.
    """
    n = len(seq)
    if config.downsample_factor == config.ma_window == config.median_window == 1:
        return seq
    low = downsample(seq, config.downsample_factor)
    q = _apply_columns(causal_moving_average, low.q, config.ma_window)
    pos = _apply_columns(causal_moving_average, low.root_positions, config.ma_window)
    quats = low.root_orientations
    if config.ma_window > 1:
        quats = quat_normalize(_apply_columns(causal_moving_average, align_quaternion_signs(quats), config.ma_window))
    q = _apply_columns(median_filter, q, config.median_window)
    pos = _apply_columns(median_filter, pos, config.median_window)
    low = MotionSequence(low.fps, pos, quats, q)
    if len(low) == 1:
        out = MotionSequence(seq.fps, np.repeat(pos, n, 0), np.repeat(quats, n, 0), np.repeat(q, n, 0))
    else:
        out = interpolate_to_rate(low, seq.fps, n_frames=n)
    if seq.qd is not None:
        out = out.replace(qd=out.velocities() if n > 1 else np.zeros_like(out.q))
    return out
