"""PD torques, torque relaxation, domain randomization and action delay."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionError, FormatError

RANGES_FORMAT_VERSION = 1


def _vec(a, n=None, name="vector"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or (n is not None and a.shape[0] != n):
        raise DimensionError(f"{name} must be a 1-D array of length {n}, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class PdGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        kp = _vec(self.kp, name="kp")
        kd = _vec(self.kd, kp.shape[0], "kd")
        if np.any(kp < 0) or np.any(kd < 0):
            raise ValueError("gains must be non-negative")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)

    @property
    def K(self) -> int:
        return self.kp.shape[0]

    def scaled(self, kp_scale: float, kd_scale: float) -> "PdGains":
        return PdGains(self.kp * kp_scale, self.kd * kd_scale)


def action_to_target(a, q_default) -> np.ndarray:
    q_default = _vec(q_default, name="q_default")
    return q_default + _vec(a, q_default.shape[0], "action")


def pd_torque(gains: PdGains, q_des, q, qd, limit=None, motor_strength=1.0) -> np.ndarray:
    """``clip(kp (q_des - q) - kd qd, +-limit * motor_strength)``; no clamp when ``limit`` is None."""
    K = gains.K
    tau = gains.kp * (_vec(q_des, K, "q_des") - _vec(q, K, "q")) - gains.kd * _vec(qd, K, "qd")
    if limit is not None:
        lim = np.broadcast_to(np.asarray(limit, dtype=float), (K,)) * np.asarray(motor_strength, dtype=float)
        tau = np.clip(tau, -lim, lim)
    return tau


def modulate(tau, w) -> np.ndarray:
    """Per-joint relaxation: ``tau * w`` with ``w`` in [0, 1]."""
    tau = _vec(tau, name="tau")
    w = _vec(w, tau.shape[0], "w")
    if np.any(~np.isfinite(w)) or np.any(w < 0.0) or np.any(w > 1.0):
        raise ValueError("relaxation levels must lie in [0, 1]")
    return tau * w


# -- domain randomization ----------------------------------------------------

@dataclass(frozen=True)
class RandRanges:
    link_mass_scale: tuple[float, float] = (0.8, 1.2)
    com_offset: tuple[float, float] = (-0.1, 0.1)  # m, per axis
    friction: tuple[float, float] = (0.5, 1.5)
    motor_strength_scale: tuple[float, float] = (0.8, 1.2)
    kp_scale: tuple[float, float] = (0.75, 1.25)
    kd_scale: tuple[float, float] = (0.75, 1.25)
    action_delay_ms: tuple[float, float] = (5.0, 25.0)

    def __post_init__(self):
        for name, (lo, hi) in asdict(self).items():
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"range {name} must satisfy lo <= hi, got ({lo}, {hi})")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def to_dict(self) -> dict:
        return {"format_version": RANGES_FORMAT_VERSION, **{k: list(v) for k, v in asdict(self).items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "RandRanges":
        if d.get("format_version") != RANGES_FORMAT_VERSION:
            raise FormatError(f"unsupported ranges format_version {d.get('format_version')!r}")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known - {"format_version"}
        if extra:
            raise FormatError(f"unknown range fields: {sorted(extra)}")
        return cls(**{k: tuple(v) for k, v in d.items() if k in known})


def load_ranges(path) -> RandRanges:
    with open(path) as f:
        return RandRanges.from_dict(json.load(f))


def save_ranges(ranges: RandRanges, path) -> None:
    with open(path, "w") as f:
        json.dump(ranges.to_dict(), f, indent=2)
        f.write("\n")


@dataclass(frozen=True)
class DomainRandSample:
    link_mass_scale: np.ndarray  # per link
    com_offset: np.ndarray  # (3,)
    friction: float
    motor_strength_scale: np.ndarray  # per joint
    kp_scale: float
    kd_scale: float
    action_delay_ms: float

    def to_dict(self) -> dict:
        return {
            "link_mass_scale": self.link_mass_scale.tolist(),
            "com_offset": self.com_offset.tolist(),
            "friction": self.friction,
            "motor_strength_scale": self.motor_strength_scale.tolist(),
            "kp_scale": self.kp_scale,
            "kd_scale": self.kd_scale,
            "action_delay_ms": self.action_delay_ms,
        }


def sample_domain_rand(ranges: RandRanges, rng: np.random.Generator, n_links: int = 1,
                       n_joints: int = 1) -> DomainRandSample:
    """One independent uniform draw per field, in declaration order."""
    u = lambda r, size=None: rng.uniform(r[0], r[1], size)
    return DomainRandSample(
        link_mass_scale=u(ranges.link_mass_scale, n_links),
        com_offset=u(ranges.com_offset, 3),
        friction=float(u(ranges.friction)),
        motor_strength_scale=u(ranges.motor_strength_scale, n_joints),
        kp_scale=float(u(ranges.kp_scale)),
        kd_scale=float(u(ranges.kd_scale)),
        action_delay_ms=float(u(ranges.action_delay_ms)),
    )


# -- action delay -------------------------------------------------------------

@dataclass
class DelayBuffer:
    delay_ms: float
    queue: deque = field(default_factory=deque)

    def __post_init__(self):
        if not self.delay_ms >= 0:
            raise ValueError("delay must be >= 0")

    def push(self, now_ms: float, action) -> np.ndarray:
        if self.queue and now_ms < self.queue[-1][0]:
            raise ValueError(f"time went backwards: {now_ms} < {self.queue[-1][0]}")
        self.queue.append((float(now_ms), np.array(action, dtype=float)))
        # newest entry old enough to release
        ready = None
        for i, (ts, _) in enumerate(self.queue):
            if now_ms - ts >= self.delay_ms:
                ready = i
        if ready is None:
            return self.queue[0][1].copy()
        for _ in range(ready):
            self.queue.popleft()
        return self.queue[0][1].copy()


def delay_apply(buffer: DelayBuffer, now_ms: float, action) -> np.ndarray:
    return buffer.push(now_ms, action)
