"""Closed-loop relaxation demo on the planar chain.

A 50 Hz loop sets PD targets from a reference motion and relaxation levels
``w`` from labels, a network or a constant. Between ticks the plant runs
20 substeps of 1 ms; the PD law and the ``w`` scaling are evaluated every
substep inside the integrator kernel with the tick's target and ``w`` held.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DimensionError
from ..geometry import Box, TerrainScene
from ..motion import MotionSequence
from ..wm.network import FUTURE, HISTORY
from .chain import DT, PlanarChain, SimState, step

CONTROL_HZ = 50.0
SUBSTEPS = 20
SETTLE_SPEED = 0.05  # rad/s
SETTLE_HOLD = 0.5  # s
CONTACT_HOLD = 0.5  # s of unbroken support contact that counts as persistent
FALL_HEIGHT = 0.25  # m, base joint height


@dataclass(frozen=True)
class DemoReport:
    duration: float
    persistent_contact: bool
    contact_time: float | None  # start of the first persistent support contact
    settle_time: float | None  # start of the first SETTLE_HOLD window of slow joints
    fell: bool
    fall_time: float | None
    support_contact_fraction: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DemoResult:
    times: np.ndarray  # (n,)
    x: np.ndarray  # (n, 3 + N) generalized positions after each tick
    v: np.ndarray
    w: np.ndarray  # (n, N) relaxation levels applied during each tick
    torque: np.ndarray  # (n, N) modulated joint torque at the start of each tick
    contact: np.ndarray  # (n, n_points) primitive index, -1 none, 0 ground, i box i-1
    normal_force: np.ndarray  # (n, n_points)
    report: DemoReport
    point_names: tuple[str, ...] = ()

    def write_csv(self, path) -> None:
        N = self.w.shape[1]
        nd = self.x.shape[1]
        header = (["time"] + [f"x{i}" for i in range(nd)] + [f"v{i}" for i in range(nd)]
                  + [f"contact_{n}" for n in self.point_names] + [f"w{i}" for i in range(N)]
                  + [f"tau{i}" for i in range(N)])
        with open(path, "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(header)
            for k in range(len(self.times)):
                wr.writerow([repr(float(self.times[k]))] + [repr(float(a)) for a in self.x[k]]
                            + [repr(float(a)) for a in self.v[k]] + [int(c) for c in self.contact[k]]
                            + [repr(float(a)) for a in self.w[k]] + [repr(float(a)) for a in self.torque[k]])

    def write_report(self, path) -> None:
        with open(path, "w") as f:
            json.dump({"format_version": 1, **self.report.to_dict()}, f, indent=2)
            f.write("\n")


def _first_run(mask, min_len):
    run = 0
    for k, m in enumerate(mask):
        run = run + 1 if m else 0
        if run >= min_len:
            return k - min_len + 1
    return None


def summarize(times, x, v, contact, tick: float) -> DemoReport:
    support = np.any(contact >= 1, axis=1)
    hold = int(round(CONTACT_HOLD / tick))
    c0 = _first_run(support, hold)
    slow = np.all(np.abs(v[:, 3:]) < SETTLE_SPEED, axis=1)
    s0 = _first_run(slow, int(round(SETTLE_HOLD / tick)))
    fallen = (x[:, 1] < FALL_HEIGHT) & ~support
    f0 = int(np.argmax(fallen)) if fallen.any() else None
    # report times at the start of the tick where the condition first holds
    # rounded to drop the accumulated float error of the step clock
    t_at = lambda k: None if k is None else round(float(times[k] - tick), 9)
    return DemoReport(
        duration=round(float(times[-1]), 9) if len(times) else 0.0,
        persistent_contact=c0 is not None,
        contact_time=t_at(c0),
        settle_time=t_at(s0),
        fell=f0 is not None,
        fall_time=t_at(f0),
        support_contact_fraction=float(support.mean()) if len(support) else 0.0,
    )


def _reference_q(reference) -> np.ndarray:
    q = reference.q if isinstance(reference, MotionSequence) else np.asarray(reference, dtype=float)
    if q.ndim != 2:
        raise DimensionError("reference must be a MotionSequence or an (n, N) joint array")
    return q


def run_weightless_demo(chain: PlanarChain, scene: TerrainScene, reference, labels=None, net=None,
                        duration: float = 5.0, w=None, initial: SimState | None = None,
                        friction: float | None = None) -> DemoResult:
    """Track ``reference`` for ``duration`` seconds with relaxation from one source.

    Exactly one of ``labels`` (``(n, N)`` with 1 = weightless), ``net`` (an
    :class:`~weightless.wm.train.OnlineWM`) or ``w`` (scalar or ``(N,)``) may
    be given; with none of them every joint stays fully active. The network
    sees the measured joint angles of the last four ticks and the current
    one, plus the next five reference frames. The reference is held at its
    last frame past its end.
    """
    q_ref = _reference_q(reference)
    N = chain.n_joints
    if q_ref.shape[1] != N:
        raise DimensionError(f"reference has {q_ref.shape[1]} joints, chain has {N}")
    if sum(s is not None for s in (labels, net, w)) > 1:
        raise ValueError("give at most one of labels, net, w")
    if labels is not None:
        labels = np.asarray(labels, dtype=float)
        if labels.ndim != 2 or labels.shape[1] != N:
            raise DimensionError(f"labels must be (n, {N})")
    const_w = np.ones(N) if w is None else np.broadcast_to(np.asarray(w, dtype=float), (N,)).copy()
    if np.any(const_w < 0) or np.any(const_w > 1):
        raise ValueError("w must lie in [0, 1]")
    tick = 1.0 / CONTROL_HZ
    n_ticks = int(round(duration * CONTROL_HZ))
    if n_ticks < 1:
        raise ValueError("duration must cover at least one control tick")
    if initial is None:
        if not isinstance(reference, MotionSequence):
            raise ValueError("an initial state is needed when the reference carries no root pose")
        from ..toy import motion_to_states
        x0 = motion_to_states(reference)[0]
        initial = SimState(x0, np.zeros(chain.n_dof), 0.0)
    state = initial
    n_ref = q_ref.shape[0]
    ref_at = lambda k: q_ref[min(max(k, 0), n_ref - 1)]
    if net is not None:
        net.reset()
    hist = [state.q.copy() for _ in range(HISTORY)]

    times = np.empty(n_ticks)
    xs = np.empty((n_ticks, chain.n_dof))
    vs = np.empty((n_ticks, chain.n_dof))
    ws = np.empty((n_ticks, N))
    taus = np.empty((n_ticks, N))
    cps = np.empty((n_ticks, len(chain.contact_points)), dtype=np.int32)
    fns = np.empty((n_ticks, len(chain.contact_points)))
    for k in range(n_ticks):
        q_des = ref_at(k)
        if labels is not None:
            wk = 1.0 - labels[min(k, labels.shape[0] - 1)]
        elif net is not None:
            future = np.array([ref_at(k + j) for j in range(FUTURE)])
            wk = net(np.array(hist), state.q, future)
        else:
            wk = const_w
        tau = chain.kp * (q_des - state.q) - chain.kd * state.qd
        taus[k] = np.clip(tau, -chain.effort_limit, chain.effort_limit) * wk
        hist = hist[1:] + [state.q.copy()]
        state = step(chain, state, None, scene, dt=DT, substeps=SUBSTEPS, q_des=q_des, w=wk, friction=friction)
        times[k] = state.time
        xs[k] = state.x
        vs[k] = state.v
        ws[k] = wk
        cps[k] = state.contacts.primitive
        fns[k] = state.contacts.normal_force
    report = summarize(times, xs, vs, cps, tick)
    return DemoResult(times, xs, vs, ws, taus, cps, fns, report, tuple(chain.contact_point_names()))


# -- the scripted chair scenario --------------------------------------------------

HOVER_ANGLES = (-0.6, 1.0, 0.4)  # thigh, shin, torso
HOVER_GAP = 0.05
CHAIR_LIP = 0.15  # chair extends this far ahead of the hip point
CHAIR_BACK = 0.1  # and this far behind the seat bone


@dataclass(frozen=True)
class ChairScenario:
    chain: PlanarChain
    scene: TerrainScene
    reference: MotionSequence  # hover ("fake sit") pose held for the whole run
    labels: np.ndarray  # (n, N) from annotating the demonstration
    demonstration: MotionSequence
    demonstration_scene: TerrainScene
    critical_frame: int


def chair_scenario(duration: float = 5.0, critical_frame: int = 50, gap: float = HOVER_GAP) -> ChairScenario:
    """Hover above a chair, relax on the labels of a demonstrated sit.

    The demonstration is a synthetic sit-down on its own chair whose
    weightless interval starts at ``critical_frame``. Its labels drive the
    relaxation while the robot tracks a balanced hover pose ``gap`` above
    the real chair, the pose a tracking-only policy ends up in.
    """
    from ..autolabel import annotate_sequence
    from ..toy import SitProfile, pose_from_angles, sit_sequence, states_to_motion, toy_chain, toy_tree

    chain = toy_chain()
    n = int(round(duration * CONTROL_HZ))
    x0 = pose_from_angles(*HOVER_ANGLES)
    pts = dict(zip(chain.contact_point_names(), chain.contact_point_positions(x0)))
    hip, seat = pts["pelvis"], pts["pelvis_tip"]
    top = min(hip[1], seat[1]) - gap
    front, back = hip[0] + CHAIR_LIP, seat[0] - CHAIR_BACK
    scene = TerrainScene(0.0, (Box(((front + back) / 2, 0.0, top / 2), ((front - back) / 2, 0.25, top / 2)),))
    reference = states_to_motion(np.repeat(x0[None], n, 0), CONTROL_HZ)

    profile = SitProfile(n_frames=n, exit_frame=critical_frame - 10, contact_frame=critical_frame, fps=CONTROL_HZ)
    demo, demo_scene = sit_sequence(profile)
    ann = annotate_sequence(demo, toy_tree(), demo_scene, delta_t=0)
    return ChairScenario(chain, scene, reference, ann.labels.astype(float), demo, demo_scene, critical_frame)
