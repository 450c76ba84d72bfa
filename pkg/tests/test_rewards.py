import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from weightless.errors import DimensionError
from weightless.rewards import (
    TERMS, FrameState, ObsHistory, ObsLayout, ReferenceFrame, RewardWeights, build_actor_obs, build_critic_obs,
    reward_term, sequence_rewards, total_reward, write_breakdown_csv,
)
from weightless.toy import sit_sequence, toy_tree

WEIGHTS = dict(keypoint_position=3.0, root_rotation=0.5, root_velocity=0.75, joint_position_no_feet=32.0,
             joint_velocity_no_feet=0.5, termination=-200.0, joint_acceleration=-2.5e-8, joint_velocity=-0.001,
             action_rate=-0.5, torque=-1e-6, feet_orientation=-62.5, feet_heading=-1e-5)


def _wxyz_to_rot(q):
    return Rotation.from_quat([q[1], q[2], q[3], q[0]])


def _random_quat(rng):
    x = Rotation.random(random_state=int(rng.integers(1 << 30))).as_quat()
    return np.array([x[3], x[0], x[1], x[2]])


def random_state(rng, K=6, J=8, n_feet=2):
    return FrameState(rng.normal(size=K), rng.normal(size=K), rng.normal(size=K) * 50, _random_quat(rng),
                      rng.normal(size=3), rng.normal(size=3), rng.normal(size=(J, 3)), rng.normal(size=K),
                      rng.normal(size=K), rng.normal(size=K) * 30, [_random_quat(rng) for _ in range(n_feet)])


def random_ref(rng, s, mask):
    m = np.asarray(mask, bool)
    return ReferenceFrame(s.keypoints + rng.normal(scale=0.3, size=s.keypoints.shape), _random_quat(rng),
                          rng.normal(size=3), rng.normal(size=int((~m).sum())),
                          rng.normal(size=int((~m).sum())), m)


def oracle_rows(s, ref):
    """Row values computed with scipy rotations, independent of the package's quaternion code."""
    keep = ~ref.feet_mask
    rel = _wxyz_to_rot(ref.root_orientation).inv() * _wxyz_to_rot(s.root_orientation)
    root_yaw = _wxyz_to_rot(s.root_orientation).as_matrix()
    root_yaw = np.arctan2(root_yaw[1, 0], root_yaw[0, 0])
    g_xy, heading = 0.0, 0.0
    for qf in s.feet_orientations:
        R = _wxyz_to_rot(qf).as_matrix()
        g = R.T @ [0, 0, -1]
        g_xy += np.hypot(g[0], g[1])
        d = np.arctan2(R[1, 0], R[0, 0]) - root_yaw
        heading += abs(np.arctan2(np.sin(d), np.cos(d)))
    return dict(
        keypoint_position=np.exp(-0.1 * ((s.keypoints - ref.keypoints) ** 2).sum()),
        root_rotation=np.exp(-rel.magnitude()),
        root_velocity=np.exp(-np.sqrt(((s.root_velocity - ref.root_velocity) ** 2).sum())),
        joint_position_no_feet=np.exp(-((s.q[keep] - ref.d) ** 2).sum()),
        joint_velocity_no_feet=np.exp(-((s.qd[keep] - ref.d_dot) ** 2).sum()),
        termination=float(s.terminated),
        joint_acceleration=np.sqrt((s.qdd ** 2).sum()),
        joint_velocity=np.sqrt((s.qd ** 2).sum()),
        action_rate=np.sqrt(((s.action - s.prev_action) ** 2).sum()),
        torque=np.sqrt((s.torque ** 2).sum()),
        feet_orientation=g_xy,
        feet_heading=heading,
    )


MASK = [False, False, True, False, False, True]


def test_default_weights():
    assert RewardWeights().to_dict() == WEIGHTS
    assert TERMS == tuple(WEIGHTS)


def test_perfect_tracking_total():
    s = FrameState.zeros(6, 4, n_feet=2)
    total, br = total_reward(s, ReferenceFrame.from_state(s, MASK))
    assert total == 36.75
    assert list(br) == list(TERMS)


def test_termination_only():
    s = FrameState.zeros(6, 4, n_feet=2)
    s = FrameState(**{**s.__dict__, "terminated": True})
    total, br = total_reward(s, ReferenceFrame.from_state(s, MASK))
    assert total == -200.0
    assert br["termination"] == -200.0
    assert sum(abs(v) for k, v in br.items() if k != "termination") == 0.0


def test_closed_forms():
    s = FrameState.zeros(2, 1)
    ref = ReferenceFrame(np.zeros((1, 3)), [1, 0, 0, 0], np.zeros(3), [1.0, 0.0], [0.0, 0.0], [False, False])
    assert reward_term("joint_position_no_feet", s, ref) == pytest.approx(0.367879, abs=1e-6)
    assert reward_term("keypoint_position", s, ref) == 1.0
    flat = FrameState.zeros(2, 1, n_feet=2)
    assert reward_term("feet_orientation", flat, ref) == 0.0


def test_random_states_match_oracle(rng):
    for _ in range(200):
        s = random_state(rng)
        ref = random_ref(rng, s, MASK)
        rows = oracle_rows(s, ref)
        for name in TERMS:
            assert reward_term(name, s, ref) == pytest.approx(rows[name], abs=1e-12, rel=1e-12), name
        total, _ = total_reward(s, ref)
        assert total == pytest.approx(sum(WEIGHTS[k] * rows[k] for k in TERMS), abs=1e-12, rel=1e-12)


def test_exp_terms_in_unit_interval(rng):
    for _ in range(100):
        s = random_state(rng)
        ref = random_ref(rng, s, MASK)
        for name in ("keypoint_position", "root_rotation", "root_velocity", "joint_position_no_feet",
                     "joint_velocity_no_feet"):
            assert 0.0 < reward_term(name, s, ref) < 1.0
        exact = ReferenceFrame.from_state(s, MASK)
        for name in ("keypoint_position", "root_rotation", "root_velocity", "joint_position_no_feet",
                     "joint_velocity_no_feet"):
            assert reward_term(name, s, exact) == 1.0


def test_weight_linearity(rng):
    s = random_state(rng)
    ref = random_ref(rng, s, MASK)
    base = total_reward(s, ref)[1]
    for name in TERMS:
        w = RewardWeights(**{**WEIGHTS, name: 2 * WEIGHTS[name]})
        br = total_reward(s, ref, w)[1]
        for other in TERMS:
            assert br[other] == (2 * base[other] if other == name else base[other])


def test_unknown_term_and_dims(rng):
    s = random_state(rng)
    with pytest.raises(KeyError):
        reward_term("style", s, ReferenceFrame.from_state(s, MASK))
    with pytest.raises(DimensionError):
        reward_term("torque", s, ReferenceFrame.from_state(FrameState.zeros(3, 8), [False] * 3))


def test_sequence_rewards_identical_sequence(tmp_path):
    seq, _ = sit_sequence()
    rows = sequence_rewards(seq, seq, toy_tree())
    assert len(rows) == len(seq)
    write_breakdown_csv(rows, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].split(",") == ["frame", *TERMS, "total"]
    for total, br in rows:
        task = sum(br[k] for k in TERMS[:5])
        assert task == 36.75


# -- observations

def test_obs_sizes():
    lay = ObsLayout(23, n_history=0)
    assert lay.step_size == 153 and lay.size == 153
    assert ObsLayout(23).actor_size == 918
    assert ObsLayout(23, critic=True).size == 925


def test_zero_state_obs():
    s = FrameState.zeros(23, 4)
    obs = build_actor_obs(s, ReferenceFrame.from_state(s, [False] * 23), np.zeros(32))
    expected = np.zeros(153)
    expected[23 + 23 + 3 + 2] = -1.0
    assert np.array_equal(obs, expected)


def test_history_order_and_parse(rng):
    K = 5
    lay = ObsLayout(K, n_history=3, critic=True)
    hist = ObsHistory(3, lay.step_size)
    steps = []
    for _ in range(4):
        s = random_state(rng, K=K)
        ref = ReferenceFrame(s.keypoints, s.root_orientation, s.root_velocity, s.q, s.qd, [False] * K,
                             rng.normal(size=K), rng.normal(size=K))
        h = rng.normal(size=32)
        assert not hist.ready or len(steps) >= 3
        actor = build_actor_obs(s, ref, h, hist)
        steps.append(actor[:lay.step_size])
    assert hist.ready
    priv = (rng.normal(size=3), 0.7, rng.normal(size=3))
    critic = build_critic_obs(actor, *priv)
    assert critic.shape == (lay.size,) == (actor.shape[0] + 7,)
    p = lay.parse(critic)
    assert np.array_equal(np.concatenate([p[n] for n, _ in lay.step_blocks]), steps[-1])
    for got, want in zip(p["history"], steps[:-1]):
        assert np.array_equal(got, want)
    assert np.array_equal(p["root_velocity"], priv[0]) and p["friction"][0] == 0.7
    assert np.array_equal(p["external_force"], priv[2])


def test_fresh_history_is_zero_filled():
    hist = ObsHistory(2, 153)
    assert not hist.ready and np.array_equal(hist.flat(), np.zeros(306))


def test_actor_layout_has_no_privileged_fields(tmp_path):
    actor = ObsLayout(23)
    critic = ObsLayout(23, critic=True)
    actor.write_manifest(tmp_path / "a.json")
    entries = json.loads((tmp_path / "a.json").read_text())["entries"]
    privileged = {e["name"] for e in critic.entries() if e["privileged"]}
    assert privileged == {"root_velocity", "friction", "external_force"}
    assert not any(e["privileged"] for e in entries)
    assert not privileged & {e["name"] for e in entries}
    assert sum(e["size"] for e in entries) == 918


def test_obs_dimension_errors():
    s = FrameState.zeros(3, 1)
    ref = ReferenceFrame.from_state(s, [False] * 3)
    with pytest.raises(DimensionError):
        build_actor_obs(s, ref, np.zeros(31))
    with pytest.raises(DimensionError):
        build_actor_obs(s, ref, np.zeros(32), ObsHistory(2, 10))
    with pytest.raises(DimensionError):
        ObsLayout(3).parse(np.zeros(5))
