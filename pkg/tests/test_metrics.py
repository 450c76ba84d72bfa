import numpy as np
import pytest
from scipy.spatial.transform import Rotation
from test_kinematics import fk_oracle

from weightless.errors import DimensionError
from weightless.kinematics import load_example_tree
from weightless.metrics import compute_metrics
from weightless.motion import MotionSequence
from weightless.rotations import quat_normalize
from weightless.toy import sit_sequence, toy_tree


def random_motion(rng, K, n=30, fps=50.0):
    return MotionSequence(fps, rng.normal(scale=0.2, size=(n, 3)),
                          np.array([quat_normalize(q) for q in rng.normal(size=(n, 4))]),
                          rng.uniform(-1, 1, size=(n, K)))


def loop_oracle(res, ref, tree):
    n, dt = len(res), 1.0 / res.fps
    P = np.array([fk_oracle(tree, res.pose(t))[0] for t in range(n)])
    Ph = np.array([fk_oracle(tree, ref.pose(t))[0] for t in range(n)])

    def diff(a, t):
        if t == 0:
            return (a[1] - a[0]) / dt
        if t == n - 1:
            return (a[n - 1] - a[n - 2]) / dt
        return (a[t + 1] - a[t - 1]) / (2 * dt)

    J = P.shape[1]
    pe = ve = ae = rp = rr = rv = 0.0
    for t in range(n):
        for j in range(J):
            pe += np.sqrt(np.sum((P[t, j] - Ph[t, j]) ** 2))
            ve += np.sqrt(np.sum((diff(P[:, j], t) - diff(Ph[:, j], t)) ** 2))
        for k in range(res.K):
            ae += abs(res.q[t, k] - ref.q[t, k])
        rp += np.sqrt(np.sum((res.root_positions[t] - ref.root_positions[t]) ** 2))
        a, b = res.root_orientations[t], ref.root_orientations[t]
        rel = Rotation.from_quat([*b[1:], b[0]]).inv() * Rotation.from_quat([*a[1:], a[0]])
        rr += rel.magnitude()
        rv += np.sqrt(np.sum((diff(res.root_positions, t) - diff(ref.root_positions, t)) ** 2))
    return dict(mpjpe=pe / (n * J), mpjve=ve / (n * J), mpjae=ae / (n * res.K), root_p=rp / n, root_r=rr / n,
                root_v=rv / n)


def test_identical_sequences_all_zero(rng):
    tree = load_example_tree()
    seq = random_motion(rng, tree.K)
    assert all(v == 0.0 for v in compute_metrics(seq, seq, tree).to_dict().values())


def test_rigid_translation():
    tree = toy_tree()
    seq, _ = sit_sequence()
    moved = seq.replace(root_positions=seq.root_positions + [0.1, 0.0, 0.0])
    m = compute_metrics(moved, seq, tree)
    assert m.root_p == pytest.approx(0.1, abs=1e-12)
    assert m.mpjpe == pytest.approx(0.1, abs=1e-12)
    assert m.mpjae == 0.0 and m.root_r == 0.0
    assert m.root_v < 1e-12 and m.mpjve < 1e-12


def test_random_matches_loop_oracle(rng):
    tree = load_example_tree()
    a, b = random_motion(rng, tree.K), random_motion(rng, tree.K)
    got = compute_metrics(a, b, tree).to_dict()
    want = loop_oracle(a, b, tree)
    for k in want:
        assert got[k] == pytest.approx(want[k], rel=1e-12, abs=1e-12), k
        assert got[k] >= 0


def test_mismatch_errors(rng):
    tree = toy_tree()
    a = random_motion(rng, tree.K, n=10)
    with pytest.raises(DimensionError):
        compute_metrics(a, random_motion(rng, tree.K, n=11), tree)
    with pytest.raises(DimensionError):
        compute_metrics(a, random_motion(rng, tree.K, n=10, fps=30.0), tree)
    with pytest.raises(DimensionError):
        compute_metrics(random_motion(rng, tree.K + 1), random_motion(rng, tree.K + 1), tree)
