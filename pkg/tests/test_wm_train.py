import numpy as np
import pytest

from weightless.autolabel import WeightlessAnnotation
from weightless.errors import DimensionError, FormatError
from weightless.motion import MotionSequence
from weightless.wm import load_checkpoint, save_checkpoint
from weightless.wm.network import forward, forward_sequence, init_network, zero_network
from weightless.wm.train import (
    OnlineWM, TrainConfig, build_input, build_inputs, evaluate, infer_online, low_w_intervals, train,
    window_indices,
)


def ramp(n=80, K=2):
    q = np.arange(n, dtype=float)[:, None] * np.arange(1, K + 1)
    return MotionSequence(50, np.zeros((n, 3)), np.tile([1.0, 0, 0, 0], (n, 1)), q)


def test_constant_sequence_input():
    q = np.tile([0.1, -0.2, 0.3], (20, 1))
    seq = MotionSequence(50, np.zeros((20, 3)), np.tile([1.0, 0, 0, 0], (20, 1)), q)
    for t, d in [(0, 0), (7, 3), (19, -10)]:
        assert np.array_equal(build_input(seq, t, d), np.tile(q[0], 10))


def test_history_clamps_at_start():
    x = build_input(ramp(), 0).reshape(10, 2)
    assert np.array_equal(x[:5, 0], np.zeros(5))


def test_index_table_t50_delta_minus3():
    seq = ramp()
    x = build_input(seq, 50, -3).reshape(10, 2)
    assert x[:, 0].tolist() == [46, 47, 48, 49, 50, 47, 48, 49, 50, 51]
    assert window_indices(80, 78, 5).tolist() == [74, 75, 76, 77, 78, 79, 79, 79, 79, 79]


def test_build_inputs_rows_match(rng):
    seq = ramp(30, 3)
    X = build_inputs(seq.q, 4)
    for t in range(30):
        assert np.array_equal(X[t], build_input(seq, t, 4))


def test_build_input_errors():
    with pytest.raises(IndexError):
        build_input(ramp(10), 10)


def _const_dataset(n_seq=3, n=40, K=2):
    data = []
    for s in range(n_seq):
        q = np.full((n, K), 0.1 * s)
        seq = MotionSequence(50, np.zeros((n, 3)), np.tile([1.0, 0, 0, 0], (n, 1)), q)
        ann = WeightlessAnnotation((), np.zeros((n, K), np.uint8), tuple([frozenset()] * n))
        data.append((seq, ann))
    return data


def test_constant_all_active_converges():
    cfg = TrainConfig(lr=1e-2, epochs=40, hidden=(8, 4), batch_size=8, seed=3)
    res = train(_const_dataset(), cfg)
    assert res.loss_history[-1] < 0.05
    rep, preds = evaluate(res.net.astype(np.float64), _const_dataset())
    assert rep.accuracy == 1.0


def test_training_deterministic():
    cfg = TrainConfig(lr=1e-3, epochs=3, hidden=(8, 4), batch_size=4, seed=11)
    a = train(_const_dataset(), cfg)
    b = train(_const_dataset(), cfg)
    assert a.loss_history == b.loss_history
    for k in a.net.params:
        assert np.array_equal(a.net.params[k], b.net.params[k])
    c = train(_const_dataset(), TrainConfig(lr=1e-3, epochs=3, hidden=(8, 4), batch_size=4, seed=12))
    assert c.loss_history != a.loss_history


def test_misaligned_annotation_rejected():
    seq, ann = _const_dataset(1)[0]
    short = WeightlessAnnotation((), ann.labels[:-1], ann.active_sets[:-1])
    with pytest.raises(DimensionError):
        train([(seq, short)], TrainConfig(epochs=1, hidden=(2,)))
    with pytest.raises(ValueError):
        train([], TrainConfig(epochs=1))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_online_zero_net_half():
    online = OnlineWM(zero_network(3, (4,)))
    w = online(np.zeros((4, 3)), np.zeros(3), np.zeros((5, 3)))
    assert np.array_equal(w, np.full(3, 0.5))


def test_online_reset_reproduces(rng):
    online = OnlineWM(init_network(3, (4, 2), seed=0))
    args = (rng.normal(size=(4, 3)), rng.normal(size=3), rng.normal(size=(5, 3)))
    a = online(*args)
    online(*args)
    online.reset()
    assert np.array_equal(online(*args), a)


def test_online_equals_offline_when_measured_is_reference():
    net = init_network(2, (5, 3), seed=4)
    seq = ramp(25, 2)
    q = seq.q * 0.01
    offline, _, _ = forward_sequence(net, build_inputs(q, 0))
    online = OnlineWM(net)
    n = len(q)
    for t in range(n):
        hist = q[np.clip(np.arange(t - 4, t), 0, n - 1)]
        fut = q[np.clip(np.arange(t, t + 5), 0, n - 1)]
        w = online(hist, q[t], fut)
        np.testing.assert_allclose(w, offline[t], atol=1e-14)


def test_online_window_errors():
    online = OnlineWM(zero_network(3, (4,)))
    with pytest.raises(DimensionError):
        infer_online(online, np.zeros((3, 3)), np.zeros(3), np.zeros((5, 3)))


def test_low_w_intervals():
    w = np.ones((10, 2))
    w[3:6, 1] = 0.1
    w[8:, 0] = 0.2
    assert low_w_intervals(w) == [(3, 6), (8, 10)]


def test_checkpoint_roundtrip(tmp_path, rng):
    net = init_network(3, (5, 4), dropout=0.2, seed=9)
    p = tmp_path / "n.ckpt"
    save_checkpoint(net, p, {"train_config": {"lr": 1e-4}})
    back, prov = load_checkpoint(p)
    assert prov == {"train_config": {"lr": 1e-4}}
    assert back.hidden == net.hidden and back.K == 3 and back.dropout == 0.2
    for k in net.params:
        assert np.array_equal(back.params[k], net.params[k])
    x = rng.normal(size=30)
    assert np.array_equal(forward(back, x)[0], forward(net, x)[0])


def test_checkpoint_errors(tmp_path):
    net = init_network(2, (3,), seed=0)
    p = tmp_path / "n.ckpt"
    save_checkpoint(net, p)
    raw = p.read_bytes()
    (tmp_path / "bad").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(tmp_path / "bad")
    (tmp_path / "trunc").write_bytes(raw[:-8])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(tmp_path / "trunc")
    future = raw.replace(b'"format_version": 1', b'"format_version": 9')
    (tmp_path / "future").write_bytes(future)
    with pytest.raises(FormatError, match="format_version"):
        load_checkpoint(tmp_path / "future")
