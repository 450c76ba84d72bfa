"""Inputs, training loop, evaluation and online inference for the relaxation predictor."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..autolabel import WeightlessAnnotation
from ..errors import DimensionError
from ..motion import MotionSequence
from .network import (
    DEFAULT_DROPOUT, DEFAULT_HIDDEN, FUTURE, HISTORY, AdamConfig, AdamState, WMNetwork,
    adam_step, backward, bce_loss, forward, forward_sequence, init_network,
)


def window_indices(n: int, t, delta: int = 0) -> np.ndarray:
    """Frame indices ``[t-4 .. t-1, t, t+delta .. t+delta+4]`` clamped to ``[0, n-1]``."""
    if n < 1:
        raise ValueError("empty sequence")
    t = np.asarray(t)
    offs = np.concatenate([np.arange(-HISTORY, 1), delta + np.arange(FUTURE)])
    return np.clip(t[..., None] + offs, 0, n - 1)


def build_input(seq_ref, t: int, delta: int = 0) -> np.ndarray:
    """The ``10 K`` network input at frame ``t`` from joint positions of ``seq_ref``.

    ``seq_ref`` may be a :class:`MotionSequence` or an ``(n, K)`` array.
    """
    q = seq_ref.q if isinstance(seq_ref, MotionSequence) else np.asarray(seq_ref, dtype=float)
    if q.ndim != 2 or q.shape[0] < 1:
        raise ValueError("need a non-empty (n, K) joint trajectory")
    if not 0 <= t < q.shape[0]:
        raise IndexError(f"frame {t} outside [0, {q.shape[0]})")
    return q[window_indices(q.shape[0], t, delta)].reshape(-1)


def build_inputs(q, delta: int = 0) -> np.ndarray:
    """Inputs for every frame, ``(n, 10 K)``."""
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    return q[window_indices(n, np.arange(n), delta)].reshape(n, -1)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 64
    lambda_smooth: float = 0.1
    max_future_offset: int = 10
    epochs: int = 100
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    dropout: float = DEFAULT_DROPOUT
    chunk: int = 16  # training window length in frames
    stride: int = 8  # spacing between window starts
    dtype: str = "float32"
    time_budget_s: float | None = None  # stop after the epoch that crosses this

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.batch_size < 1 or self.chunk < 1 or self.stride < 1 or self.epochs < 0:
            raise ValueError("batch_size, chunk, stride must be >= 1 and epochs >= 0")
        if self.lambda_smooth < 0 or self.max_future_offset < 0:
            raise ValueError("lambda_smooth and max_future_offset must be >= 0")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(self.lr, self.beta1, self.beta2, self.eps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class TrainResult:
    net: WMNetwork
    loss_history: list = field(default_factory=list)  # mean total loss per epoch
    bce_history: list = field(default_factory=list)
    steps: int = 0
    wall_time_s: float = 0.0


def _check_dataset(dataset):
    if not dataset:
        raise ValueError("empty dataset")
    K = None
    for i, (seq, ann) in enumerate(dataset):
        if len(ann) != len(seq):
            raise DimensionError(f"sample {i}: annotation has {len(ann)} frames, sequence has {len(seq)}")
        if ann.labels.shape[1] != seq.K:
            raise DimensionError(f"sample {i}: annotation K={ann.labels.shape[1]} vs sequence K={seq.K}")
        if K is not None and seq.K != K:
            raise DimensionError("all sequences must share K")
        K = seq.K
    return K


def _windows(dataset, chunk, stride):
    out = []
    for s, (seq, _) in enumerate(dataset):
        n = len(seq)
        starts = list(range(0, max(n - chunk, 0) + 1, stride))
        if starts[-1] + chunk < n:
            starts.append(n - chunk)
        for a in starts:
            out.append((s, a, min(a + chunk, n)))
    return out


def train(dataset, config: TrainConfig = TrainConfig(), net: WMNetwork | None = None, log=None) -> TrainResult:
    """Mini-batch BPTT with Adam over fixed-length windows.

    Each epoch shuffles the windows and draws a fresh future offset per
    window; every draw comes from one generator seeded by ``config.seed``.
    Windows shorter than ``chunk`` (short sequences) are batched separately
    by length so that no padding enters the loss.
    """
    K = _check_dataset(dataset)
    dtype = np.dtype(config.dtype)
    rng = np.random.default_rng(config.seed)
    if net is None:
        net = init_network(K, config.hidden, config.dropout, rng=rng)
    elif net.K != K:
        raise DimensionError(f"network K={net.K} vs data K={K}")
    net = net.astype(dtype)
    qs = [seq.q for seq, _ in dataset]
    targets = [ann.activation_targets().astype(dtype) for _, ann in dataset]
    dmax = config.max_future_offset
    # inputs for every (sequence, offset); small for desk-scale corpora
    inputs = {d: [build_inputs(q, d).astype(dtype) for q in qs] for d in range(-dmax, dmax + 1)}
    windows = _windows(dataset, config.chunk, config.stride)
    opt = AdamState.zeros_like(net.params)
    result = TrainResult(net)
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        order = rng.permutation(len(windows))
        deltas = rng.integers(-dmax, dmax, size=len(windows), endpoint=True)
        by_len = {}
        for k in order:
            s, a, b = windows[k]
            by_len.setdefault(b - a, []).append((s, a, b, int(deltas[k])))
        losses, bces, weights = [], [], []
        for length in sorted(by_len):
            items = by_len[length]
            for i in range(0, len(items), config.batch_size):
                batch = items[i:i + config.batch_size]
                X = np.stack([inputs[d][s][a:b] for s, a, b, d in batch], axis=1)
                Y = np.stack([targets[s][a:b] for s, a, b, _ in batch], axis=1)
                _, _, cache = forward_sequence(net, X, training=True, rng=rng, record=True)
                loss, grads = backward(net, cache, Y, config.lambda_smooth)
                adam_step(net.params, grads, opt, config.adam)
                losses.append(loss)
                bces.append(bce_loss(cache.y, Y))
                weights.append(len(batch))
        result.loss_history.append(float(np.average(losses, weights=weights)))
        result.bce_history.append(float(np.average(bces, weights=weights)))
        result.steps = opt.step
        if log is not None:
            log(epoch, result.loss_history[-1], result.bce_history[-1])
        if config.time_budget_s is not None and time.perf_counter() - t0 > config.time_budget_s:
            break
    result.wall_time_s = time.perf_counter() - t0
    return result


# -- evaluation -------------------------------------------------------------------

def predict_sequence(net: WMNetwork, seq: MotionSequence, delta: int = 0) -> np.ndarray:
    """Deterministic per-frame relaxation levels ``(n, K)``, state carried from frame 0."""
    X = build_inputs(seq.q, delta)
    y, _, _ = forward_sequence(net, X, training=False)
    return y.astype(float)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float  # fraction of (frame, joint) entries on the right side of 0.5
    frame_accuracy: float  # fraction of frames with every joint right
    bce: float
    total_variation: float  # mean over sequences of sum_t |w_t - w_{t-1}| (L1 over joints)

    def to_dict(self):
        return asdict(self)


def evaluate(net: WMNetwork, dataset, threshold: float = 0.5) -> tuple[EvalReport, list[np.ndarray]]:
    preds = [predict_sequence(net, seq) for seq, _ in dataset]
    tgts = [ann.activation_targets() for _, ann in dataset]
    P = np.concatenate(preds)
    T = np.concatenate(tgts)
    right = (P >= threshold) == (T >= 0.5)
    tv = float(np.mean([np.abs(np.diff(p, axis=0)).sum() for p in preds]))
    rep = EvalReport(float(right.mean()), float(right.all(axis=1).mean()), bce_loss(P, T), tv)
    return rep, preds


def low_w_intervals(w, threshold: float = 0.5) -> list[tuple[int, int]]:
    """Maximal frame runs where any joint's relaxation level is below ``threshold``."""
    mask = np.any(np.asarray(w) < threshold, axis=1)
    runs, start = [], None
    for t, m in enumerate(mask):
        if m and start is None:
            start = t
        elif not m and start is not None:
            runs.append((start, t))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


# -- online inference ---------------------------------------------------------------

class OnlineWM:
    """Stateful per-step inference from measured history and reference future."""

    def __init__(self, net: WMNetwork):
        self.net = net
        self.reset()

    def reset(self):
        self.state = None

    def __call__(self, q_history, q_current, q_ref_future) -> np.ndarray:
        return infer_online(self, q_history, q_current, q_ref_future)


def infer_online(online: OnlineWM, q_history, q_current, q_ref_future) -> np.ndarray:
    K = online.net.K
    h = np.asarray(q_history, dtype=float)
    c = np.asarray(q_current, dtype=float)
    f = np.asarray(q_ref_future, dtype=float)
    if h.shape != (HISTORY, K) or c.shape != (K,) or f.shape != (FUTURE, K):
        raise DimensionError(
            f"need history ({HISTORY}, {K}), current ({K},), future ({FUTURE}, {K}); "
            f"got {h.shape}, {c.shape}, {f.shape}")
    x = np.concatenate([h.reshape(-1), c, f.reshape(-1)])
    w, online.state = forward(online.net, x, online.state)
    return w.astype(float)
