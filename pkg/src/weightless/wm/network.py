"""Stacked LSTM relaxation predictor with exact backpropagation through time.

Gate order inside every stacked weight block is input, forget, candidate,
output. Dropout (inverted, rate ``p``) sits between LSTM layers only: the
hidden output of layer ``l`` is masked before it feeds layer ``l + 1``; the
recurrent path and the output map see the unmasked values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError

HISTORY = 4
FUTURE = 5
WINDOW = HISTORY + 1 + FUTURE
DEFAULT_HIDDEN = (256, 256, 64)
DEFAULT_DROPOUT = 0.1
BCE_CLAMP = 1e-7


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class WMNetwork:
    K: int
    hidden: tuple[int, ...]
    params: dict  # name -> array
    dropout: float = DEFAULT_DROPOUT

    @property
    def input_dim(self) -> int:
        return WINDOW * self.K

    @property
    def names(self) -> list[str]:
        out = []
        for l in range(len(self.hidden)):
            out += [f"lstm{l}.Wx", f"lstm{l}.Wh", f"lstm{l}.b"]
        return out + ["out.W", "out.b"]

    def n_params(self) -> int:
        return sum(self.params[n].size for n in self.names)

    def zero_state(self, batch: int | None = None, dtype=None):
        dtype = dtype or self.params["out.W"].dtype
        shape = (lambda H: (H,)) if batch is None else (lambda H: (batch, H))
        return [(np.zeros(shape(H), dtype), np.zeros(shape(H), dtype)) for H in self.hidden]

    def astype(self, dtype) -> "WMNetwork":
        return WMNetwork(self.K, self.hidden, {k: v.astype(dtype) for k, v in self.params.items()}, self.dropout)

    def copy(self) -> "WMNetwork":
        return WMNetwork(self.K, self.hidden, {k: v.copy() for k, v in self.params.items()}, self.dropout)


def init_network(K: int, hidden=DEFAULT_HIDDEN, dropout: float = DEFAULT_DROPOUT,
                 rng: np.random.Generator | None = None, seed: int | None = None) -> WMNetwork:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, forget-gate bias 1."""
    rng = rng or np.random.default_rng(seed)
    hidden = tuple(int(h) for h in hidden)
    if K < 1 or not hidden or min(hidden) < 1:
        raise ValueError("K and all hidden sizes must be >= 1")
    if not 0.0 <= dropout < 1.0:
        raise ValueError("dropout must lie in [0, 1)")
    params = {}
    n_in = WINDOW * K
    for l, H in enumerate(hidden):
        bound = 1.0 / np.sqrt(n_in + H)
        params[f"lstm{l}.Wx"] = rng.uniform(-bound, bound, (4 * H, n_in))
        params[f"lstm{l}.Wh"] = rng.uniform(-bound, bound, (4 * H, H))
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        params[f"lstm{l}.b"] = b
        n_in = H
    bound = 1.0 / np.sqrt(n_in)
    params["out.W"] = rng.uniform(-bound, bound, (K, n_in))
    params["out.b"] = np.zeros(K)
    return WMNetwork(K, hidden, params, dropout)


def zero_network(K: int, hidden=DEFAULT_HIDDEN) -> WMNetwork:
    net = init_network(K, hidden, seed=0)
    return WMNetwork(K, net.hidden, {k: np.zeros_like(v) for k, v in net.params.items()}, net.dropout)


@dataclass
class ForwardCache:
    """Everything backward needs from a recorded training-mode forward."""

    inputs: list = field(default_factory=list)  # per t, per layer: layer input
    h_prev: list = field(default_factory=list)
    c_prev: list = field(default_factory=list)
    gates: list = field(default_factory=list)  # (i, f, g, o)
    tanh_c: list = field(default_factory=list)
    masks: list = field(default_factory=list)  # per t, per layer except last: mask or None
    top: list = field(default_factory=list)  # last layer hidden output per t
    y: np.ndarray | None = None


def _cell(params, l, H, x, h, c):
    z = x @ params[f"lstm{l}.Wx"].T + h @ params[f"lstm{l}.Wh"].T + params[f"lstm{l}.b"]
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = sigmoid(z[..., 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return (i, f, g, o), c_new, tc, o * tc


def forward_sequence(net: WMNetwork, X, state=None, training: bool = False,
                     rng: np.random.Generator | None = None, record: bool = False):
    """Run ``X`` of shape ``(T, D)`` or ``(T, B, D)``.

    Returns ``(y, final_state, cache)`` with ``y`` shaped like ``X`` but with
    ``K`` features. ``cache`` is None unless ``record`` is set.
    """
    X = np.asarray(X)
    if X.ndim not in (2, 3) or X.shape[-1] != net.input_dim:
        raise DimensionError(f"inputs must be (T, [B,] {net.input_dim}), got {X.shape}")
    batch = X.shape[1] if X.ndim == 3 else None
    dtype = net.params["out.W"].dtype
    X = X.astype(dtype, copy=False)
    if state is None:
        state = net.zero_state(batch, dtype)
    _check_state(net, state, batch)
    if training and net.dropout > 0 and rng is None:
        raise ValueError("training-mode dropout needs a generator")
    P = net.params
    L = len(net.hidden)
    keep = 1.0 - net.dropout
    cache = ForwardCache() if record else None
    ys = []
    state = list(state)
    for t in range(X.shape[0]):
        inp = X[t]
        row = ([], [], [], [], [], [])
        for l, H in enumerate(net.hidden):
            h, c = state[l]
            gates, c_new, tc, h_new = _cell(P, l, H, inp, h, c)
            if record:
                for lst, v in zip(row, (inp, h, c, gates, tc)):
                    lst.append(v)
            state[l] = (h_new, c_new)
            out = h_new
            mask = None
            if l < L - 1 and training and net.dropout > 0:
                mask = (rng.random(h_new.shape) < keep).astype(dtype) / keep
                out = h_new * mask
            if record:
                row[5].append(mask)
            inp = out
        ys.append(sigmoid(inp @ P["out.W"].T + P["out.b"]))
        if record:
            cache.inputs.append(row[0])
            cache.h_prev.append(row[1])
            cache.c_prev.append(row[2])
            cache.gates.append(row[3])
            cache.tanh_c.append(row[4])
            cache.masks.append(row[5])
            cache.top.append(inp)
    y = np.stack(ys)
    if record:
        cache.y = y
    return y, state, cache


def _check_state(net, state, batch):
    if len(state) != len(net.hidden):
        raise DimensionError("state must hold one (h, c) pair per layer")
    for (h, c), H in zip(state, net.hidden):
        want = (H,) if batch is None else (batch, H)
        if h.shape != want or c.shape != want:
            raise DimensionError(f"state entry has shape {h.shape}/{c.shape}, expected {want}")


def forward(net: WMNetwork, x, state=None, training: bool = False, rng=None):
    """One time step: ``x`` is ``(D,)`` or ``(B, D)``. Returns ``(w, new_state)``."""
    x = np.asarray(x)
    y, state, _ = forward_sequence(net, x[None], state, training, rng)
    return y[0], state


# -- losses ---------------------------------------------------------------------

def bce_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch {pred.shape} vs {target.shape}")
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)))


def smoothness_loss(pred) -> float:
    """``(1/K) sum_t sum_i (w[t, i] - w[t-1, i])**2`` for ``(T, K)``; batches ``(T, B, K)`` are averaged over B."""
    pred = np.asarray(pred, dtype=float)
    if pred.shape[0] < 2:
        return 0.0
    d = np.diff(pred, axis=0)
    K = pred.shape[-1]
    s = np.sum(d * d, axis=(0, -1)) / K
    return float(np.mean(s))


def total_loss(pred, target, lam: float) -> float:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return bce_loss(pred, target) + lam * smoothness_loss(pred)


def _loss_grad_y(y, target, lam):
    """d total_loss / d y for the pre-clamp sigmoid outputs."""
    N = y.size
    p = np.clip(y, BCE_CLAMP, 1.0 - BCE_CLAMP)
    inside = (y > BCE_CLAMP) & (y < 1.0 - BCE_CLAMP)
    g = (-(target / p) + (1.0 - target) / (1.0 - p)) / N * inside
    if lam > 0 and y.shape[0] >= 2:
        K = y.shape[-1]
        B = y.shape[1] if y.ndim == 3 else 1
        d = np.diff(y, axis=0)
        gs = np.zeros_like(y)
        gs[1:] += d
        gs[:-1] -= d
        g = g + lam * 2.0 / (K * B) * gs
    return g


def backward(net: WMNetwork, cache: ForwardCache, target, lam: float = 0.0):
    """Exact gradients of :func:`total_loss` for a recorded forward.

    Returns ``(loss, grads)`` where ``grads`` maps parameter names to arrays.
    The initial recurrent state is treated as a constant.
    """
    if cache is None or cache.y is None:
        raise ValueError("backward needs a forward run with record=True")
    y = cache.y
    target = np.asarray(target, dtype=y.dtype)
    if target.shape != y.shape:
        raise DimensionError(f"target shape {target.shape} does not match predictions {y.shape}")
    loss = total_loss(y, target, lam)
    P = net.params
    L = len(net.hidden)
    grads = {k: np.zeros_like(v) for k, v in P.items()}
    dlogit = _loss_grad_y(y, target, lam) * y * (1.0 - y)
    batched = y.ndim == 3
    dh_next = [np.zeros_like(cache.h_prev[0][l]) for l in range(L)]
    dc_next = [np.zeros_like(cache.c_prev[0][l]) for l in range(L)]
    for t in range(y.shape[0] - 1, -1, -1):
        da = dlogit[t]
        top = cache.top[t]
        if batched:
            grads["out.W"] += da.T @ top
            grads["out.b"] += da.sum(0)
        else:
            grads["out.W"] += np.outer(da, top)
            grads["out.b"] += da
        d_above = da @ P["out.W"]
        for l in range(L - 1, -1, -1):
            H = net.hidden[l]
            i, f, g, o = cache.gates[t][l]
            tc = cache.tanh_c[t][l]
            dh = d_above + dh_next[l]
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next[l]
            di = dc * g
            dg = dc * i
            df = dc * cache.c_prev[t][l]
            dc_next[l] = dc * f
            dz = np.concatenate([di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)], axis=-1)
            inp = cache.inputs[t][l]
            hp = cache.h_prev[t][l]
            if batched:
                grads[f"lstm{l}.Wx"] += dz.T @ inp
                grads[f"lstm{l}.Wh"] += dz.T @ hp
                grads[f"lstm{l}.b"] += dz.sum(0)
            else:
                grads[f"lstm{l}.Wx"] += np.outer(dz, inp)
                grads[f"lstm{l}.Wh"] += np.outer(dz, hp)
                grads[f"lstm{l}.b"] += dz
            dh_next[l] = dz @ P[f"lstm{l}.Wh"]
            if l > 0:
                d_above = dz @ P[f"lstm{l}.Wx"]
                mask = cache.masks[t][l - 1]
                if mask is not None:
                    d_above = d_above * mask
    return loss, grads


# -- optimizer --------------------------------------------------------------------

@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be > 0")


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adam_step(params: dict, grads: dict, state: AdamState, config: AdamConfig = AdamConfig()) -> None:
    """In-place bias-corrected Adam update of ``params`` and ``state``."""
    if set(grads) != set(params):
        raise DimensionError("gradient names do not match parameters")
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise DimensionError(f"gradient {k} has shape {g.shape}, parameter has {p.shape}")
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
