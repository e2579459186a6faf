"""LSTM and BiLSTM encoders with hand-written backpropagation through time.

Gates use the hard sigmoid ``clamp(0.2 x + 0.5, 0, 1)``; cell input and
output use tanh.  Gate blocks are stored side by side in the order
input, forget, cell, output, so ``W[:, :h]`` is ``W_i`` and so on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATES = ("i", "f", "c", "o")


def hard_sigmoid(x):
    return np.clip(0.2 * np.asarray(x, dtype=np.float64) + 0.5, 0.0, 1.0)


def hard_sigmoid_grad(x):
    # derivative taken as 0 at the kinks x = +/-2.5
    x = np.asarray(x, dtype=np.float64)
    return np.where((x > -2.5) & (x < 2.5), 0.2, 0.0)


@dataclass
class LstmParams:
    W: np.ndarray  # (d_in, 4h)
    U: np.ndarray  # (h, 4h)
    b: np.ndarray  # (4h,)

    def __post_init__(self):
        d_in, four_h = self.W.shape
        h = four_h // 4
        if four_h != 4 * h or self.U.shape != (h, 4 * h) or self.b.shape != (4 * h,):
            raise ValueError(f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}")

    @property
    def input_size(self) -> int:
        return self.W.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.U.shape[0]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(W, U, b) views for one gate."""
        h = self.hidden_size
        k = GATES.index(name)
        sl = slice(k * h, (k + 1) * h)
        return self.W[:, sl], self.U[:, sl], self.b[sl]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "U": self.U, "b": self.b}

    @classmethod
    def zeros(cls, d_in: int, hidden: int) -> "LstmParams":
        return cls(np.zeros((d_in, 4 * hidden)), np.zeros((hidden, 4 * hidden)), np.zeros(4 * hidden))

    @classmethod
    def init(cls, d_in: int, hidden: int, rng: np.random.Generator) -> "LstmParams":
        """Glorot-uniform input weights, orthogonal recurrent blocks, forget bias 1."""
        limit = np.sqrt(6.0 / (d_in + hidden))
        W = rng.uniform(-limit, limit, size=(d_in, 4 * hidden))
        blocks = []
        for _ in GATES:
            q, r = np.linalg.qr(rng.standard_normal((hidden, hidden)))
            blocks.append(q * np.sign(np.diag(r)))
        U = np.concatenate(blocks, axis=1)
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        return cls(W, U, b)


@dataclass
class LstmGrads:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray


@dataclass
class LstmCache:
    params: LstmParams
    x: np.ndarray       # (B, T, d_in)
    z: np.ndarray       # (B, T, 4h) gate pre-activations
    gates: np.ndarray   # (B, T, 4h) activated i, f, g, o
    c: np.ndarray       # (B, T, h)
    tanh_c: np.ndarray  # (B, T, h)
    h: np.ndarray       # (B, T, h)
    single: bool


def _as_batch(inputs):
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise ValueError(f"inputs must be T x d or B x T x d, got shape {x.shape}")
    return x, False


def lstm_forward(params: LstmParams, inputs):
    """Run the recurrence from zero state; returns (outputs, cache)."""
    x, single = _as_batch(inputs)
    bsz, t, d = x.shape
    if t == 0:
        raise ValueError("empty input sequence")
    if d != params.input_size:
        raise ValueError(f"input width {d} does not match LSTM input size {params.input_size}")
    h = params.hidden_size
    xw = x @ params.W + params.b
    z = np.empty((bsz, t, 4 * h))
    gates = np.empty_like(z)
    c = np.empty((bsz, t, h))
    hs = np.empty((bsz, t, h))
    h_prev = np.zeros((bsz, h))
    c_prev = np.zeros((bsz, h))
    for step in range(t):
        zt = xw[:, step] + h_prev @ params.U
        z[:, step] = zt
        g = gates[:, step]
        g[:, :2 * h] = hard_sigmoid(zt[:, :2 * h])
        g[:, 2 * h:3 * h] = np.tanh(zt[:, 2 * h:3 * h])
        g[:, 3 * h:] = hard_sigmoid(zt[:, 3 * h:])
        c_prev = g[:, h:2 * h] * c_prev + g[:, :h] * g[:, 2 * h:3 * h]
        c[:, step] = c_prev
        h_prev = g[:, 3 * h:] * np.tanh(c_prev)
        hs[:, step] = h_prev
    tanh_c = np.tanh(c)
    cache = LstmCache(params, x, z, gates, c, tanh_c, hs, single)
    return (hs[0] if single else hs), cache


def bptt_backward(cache: LstmCache, d_out):
    """Gradients of a scalar loss wrt the LSTM parameters and inputs.

    ``d_out`` is the upstream gradient wrt every output vector.
    Returns (LstmGrads, d_inputs).
    """
    p = cache.params
    dh_all = np.asarray(d_out, dtype=np.float64)
    if cache.single:
        dh_all = dh_all[None]
    bsz, t, h = cache.h.shape
    dz = np.empty((bsz, t, 4 * h))
    dh_next = np.zeros((bsz, h))
    dc_next = np.zeros((bsz, h))
    U_T = p.U.T
    for step in range(t - 1, -1, -1):
        g = cache.gates[:, step]
        i, f, cc, o = g[:, :h], g[:, h:2 * h], g[:, 2 * h:3 * h], g[:, 3 * h:]
        tc = cache.tanh_c[:, step]
        c_prev = cache.c[:, step - 1] if step > 0 else 0.0
        dh = dh_all[:, step] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        zt = cache.z[:, step]
        d = dz[:, step]
        d[:, :h] = dc * cc * hard_sigmoid_grad(zt[:, :h])
        d[:, h:2 * h] = dc * c_prev * hard_sigmoid_grad(zt[:, h:2 * h])
        d[:, 2 * h:3 * h] = dc * i * (1.0 - cc * cc)
        d[:, 3 * h:] = dh * tc * hard_sigmoid_grad(zt[:, 3 * h:])
        dc_next = dc * f
        dh_next = d @ U_T
    h_prev = np.concatenate([np.zeros((bsz, 1, h)), cache.h[:, :-1]], axis=1)
    flat_dz = dz.reshape(-1, 4 * h)
    grads = LstmGrads(
        W=cache.x.reshape(-1, cache.x.shape[2]).T @ flat_dz,
        U=h_prev.reshape(-1, h).T @ flat_dz,
        b=flat_dz.sum(axis=0),
    )
    dx = dz @ p.W.T
    return grads, (dx[0] if cache.single else dx)


@dataclass
class BiLstmCache:
    fwd: LstmCache
    bwd: LstmCache
    single: bool


def bilstm_forward(fwd_params: LstmParams, bwd_params: LstmParams, inputs):
    """Forward pass and time-reversed backward pass, concatenated per step."""
    x, single = _as_batch(inputs)
    hf, cf = lstm_forward(fwd_params, x)
    hb, cb = lstm_forward(bwd_params, x[:, ::-1])
    out = np.concatenate([hf, hb[:, ::-1]], axis=2)
    return (out[0] if single else out), BiLstmCache(cf, cb, single)


def bilstm_backward(cache: BiLstmCache, d_out):
    d = np.asarray(d_out, dtype=np.float64)
    if cache.single:
        d = d[None]
    h = cache.fwd.params.hidden_size
    gf, dxf = bptt_backward(cache.fwd, d[:, :, :h])
    gb, dxb = bptt_backward(cache.bwd, d[:, ::-1, h:])
    dx = dxf + dxb[:, ::-1]
    return gf, gb, (dx[0] if cache.single else dx)
