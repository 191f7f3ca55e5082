"""Simple RNN and LSTM baselines with hand-written backward passes.

Both follow the sequence conventions of :mod:`ecnnts.ecnn`: ``inputs`` hold
``x[0..T-1]``, ``targets`` hold ``y_d[1..T]``, the initial state is zero and
the loss is ``mean_t 0.5 * ||y[t] - y_d[t]||**2``.
"""
from dataclasses import dataclass

import numpy as np

from .ecnn import _as_sequence, _check_batch
from .params import ParamSet, check_dims, uniform_init

__all__ = [
    "RnnParams",
    "LstmParams",
    "init_rnn",
    "init_lstm",
    "rnn_forward",
    "rnn_bptt",
    "lstm_forward",
    "lstm_bptt",
]


# --------------------------------------------------------------------------
# simple RNN: s[t] = tanh(A s[t-1] + B x[t-1]), y[t] = C s[t]


@dataclass(eq=False)
class RnnParams(ParamSet):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    kind = "rnn"
    names = ("A", "B", "C")

    @staticmethod
    def expected_shapes(n, m, p):
        return {"A": (n, n), "B": (n, m), "C": (p, n)}

    @property
    def dims(self):
        return self.A.shape[0], self.B.shape[1], self.C.shape[0]


@dataclass(eq=False)
class RnnTrace:
    states: np.ndarray  # (B, T+1, n)
    outputs: np.ndarray  # (B, T, p)
    residuals: np.ndarray  # (B, T, p)


def init_rnn(n, m, p, seed=0):
    n, m, p = check_dims(n, m, p)
    rng = np.random.default_rng(seed)
    shapes = RnnParams.expected_shapes(n, m, p)
    return RnnParams(**{k: uniform_init(rng, shapes[k], n) for k in RnnParams.names})


def rnn_forward_batch(params, X, Y):
    bsz, T, _ = X.shape
    states = np.zeros((bsz, T + 1, params.n))
    xb = X @ params.B.T
    for t in range(1, T + 1):
        states[:, t] = np.tanh(states[:, t - 1] @ params.A.T + xb[:, t - 1])
    outputs = states[:, 1:] @ params.C.T
    residuals = outputs - Y
    loss = 0.5 * float(np.sum(residuals**2)) / (bsz * T)
    return RnnTrace(states, outputs, residuals), loss


def rnn_backward_batch(params, trace, X, truncation=None):
    bsz, T, _ = X.shape
    s = trace.states
    grad_y = trace.residuals / (bsz * T)
    dA = np.zeros_like(params.A)
    dB = np.zeros_like(params.B)
    dC = np.einsum("btp,btn->pn", grad_y, s[:, 1:])
    delta_next = np.zeros((bsz, params.n))
    for t in range(T, 0, -1):
        if truncation is not None and t % truncation == 0:
            delta_next = np.zeros_like(delta_next)
        ds = delta_next @ params.A + grad_y[:, t - 1] @ params.C
        delta = (1.0 - s[:, t] ** 2) * ds
        dA += delta.T @ s[:, t - 1]
        dB += delta.T @ X[:, t - 1]
        delta_next = delta
    return RnnParams(A=dA, B=dB, C=dC)


def rnn_loss_and_grad(params, X, Y, truncation=None):
    trace, loss = rnn_forward_batch(params, X, Y)
    return loss, rnn_backward_batch(params, trace, X, truncation)


def rnn_predict_last(params, X, Y_context=None):
    X = np.asarray(X, dtype=np.float64)
    s = np.zeros((X.shape[0], params.n))
    for t in range(X.shape[1]):
        s = np.tanh(s @ params.A.T + X[:, t] @ params.B.T)
    return s @ params.C.T


def rnn_forward(params, inputs, targets):
    X, Y = _check_batch(params, *_as_sequence(inputs, targets))
    return rnn_forward_batch(params, X, Y)


def rnn_bptt(params, trace, inputs, targets, truncation=None):
    X, Y = _check_batch(params, *_as_sequence(inputs, targets))
    if trace.states.shape[1] != X.shape[1] + 1 or not np.array_equal(trace.residuals, trace.outputs - Y):
        raise ValueError("trace does not match these inputs/targets")
    return rnn_backward_batch(params, trace, X, truncation)


# --------------------------------------------------------------------------
# LSTM over v[t] = [h[t-1], x[t-1]]:
#   i, f, o = sigmoid(W v + b), g = tanh(Wg v + bg)
#   c[t] = f * c[t-1] + i * g,  h[t] = o * tanh(c[t]),  y[t] = C h[t]


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@dataclass(eq=False)
class LstmParams(ParamSet):
    Wi: np.ndarray
    bi: np.ndarray
    Wf: np.ndarray
    bf: np.ndarray
    Wo: np.ndarray
    bo: np.ndarray
    Wg: np.ndarray
    bg: np.ndarray
    C: np.ndarray

    kind = "lstm"
    names = ("Wi", "bi", "Wf", "bf", "Wo", "bo", "Wg", "bg", "C")

    @staticmethod
    def expected_shapes(n, m, p):
        shapes = {}
        for gate in "ifog":
            shapes["W" + gate] = (n, n + m)
            shapes["b" + gate] = (n,)
        shapes["C"] = (p, n)
        return shapes

    @property
    def dims(self):
        n = self.Wi.shape[0]
        return n, self.Wi.shape[1] - n, self.C.shape[0]


@dataclass(eq=False)
class LstmTrace:
    hidden: np.ndarray  # (B, T+1, n)
    cells: np.ndarray  # (B, T+1, n)
    gates: dict  # name -> (B, T, n), post-activation
    concat: np.ndarray  # (B, T, n+m)
    outputs: np.ndarray
    residuals: np.ndarray


def init_lstm(n, m, p, seed=0):
    """Uniform weights in ``[-1/sqrt(n), 1/sqrt(n)]``; forget bias 1, other biases 0."""
    n, m, p = check_dims(n, m, p)
    rng = np.random.default_rng(seed)
    shapes = LstmParams.expected_shapes(n, m, p)
    arrays = {}
    for name in LstmParams.names:
        if name.startswith("b"):
            arrays[name] = np.ones(n) if name == "bf" else np.zeros(n)
        else:
            arrays[name] = uniform_init(rng, shapes[name], n)
    return LstmParams(**arrays)


def _lstm_step(params, h, c, x):
    v = np.concatenate([h, x], axis=1)
    i = _sigmoid(v @ params.Wi.T + params.bi)
    f = _sigmoid(v @ params.Wf.T + params.bf)
    o = _sigmoid(v @ params.Wo.T + params.bo)
    g = np.tanh(v @ params.Wg.T + params.bg)
    c = f * c + i * g
    h = o * np.tanh(c)
    return v, i, f, o, g, c, h


def lstm_forward_batch(params, X, Y):
    bsz, T, m = X.shape
    n = params.n
    hidden = np.zeros((bsz, T + 1, n))
    cells = np.zeros((bsz, T + 1, n))
    concat = np.empty((bsz, T, n + m))
    gates = {k: np.empty((bsz, T, n)) for k in "ifog"}
    for t in range(1, T + 1):
        v, i, f, o, g, c, h = _lstm_step(params, hidden[:, t - 1], cells[:, t - 1], X[:, t - 1])
        concat[:, t - 1] = v
        for key, val in zip("ifog", (i, f, o, g)):
            gates[key][:, t - 1] = val
        cells[:, t] = c
        hidden[:, t] = h
    outputs = hidden[:, 1:] @ params.C.T
    residuals = outputs - Y
    loss = 0.5 * float(np.sum(residuals**2)) / (bsz * T)
    return LstmTrace(hidden, cells, gates, concat, outputs, residuals), loss


def lstm_backward_batch(params, trace, X, truncation=None):
    bsz, T, _ = X.shape
    n = params.n
    grads = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    grad_y = trace.residuals / (bsz * T)
    grads["C"] = np.einsum("btp,btn->pn", grad_y, trace.hidden[:, 1:])
    dh_next = np.zeros((bsz, n))
    dc_next = np.zeros((bsz, n))
    f_next = np.zeros((bsz, n))
    W = {k: getattr(params, "W" + k) for k in "ifog"}
    for t in range(T, 0, -1):
        if truncation is not None and t % truncation == 0:
            dh_next = np.zeros_like(dh_next)
            dc_next = np.zeros_like(dc_next)
        i, f, o, g = (trace.gates[k][:, t - 1] for k in "ifog")
        c, c_prev = trace.cells[:, t], trace.cells[:, t - 1]
        tc = np.tanh(c)
        dh = dh_next + grad_y[:, t - 1] @ params.C
        dc = dh * o * (1.0 - tc**2) + dc_next * f_next
        local = {
            "i": dc * g * i * (1.0 - i),
            "f": dc * c_prev * f * (1.0 - f),
            "o": dh * tc * o * (1.0 - o),
            "g": dc * i * (1.0 - g**2),
        }
        v = trace.concat[:, t - 1]
        dv = np.zeros_like(v)
        for k, d in local.items():
            grads["W" + k] += d.T @ v
            grads["b" + k] += d.sum(axis=0)
            dv += d @ W[k]
        dh_next = dv[:, :n]
        dc_next = dc
        f_next = f
    return LstmParams(**grads)


def lstm_loss_and_grad(params, X, Y, truncation=None):
    trace, loss = lstm_forward_batch(params, X, Y)
    return loss, lstm_backward_batch(params, trace, X, truncation)


def lstm_predict_last(params, X, Y_context=None):
    X = np.asarray(X, dtype=np.float64)
    h = np.zeros((X.shape[0], params.n))
    c = np.zeros_like(h)
    for t in range(X.shape[1]):
        *_, c, h = _lstm_step(params, h, c, X[:, t])
    return h @ params.C.T


def lstm_forward(params, inputs, targets):
    X, Y = _check_batch(params, *_as_sequence(inputs, targets))
    return lstm_forward_batch(params, X, Y)


def lstm_bptt(params, trace, inputs, targets, truncation=None):
    X, Y = _check_batch(params, *_as_sequence(inputs, targets))
    if trace.hidden.shape[1] != X.shape[1] + 1 or not np.array_equal(trace.residuals, trace.outputs - Y):
        raise ValueError("trace does not match these inputs/targets")
    return lstm_backward_batch(params, trace, X, truncation)
