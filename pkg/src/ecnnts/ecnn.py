"""Error correction neural network cell.

State recursion, with ``z`` the previous prediction error::

    s[t] = tanh(A s[t-1] + B x[t-1] + D tanh(z[t-1]))
    y[t] = C s[t]
    z[t] = y[t] - y_d[t]

with ``s[0] = 0`` and ``z[0] = 0``. The per-sequence loss is
``mean_t 0.5 * ||y[t] - y_d[t]||**2``.

Sequences are passed as ``inputs`` of shape ``(T, m)`` holding
``x[0..T-1]`` and ``targets`` of shape ``(T, p)`` holding ``y_d[1..T]``.
The ``*_batch`` kernels take a leading batch axis and return the batch mean
of the per-sequence losses and gradients.
"""
import hashlib
from dataclasses import dataclass

import numpy as np

from . import linalg
from .params import ParamSet, check_dims, uniform_init

__all__ = [
    "EcnnParams",
    "ForwardTrace",
    "EcnnGradients",
    "init_params",
    "forward_step",
    "forward_sequence",
    "bptt_gradients",
    "forecast",
    "forward_batch",
    "backward_batch",
    "loss_and_grad",
    "predict_last",
]


@dataclass(eq=False)
class EcnnParams(ParamSet):
    """Shared weights: A (n, n), B (n, m), C (p, n), D (n, p)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    kind = "ecnn"
    names = ("A", "B", "C", "D")

    @staticmethod
    def expected_shapes(n, m, p):
        return {"A": (n, n), "B": (n, m), "C": (p, n), "D": (n, p)}

    @property
    def dims(self):
        return self.A.shape[0], self.B.shape[1], self.C.shape[0]


@dataclass(eq=False)
class EcnnGradients(EcnnParams):
    """Gradients of the loss, laid out like :class:`EcnnParams`."""

    kind = "ecnn-gradients"


@dataclass
class ForwardTrace:
    """Everything the reverse sweep needs from a forward pass.

    Arrays carry a leading batch axis. ``states`` and ``errors`` are indexed
    0..T (index 0 is the zero initial value); ``outputs`` and
    ``preactivations`` are indexed 1..T stored at positions 0..T-1.
    """

    states: np.ndarray  # (B, T+1, n)
    outputs: np.ndarray  # (B, T, p)
    errors: np.ndarray  # (B, T+1, p)
    squashed_errors: np.ndarray  # tanh(errors), (B, T+1, p)
    preactivations: np.ndarray  # (B, T, n)
    digest: str = ""

    @property
    def length(self):
        return self.outputs.shape[1]


def init_params(n, m, p, seed=0):
    """Draw A, B, C, D uniformly from ``[-1/sqrt(n), 1/sqrt(n)]``."""
    n, m, p = check_dims(n, m, p)
    rng = np.random.default_rng(seed)
    shapes = EcnnParams.expected_shapes(n, m, p)
    return EcnnParams(**{k: uniform_init(rng, shapes[k], n) for k in EcnnParams.names})


def forward_step(params, s_prev, x_prev, z_prev, y_target=None):
    """Advance the cell by one step.

    Returns ``(s, y, z)``. Without a target (forecasting) the returned error
    is the zero vector.
    """
    s_prev = linalg.as_vector(s_prev, "s_prev")
    x_prev = linalg.as_vector(x_prev, "x_prev")
    z_prev = linalg.as_vector(z_prev, "z_prev")
    n, m, p = params.dims
    if s_prev.shape[0] != n or x_prev.shape[0] != m or z_prev.shape[0] != p:
        raise ValueError(
            f"dimension mismatch: expected s({n}), x({m}), z({p}); got "
            f"s({s_prev.shape[0]}), x({x_prev.shape[0]}), z({z_prev.shape[0]})"
        )
    pre = linalg.matvec(params.A, s_prev) + linalg.matvec(params.B, x_prev)
    pre = pre + linalg.matvec(params.D, linalg.tanh_map(z_prev))
    s = np.tanh(pre)
    y = linalg.matvec(params.C, s)
    if y_target is None:
        z = np.zeros(p)
    else:
        y_target = linalg.as_vector(y_target, "y_target")
        if y_target.shape[0] != p:
            raise ValueError(f"target has length {y_target.shape[0]}, expected {p}")
        z = y - y_target
    return s, y, z


def _check_batch(params, inputs, targets):
    X = np.asarray(inputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 3 or Y.ndim != 3:
        raise ValueError(f"expected 3-d batches, got inputs {X.shape}, targets {Y.shape}")
    n, m, p = params.dims
    if X.shape[:2] != Y.shape[:2]:
        raise ValueError(f"length mismatch: inputs {X.shape[:2]} vs targets {Y.shape[:2]}")
    if X.shape[2] != m or Y.shape[2] != p:
        raise ValueError(f"dimension mismatch: model expects m={m}, p={p}; got {X.shape[2]}, {Y.shape[2]}")
    if X.shape[1] == 0:
        raise ValueError("sequences must contain at least one step")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("inputs and targets must be finite")
    return X, Y


def forward_batch(params, X, Y):
    """Run the cell over a batch; return ``(trace, mean loss)``."""
    bsz, T, _ = X.shape
    n, _, p = params.dims
    A, B, C, D = params.A, params.B, params.C, params.D
    states = np.zeros((bsz, T + 1, n))
    errors = np.zeros((bsz, T + 1, p))
    squashed = np.zeros((bsz, T + 1, p))
    outputs = np.empty((bsz, T, p))
    pre = np.empty((bsz, T, n))
    # input projection does not depend on the recursion
    xb = X @ B.T
    for t in range(1, T + 1):
        a = states[:, t - 1] @ A.T + xb[:, t - 1] + squashed[:, t - 1] @ D.T
        pre[:, t - 1] = a
        s = np.tanh(a)
        states[:, t] = s
        y = s @ C.T
        outputs[:, t - 1] = y
        z = y - Y[:, t - 1]
        errors[:, t] = z
        squashed[:, t] = np.tanh(z)
    loss = 0.5 * float(np.sum(errors[:, 1:] ** 2)) / (bsz * T)
    return ForwardTrace(states, outputs, errors, squashed, pre), loss


def backward_batch(params, trace, X, truncation=None):
    """Reverse sweep over a cached trace.

    Gradients are of the batch mean of per-sequence losses. With
    ``truncation=k`` the sequence is cut into chunks of ``k`` steps counted
    from the start and no gradient crosses a chunk boundary.
    """
    bsz, T, _ = X.shape
    A, C, D = params.A, params.C, params.D
    s, z, tz = trace.states, trace.errors, trace.squashed_errors
    dA = np.zeros_like(A)
    dB = np.zeros_like(params.B)
    dC = np.zeros_like(C)
    dD = np.zeros_like(D)
    grad_y = z[:, 1:] / (bsz * T)
    delta_next = np.zeros((bsz, A.shape[0]))
    for t in range(T, 0, -1):
        if truncation is not None and t % truncation == 0:
            delta_next = np.zeros_like(delta_next)
        # total gradient on z[t]: direct loss term plus feedback into s[t+1]
        dz = grad_y[:, t - 1] + (1.0 - tz[:, t] ** 2) * (delta_next @ D)
        ds = delta_next @ A + dz @ C
        delta = (1.0 - s[:, t] ** 2) * ds
        dA += delta.T @ s[:, t - 1]
        dB += delta.T @ X[:, t - 1]
        dD += delta.T @ tz[:, t - 1]
        dC += dz.T @ s[:, t]
        delta_next = delta
    return EcnnGradients(A=dA, B=dB, C=dC, D=dD)


def loss_and_grad(params, X, Y, truncation=None):
    trace, loss = forward_batch(params, X, Y)
    return loss, backward_batch(params, trace, X, truncation)


def _digest(params, X, Y):
    h = hashlib.blake2b(digest_size=16)
    for arr in (*params.arrays().values(), X, Y):
        h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr(arr.shape).encode())
    return h.hexdigest()


def _as_sequence(inputs, targets):
    X = np.asarray(inputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError(f"expected (T, m) inputs and (T, p) targets, got {X.shape} and {Y.shape}")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"length mismatch: {X.shape[0]} inputs vs {Y.shape[0]} targets")
    return X[None], Y[None]


def forward_sequence(params, inputs, targets):
    """Forward pass over one sequence.

    Returns ``(trace, loss)`` where ``loss = mean_t 0.5 * ||y[t] - y_d[t]||**2``.
    """
    X, Y = _check_batch(params, *_as_sequence(inputs, targets))
    trace, loss = forward_batch(params, X, Y)
    trace.digest = _digest(params, X, Y)
    return trace, loss


def bptt_gradients(params, trace, inputs, targets, truncation=None):
    """Gradients of :func:`forward_sequence`'s loss w.r.t. A, B, C, D."""
    X, Y = _check_batch(params, *_as_sequence(inputs, targets))
    if trace.digest != _digest(params, X, Y):
        raise ValueError("trace does not belong to these parameters/inputs/targets; rerun forward_sequence")
    if truncation is not None and truncation < 1:
        raise ValueError("truncation must be >= 1")
    return backward_batch(params, trace, X, truncation)


def _forecast_batch(params, Xw, Yw, Xf):
    """Warm up on (Xw, Yw), then free-run over Xf. Returns (B, F, p)."""
    bsz = Xf.shape[0]
    n, _, p = params.dims
    if Xw.shape[1] > 0:
        trace, _ = forward_batch(params, Xw, Yw)
        s = trace.states[:, -1]
        tz = trace.squashed_errors[:, -1]
    else:
        s = np.zeros((bsz, n))
        tz = np.zeros((bsz, p))
    preds = np.empty((bsz, Xf.shape[1], p))
    for j in range(Xf.shape[1]):
        s = np.tanh(s @ params.A.T + Xf[:, j] @ params.B.T + tz @ params.D.T)
        preds[:, j] = s @ params.C.T
        # future targets are unknown: their errors enter as zero
        tz = np.zeros((bsz, p))
    return preds


def forecast(params, warmup_inputs, warmup_targets, future_inputs):
    """Predict outputs for ``future_inputs`` after a warm-up with known targets.

    The first future step sees the last warm-up error; later steps see a zero
    error because their targets are not yet observed.
    """
    Xw, Yw = _check_batch(params, *_as_sequence(warmup_inputs, warmup_targets))
    Xf = np.asarray(future_inputs, dtype=np.float64)
    if Xf.size == 0:
        return np.empty((0, params.p))
    if Xf.ndim == 1:
        Xf = Xf[:, None]
    if Xf.ndim != 2 or Xf.shape[1] != params.m:
        raise ValueError(f"future inputs must have shape (F, {params.m}), got {Xf.shape}")
    return _forecast_batch(params, Xw, Yw, Xf[None])[0]


def predict_last(params, X, Y_context=None):
    """One-step-ahead output at the final step of each window.

    ``X`` is (B, N, m); ``Y_context`` holds the known targets for the first
    ``N - 1`` steps, shape (B, N - 1, p). Without context all errors are zero.
    """
    X = np.asarray(X, dtype=np.float64)
    bsz, N, _ = X.shape
    if Y_context is None:
        Y_context = np.zeros((bsz, N - 1, params.p))
    Y_context = np.asarray(Y_context, dtype=np.float64)
    if Y_context.shape != (bsz, N - 1, params.p):
        raise ValueError(f"context targets must have shape {(bsz, N - 1, params.p)}, got {Y_context.shape}")
    return _forecast_batch(params, X[:, : N - 1], Y_context, X[:, N - 1 :])[:, 0]
