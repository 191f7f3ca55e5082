"""Losses, optimizers and the mini-batch training loop."""
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ConfigError, NumericalError
from .models import kind_of

__all__ = [
    "TrainConfig",
    "AdamState",
    "TrainReport",
    "mse_loss",
    "sgd_step",
    "adam_step",
    "fit",
    "fit_arrays",
]


@dataclass
class TrainConfig:
    """Training hyper-parameters.

    Defaults follow the reported optimum: 1000 epochs, window 7, learning
    rate 1e-3, batch 64, Adam. ``truncation=None`` backpropagates through
    the whole window.
    """

    epochs: int = 1000
    batch_size: int = 64
    window: int = 7
    learning_rate: float = 1e-3
    truncation: Optional[int] = None
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.truncation is not None and self.truncation < 1:
            raise ConfigError("truncation must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kwargs):
        arrays = params.arrays()
        return cls(
            m={k: np.zeros_like(a) for k, a in arrays.items()},
            v={k: np.zeros_like(a) for k, a in arrays.items()},
            **kwargs,
        )


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: Optional[int] = None
    params: object = None

    def to_csv(self, path_or_buf=None):
        """Write ``epoch,train_loss,val_loss`` rows; returns the text when no target is given."""
        buf = io.StringIO()
        buf.write("epoch,train_loss,val_loss\n")
        for e, tl in enumerate(self.train_loss):
            vl = self.val_loss[e] if e < len(self.val_loss) else float("nan")
            buf.write(f"{e},{tl!r},{vl!r}\n")
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text


def mse_loss(predictions, targets, K=None):
    """``sum((targets - predictions)**2) / (2 K)``; ``K`` defaults to the element count."""
    pred = np.asarray(predictions, dtype=np.float64)
    targ = np.asarray(targets, dtype=np.float64)
    if pred.shape != targ.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {targ.shape}")
    if K is None:
        K = pred.size
    if K <= 0:
        raise ValueError("K must be positive")
    return float(np.sum((targ - pred) ** 2)) / (2.0 * K)


def _check_shapes(params, grads):
    pa, ga = params.arrays(), grads.arrays()
    if pa.keys() != ga.keys():
        raise ValueError(f"gradient tensors {sorted(ga)} do not match parameters {sorted(pa)}")
    for k in pa:
        if pa[k].shape != ga[k].shape:
            raise ValueError(f"shape mismatch for {k}: {pa[k].shape} vs {ga[k].shape}")
    return pa, ga


def sgd_step(params, grads, learning_rate):
    pa, ga = _check_shapes(params, grads)
    return params.with_arrays({k: pa[k] - learning_rate * ga[k] for k in pa})


def adam_step(params, grads, state, learning_rate):
    """One bias-corrected Adam update; returns ``(params, state)`` without mutating inputs."""
    pa, ga = _check_shapes(params, grads)
    for k in pa:
        if state.m[k].shape != pa[k].shape:
            raise ValueError(f"optimizer state for {k} has shape {state.m[k].shape}, expected {pa[k].shape}")
    b1, b2 = state.beta1, state.beta2
    step = state.step + 1
    m = {k: b1 * state.m[k] + (1.0 - b1) * ga[k] for k in pa}
    v = {k: b2 * state.v[k] + (1.0 - b2) * ga[k] ** 2 for k in pa}
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    new = {k: pa[k] - learning_rate * (m[k] / c1) / (np.sqrt(v[k] / c2) + state.eps) for k in pa}
    return params.with_arrays(new), AdamState(m, v, step, b1, b2, state.eps)


def _as_windows(X, Y):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 2:
        Y = Y[:, :, None]
    if X.ndim != 3 or Y.ndim != 3 or X.shape[:2] != Y.shape[:2]:
        raise ValueError(f"expected windows X (K, N, m) and Y (K, N[, p]); got {X.shape} and {Y.shape}")
    return X, Y


def fit_arrays(params, X, Y, cfg, X_val=None, Y_val=None, callback=None):
    """Train ``params`` on windows ``X`` (K, N, m) with per-step targets ``Y``.

    Each window is an independent sequence starting from a zero state. The
    mini-batch gradient is the mean of per-window gradients. After every
    epoch the full training and validation losses are recorded; the returned
    report carries the parameters of the epoch with the lowest validation
    loss (or the last epoch when there is no validation data).
    """
    X, Y = _as_windows(X, Y)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    has_val = X_val is not None and len(X_val) > 0
    if has_val:
        X_val, Y_val = _as_windows(X_val, Y_val)
    model = kind_of(params)
    K = X.shape[0]
    truncation = cfg.truncation
    if truncation is not None and truncation >= X.shape[1]:
        truncation = None
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState.zeros_like(params) if cfg.optimizer == "adam" else None
    report = TrainReport(params=params)
    best = np.inf
    # overflow is detected below through the non-finite loss check
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = rng.permutation(K)
            for start in range(0, K, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                loss, grads = model.loss_and_grad(params, X[idx], Y[idx], truncation)
                if not np.isfinite(loss):
                    raise NumericalError(f"training diverged at epoch {epoch}: non-finite loss")
                try:
                    if adam is None:
                        params = sgd_step(params, grads, cfg.learning_rate)
                    else:
                        params, adam = adam_step(params, grads, adam, cfg.learning_rate)
                except ValueError as exc:
                    raise NumericalError(f"training diverged at epoch {epoch}: {exc}") from exc
            train_loss = model.forward(params, X, Y)[1]
            if not np.isfinite(train_loss):
                raise NumericalError(f"training diverged at epoch {epoch}: non-finite loss")
            report.train_loss.append(train_loss)
            score = train_loss
            if has_val:
                score = model.forward(params, X_val, Y_val)[1]
                report.val_loss.append(score)
            if not has_val or score < best:
                best = score
                report.best_epoch = epoch
                report.params = params
            if callback is not None:
                callback(epoch, report)
    return report


def fit(params, dataset, cfg, callback=None):
    """Train on a :class:`~ecnnts.data.WindowedDataset`'s train split, selecting on its validation split."""
    X, Y = dataset.split_arrays("train")
    X_val, Y_val = dataset.split_arrays("val")
    if X.shape[2] != params.m:
        raise ValueError(f"model expects {params.m} input features, dataset has {X.shape[2]}")
    return fit_arrays(params, X, Y, cfg, X_val, Y_val, callback=callback)
