"""Central finite-difference check of the hand-written backward passes."""
from dataclasses import dataclass, field

import numpy as np

from .models import get_kind


@dataclass
class GradCheckResult:
    kind: str
    dims: tuple
    length: int
    max_rel_error: dict = field(default_factory=dict)  # tensor -> worst relative error
    max_abs_error: dict = field(default_factory=dict)
    tolerance: float = 1e-5

    @property
    def passed(self):
        return all(err <= self.tolerance for err in self.max_rel_error.values())

    @property
    def failing(self):
        return [k for k, err in self.max_rel_error.items() if err > self.tolerance]


def numerical_gradient(loss_fn, params, h=1e-6):
    """Central differences of ``loss_fn(params)`` for every parameter entry."""
    grads = {}
    for name, arr in params.arrays().items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = loss_fn(params)
            arr[idx] = orig - h
            down = loss_fn(params)
            arr[idx] = orig
            g[idx] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


def relative_error(analytic, numeric, floor=1e-8):
    """Entrywise ``|a - b| / max(|a|, |b|)``; zero where ``|a - b| <= floor``.

    Entries under the absolute floor are treated as exact so that gradients
    near zero are not judged by finite-difference round-off.
    """
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(diff <= floor, 0.0, diff / scale)
    return rel


def check_gradients(kind, n, m, p, T, seed=0, h=1e-6, tolerance=1e-5, floor=None,
                    truncation=None, corrupt=None):
    """Compare analytic and numerical gradients on a random problem.

    ``floor`` is the absolute error below which an entry always passes; it
    defaults to ``tolerance / 1000`` (1e-8 at the default tolerance), so a
    zero tolerance demands exact agreement.

    ``corrupt`` names a tensor whose analytic gradient is perturbed before
    comparison; it exists to exercise the failure path.
    """
    if truncation is not None and truncation < T:
        raise ValueError("finite differences check the untruncated gradient only")
    if floor is None:
        floor = tolerance * 1e-3
    model = get_kind(kind)
    rng = np.random.default_rng(seed)
    params = model.init(n, m, p, seed=seed)
    # scale weights up so the tanh units are away from the linear regime
    params = params.with_arrays({k: 2.0 * v for k, v in params.arrays().items()})
    X = rng.normal(size=(1, T, m))
    Y = rng.normal(size=(1, T, p))
    _, analytic = model.loss_and_grad(params, X, Y, truncation)
    analytic = {k: v.copy() for k, v in analytic.arrays().items()}
    if corrupt is not None:
        analytic[corrupt] = analytic[corrupt] + 1e-3 * (1.0 + np.abs(analytic[corrupt]))

    def loss_fn(prm):
        trace, loss = model.forward(prm, X, Y)
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite loss during finite differencing")
        return loss

    numeric = numerical_gradient(loss_fn, params.copy(), h)
    result = GradCheckResult(kind, (n, m, p), T, tolerance=tolerance)
    for name in analytic:
        rel = relative_error(analytic[name], numeric[name], floor)
        result.max_rel_error[name] = float(rel.max())
        result.max_abs_error[name] = float(np.abs(analytic[name] - numeric[name]).max())
    return result
