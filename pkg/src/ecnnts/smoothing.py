"""Exponential-smoothing level extraction and the log-ratio model space.

A positive series ``y`` is reduced to its smoothed level ``l`` with
``l[t] = alpha * y[t] + (1 - alpha) * l[t-1]`` (``l[0] = y[0]``), fed to a
model as ``ln(y / l)`` and mapped back with ``l * exp(output)``.
"""
from dataclasses import dataclass

import numpy as np

from . import data as _data

__all__ = ["LevelSeries", "smooth_level", "to_model_space", "from_model_space", "SmoothedPipeline", "wrap"]


@dataclass(frozen=True)
class LevelSeries:
    levels: np.ndarray
    alpha: float


def _positive_series(values, name):
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d series")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ValueError(f"{name} must be finite and strictly positive")
    return y


def smooth_level(series, alpha=0.8) -> LevelSeries:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    y = _positive_series(series, "series")
    levels = np.empty_like(y)
    levels[0] = y[0]
    for t in range(1, len(y)):
        levels[t] = alpha * y[t] + (1.0 - alpha) * levels[t - 1]
    return LevelSeries(levels, float(alpha))


def to_model_space(series, levels):
    """Elementwise ``ln(series / levels)``."""
    y = np.asarray(series, dtype=np.float64)
    lv = np.asarray(levels, dtype=np.float64)
    if y.shape != lv.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {lv.shape}")
    ratio = y / lv
    if not np.all(ratio > 0):
        raise ValueError("series/level ratio must be positive")
    return np.log(ratio)


def from_model_space(outputs, levels):
    """Elementwise ``levels * exp(outputs)``."""
    o = np.asarray(outputs, dtype=np.float64)
    lv = np.asarray(levels, dtype=np.float64)
    if o.shape != lv.shape:
        raise ValueError(f"length mismatch: {o.shape} vs {lv.shape}")
    return lv * np.exp(o)


class SmoothedPipeline:
    """Train and predict an estimator in the smoothed log-ratio space.

    ``estimator`` follows the regressor API of :mod:`ecnnts.estimators`:
    ``fit(X, y, eval_set=...)`` and ``predict(X, y_context)``.
    """

    def __init__(self, estimator, frame, split, window, alpha=0.8, features=None):
        self.estimator = estimator
        self.alpha = alpha
        self.dataset = _data.make_windows(frame, split, window, features=features, smoothing_alpha=alpha)

    def fit(self):
        X, Y = self.dataset.split_arrays("train")
        Xv, Yv = self.dataset.split_arrays("val")
        eval_set = (Xv, Yv) if len(Xv) else None
        self.estimator.fit(X, Y, eval_set=eval_set)
        return self

    def predict_model_space(self, split="test"):
        X, _ = self.dataset.split_arrays(split)
        return self.estimator.predict(X, self.dataset.context(split))

    def predict(self, split="test"):
        """Next-day price predictions for the windows of ``split``."""
        return self.dataset.to_price(self.predict_model_space(split), split)


def wrap(estimator, frame, split, window, alpha=0.8, features=None) -> SmoothedPipeline:
    return SmoothedPipeline(estimator, frame, split, window, alpha, features)
