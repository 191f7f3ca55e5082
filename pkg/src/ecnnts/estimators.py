"""scikit-learn style regressors over rolling windows.

``X`` is a 3-d array of windows ``(n_windows, window, n_features)`` and ``y``
holds the per-step targets ``(n_windows, window)``: ``y[k, j]`` is the value
that follows input step ``j``, so ``y[:, -1]`` is the quantity being
forecast. ``predict`` returns the forecast for the last step of each window;
the ECNN additionally uses the known targets of the earlier steps
(``y_context``, shape ``(n_windows, window - 1)``) as error feedback.
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.metrics import r2_score
from sklearn.utils.validation import check_array, check_is_fitted

from .models import get_kind
from .training import TrainConfig, fit_arrays

__all__ = ["ECNNRegressor", "RNNRegressor", "LSTMRegressor", "regressor_for"]


def _check_windows(X, n_features=None):
    X = check_array(X, allow_nd=True, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"expected windows of shape (n_windows, window, n_features), got {X.shape}")
    if n_features is not None and X.shape[2] != n_features:
        raise ValueError(f"X has {X.shape[2]} features, model was fitted with {n_features}")
    return X


def _check_targets(y, X):
    y = check_array(y, ensure_2d=False, allow_nd=True, dtype=np.float64)
    if y.ndim == 2:
        y = y[:, :, None]
    if y.ndim != 3 or y.shape[:2] != X.shape[:2]:
        raise ValueError(f"per-step targets must have shape {X.shape[:2]} (+ outputs), got {y.shape}")
    return y


class _RecurrentRegressor(RegressorMixin, BaseEstimator):
    _kind = None

    def __init__(self, n_hidden=32, epochs=1000, batch_size=64, learning_rate=1e-3,
                 truncation=None, optimizer="adam", random_state=0):
        self.n_hidden = n_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.truncation = truncation
        self.optimizer = optimizer
        self.random_state = random_state

    def _config(self, window):
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, window=window,
            learning_rate=self.learning_rate, truncation=self.truncation,
            seed=self.random_state, optimizer=self.optimizer,
        )

    def fit(self, X, y, eval_set=None, init_params=None):
        """Train on windows; ``eval_set=(X_val, y_val)`` enables best-epoch selection."""
        X = _check_windows(X)
        Y = _check_targets(y, X)
        kind = get_kind(self._kind)
        if init_params is None:
            init_params = kind.init(self.n_hidden, X.shape[2], Y.shape[2], seed=self.random_state)
        Xv = Yv = None
        if eval_set is not None:
            Xv = _check_windows(eval_set[0], X.shape[2])
            Yv = _check_targets(eval_set[1], Xv)
        report = fit_arrays(init_params, X, Y, self._config(X.shape[1]), Xv, Yv)
        self.params_ = report.params
        self.report_ = report
        self.n_features_in_ = X.shape[2]
        self.n_outputs_ = Y.shape[2]
        return self

    @classmethod
    def from_params(cls, params, **kwargs):
        """An already-fitted regressor around existing weights (e.g. a loaded checkpoint)."""
        if params.kind != cls._kind:
            raise ValueError(f"{cls.__name__} cannot wrap {params.kind} parameters")
        est = cls(n_hidden=params.n, **kwargs)
        est.params_ = params
        est.report_ = None
        est.n_features_in_ = params.m
        est.n_outputs_ = params.p
        return est

    def predict(self, X, y_context=None):
        check_is_fitted(self, "params_")
        X = _check_windows(X, self.n_features_in_)
        ctx = None
        if y_context is not None:
            ctx = check_array(y_context, ensure_2d=False, allow_nd=True, dtype=np.float64)
            if ctx.ndim == 2:
                ctx = ctx[:, :, None]
            if ctx.shape[1] == X.shape[1]:
                ctx = ctx[:, :-1]
        pred = get_kind(self._kind).predict_last(self.params_, X, ctx)
        return pred[:, 0] if self.n_outputs_ == 1 else pred

    def score(self, X, y, sample_weight=None):
        """R^2 of the last-step forecast; earlier steps of ``y`` serve as context."""
        y = np.asarray(y, dtype=np.float64)
        truth = y[:, -1]
        return r2_score(truth, self.predict(X, y[:, :-1]), sample_weight=sample_weight)


class ECNNRegressor(_RecurrentRegressor):
    """Error correction network: previous prediction errors feed the state."""

    _kind = "ecnn"


class RNNRegressor(_RecurrentRegressor):
    """Elman network with tanh state and linear readout; ignores ``y_context``."""

    _kind = "rnn"


class LSTMRegressor(_RecurrentRegressor):
    """Single-layer LSTM with linear readout; ignores ``y_context``."""

    _kind = "lstm"


def regressor_for(kind, **kwargs):
    classes = {"ecnn": ECNNRegressor, "rnn": RNNRegressor, "lstm": LSTMRegressor}
    if kind not in classes:
        raise ValueError(f"unknown model kind {kind!r}")
    return classes[kind](**kwargs)
