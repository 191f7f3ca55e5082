"""Synthetic series for tests, demos and the bundled CSV fixture."""
import datetime as dt

import numpy as np

from .data import OhlcvBar
from .ecnn import init_params


def business_days(start, count):
    start = np.datetime64(start, "D")
    first = np.busday_offset(start, 0, roll="forward")
    return np.busday_offset(first, np.arange(count), roll="forward")


def bars_from_close(close, seed=0, start="2010-01-04"):
    """Wrap a positive close series into consistent OHLCV bars on business days."""
    rng = np.random.default_rng(seed)
    close = np.asarray(close, dtype=np.float64)
    dates = business_days(start, len(close))
    prev = np.concatenate([[close[0]], close[:-1]])
    opens = prev * (1.0 + 0.002 * rng.standard_normal(len(close)))
    top = np.maximum(opens, close)
    bottom = np.minimum(opens, close)
    highs = top * (1.0 + np.abs(0.004 * rng.standard_normal(len(close))))
    lows = bottom * (1.0 - np.abs(0.004 * rng.standard_normal(len(close))))
    volume = rng.integers(1_000_000, 5_000_000, size=len(close))
    bars = []
    for i in range(len(close)):
        bars.append(OhlcvBar(
            dt.date.fromisoformat(str(dates[i])),
            round(float(opens[i]), 4), round(float(highs[i]) + 0.0001, 4),
            round(float(lows[i]) - 0.0001, 4), round(float(close[i]), 4),
            round(float(close[i]), 4), int(volume[i]),
        ))
    return bars


def random_walk_ohlcv(n_rows=500, seed=0, start="2010-01-04", vol=0.01, drift=0.0003):
    """Geometric random walk with a mild momentum component."""
    rng = np.random.default_rng(seed)
    r = np.empty(n_rows)
    r[0] = 0.0
    for t in range(1, n_rows):
        r[t] = drift + 0.15 * r[t - 1] + vol * rng.standard_normal()
    close = 100.0 * np.exp(np.cumsum(r))
    return bars_from_close(close, seed + 1, start)


def teacher_sequences(n, m, p, T, n_seq, seed=0, teacher=None):
    """Inputs and per-step targets produced by a fixed ECNN (the teacher).

    Targets equal the teacher's outputs, so its own error feedback is zero.
    Returns ``(teacher, X, Y)`` with shapes (n_seq, T, m) and (n_seq, T, p).
    """
    rng = np.random.default_rng(seed)
    if teacher is None:
        teacher = init_params(n, m, p, seed=seed + 1000)
        teacher = teacher.with_arrays({k: 2.0 * v for k, v in teacher.arrays().items()})
    X = rng.uniform(-1.0, 1.0, size=(n_seq, T, m))
    states = np.zeros((n_seq, teacher.n))
    Y = np.empty((n_seq, T, p))
    for t in range(T):
        states = np.tanh(states @ teacher.A.T + X[:, t] @ teacher.B.T)
        Y[:, t] = states @ teacher.C.T
    return teacher, X, Y


def teacher_price_bars(n_rows=600, seed=0, start="2010-01-04", scale=0.15, persistence=0.95):
    """Stationary prices whose log level is the output of a small random ECNN-style recursion.

    The input is a persistent AR(1) driver, so the next close is largely
    predictable from recent history and stays inside a band around 100.
    """
    rng = np.random.default_rng(seed)
    params = init_params(4, 1, 1, seed=seed + 7)
    params = params.with_arrays({k: 2.0 * v for k, v in params.arrays().items()})
    s = np.zeros(4)
    x = 0.0
    out = np.empty(n_rows)
    for t in range(n_rows):
        x = persistence * x + np.sqrt(1.0 - persistence**2) * rng.standard_normal()
        s = np.tanh(params.A @ s + params.B[:, 0] * x)
        out[t] = float(params.C[0] @ s)
    close = 100.0 * np.exp(scale * out + 0.002 * rng.standard_normal(n_rows))
    return bars_from_close(close, seed + 1, start)


def hidden_driver_series(T=600, m=2, seed=0, hidden_persistence=0.95, hidden_gain=1.2):
    """Observed inputs ``x`` and output ``y`` of a nonlinear system with an unobserved driver.

    ``y[t+1] = tanh(0.5 y[t] + w . x[t] + hidden_gain * u[t])`` where ``u`` is a
    slowly varying AR(1) process that is not part of the returned inputs.
    Returns ``(x, y, u)`` with shapes (T, m), (T,), (T,).
    """
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1.0, 1.0, size=m)
    x = np.empty((T, m))
    u = np.empty(T)
    y = np.empty(T)
    x[0] = rng.standard_normal(m)
    u[0] = 0.0
    y[0] = 0.0
    scale = np.sqrt(1.0 - hidden_persistence**2)
    for t in range(1, T):
        x[t] = 0.5 * x[t - 1] + rng.standard_normal(m)
        u[t] = hidden_persistence * u[t - 1] + scale * rng.standard_normal()
        y[t] = np.tanh(0.5 * y[t - 1] + w @ x[t - 1] * 0.5 + hidden_gain * u[t - 1])
    return x, y, u


def series_windows(x, y, window):
    """Windows over aligned series: input rows ``t-N..t-1`` and per-step targets ``y[t-N+1..t]``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    rows = np.arange(window, len(y))
    idx = rows[:, None] + np.arange(-window, 0)[None, :]
    return x[idx], y[idx + 1], rows


def chronological_split(count, fractions=(0.8, 0.1, 0.1)):
    n_train = int(round(fractions[0] * count))
    n_val = int(round(fractions[1] * count))
    return slice(0, n_train), slice(n_train, n_train + n_val), slice(n_train + n_val, count)
