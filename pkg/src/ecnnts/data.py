"""OHLCV ingestion, technical indicators, min-max scaling and rolling windows."""
import csv
import datetime as dt
import io
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import smoothing
from .exceptions import DataError

logger = logging.getLogger(__name__)

HEADER = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"]
PRICE_COLUMNS = ("open", "high", "low", "close", "adj_close")
RAW_COLUMNS = PRICE_COLUMNS + ("volume",)
INDICATOR_COLUMNS = ("ma5", "ma10", "ema20", "macd", "atr14", "k14")
ALL_FEATURES = RAW_COLUMNS + INDICATOR_COLUMNS
TARGET = "close"


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: int


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8-sig")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8-sig"))
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def parse_csv(source) -> List[OhlcvBar]:
    """Read a Yahoo-format daily CSV into bars sorted by date.

    Any row with a missing, empty or non-numeric field is rejected with its
    line number, as are duplicate dates and bars whose prices are
    inconsistent (non-positive, high below open/close, low above them).
    """
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("no data rows")
        header = [h.strip().lstrip("﻿") for h in header]
        if header != HEADER:
            raise DataError(f"line 1: malformed header {header!r}, expected {HEADER!r}")
        bars = []
        seen = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(HEADER):
                raise DataError(f"line {lineno}: expected {len(HEADER)} fields, got {len(row)}")
            cells = [c.strip() for c in row]
            for name, cell in zip(HEADER, cells):
                if cell == "" or cell.lower() in ("null", "nan", "na"):
                    raise DataError(f"line {lineno}: missing value for {name}")
            try:
                date = dt.date.fromisoformat(cells[0])
            except ValueError:
                raise DataError(f"line {lineno}: unparseable date {cells[0]!r}") from None
            values = []
            for name, cell in zip(HEADER[1:], cells[1:]):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(f"line {lineno}: unparseable number {cell!r} in {name}") from None
            o, h, lo, c, ac, vol = values
            if not all(np.isfinite(values)):
                raise DataError(f"line {lineno}: non-finite value")
            if min(o, h, lo, c, ac) <= 0:
                raise DataError(f"line {lineno}: prices must be positive")
            if h < max(o, c) or lo > min(o, c):
                raise DataError(f"line {lineno}: high/low inconsistent with open/close")
            if vol < 0 or vol != int(vol):
                raise DataError(f"line {lineno}: volume must be a non-negative integer")
            if date in seen:
                raise DataError(f"line {lineno}: duplicate date {date} (first seen on line {seen[date]})")
            seen[date] = lineno
            bars.append(OhlcvBar(date, o, h, lo, c, ac, int(vol)))
    finally:
        if fh is not source:
            fh.close()
    if not bars:
        raise DataError("no data rows")
    bars.sort(key=lambda b: b.date)
    return bars


def write_csv(bars, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for b in bars:
            w.writerow([b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low),
                        repr(b.close), repr(b.adj_close), b.volume])


# --------------------------------------------------------------------------
# indicators


def ema(values, span):
    """Recursive EMA with ``alpha = 2 / (span + 1)``, seeded with the first value."""
    x = np.asarray(values, dtype=np.float64)
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    out[0] = x[0]
    for t in range(1, len(x)):
        out[t] = out[t - 1] + alpha * (x[t] - out[t - 1])
    return out


def true_range(high, low, close):
    tr = np.full(len(close), np.nan)
    prev = close[:-1]
    tr[1:] = np.maximum.reduce([high[1:] - low[1:], np.abs(high[1:] - prev), np.abs(low[1:] - prev)])
    return tr


def atr(high, low, close, period=14):
    """Wilder ATR: mean of the first ``period`` true ranges, then ``((period-1)*prev + TR) / period``."""
    tr = true_range(high, low, close)
    out = np.full(len(close), np.nan)
    if len(close) <= period:
        return out
    out[period] = tr[1:period + 1].mean()
    for t in range(period + 1, len(close)):
        out[t] = ((period - 1) * out[t - 1] + tr[t]) / period
    return out


def stochastic_k(high, low, close, period=14):
    """Fast %K in [0, 1]; NaN where the look-back range is flat or incomplete."""
    out = np.full(len(close), np.nan)
    for t in range(period, len(close)):
        hh = high[t - period + 1:t + 1].max()
        ll = low[t - period + 1:t + 1].min()
        if hh > ll:
            out[t] = (close[t] - ll) / (hh - ll)
    return out


def momentum(close, lag):
    """Current close minus the close ``lag`` days earlier."""
    out = np.full(len(close), np.nan)
    out[lag:] = close[lag:] - close[:-lag]
    return out


def rolling_mean(close, window):
    out = np.full(len(close), np.nan)
    c = np.cumsum(np.concatenate([[0.0], close]))
    out[window - 1:] = (c[window:] - c[:-window]) / window
    return out


# look-back of each indicator: it is flagged invalid until this many earlier bars exist
LOOKBACK = {"ma5": 5, "ma10": 10, "ema20": 20, "macd": 26, "atr14": 14, "k14": 14}
MIN_BARS = max(LOOKBACK.values()) + 1


@dataclass
class FeatureFrame:
    """Aligned feature columns; undefined entries are NaN."""

    dates: np.ndarray  # datetime64[D]
    columns: Dict[str, np.ndarray]
    first_valid: Dict[str, int]

    def __len__(self):
        return len(self.dates)

    @property
    def names(self):
        return list(self.columns)

    @property
    def warmup(self):
        return max(self.first_valid.values())

    def matrix(self, names=None):
        names = self.names if names is None else list(names)
        return np.column_stack([self.columns[n] for n in names])


def compute_indicators(bars: Sequence[OhlcvBar], rolling_ma=False) -> FeatureFrame:
    """Raw OHLCV plus MA(5), MA(10), EMA(20), MACD(12, 26), ATR(14) and %K(14).

    MA is the close-to-close change over the look-back unless ``rolling_ma``
    asks for a conventional rolling mean.
    """
    if len(bars) < MIN_BARS:
        raise DataError(f"need at least {MIN_BARS} bars for indicators, got {len(bars)}")
    cols = {name: np.array([getattr(b, name) for b in bars], dtype=np.float64) for name in RAW_COLUMNS}
    c, h, lo = cols["close"], cols["high"], cols["low"]
    first_valid = {name: 0 for name in RAW_COLUMNS}
    for lag in (5, 10):
        name = f"ma{lag}"
        if rolling_ma:
            cols[name] = rolling_mean(c, lag)
        else:
            cols[name] = momentum(c, lag)
    cols["ema20"] = ema(c, 20)
    cols["macd"] = ema(c, 12) - ema(c, 26)
    cols["atr14"] = atr(h, lo, c, 14)
    cols["k14"] = stochastic_k(h, lo, c, 14)
    for name, lookback in LOOKBACK.items():
        cols[name][:lookback] = np.nan
        first_valid[name] = lookback
    dates = np.array([b.date for b in bars], dtype="datetime64[D]")
    return FeatureFrame(dates, cols, first_valid)


# --------------------------------------------------------------------------
# normalization


class MinMaxNormalizer(TransformerMixin, BaseEstimator):
    """Per-column ``(x - min) / (max - min)`` with constants from the fit data.

    Columns listed in ``passthrough`` are left unscaled.
    """

    def __init__(self, feature_names=None, passthrough=()):
        self.feature_names = feature_names
        self.passthrough = passthrough

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        names = self.feature_names or [f"x{i}" for i in range(X.shape[1])]
        if len(names) != X.shape[1]:
            raise ValueError(f"{len(names)} feature names for {X.shape[1]} columns")
        lo = np.nanmin(X, axis=0)
        hi = np.nanmax(X, axis=0)
        for i, name in enumerate(names):
            if name in self.passthrough:
                lo[i], hi[i] = 0.0, 1.0
            elif not hi[i] > lo[i]:
                raise DataError(f"feature {name!r} is constant on the training range (min = max = {lo[i]})")
        self.data_min_ = lo
        self.data_max_ = hi
        self.n_features_in_ = X.shape[1]
        self.feature_names_ = list(names)
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = np.asarray(X, dtype=np.float64)
        return (X - self.data_min_) / (self.data_max_ - self.data_min_)

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = np.asarray(X, dtype=np.float64)
        return X * (self.data_max_ - self.data_min_) + self.data_min_

    def constants(self):
        check_is_fitted(self)
        return {
            name: {"min": float(a), "max": float(b)}
            for name, a, b in zip(self.feature_names_, self.data_min_, self.data_max_)
        }


def normalize(frame: FeatureFrame, split: "SplitSpec", features=None) -> MinMaxNormalizer:
    """Fit min-max constants on the training rows of ``frame`` only."""
    features = list(features or frame.names)
    rows = split.row_ranges(frame)["train"]
    return MinMaxNormalizer(features).fit(frame.matrix(features)[rows[0]:rows[1]])


# --------------------------------------------------------------------------
# splitting and windows

SPLITS = ("train", "val", "test")


@dataclass
class SplitSpec:
    """Chronological train/validation/test partition of the valid rows.

    Either ``fractions`` or inclusive ``date_ranges`` (split name ->
    (first date, last date)) is used; date ranges win when given.
    """

    fractions: tuple = (0.8, 0.1, 0.1)
    date_ranges: Optional[Dict[str, tuple]] = None

    def __post_init__(self):
        if self.date_ranges is None:
            if len(self.fractions) != 3 or min(self.fractions) < 0:
                raise ValueError("fractions must be three non-negative numbers")
            if abs(sum(self.fractions) - 1.0) > 1e-9:
                raise ValueError(f"fractions must sum to 1, got {sum(self.fractions)}")
            if self.fractions[0] <= 0:
                raise ValueError("training fraction must be positive")
        else:
            prev_end = None
            for name in SPLITS:
                if name not in self.date_ranges:
                    raise ValueError(f"date_ranges needs a {name!r} entry")
                start, end = (np.datetime64(d, "D") for d in self.date_ranges[name])
                if end < start:
                    raise ValueError(f"{name} range ends before it starts")
                if prev_end is not None and start <= prev_end:
                    raise ValueError("date ranges must be chronological: train, then val, then test")
                prev_end = end

    def row_ranges(self, frame: FeatureFrame) -> Dict[str, tuple]:
        """Half-open row index ranges per split, restricted to rows past the warm-up."""
        w, R = frame.warmup, len(frame)
        if self.date_ranges is not None:
            out = {}
            for name in SPLITS:
                start, end = (np.datetime64(d, "D") for d in self.date_ranges[name])
                lo = max(int(np.searchsorted(frame.dates, start, "left")), w)
                hi = max(int(np.searchsorted(frame.dates, end, "right")), lo)
                out[name] = (lo, hi)
            return out
        V = R - w
        n_train = int(round(self.fractions[0] * V))
        n_val = int(round(self.fractions[1] * V))
        n_val = min(n_val, V - n_train)
        return {
            "train": (w, w + n_train),
            "val": (w + n_train, w + n_train + n_val),
            "test": (w + n_train + n_val, R),
        }


class LevelTargets:
    """Model-space targets ``ln(close[t+1] / level[t])`` and their inverse."""

    def __init__(self, close, alpha):
        self.alpha = alpha
        self.levels = smoothing.smooth_level(close, alpha).levels

    def encode(self, close, rows):
        return smoothing.to_model_space(close[rows], self.levels[rows - 1])

    def decode(self, values, rows):
        return smoothing.from_model_space(values, self.levels[np.asarray(rows) - 1])


class MinMaxTargets:
    def __init__(self, lo, hi):
        self.lo, self.hi = lo, hi

    def encode(self, close, rows):
        return (close[rows] - self.lo) / (self.hi - self.lo)

    def decode(self, values, rows):
        return np.asarray(values, dtype=np.float64) * (self.hi - self.lo) + self.lo


@dataclass
class WindowedDataset:
    """Rolling windows over a feature frame.

    ``X[k]`` holds features of rows ``target_rows[k] - N .. target_rows[k] - 1``
    and ``Y[k, j]`` the (scaled) close of the row following input row ``j``,
    so ``Y[k, -1]`` is the window's next-day target. Windows belong to the
    split containing their target row.
    """

    X: np.ndarray  # (K, N, F)
    Y: np.ndarray  # (K, N)
    target_rows: np.ndarray  # (K,)
    window_split: np.ndarray  # (K,) split names
    dates: np.ndarray
    close: np.ndarray
    feature_names: List[str]
    window: int
    split_rows: Dict[str, tuple]
    scaler: MinMaxNormalizer
    targets: object
    smoothing_alpha: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def indices(self, split):
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return np.flatnonzero(self.window_split == split)

    def split_arrays(self, split):
        idx = self.indices(split)
        return self.X[idx], self.Y[idx]

    def context(self, split):
        """Known per-step targets preceding each window's forecast step."""
        return self.Y[self.indices(split), :-1]

    def target_dates(self, split):
        return self.dates[self.target_rows[self.indices(split)]]

    def actual_prices(self, split):
        return self.close[self.target_rows[self.indices(split)]]

    def previous_prices(self, split):
        return self.close[self.target_rows[self.indices(split)] - 1]

    def to_price(self, values, split):
        """Map model-space next-day predictions for ``split`` back to prices."""
        rows = self.target_rows[self.indices(split)]
        return self.targets.decode(np.asarray(values, dtype=np.float64).reshape(-1), rows)

    def constants(self):
        out = {
            "window": self.window,
            "features": list(self.feature_names),
            "smoothing_alpha": self.smoothing_alpha,
            "split_rows": {k: list(v) for k, v in self.split_rows.items()},
            "scaler": self.scaler.constants(),
        }
        if isinstance(self.targets, MinMaxTargets):
            out["target"] = {"min": self.targets.lo, "max": self.targets.hi}
        return out

    def write_constants(self, path):
        with open(path, "w") as fh:
            json.dump(self.constants(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path_or_buf):
        """One row per window: target date, split, target, then features oldest first."""
        N = self.window
        header = ["target_date", "split", "target"]
        for j in range(N):
            lag = N - 1 - j
            header += [f"{name}@t-{lag}" for name in self.feature_names]
        own = not hasattr(path_or_buf, "write")
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(len(self.target_rows)):
                row = [str(self.dates[self.target_rows[k]]), self.window_split[k], repr(float(self.Y[k, -1]))]
                row += [repr(float(v)) for v in self.X[k].reshape(-1)]
                w.writerow(row)
        finally:
            if own:
                fh.close()


def make_windows(frame: FeatureFrame, split: SplitSpec, window: int, features=None,
                 horizon=1, smoothing_alpha=None) -> WindowedDataset:
    """Build next-day rolling windows of length ``window``.

    With ``smoothing_alpha`` set, price columns enter as ``ln(price / level)``
    and the target as ``ln(close[t+1] / level[t])``; other columns keep
    min-max scaling.
    """
    if horizon != 1:
        raise ValueError("only one-step-ahead windows (horizon=1) are supported")
    if window < 1:
        raise ValueError("window must be >= 1")
    features = list(features or ALL_FEATURES)
    unknown = [f for f in features if f not in frame.columns]
    if unknown:
        raise DataError(f"unknown features {unknown}; available: {frame.names}")
    ranges = split.row_ranges(frame)
    for name in SPLITS:
        size = ranges[name][1] - ranges[name][0]
        wanted = split.date_ranges is not None or split.fractions[SPLITS.index(name)] > 0
        if wanted and window > size:
            raise DataError(f"window {window} is larger than the {name} split ({size} rows)")

    raw = frame.matrix(features)
    close = frame.columns[TARGET]
    passthrough = ()
    if smoothing_alpha is not None:
        passthrough = tuple(f for f in features if f in PRICE_COLUMNS)
        raw = raw.copy()
        for i, name in enumerate(features):
            if name in passthrough:
                levels = smoothing.smooth_level(frame.columns[name], smoothing_alpha).levels
                raw[:, i] = smoothing.to_model_space(frame.columns[name], levels)
    lo, hi = ranges["train"]
    scaler = MinMaxNormalizer(features, passthrough).fit(raw[lo:hi])
    scaled = scaler.transform(raw)
    if smoothing_alpha is not None:
        targets = LevelTargets(close, smoothing_alpha)
    else:
        targets = MinMaxTargets(float(close[lo:hi].min()), float(close[lo:hi].max()))

    w, R = frame.warmup, len(frame)
    rows, labels = [], []
    for name in SPLITS:
        a, b = ranges[name]
        for r in range(max(a, w + window), b):
            rows.append(r)
            labels.append(name)
    rows = np.array(rows, dtype=np.int64)
    labels = np.array(labels, dtype=object)
    offsets = np.arange(-window, 0)
    in_rows = rows[:, None] + offsets[None, :]  # (K, N)
    X = scaled[in_rows]
    Y = targets.encode(close, in_rows + 1)
    finite = np.all(np.isfinite(X), axis=(1, 2)) & np.all(np.isfinite(Y), axis=1)
    if not finite.all():
        logger.warning("dropping %d windows with undefined indicator values", int((~finite).sum()))
        X, Y, rows, labels = X[finite], Y[finite], rows[finite], labels[finite]
    if len(rows) == 0:
        raise DataError("no complete windows could be formed")
    return WindowedDataset(
        X=X, Y=Y, target_rows=rows, window_split=labels, dates=frame.dates, close=close,
        feature_names=features, window=window, split_rows=ranges, scaler=scaler,
        targets=targets, smoothing_alpha=smoothing_alpha,
    )
