"""Direction-trading backtest with proportional transaction costs.

Day ``t`` goes long when the prediction for ``t+1`` exceeds the prediction
for ``t``, short when it is below, and stays flat on a tie. A long day
contributes ``(p1 - p0 - (S*p1 + B*p0)) / p0`` and a short day
``(p0 - p1 - (B*p1 + S*p0)) / p0`` where ``B``/``S`` are the buy/sell cost
fractions; the total return is 100 times the summed contributions.
"""
import csv
import enum
import io
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .evaluation import period_labels


class Signal(str, enum.Enum):
    BUY = "Buy"
    SELL = "Sell"
    HOLD = "Hold"


@dataclass(frozen=True)
class CostSpec:
    buy: float = 0.0025
    sell: float = 0.0045

    def __post_init__(self):
        if not (0 <= self.buy < 1 and 0 <= self.sell < 1):
            raise ValueError("transaction costs must lie in [0, 1)")


ZERO_COST = CostSpec(0.0, 0.0)


@dataclass
class TradeLog:
    signals: List[Signal]
    price: np.ndarray
    next_price: np.ndarray
    gross: np.ndarray
    cost: np.ndarray
    contribution: np.ndarray
    dates: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def buy_days(self):
        return sum(s is Signal.BUY for s in self.signals)

    @property
    def sell_days(self):
        return sum(s is Signal.SELL for s in self.signals)

    @property
    def total_return(self):
        """Strategy return in percent."""
        return 100.0 * float(np.sum(self.contribution))

    def to_csv(self, path_or_buf=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "signal", "price", "next_price", "contribution"])
        for i, sig in enumerate(self.signals):
            date = str(self.dates[i]) if self.dates is not None else str(i)
            w.writerow([date, sig.value, repr(float(self.price[i])), repr(float(self.next_price[i])),
                        repr(float(self.contribution[i]))])
        text = buf.getvalue()
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w", newline="") as fh:
                    fh.write(text)
        return text


def generate_signals(predicted) -> List[Signal]:
    y = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if y.size < 2:
        raise ValueError("need at least two predictions to form a signal")
    moves = np.diff(y)
    return [Signal.BUY if d > 0 else Signal.SELL if d < 0 else Signal.HOLD for d in moves]


def _prices(prices, min_len=2):
    p = np.asarray(prices, dtype=np.float64).reshape(-1)
    if p.size < min_len:
        raise ValueError(f"need at least {min_len} prices")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("prices must be finite and positive")
    return p


def strategy_return(signals, prices, costs=CostSpec(), mode="actual", sell="short", dates=None) -> TradeLog:
    """Evaluate ``signals`` over ``prices`` (one more price than signals).

    ``mode="actual"`` trades realized closes; ``mode="literal"`` evaluates the
    return formula over the predicted series itself, where a sell day is
    scored as ``(p1 - p0 - costs) / p0`` without flipping the move's sign.
    ``sell="exit"`` treats sell days as flat instead of short.
    """
    if mode not in ("actual", "literal"):
        raise ValueError(f"mode must be 'actual' or 'literal', got {mode!r}")
    if sell not in ("short", "exit"):
        raise ValueError(f"sell must be 'short' or 'exit', got {sell!r}")
    signals = [Signal(s) for s in signals]
    p = _prices(prices)
    if p.size != len(signals) + 1:
        raise ValueError(f"{len(signals)} signals need {len(signals) + 1} prices, got {p.size}")
    p0, p1 = p[:-1], p[1:]
    B, S = costs.buy, costs.sell
    gross = np.zeros(len(signals))
    cost = np.zeros(len(signals))
    for t, sig in enumerate(signals):
        if sig is Signal.BUY:
            gross[t] = (p1[t] - p0[t]) / p0[t]
            cost[t] = (S * p1[t] + B * p0[t]) / p0[t]
        elif sig is Signal.SELL and sell == "short":
            move = p1[t] - p0[t]
            gross[t] = (move if mode == "literal" else -move) / p0[t]
            cost[t] = (B * p1[t] + S * p0[t]) / p0[t]
    return TradeLog(signals, p0, p1, gross, cost, gross - cost,
                    None if dates is None else np.asarray(dates)[: len(signals)])


def buy_and_hold(prices, costs=CostSpec()):
    """Percent return of buying the first price and selling the last, net of costs."""
    p = _prices(prices)
    entry = p[0] * (1.0 + costs.buy)
    return 100.0 * (p[-1] * (1.0 - costs.sell) - entry) / entry


def period_returns(log: TradeLog, costs=CostSpec(), mode="365d"):
    """Per-period strategy and buy-and-hold returns (percent) keyed by period index."""
    if log.dates is None:
        raise ValueError("trade log has no dates")
    labels = period_labels(log.dates, mode)
    strat, hold = [], []
    for period in range(int(labels.max()) + 1):
        mask = labels == period
        if not mask.any():
            continue
        idx = np.flatnonzero(mask)
        strat.append(100.0 * float(np.sum(log.contribution[idx])))
        path = np.concatenate([log.price[idx], log.next_price[idx[-1:]]])
        hold.append(buy_and_hold(path, costs))
    return strat, hold


def write_return_grid(rows, path_or_buf=None):
    """CSV with one row per model: ``Model, Year 1..k, Average``; ``rows`` maps name -> list."""
    k = max(len(v) for v in rows.values())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Model"] + [f"Year {i + 1}" for i in range(k)] + ["Average"])
    for name, vals in rows.items():
        vals = list(vals)
        w.writerow([name] + [f"{v:.4f}" for v in vals] + [""] * (k - len(vals)) + [f"{np.mean(vals):.4f}"])
    text = buf.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
    return text
