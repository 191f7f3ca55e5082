"""Forecast accuracy metrics and per-period reports.

All metrics take ``(actual, predicted)`` in that order.
"""
import csv
import io
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

logger = logging.getLogger(__name__)

METRICS = ("MAPE", "R", "TheilU", "DA")


def _pair(actual, predicted, min_len=1):
    y = np.asarray(actual, dtype=np.float64).reshape(-1)
    yhat = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.size} actual vs {yhat.size} predicted")
    if y.size < min_len:
        raise ValueError(f"need at least {min_len} observations, got {y.size}")
    return y, yhat


def mape(actual, predicted):
    """Mean absolute percentage error as a fraction: ``mean(|(yhat - y) / y|)``."""
    y, yhat = _pair(actual, predicted)
    if np.any(y == 0):
        raise ValueError("MAPE is undefined when an actual value is zero")
    return float(np.mean(np.abs((yhat - y) / y)))


def theil_u(actual, predicted):
    """RMSE divided by ``RMS(predicted) + RMS(actual)``; 0 is perfect, 1 the worst."""
    y, yhat = _pair(actual, predicted)
    denom = np.sqrt(np.mean(yhat**2)) + np.sqrt(np.mean(y**2))
    if denom == 0:
        raise ValueError("Theil U is undefined when both series are zero")
    return float(np.sqrt(np.mean((yhat - y) ** 2)) / denom)


def pearson_r(actual, predicted):
    y, yhat = _pair(actual, predicted, min_len=2)
    dy = y - y.mean()
    dp = yhat - yhat.mean()
    sy, sp = np.sum(dy**2), np.sum(dp**2)
    if sy == 0 or sp == 0:
        raise ValueError("Pearson R is undefined for a constant series")
    r = float(np.sum(dy * dp) / np.sqrt(sy * sp))
    return min(1.0, max(-1.0, r))


def directional_accuracy(actual, predicted):
    """Share of consecutive moves where predicted and actual changes have the same strict sign."""
    y, yhat = _pair(actual, predicted, min_len=2)
    agree = np.sign(np.diff(y)) * np.sign(np.diff(yhat)) > 0
    return float(np.mean(agree))


def r2(actual, predicted):
    y, yhat = _pair(actual, predicted, min_len=2)
    sst = np.sum((y - y.mean()) ** 2)
    if sst == 0:
        raise ValueError("R^2 is undefined for a constant actual series")
    return float(1.0 - np.sum((y - yhat) ** 2) / sst)


_FUNCS = {"MAPE": mape, "R": pearson_r, "TheilU": theil_u, "DA": directional_accuracy}


def all_metrics(actual, predicted):
    out = {}
    for name, fn in _FUNCS.items():
        try:
            out[name] = fn(actual, predicted)
        except ValueError as exc:
            warnings.warn(f"{name} undefined: {exc}", RuntimeWarning, stacklevel=2)
            out[name] = float("nan")
    return out


def period_labels(dates, mode="365d"):
    """Assign each date to a period: 365-day blocks from the first date, or calendar years."""
    d = np.asarray(dates, dtype="datetime64[D]")
    if mode == "365d":
        return ((d - d[0]).astype(np.int64) // 365).astype(np.int64)
    if mode == "calendar":
        years = d.astype("datetime64[Y]").astype(np.int64) + 1970
        return years - years[0]
    raise ValueError(f"unknown period mode {mode!r}")


@dataclass
class MetricReport:
    labels: List[str] = field(default_factory=list)
    counts: List[int] = field(default_factory=list)
    values: Dict[str, List[float]] = field(default_factory=dict)  # metric -> per period

    def average(self, metric):
        vals = np.asarray(self.values[metric], dtype=np.float64)
        vals = vals[np.isfinite(vals)]
        return float(vals.mean()) if vals.size else float("nan")

    @property
    def averages(self):
        return {m: self.average(m) for m in self.values}

    def to_text(self, model="model"):
        lines = [f"{model}: {len(self.labels)} period(s), {sum(self.counts)} predictions"]
        for m in self.values:
            cells = "  ".join(f"{v:.4f}" for v in self.values[m])
            lines.append(f"  {m:7s} {cells}  | average {self.average(m):.4f}")
        return "\n".join(lines) + "\n"


def yearly_report(dates, actual, predicted, mode="365d") -> MetricReport:
    """MAPE, R, Theil U and DA per yearly period plus their averages."""
    y, yhat = _pair(actual, predicted)
    labels = period_labels(dates, mode)
    if labels.shape != y.shape:
        raise ValueError("dates must align with the series")
    report = MetricReport(values={m: [] for m in METRICS})
    k = 0
    for period in range(int(labels.max()) + 1):
        mask = labels == period
        if not mask.any():
            logger.warning("period %d has no observations; omitted", period + 1)
            continue
        k += 1
        report.labels.append(f"Year {k}")
        report.counts.append(int(mask.sum()))
        for name, value in all_metrics(y[mask], yhat[mask]).items():
            report.values[name].append(value)
    return report


def grid_rows(reports: Dict[str, MetricReport], metric):
    """Rows ``[model, Year 1..k, Average]`` for one metric across models."""
    k = max(len(r.labels) for r in reports.values())
    header = ["Model"] + [f"Year {i + 1}" for i in range(k)] + ["Average"]
    rows = [header]
    for model, rep in reports.items():
        vals = list(rep.values[metric]) + [float("nan")] * (k - len(rep.values[metric]))
        rows.append([model] + [f"{v:.6f}" for v in vals] + [f"{rep.average(metric):.6f}"])
    return rows


def write_metric_grids(reports: Dict[str, MetricReport], path_or_buf=None, metrics=METRICS):
    """Stack one model-by-year grid per metric into a CSV (first column names the metric)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for i, metric in enumerate(metrics):
        rows = grid_rows(reports, metric)
        if i == 0:
            w.writerow(["Metric"] + rows[0])
        for row in rows[1:]:
            w.writerow([metric] + row)
    text = buf.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
    return text
