import csv
import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ecnnts.evaluation import (METRICS, all_metrics, directional_accuracy, grid_rows, mape, pearson_r,
                               period_labels, r2, theil_u, write_metric_grids, yearly_report)

pos = arrays(np.float64, st.integers(2, 30), elements=st.floats(0.1, 1e4))


def test_perfect_prediction():
    y = np.array([1.0, 3.0, 2.0, 5.0])
    assert (mape(y, y), theil_u(y, y), pearson_r(y, y), directional_accuracy(y, y)) == (0.0, 0.0, 1.0, 1.0)


def test_hand_values():
    assert abs(mape([100], [99]) - 0.01) <= 1e-9
    assert abs(theil_u([1], [3]) - 0.5) <= 1e-9
    assert abs(pearson_r([1, 2, 3], [1, 2, 2]) - math.sqrt(3) / 2) <= 1e-9
    assert abs(directional_accuracy([1, 2, 1], [1, 2, 3]) - 0.5) <= 1e-9


@given(pos, st.floats(0.01, 100.0), st.integers(0, 99))
def test_mape_scale_invariant(y, c, seed):
    yhat = y * np.random.default_rng(seed).uniform(0.5, 1.5, y.size)
    assert mape(c * y, c * yhat) == pytest.approx(mape(y, yhat), rel=1e-9)


@given(pos, pos)
def test_theil_bounded(y, yhat):
    n = min(y.size, yhat.size)
    assert 0.0 <= theil_u(y[:n], yhat[:n]) <= 1.0


@given(pos, st.floats(0.1, 10), st.floats(-100, 100))
def test_pearson_linear(y, a, b):
    if np.ptp(y) < 1e-3:
        return
    assert pearson_r(y, a * y + b) == pytest.approx(1.0, abs=1e-9)
    assert pearson_r(y, -y) == pytest.approx(-1.0, abs=1e-9)


@given(arrays(np.float64, st.integers(2, 30), elements=st.floats(-100, 100)))
def test_directional_extremes(y):
    if np.any(np.diff(y) == 0):
        return
    assert directional_accuracy(y, y) == 1.0
    assert directional_accuracy(y, -y) == 0.0


def test_r2_and_errors():
    assert r2([1, 2, 3], [1, 2, 3]) == 1.0
    with pytest.raises(ValueError, match="zero"):
        mape([0, 1], [1, 1])
    with pytest.raises(ValueError, match="length"):
        theil_u([1, 2], [1])
    with pytest.raises(ValueError, match="constant"):
        pearson_r([1, 1], [1, 2])


def test_all_metrics_undefined_is_nan():
    with pytest.warns(RuntimeWarning, match="R undefined"):
        out = all_metrics([2.0, 2.0], [2.0, 2.0])
    assert math.isnan(out["R"]) and out["MAPE"] == 0.0


def dates(n, start="2010-01-04"):
    return np.datetime64(start) + np.arange(n)


def test_single_period():
    y = np.linspace(10, 20, 50)
    rep = yearly_report(dates(50), y, y * 1.01)
    assert rep.labels == ["Year 1"] and rep.counts == [50]
    for m in METRICS:
        assert rep.average(m) == rep.values[m][0]


@given(st.integers(30, 1200), st.integers(0, 99), st.sampled_from(["365d", "calendar"]))
def test_partition_and_average(n, seed, mode):
    rng = np.random.default_rng(seed)
    y = 100 + np.cumsum(rng.normal(size=n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = yearly_report(dates(n), y, y + rng.normal(size=n))
    assert sum(rep.counts) == n
    labels = period_labels(dates(n), mode)
    assert len(np.unique(labels)) >= 1
    for m in METRICS:
        vals = np.array(rep.values[m])
        vals = vals[np.isfinite(vals)]
        assert abs(rep.average(m) - vals.mean()) <= 1e-12


def test_period_labels_modes():
    d = np.array(["2010-12-30", "2010-12-31", "2011-01-03", "2011-12-30"], dtype="datetime64[D]")
    np.testing.assert_array_equal(period_labels(d, "calendar"), [0, 0, 1, 1])
    np.testing.assert_array_equal(period_labels(d, "365d"), [0, 0, 0, 1])
    with pytest.raises(ValueError):
        period_labels(d, "monthly")


def test_grid_layout():
    y = 100 + np.cumsum(np.random.default_rng(0).normal(size=800))
    d = dates(800)
    reports = {"ECNN": yearly_report(d, y, y * 1.001), "RNN": yearly_report(d[:500], y[:500], y[:500] * 0.99)}
    rows = grid_rows(reports, "MAPE")
    assert rows[0] == ["Model", "Year 1", "Year 2", "Year 3", "Average"]
    assert [r[0] for r in rows[1:]] == ["ECNN", "RNN"]
    text = write_metric_grids(reports)
    parsed = list(csv.reader(io.StringIO(text)))
    assert parsed[0] == ["Metric", "Model", "Year 1", "Year 2", "Year 3", "Average"]
    assert len(parsed) == 1 + 2 * len(METRICS)
    assert "average" in reports["ECNN"].to_text("ECNN")
