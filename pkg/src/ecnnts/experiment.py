"""Configuration and end-to-end pipeline steps used by the command line."""
import configparser
import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import backtest as bt
from . import checkpoint, evaluation
from .data import ALL_FEATURES, SplitSpec, compute_indicators, make_windows, parse_csv
from .estimators import regressor_for
from .exceptions import ConfigError, DataError
from .training import TrainConfig

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "ECNNTS_DATA_DIR"
CHECKPOINT = "checkpoint.bin"
LOSS_CURVE = "loss_curve.csv"
RESOLVED_CONFIG = "config.ini"


def bundled_csv():
    return str(resources.files("ecnnts") / "fixtures" / "sample_ohlcv.csv")


def default_batch_size(kind, smoothing):
    # tuned values reported for these combinations
    if smoothing:
        return {"ecnn": 32, "lstm": 8}.get(kind, 64)
    return 64


@dataclass
class ExperimentConfig:
    data: str = ""
    features: tuple = ALL_FEATURES
    window: int = 7
    split: tuple = (0.8, 0.1, 0.1)
    split_dates: Optional[dict] = None
    rolling_ma: bool = False
    kind: str = "ecnn"
    neurons: int = 32
    smoothing: bool = False
    alpha: float = 0.8
    epochs: int = 1000
    batch_size: Optional[int] = None
    learning_rate: float = 1e-3
    truncation: Optional[int] = None
    optimizer: str = "adam"
    seed: int = 0
    buy_cost: float = 0.0025
    sell_cost: float = 0.0045
    return_mode: str = "actual"
    sell_mode: str = "short"
    periods: str = "365d"
    out: str = "runs/default"
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("ecnn", "rnn", "lstm"):
            raise ConfigError(f"model kind must be ecnn, rnn or lstm; got {self.kind!r}")
        if self.batch_size is None:
            self.batch_size = default_batch_size(self.kind, self.smoothing)
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must be in (0, 1]")
        if self.neurons < 1:
            raise ConfigError("neurons must be >= 1")
        unknown = [f for f in self.features if f not in ALL_FEATURES]
        if unknown:
            raise ConfigError(f"unknown features {unknown}")
        if self.return_mode not in ("actual", "literal"):
            raise ConfigError("backtest mode must be actual or literal")
        if self.sell_mode not in ("short", "exit"):
            raise ConfigError("backtest sell must be short or exit")
        if self.periods not in ("365d", "calendar"):
            raise ConfigError("periods must be 365d or calendar")
        try:
            self.train_config()
            self.split_spec()
            self.costs()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def label(self):
        return self.name or (self.kind.upper() + (" ES" if self.smoothing else ""))

    def data_path(self):
        path = self.data or bundled_csv()
        if not os.path.isabs(path) and not os.path.exists(path) and os.environ.get(DATA_DIR_ENV):
            path = os.path.join(os.environ[DATA_DIR_ENV], path)
        if not os.path.exists(path):
            raise ConfigError(f"data file not found: {path}")
        return path

    def train_config(self):
        return TrainConfig(self.epochs, self.batch_size, self.window, self.learning_rate,
                           self.truncation, self.seed, self.optimizer)

    def split_spec(self):
        return SplitSpec(tuple(self.split), self.split_dates)

    def costs(self):
        return bt.CostSpec(self.buy_cost, self.sell_cost)

    # ------------------------------------------------------------------ ini

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp["data"] = {
            "path": self.data,
            "features": ",".join(self.features),
            "window": str(self.window),
            "split": ",".join(repr(float(f)) for f in self.split),
            "rolling_ma": str(self.rolling_ma).lower(),
        }
        if self.split_dates:
            for k, (a, b) in self.split_dates.items():
                cp["data"][f"{k}_dates"] = f"{a},{b}"
        cp["model"] = {
            "kind": self.kind,
            "neurons": str(self.neurons),
            "smoothing": str(self.smoothing).lower(),
            "alpha": repr(self.alpha),
            "name": self.name,
        }
        cp["train"] = {
            "epochs": str(self.epochs),
            "batch_size": str(self.batch_size),
            "learning_rate": repr(self.learning_rate),
            "truncation": "" if self.truncation is None else str(self.truncation),
            "optimizer": self.optimizer,
            "seed": str(self.seed),
        }
        cp["backtest"] = {
            "buy_cost": repr(self.buy_cost),
            "sell_cost": repr(self.sell_cost),
            "mode": self.return_mode,
            "sell": self.sell_mode,
        }
        cp["report"] = {"periods": self.periods}
        cp["output"] = {"dir": self.out}
        return cp

    def write(self, path):
        with open(path, "w") as fh:
            self.to_ini().write(fh)

    @classmethod
    def from_ini(cls, path=None, overrides=None):
        """Read an INI file (optional) and apply ``overrides`` (field -> value)."""
        kwargs = {}
        if path is not None:
            cp = configparser.ConfigParser()
            if not cp.read(path):
                raise ConfigError(f"cannot read config file {path}")
            try:
                kwargs = _ini_to_kwargs(cp)
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        if overrides:
            kwargs.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in dataclasses.fields(cls)}
        bad = set(kwargs) - names
        if bad:
            raise ConfigError(f"unknown config keys {sorted(bad)}")
        return cls(**kwargs)


_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _ini_to_kwargs(cp):
    known = {
        "data": {"path", "features", "window", "split", "rolling_ma",
                 "train_dates", "val_dates", "test_dates"},
        "model": {"kind", "neurons", "smoothing", "alpha", "name"},
        "train": {"epochs", "batch_size", "learning_rate", "truncation", "optimizer", "seed"},
        "backtest": {"buy_cost", "sell_cost", "mode", "sell"},
        "report": {"periods"},
        "output": {"dir"},
    }
    for section in cp.sections():
        if section not in known:
            raise ValueError(f"unknown section [{section}]")
        extra = set(cp[section]) - known[section]
        if extra:
            raise ValueError(f"unknown keys in [{section}]: {sorted(extra)}")

    def get(section, key, conv=str):
        if cp.has_option(section, key):
            raw = cp.get(section, key).strip()
            if raw == "":
                return None
            if conv is bool:
                if raw.lower() not in _BOOL:
                    raise ValueError(f"[{section}] {key}: expected a boolean, got {raw!r}")
                return _BOOL[raw.lower()]
            return conv(raw)
        return None

    kw = {
        "data": get("data", "path"),
        "window": get("data", "window", int),
        "rolling_ma": get("data", "rolling_ma", bool),
        "kind": get("model", "kind"),
        "neurons": get("model", "neurons", int),
        "smoothing": get("model", "smoothing", bool),
        "alpha": get("model", "alpha", float),
        "name": get("model", "name"),
        "epochs": get("train", "epochs", int),
        "batch_size": get("train", "batch_size", int),
        "learning_rate": get("train", "learning_rate", float),
        "truncation": get("train", "truncation", int),
        "optimizer": get("train", "optimizer"),
        "seed": get("train", "seed", int),
        "buy_cost": get("backtest", "buy_cost", float),
        "sell_cost": get("backtest", "sell_cost", float),
        "return_mode": get("backtest", "mode"),
        "sell_mode": get("backtest", "sell"),
        "periods": get("report", "periods"),
        "out": get("output", "dir"),
    }
    feats = get("data", "features")
    if feats:
        kw["features"] = tuple(f.strip() for f in feats.split(",") if f.strip())
    split = get("data", "split")
    if split:
        kw["split"] = tuple(float(f) for f in split.split(","))
    dates = {}
    for name in ("train", "val", "test"):
        raw = get("data", f"{name}_dates")
        if raw:
            a, b = (d.strip() for d in raw.split(","))
            dates[name] = (a, b)
    if dates:
        kw["split_dates"] = dates
    return {k: v for k, v in kw.items() if v is not None}


# ---------------------------------------------------------------------- steps


def build_dataset(cfg: ExperimentConfig):
    bars = parse_csv(cfg.data_path())
    frame = compute_indicators(bars, rolling_ma=cfg.rolling_ma)
    return make_windows(frame, cfg.split_spec(), cfg.window, features=list(cfg.features),
                        smoothing_alpha=cfg.alpha if cfg.smoothing else None)


def _estimator(cfg):
    return regressor_for(cfg.kind, n_hidden=cfg.neurons, epochs=cfg.epochs, batch_size=cfg.batch_size,
                         learning_rate=cfg.learning_rate, truncation=cfg.truncation,
                         optimizer=cfg.optimizer, random_state=cfg.seed)


def run_train(cfg: ExperimentConfig, dataset=None):
    """Fit the configured model; write checkpoint, loss curve and resolved config."""
    dataset = dataset if dataset is not None else build_dataset(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    X, Y = dataset.split_arrays("train")
    Xv, Yv = dataset.split_arrays("val")
    est = _estimator(cfg)
    est.fit(X, Y, eval_set=(Xv, Yv) if len(Xv) else None)
    checkpoint.save(out / CHECKPOINT, est.params_)
    est.report_.to_csv(out / LOSS_CURVE)
    dataclasses.replace(cfg, data=cfg.data_path()).write(out / RESOLVED_CONFIG)
    logger.info("trained %s: best epoch %s", cfg.label, est.report_.best_epoch)
    return est


def load_estimator(cfg, path=None):
    params = checkpoint.load(path or Path(cfg.out) / CHECKPOINT)
    if params.kind != cfg.kind:
        raise ConfigError(f"checkpoint holds a {params.kind} model but the config asks for {cfg.kind}")
    return regressor_for(cfg.kind).from_params(params)


def predict_test(cfg, est, dataset, split="test"):
    """Dates, actual closes and denormalized one-step-ahead predictions for ``split``."""
    X, _ = dataset.split_arrays(split)
    if len(X) == 0:
        raise ConfigError(f"the {split} split has no windows")
    if X.shape[2] != est.n_features_in_:
        raise DataError(f"checkpoint expects {est.n_features_in_} features, dataset has {X.shape[2]}")
    pred = dataset.to_price(est.predict(X, dataset.context(split)), split)
    return dataset.target_dates(split), dataset.actual_prices(split), pred


def write_predictions(path, dates, actual, predicted):
    with open(path, "w", newline="") as fh:
        fh.write("date,actual,predicted\n")
        for d, a, p in zip(dates, actual, predicted):
            fh.write(f"{d},{float(a)!r},{float(p)!r}\n")


def run_evaluate(cfg, checkpoint_path=None, dataset=None, est=None):
    dataset = dataset if dataset is not None else build_dataset(cfg)
    est = est if est is not None else load_estimator(cfg, checkpoint_path)
    dates, actual, pred = predict_test(cfg, est, dataset)
    report = evaluation.yearly_report(dates, actual, pred, cfg.periods)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_predictions(out / "predictions.csv", dates, actual, pred)
    evaluation.write_metric_grids({cfg.label: report}, out / "metrics.csv")
    (out / "metrics.txt").write_text(report.to_text(cfg.label))
    return report, (dates, actual, pred)


def backtest_series(cfg, dates, actual, pred):
    signals = bt.generate_signals(pred)
    prices = pred if cfg.return_mode == "literal" else actual
    return bt.strategy_return(signals, prices, cfg.costs(), cfg.return_mode, cfg.sell_mode, dates)


def run_backtest(cfg, checkpoint_path=None, dataset=None, est=None):
    dataset = dataset if dataset is not None else build_dataset(cfg)
    est = est if est is not None else load_estimator(cfg, checkpoint_path)
    dates, actual, pred = predict_test(cfg, est, dataset)
    log = backtest_series(cfg, dates, actual, pred)
    strat, hold = bt.period_returns(log, cfg.costs(), cfg.periods)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    log.to_csv(out / "trades.csv")
    bt.write_return_grid({cfg.label: strat, "buy-&-hold": hold}, out / "returns.csv")
    total_hold = bt.buy_and_hold(actual, cfg.costs())
    (out / "returns.txt").write_text(
        f"{cfg.label}: total return {log.total_return:.4f}% over {len(log.signals)} days "
        f"({log.buy_days} buy, {log.sell_days} sell)\n"
        f"buy-&-hold: {total_hold:.4f}%\n"
    )
    return log, strat, hold


def _run_one(cfg):
    dataset = build_dataset(cfg)
    est = run_train(cfg, dataset)
    report, series = run_evaluate(cfg, dataset=dataset, est=est)
    log, strat, hold = run_backtest(cfg, dataset=dataset, est=est)
    return report, strat, hold


def run_compare(cfgs, out, jobs=1):
    """Train, evaluate and backtest each config; write combined grids in config order."""
    if len(cfgs) < 2:
        raise ConfigError("compare needs at least two configs")
    ref = cfgs[0]
    for c in cfgs[1:]:
        if (c.data_path(), c.window, tuple(c.split), c.split_dates) != (
                ref.data_path(), ref.window, tuple(ref.split), ref.split_dates):
            raise ConfigError(f"config {c.label!r} does not share the dataset/window/split of {ref.label!r}")
    labels = [c.label for c in cfgs]
    if len(set(labels)) != len(labels):
        labels = [f"{lab} #{i + 1}" for i, lab in enumerate(labels)]
    out = Path(out)
    cfgs = [dataclasses.replace(c, out=str(out / f"model{i + 1}"), name=labels[i]) for i, c in enumerate(cfgs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, cfgs))
    else:
        results = [_run_one(c) for c in cfgs]
    reports = {c.label: r[0] for c, r in zip(cfgs, results)}
    returns = {c.label: r[1] for c, r in zip(cfgs, results)}
    returns["buy-&-hold"] = results[0][2]
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_metric_grids(reports, out / "compare_metrics.csv")
    bt.write_return_grid(returns, out / "compare_returns.csv")
    return reports, returns
