"""Command line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure (divergence, failed gradient check).
"""
import argparse
import logging
import sys

from . import experiment
from .data import ALL_FEATURES
from .exceptions import ConfigError, DataError, NumericalError
from .gradcheck import check_gradients

logger = logging.getLogger("ecnnts")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors share the config exit code; argparse's default 2 means data here
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _dims(text):
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n,m,p, got {text!r}")
    if len(dims) != 3 or not all(1 <= d <= 10 for d in dims):
        raise argparse.ArgumentTypeError("dims must be three integers in 1..10")
    return dims


def _features(text):
    names = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in names if f not in ALL_FEATURES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown features {bad}; choose from {','.join(ALL_FEATURES)}")
    return names


def _add_experiment_args(p, multi=False):
    if multi:
        p.add_argument("--config", action="append", required=True, metavar="PATH",
                       help="config file; repeat once per model")
    else:
        p.add_argument("--config", metavar="PATH", help="INI config file")
    p.add_argument("--seed", type=int, help="override the training seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    if multi:
        return
    p.add_argument("--data", metavar="CSV", help="price CSV (relative paths also try $%s)" % experiment.DATA_DIR_ENV)
    p.add_argument("--model", dest="kind", choices=("ecnn", "rnn", "lstm"))
    p.add_argument("--features", type=_features, help="comma-separated feature subset")
    p.add_argument("--window", type=int)
    p.add_argument("--neurons", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--truncation", type=int)
    p.add_argument("--smoothing", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--alpha", type=float, help="smoothing constant (default 0.8)")
    p.add_argument("--periods", choices=("365d", "calendar"))


_OVERRIDES = ("seed", "out", "data", "kind", "features", "window", "neurons", "epochs",
              "batch_size", "learning_rate", "truncation", "smoothing", "alpha", "periods")


def _config(args):
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    cfg = experiment.ExperimentConfig.from_ini(args.config, overrides)
    cfg.data_path()
    return cfg


def build_parser():
    parser = _Parser(prog="ecnnts", description="Error correction networks for daily price forecasting.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    g.add_argument("--model", dest="kind", choices=("ecnn", "rnn", "lstm"), default="ecnn")
    g.add_argument("--dims", type=_dims, default=(4, 3, 2), help="n,m,p (default 4,3,2)")
    g.add_argument("--length", "-T", type=int, default=5, dest="length")
    g.add_argument("--trials", type=int, default=1)
    g.add_argument("--tol", type=float, default=1e-5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--corrupt", help=argparse.SUPPRESS)

    t = sub.add_parser("train", help="fit a model and write checkpoint, loss curve and config")
    _add_experiment_args(t)

    for name, text in (("evaluate", "yearly accuracy grid and prediction CSV"),
                       ("backtest", "trading backtest over test predictions")):
        e = sub.add_parser(name, help=text)
        _add_experiment_args(e)
        e.add_argument("--checkpoint", metavar="PATH", help="defaults to <out>/checkpoint.bin")

    c = sub.add_parser("compare", help="train, evaluate and backtest several configs")
    _add_experiment_args(c, multi=True)
    c.add_argument("--jobs", type=int, default=1, help="configs to run concurrently")
    return parser


def cmd_gradcheck(args):
    if not 1 <= args.length <= 10:
        raise ConfigError("length must be in 1..10")
    n, m, p = args.dims
    ok = True
    for trial in range(args.trials):
        res = check_gradients(args.kind, n, m, p, args.length, seed=args.seed + trial,
                              tolerance=args.tol, corrupt=args.corrupt)
        status = "PASS" if res.passed else "FAIL"
        print(f"{args.kind} n={n} m={m} p={p} T={args.length} seed={args.seed + trial}: {status}")
        for name, err in res.max_rel_error.items():
            flag = "" if err <= args.tol else "  <-- exceeds tolerance"
            print(f"  {name:3s} max rel error {err:.3e}{flag}")
        ok &= res.passed
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_train(args):
    cfg = _config(args)
    est = experiment.run_train(cfg)
    rep = est.report_
    print(f"trained {cfg.label} for {cfg.epochs} epochs; best epoch {rep.best_epoch}; "
          f"train loss {rep.train_loss[-1]:.6g}; outputs in {cfg.out}")
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _config(args)
    report, _ = experiment.run_evaluate(cfg, args.checkpoint)
    print(report.to_text(cfg.label), end="")
    return EXIT_OK


def cmd_backtest(args):
    cfg = _config(args)
    log, strat, hold = experiment.run_backtest(cfg, args.checkpoint)
    print(f"{cfg.label}: {log.total_return:.4f}% ({log.buy_days} buy / {log.sell_days} sell days); "
          f"buy-&-hold per period {', '.join(f'{h:.2f}%' for h in hold)}")
    return EXIT_OK


def cmd_compare(args):
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    overrides = {"seed": args.seed}
    cfgs = [experiment.ExperimentConfig.from_ini(path, overrides) for path in args.config]
    out = args.out or "runs/compare"
    reports, _ = experiment.run_compare(cfgs, out, jobs=args.jobs)
    for label, rep in reports.items():
        print(rep.to_text(label), end="")
    return EXIT_OK


COMMANDS = {"gradcheck": cmd_gradcheck, "train": cmd_train, "evaluate": cmd_evaluate,
            "backtest": cmd_backtest, "compare": cmd_compare}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
