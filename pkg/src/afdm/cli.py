"""``afdm`` command line: generate, preprocess, eval, stream, score.

Errors are written to stderr as ``afdm-error: <kind>: <message>`` and the
process exits with status 1 (2 for usage errors).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, snapshot
from .bagging import OnlineBagging
from .base import verdicts
from .baselines import BatchTree, LogisticRegression
from .data import (CLASS_NAMES, FRAUD, TRANSACTION_SCHEMA, DataError, LabeledDataset,
                   SchemaError, balance_indices, parse_csv, write_csv)
from .evaluation import ClassifierConfig, CostParams, compare, prequential_snapshots
from .generator import ConfigError, GeneratorConfig, TransactionGenerator
from .hoeffding import HoeffdingTree
from .knn import WindowedKNN
from .naive_bayes import NaiveBayesUpdateable

CLASSIFIERS = ("afdm", "nb", "ht", "knn", "j48tree", "logistic")
INCREMENTAL = ("afdm", "nb", "ht", "knn")
SEED_ENV = "AFDM_SEED"

# per-classifier hyperparameters settable with --param NAME.KEY=VALUE
_PARAM_KEYS = {
    "afdm": {"alpha", "var_floor"},
    "nb": {"alpha", "var_floor"},
    "ht": {"delta", "grace_period", "tie_tau", "n_bins", "alpha"},
    "knn": {"k", "window_capacity", "weighting"},
    "j48tree": {"min_leaf", "max_depth", "alpha"},
    "logistic": {"l2", "learning_rate", "epochs", "standardize"},
}


class CliError(Exception):
    def __init__(self, kind: str, message: str, status: int = 1):
        super().__init__(message)
        self.kind = kind
        self.status = status


# ---------------------------------------------------------------------------
# argument helpers


def resolve_seed(flag: int | None, default: int = 0) -> int:
    """``--seed`` if given, else ``$AFDM_SEED``, else ``default``."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return default
    try:
        return int(env)
    except ValueError:
        raise CliError("usage", f"{SEED_ENV}={env!r} is not an integer", 2) from None


def parse_weights(text: str) -> CostParams:
    try:
        fn, fp = (float(v) for v in text.split(","))
        return CostParams(fn, fp)
    except ValueError:
        raise CliError("usage", f"--weights expects 'W_FN,W_FP' non-negative numbers, "
                                f"got {text!r}", 2) from None


def parse_classifiers(text: str) -> list[str]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    bad = [n for n in names if n not in CLASSIFIERS]
    if bad or not names:
        raise CliError("usage", f"unknown classifier(s) {bad or [text]}; "
                                f"choose from {','.join(CLASSIFIERS)}", 2)
    if len(set(names)) != len(names):
        raise CliError("usage", "a classifier is listed twice", 2)
    return names


def _coerce(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    if value.lower() == "none":
        return None
    return value


def parse_params(items: list[str] | None) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        name, dot, field = key.partition(".")
        if not sep or not dot:
            raise CliError("usage", f"--param expects NAME.KEY=VALUE, got {item!r}", 2)
        if field not in _PARAM_KEYS.get(name, ()):
            raise CliError("usage", f"--param: {name!r} has no parameter {field!r}", 2)
        out.setdefault(name, {})[field] = _coerce(value)
    return out


def _check_threshold(t: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise CliError("usage", f"--threshold must lie in [0, 1], got {t}", 2)
    return t


def _distinct(src, dst, what: str = "output") -> None:
    if src is not None and dst is not None and Path(src).resolve() == Path(dst).resolve():
        raise CliError("usage", f"{what} path must differ from the input path", 2)


def _positive(flag: str, value: int, minimum: int = 1) -> int:
    if value < minimum:
        raise CliError("usage", f"{flag} must be >= {minimum}", 2)
    return value


# ---------------------------------------------------------------------------
# classifier construction


def build_config(name: str, schema=TRANSACTION_SCHEMA, seed: int = 0, bag_size: int = 10,
                 params: dict | None = None) -> ClassifierConfig:
    """Fresh-model recipe for one of the named CLI classifiers."""
    p = dict((params or {}).get(name, {}))
    try:
        if name == "afdm":
            base = NaiveBayesUpdateable(schema, **p)
            build = lambda: OnlineBagging(base, bag_size, seed)  # noqa: E731
        elif name == "nb":
            build = lambda: NaiveBayesUpdateable(schema, **p)  # noqa: E731
        elif name == "ht":
            build = lambda: HoeffdingTree(schema, **p)  # noqa: E731
        elif name == "knn":
            build = lambda: WindowedKNN(schema, **p)  # noqa: E731
        elif name == "j48tree":
            build = lambda: BatchTree(**p)  # noqa: E731
        elif name == "logistic":
            build = lambda: LogisticRegression(**p)  # noqa: E731
        else:
            raise CliError("usage", f"unknown classifier {name!r}", 2)
        probe = build()
    except (TypeError, ValueError) as err:
        raise CliError("usage", f"bad parameters for {name}: {err}", 2) from None
    return ClassifierConfig(name, build, {"algorithm": probe.algorithm, **probe.params()})


# ---------------------------------------------------------------------------
# IO


def _read_transactions(path, skip_bad_rows: bool = False):
    bad: list = []
    with open(path, newline="", encoding="utf-8") as fh:
        txs = parse_csv(fh, skip_bad_rows=skip_bad_rows, bad_rows=bad)
    return txs, bad


def _read_dataset(path, skip_bad_rows: bool = False) -> tuple[LabeledDataset, int]:
    txs, bad = _read_transactions(path, skip_bad_rows)
    return LabeledDataset.from_transactions(txs), len(bad)


def _write_json(doc: dict, path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"config is not valid JSON: {err}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
    else:
        d = {}
    _distinct(args.config, args.out)
    if args.seed is not None or "seed" not in d:
        d["seed"] = resolve_seed(args.seed)
    for flag, key in (("n_steps", "n_steps"), ("customers", "customers"),
                      ("fraud_scenario_rate", "fraud_scenario_rate")):
        v = getattr(args, flag)
        if v is not None:
            d[key] = v
    cfg = GeneratorConfig.from_dict(d)
    gen = TransactionGenerator(cfg)
    n_fraud = 0

    def counted():
        nonlocal n_fraud
        for tx in gen:
            n_fraud += tx.is_fraud
            yield tx

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        n = write_csv(counted(), fh)
    print(f"rows {n} fraud {n_fraud} scenarios {gen.n_scenarios} "
          f"skipped {gen.n_skipped} seed {cfg.seed}")
    return 0


def cmd_preprocess(args) -> int:
    _distinct(args.data, args.out)
    if not args.ratio > 0:
        raise CliError("usage", "--ratio must be positive", 2)
    txs, bad = _read_transactions(args.data, args.skip_bad_rows)
    labels = np.array([tx.is_fraud for tx in txs], dtype=np.int8)
    keep = balance_indices(labels, args.ratio, resolve_seed(args.seed))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        n = write_csv((txs[i] for i in keep), fh)
    n_fraud = int(labels[keep].sum())
    print(f"rows {n} fraud {n_fraud} legal {n - n_fraud} dropped {len(txs) - n}"
          + (f" bad_rows {len(bad)}" if bad else ""))
    return 0


def cmd_eval(args) -> int:
    _distinct(args.data, args.out)
    _distinct(args.data, args.table, "table")
    names = parse_classifiers(args.classifiers)
    w = parse_weights(args.weights)
    seed = resolve_seed(args.seed)
    threshold = _check_threshold(args.threshold)
    _positive("--k", args.k, 2)
    _positive("--bag-size", args.bag_size)
    params = parse_params(args.param)
    ds, n_bad = _read_dataset(args.data, args.skip_bad_rows)
    if len(ds) == 0:
        raise CliError("data", "dataset is empty")
    if args.balance is not None:
        if not args.balance > 0:
            raise CliError("usage", "--balance must be positive", 2)
        ds = ds.subset(balance_indices(ds.labels, args.balance, seed))
    configs = [build_config(n, ds.schema, seed, args.bag_size, params) for n in names]
    table = compare(configs, ds, args.k, seed, w, threshold, args.shuffle_train)
    doc = table.to_dict(timing=args.with_timing)
    doc["protocol"].update({"threshold": threshold, "shuffle_train": args.shuffle_train})
    doc["data"] = {"n_instances": len(ds), "n_fraud": int(ds.labels.sum()),
                   "bad_rows": n_bad, "balance": args.balance}
    doc["afdm_version"] = __version__
    if args.out:
        _write_json(doc, args.out)
    text = table.to_text()
    if args.table:
        with open(args.table, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if args.out != "-":
        sys.stdout.write(text)
    return 0


def cmd_stream(args) -> int:
    _distinct(args.data, args.snapshot_out, "snapshot")
    if args.classifier not in INCREMENTAL:
        raise CliError("usage", f"stream needs an incremental classifier "
                                f"({','.join(INCREMENTAL)}), got {args.classifier!r}", 2)
    _positive("--report-every", args.report_every)
    _positive("--bag-size", args.bag_size)
    w = parse_weights(args.weights)
    threshold = _check_threshold(args.threshold)
    seed = resolve_seed(args.seed)
    if os.path.exists(args.data) and os.path.getsize(args.data) == 0:
        raise CliError("data", "empty stream: the data file is empty")
    t_start = time.perf_counter()
    ds, n_bad = _read_dataset(args.data, args.skip_bad_rows)
    if len(ds) == 0:
        raise CliError("data", "empty stream: the data file has no rows")
    cfg = build_config(args.classifier, ds.schema, seed, args.bag_size,
                       parse_params(args.param))
    learner = cfg.build()
    t0 = time.perf_counter()
    proba = learner.prequential_many(ds)
    elapsed = time.perf_counter() - t0
    total = time.perf_counter() - t_start
    snaps = prequential_snapshots(proba, ds.labels, w, args.report_every, threshold,
                                  cfg.name, cfg.params, elapsed)
    out = sys.stdout
    for s in snaps:
        if s.n_instances % args.report_every == 0:
            out.write(_stream_line("progress", s) + "\n")
            out.flush()
    final = _stream_line("final", snaps[-1], {
        "instances_per_s": len(ds) / elapsed if elapsed > 0 else None,
        "end_to_end_instances_per_s": len(ds) / total if total > 0 else None,
        "wall_clock_s": elapsed, "bad_rows": n_bad})
    out.write(final + "\n")
    out.flush()
    if args.snapshot_out:
        snapshot.save(learner, args.snapshot_out,
                      {"classifier": cfg.name, "seed": seed})
    rate = len(ds) / elapsed if elapsed > 0 else float("inf")
    print(f"throughput {rate:,.0f} instances/s ({len(ds)} instances, {elapsed:.3f} s)",
          file=sys.stderr)
    return 0


def _stream_line(kind: str, report, extra: dict | None = None) -> str:
    cm = report.confusion
    d = {"type": kind, "classifier": report.classifier, "n_instances": report.n_instances,
         "tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn,
         "accuracy": report.accuracy, "detection_rate": report.detection_rate,
         "precision": report.precision, "f1": report.f1, "rmse": report.rmse,
         "cost": report.cost}
    d.update(extra or {})
    return json.dumps(d, sort_keys=True, allow_nan=False)


def cmd_score(args) -> int:
    _distinct(args.data, args.out)
    _distinct(args.snapshot, args.out)
    threshold = _check_threshold(args.threshold)
    model = snapshot.restore(args.snapshot, TRANSACTION_SCHEMA)
    ds, _ = _read_dataset(args.data, args.skip_bad_rows)
    proba = model.predict_many(ds) if len(ds) else np.empty((0, 2))
    labels = verdicts(proba, threshold)
    fh, close = _open_out(args.out)
    try:
        fh.write("row_id,p_fraud,verdict\n")
        for i, (p, v) in enumerate(zip(proba[:, FRAUD], labels)):
            fh.write(f"{i},{float(p)!r},{CLASS_NAMES[v]}\n")
    finally:
        if close:
            fh.close()
    return 0


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    """Argument errors use the same ``afdm-error:`` prefix as everything else."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"afdm-error: usage: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="afdm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"afdm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded synthetic transaction CSV")
    g.add_argument("--config", help="JSON file with GeneratorConfig fields")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--n-steps", dest="n_steps", type=int)
    g.add_argument("--customers", type=int)
    g.add_argument("--fraud-scenario-rate", dest="fraud_scenario_rate", type=float)
    g.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="undersample legal rows to a legal:fraud ratio")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratio", type=float, default=3.0, help="legal rows per fraud row")
    p.add_argument("--seed", type=int)
    p.add_argument("--skip-bad-rows", action="store_true")
    p.set_defaults(func=cmd_preprocess)

    e = sub.add_parser("eval", help="k-fold comparison of classifiers")
    e.add_argument("--data", required=True)
    e.add_argument("--classifiers", default=",".join(CLASSIFIERS))
    e.add_argument("--k", type=int, default=10)
    e.add_argument("--seed", type=int)
    e.add_argument("--weights", default="10,1", help="W_FN,W_FP")
    e.add_argument("--threshold", type=float, default=0.5)
    e.add_argument("--out", help="JSON report path")
    e.add_argument("--table", help="plain-text table path")
    e.add_argument("--balance", type=float, help="undersample to this legal:fraud ratio first")
    e.add_argument("--bag-size", dest="bag_size", type=int, default=10)
    e.add_argument("--param", action="append", metavar="NAME.KEY=VALUE")
    e.add_argument("--shuffle-train", dest="shuffle_train", action="store_true")
    e.add_argument("--skip-bad-rows", action="store_true")
    e.add_argument("--with-timing", dest="with_timing", action="store_true",
                   help="include wall-clock fields (makes the JSON non-reproducible)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("stream", help="prequential run, JSON-lines metrics on stdout")
    s.add_argument("--data", required=True)
    s.add_argument("--classifier", default="afdm")
    s.add_argument("--report-every", dest="report_every", type=int, default=1000)
    s.add_argument("--snapshot-out", dest="snapshot_out")
    s.add_argument("--seed", type=int)
    s.add_argument("--weights", default="10,1")
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--bag-size", dest="bag_size", type=int, default=10)
    s.add_argument("--param", action="append", metavar="NAME.KEY=VALUE")
    s.add_argument("--skip-bad-rows", action="store_true")
    s.set_defaults(func=cmd_stream)

    c = sub.add_parser("score", help="score rows with a saved model, no learning")
    c.add_argument("--snapshot", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--threshold", type=float, default=0.5)
    c.add_argument("--out", help="CSV path (default stdout)")
    c.add_argument("--skip-bad-rows", action="store_true")
    c.set_defaults(func=cmd_score)
    return ap


def _fail(kind: str, message: str, status: int = 1) -> int:
    print(f"afdm-error: {kind}: {message}", file=sys.stderr)
    return status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        return _fail(err.kind, str(err), err.status)
    except snapshot.VersionError as err:
        return _fail("version", str(err))
    except SchemaError as err:
        return _fail("schema", str(err))
    except snapshot.SnapshotError as err:
        return _fail("snapshot", str(err))
    except ConfigError as err:
        return _fail("config", str(err))
    except DataError as err:
        return _fail("data", str(err))
    except (ValueError, TypeError) as err:
        return _fail("invalid", str(err))
    except OSError as err:
        return _fail("io", f"{err.strerror or err}: {err.filename or ''}".rstrip(": "))


if __name__ == "__main__":
    sys.exit(main())
