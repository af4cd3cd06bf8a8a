"""Confusion matrices, weighted cost, RMSE, k-fold and prequential evaluation."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .base import BatchModel, ClassDistribution, IncrementalLearner, Model, verdicts
from .data import FRAUD, LEGAL, LabeledDataset, split_stratified_folds


@dataclass(frozen=True)
class CostParams:
    w_fn: float = 10.0
    w_fp: float = 1.0

    def __post_init__(self):
        if self.w_fn < 0 or self.w_fp < 0:
            raise ValueError("cost weights must be non-negative")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @classmethod
    def from_labels(cls, y_true, y_pred) -> "ConfusionMatrix":
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        t = y_true == FRAUD
        p = y_pred == FRAUD
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)),
                   int(np.sum(~t & ~p)), int(np.sum(t & ~p)))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def detection_rate(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.detection_rate
        return 2 * p * r / (p + r) if p + r else 0.0


def cost(cm: ConfusionMatrix, w: CostParams = CostParams()) -> float:
    """Weighted misclassification count ``w_fn * fn + w_fp * fp``."""
    return w.w_fn * cm.fn + w.w_fp * cm.fp


def rmse(predictions: Iterable[tuple[ClassDistribution, int]]) -> float:
    """Root of the squared error averaged over both class probabilities, then instances."""
    total = 0.0
    n = 0
    for dist, label in predictions:
        total += ((dist.p_fraud - (label == FRAUD)) ** 2
                  + (dist.p_legal - (label == LEGAL)) ** 2) / 2.0
        n += 1
    if n == 0:
        raise ValueError("rmse of an empty prediction sequence")
    return math.sqrt(total / n)


def _squared_errors(proba: np.ndarray, labels: np.ndarray) -> np.ndarray:
    onehot = np.zeros_like(proba)
    onehot[np.arange(len(labels)), labels.astype(np.int64)] = 1.0
    return ((proba - onehot) ** 2).sum(axis=1) / 2.0


def rmse_arrays(proba: np.ndarray, labels: np.ndarray) -> float:
    """Vectorized :func:`rmse` over an ``(n, 2)`` probability array."""
    if len(labels) == 0:
        raise ValueError("rmse of an empty prediction sequence")
    return math.sqrt(float(_squared_errors(proba, labels).mean()))


@dataclass
class EvalReport:
    classifier: str
    params: dict
    protocol: dict
    confusion: ConfusionMatrix
    rmse: float
    cost_weights: CostParams
    wall_clock_s: float = 0.0
    instances_per_s: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def n_instances(self) -> int:
        return self.confusion.total

    @property
    def accuracy(self) -> float:
        return self.confusion.accuracy

    @property
    def detection_rate(self) -> float:
        return self.confusion.detection_rate

    @property
    def precision(self) -> float:
        return self.confusion.precision

    @property
    def f1(self) -> float:
        return self.confusion.f1

    @property
    def cost(self) -> float:
        return cost(self.confusion, self.cost_weights)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "classifier": self.classifier,
            "params": self.params,
            "protocol": self.protocol,
            "confusion": asdict(self.confusion),
            "n_instances": self.n_instances,
            "accuracy": self.accuracy,
            "detection_rate": self.detection_rate,
            "precision": self.precision,
            "f1": self.f1,
            "rmse": self.rmse,
            "cost": self.cost,
            "cost_weights": asdict(self.cost_weights),
        }
        if timing:
            d["wall_clock_s"] = self.wall_clock_s
            d["instances_per_s"] = self.instances_per_s
        d.update(self.extra)
        return d


@dataclass(frozen=True)
class ClassifierConfig:
    """A named recipe for fresh models; ``build()`` must return an untrained model."""

    name: str
    build: Callable[[], Model]
    params: dict = field(default_factory=dict)


def _as_config(factory) -> ClassifierConfig:
    if isinstance(factory, ClassifierConfig):
        return factory
    probe = factory()
    return ClassifierConfig(probe.algorithm, factory, probe.params())


def _train(model: Model, train: LabeledDataset, mode: str, shuffle_seed: int | None):
    if mode == "batch" and isinstance(model, BatchModel):
        model.fit(train)
        return
    if shuffle_seed is not None:
        rng = np.random.Generator(np.random.PCG64(shuffle_seed))
        train = train.subset(rng.permutation(len(train)))
    model.update_many(train)


def kfold_evaluate(factory, ds: LabeledDataset, k: int = 10, seed: int = 0,
                   w: CostParams = CostParams(), mode: str | None = None,
                   threshold: float = 0.5, shuffle_train: bool = False) -> EvalReport:
    """Stratified k-fold evaluation with one pooled confusion matrix and RMSE.

    Each fold gets a fresh model trained on the other folds: one ``fit`` call
    for batch models, one ``update`` per row in dataset order for incremental
    ones. Held-out rows are scored without further updates. ``k == len(ds)``
    is leave-one-out: every row is its own fold and ``seed`` is unused.
    """
    cfg = _as_config(factory)
    if k == len(ds):
        folds = [np.array([i], dtype=np.int64) for i in range(len(ds))]
    else:
        folds = split_stratified_folds(ds, k, seed)
    labels = ds.labels
    proba = np.empty((len(ds), 2))
    n_train = 0
    t0 = time.perf_counter()
    for f, test_idx in enumerate(folds):
        model = cfg.build()
        m = mode or ("batch" if isinstance(model, BatchModel) else "incremental")
        if m == "incremental" and not isinstance(model, IncrementalLearner):
            raise ValueError(f"{cfg.name} is not an incremental learner")
        mask = np.ones(len(ds), dtype=bool)
        mask[test_idx] = False
        train = ds.subset(np.flatnonzero(mask))
        n_train += len(train)
        _train(model, train, m, seed * 1000003 + f if shuffle_train else None)
        proba[test_idx] = model.predict_many(ds.subset(test_idx))
    elapsed = time.perf_counter() - t0
    cm = ConfusionMatrix.from_labels(labels, verdicts(proba, threshold))
    return EvalReport(
        classifier=cfg.name,
        params=cfg.params,
        protocol={"kind": "kfold", "k": k, "seed": seed, "threshold": threshold,
                  "shuffle_train": shuffle_train},
        confusion=cm,
        rmse=rmse_arrays(proba, labels),
        cost_weights=w,
        wall_clock_s=elapsed,
        instances_per_s=(n_train + len(ds)) / elapsed if elapsed > 0 else math.inf,
    )


def prequential_evaluate(learner: IncrementalLearner, stream,
                         w: CostParams = CostParams(), report_every: int = 1000,
                         threshold: float = 0.5, name: str | None = None) -> list[EvalReport]:
    """Test-then-train over ``stream``; cumulative snapshots every ``report_every`` instances.

    ``stream`` is a :class:`LabeledDataset` (run through the learner's bulk
    path) or any iterable of labeled feature vectors. The last snapshot always
    covers the whole stream.
    """
    if report_every < 1:
        raise ValueError("report_every must be >= 1")
    t0 = time.perf_counter()
    if isinstance(stream, LabeledDataset):
        proba = learner.prequential_many(stream)
        labels = stream.labels
    else:
        rows, labels = [], []
        for x in stream:
            d = learner.predict_proba(x)
            row = [0.0, 0.0]
            row[FRAUD], row[LEGAL] = d.p_fraud, d.p_legal
            rows.append(row)
            labels.append(x.label)
            learner.update(x)
        proba = np.array(rows, dtype=np.float64).reshape(-1, 2)
        labels = np.array(labels, dtype=np.int8)
    elapsed = time.perf_counter() - t0
    return prequential_snapshots(proba, labels, w, report_every, threshold,
                                 name or learner.algorithm, learner.params(), elapsed)


def prequential_snapshots(proba: np.ndarray, labels: np.ndarray, w: CostParams,
                          report_every: int, threshold: float, name: str, params: dict,
                          elapsed: float) -> list[EvalReport]:
    n = len(labels)
    pred = verdicts(proba, threshold)
    t = labels == FRAUD
    p = pred == FRAUD
    c_tp = np.cumsum(t & p)
    c_fp = np.cumsum(~t & p)
    c_tn = np.cumsum(~t & ~p)
    c_fn = np.cumsum(t & ~p)
    c_se = np.cumsum(_squared_errors(proba, labels)) if n else np.zeros(0)
    marks = list(range(report_every, n + 1, report_every))
    if not marks or marks[-1] != n:
        marks.append(n)
    out = []
    for m in marks:
        if m == 0:
            cm, r = ConfusionMatrix(), 0.0
        else:
            i = m - 1
            cm = ConfusionMatrix(int(c_tp[i]), int(c_fp[i]), int(c_tn[i]), int(c_fn[i]))
            r = math.sqrt(float(c_se[i]) / m)
        out.append(EvalReport(
            classifier=name, params=params,
            protocol={"kind": "prequential", "report_every": report_every,
                      "threshold": threshold},
            confusion=cm, rmse=r, cost_weights=w,
            wall_clock_s=elapsed * m / n if n else 0.0,
            instances_per_s=n / elapsed if elapsed > 0 else math.inf,
        ))
    return out


@dataclass
class ComparisonTable:
    rows: list[EvalReport]
    k: int
    seed: int
    cost_weights: CostParams

    def to_dict(self, timing: bool = False) -> dict:
        return {
            "protocol": {"kind": "kfold", "k": self.k, "seed": self.seed},
            "cost_weights": asdict(self.cost_weights),
            "rows": [r.to_dict(timing=timing) for r in self.rows],
        }

    def to_text(self) -> str:
        head = ("classifier", "cost", "det.rate", "accuracy", "precision", "f1", "rmse",
                "tp", "fp", "tn", "fn")
        lines = [[r.classifier, f"{r.cost:g}", f"{r.detection_rate:.4f}", f"{r.accuracy:.4f}",
                  f"{r.precision:.4f}", f"{r.f1:.4f}", f"{r.rmse:.4f}",
                  str(r.confusion.tp), str(r.confusion.fp), str(r.confusion.tn),
                  str(r.confusion.fn)] for r in self.rows]
        widths = [max(len(h), *(len(l[i]) for l in lines)) if lines else len(h)
                  for i, h in enumerate(head)]
        fmt = lambda cells: "  ".join(  # noqa: E731
            c.ljust(wd) if i == 0 else c.rjust(wd) for i, (c, wd) in enumerate(zip(cells, widths)))
        out = [f"{self.k}-fold cross-validation, seed {self.seed}, "
               f"cost weights fn={self.cost_weights.w_fn:g} fp={self.cost_weights.w_fp:g}",
               fmt(head), fmt(["-" * wd for wd in widths])]
        out += [fmt(l) for l in lines]
        return "\n".join(out) + "\n"


def compare(configs: Sequence, ds: LabeledDataset, k: int = 10, seed: int = 0,
            w: CostParams = CostParams(), threshold: float = 0.5,
            shuffle_train: bool = False) -> ComparisonTable:
    """k-fold evaluate every config on identical folds; rows sorted by cost (stable)."""
    reports = [kfold_evaluate(c, ds, k, seed, w, threshold=threshold,
                              shuffle_train=shuffle_train) for c in configs]
    reports.sort(key=lambda r: r.cost)
    return ComparisonTable(reports, k, seed, w)
