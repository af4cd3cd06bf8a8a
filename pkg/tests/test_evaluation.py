import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _helpers import MIXED, random_dataset
from afdm.base import BatchModel, ClassDistribution, IncrementalLearner
from afdm.cli import CLASSIFIERS, build_config
from afdm.data import FRAUD, LEGAL, Attribute, DatasetSchema, FeatureVector, LabeledDataset
from afdm.evaluation import (ConfusionMatrix, CostParams, compare, cost, kfold_evaluate,
                             prequential_evaluate, rmse, rmse_arrays)
from afdm.naive_bayes import NaiveBayesUpdateable

BINARY = DatasetSchema((Attribute("t", "categorical", ("a", "b")),))


class AlwaysFraud(BatchModel):
    algorithm = "always_fraud"

    def fit(self, ds):
        return self

    def predict_proba(self, x):
        return ClassDistribution(1.0, 0.0)

    def params(self):
        return {}

    def get_state(self):
        return {}

    @classmethod
    def from_state(cls, schema, params, state):
        return cls()


class Majority(IncrementalLearner):
    """Predicts the majority label seen so far."""

    algorithm = "majority"

    def reset(self):
        self.counts = [0, 0]
        self._n_seen = 0

    def __init__(self, schema):
        super().__init__(schema)
        self.reset()

    def _update(self, x):
        self.counts[x.label] += 1

    def _predict(self, x):
        if self.counts[FRAUD] >= self.counts[LEGAL]:
            return ClassDistribution(1.0, 0.0)
        return ClassDistribution(0.0, 1.0)

    def params(self):
        return {}

    def get_state(self):
        return {"counts": self.counts}

    @classmethod
    def from_state(cls, schema, params, state):
        m = cls(schema)
        m.counts = list(state["counts"])
        return m


@pytest.mark.parametrize("cm,w,expected", [
    (ConfusionMatrix(tp=5, tn=7), CostParams(3, 4), 0.0),
    (ConfusionMatrix(fp=3, fn=2), CostParams(1, 1), 5.0),
    (ConfusionMatrix(fp=3, fn=2), CostParams(10, 1), 23.0),
])
def test_cost_examples(cm, w, expected):
    assert cost(cm, w) == expected


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_unit_cost_is_error_count(tp, fp, tn, fn):
    assert cost(ConfusionMatrix(tp, fp, tn, fn), CostParams(1, 1)) == fp + fn


def test_cost_weights_validated():
    with pytest.raises(ValueError):
        CostParams(-1, 1)


def test_rmse_examples():
    labels = [FRAUD, LEGAL, LEGAL, FRAUD]
    perfect = [(ClassDistribution(float(y == FRAUD), float(y == LEGAL)), y) for y in labels]
    assert rmse(perfect) == 0.0
    assert rmse([(ClassDistribution(0.5, 0.5), y) for y in labels]) == 0.5
    wrong = [(ClassDistribution(float(y == LEGAL), float(y == FRAUD)), y) for y in labels]
    assert rmse(wrong) == 1.0
    with pytest.raises(ValueError):
        rmse([])


@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=40))
def test_rmse_array_form_matches(pairs):
    dists = [(ClassDistribution(p, 1 - p), y) for p, y in pairs]
    proba = np.array([[1 - p, p] for p, _ in pairs])
    labels = np.array([y for _, y in pairs])
    assert rmse_arrays(proba, labels) == pytest.approx(rmse(dists), abs=1e-12)


def test_confusion_from_labels_and_rates():
    cm = ConfusionMatrix.from_labels([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert cm == ConfusionMatrix(tp=2, fp=1, tn=1, fn=1)
    assert cm.detection_rate == 2 / 3 and cm.precision == 2 / 3 and cm.accuracy == 3 / 5


@pytest.mark.parametrize("k", [2, 5, 10])
def test_always_fraud_kfold(k):
    rows = [FeatureVector((0,), FRAUD)] * 10 + [FeatureVector((1,), LEGAL)] * 90
    rep = kfold_evaluate(AlwaysFraud, LabeledDataset(BINARY, rows), k=k, seed=3)
    assert rep.confusion == ConfusionMatrix(tp=10, fp=90, tn=0, fn=0)
    assert rep.detection_rate == 1.0
    assert rep.cost == 90 * rep.cost_weights.w_fp


def test_leave_one_out_nb_hand_trace():
    rows = [FeatureVector((1,), FRAUD), FeatureVector((1,), FRAUD),
            FeatureVector((0,), LEGAL), FeatureVector((1,), LEGAL)]
    rep = kfold_evaluate(lambda: NaiveBayesUpdateable(BINARY), LabeledDataset(BINARY, rows), k=4)
    # held-out p(Fraud): 8/17, 8/17, 9/17, 27/35
    assert rep.confusion == ConfusionMatrix(tp=0, fp=2, tn=0, fn=2)
    assert rep.cost == 22.0
    expected = math.sqrt((3 * (9 / 17) ** 2 + (27 / 35) ** 2) / 4)
    assert rep.rmse == pytest.approx(expected, abs=1e-12)


def test_kfold_deterministic_and_pooled():
    ds = random_dataset(MIXED, 300, seed=1)
    a = kfold_evaluate(lambda: NaiveBayesUpdateable(MIXED), ds, k=10, seed=2)
    b = kfold_evaluate(lambda: NaiveBayesUpdateable(MIXED), ds, k=10, seed=2)
    assert a.to_dict(timing=False) == b.to_dict(timing=False)
    assert a.n_instances == len(ds)


def test_report_fields_come_from_the_confusion_matrix():
    ds = random_dataset(MIXED, 300, seed=2)
    d = kfold_evaluate(lambda: NaiveBayesUpdateable(MIXED), ds, k=5).to_dict()
    cm = ConfusionMatrix(**d["confusion"])
    assert d["accuracy"] == cm.accuracy
    assert d["detection_rate"] == cm.detection_rate
    assert d["precision"] == cm.precision
    assert d["cost"] == cost(cm, CostParams(**d["cost_weights"]))
    assert "wall_clock_s" not in kfold_evaluate(lambda: NaiveBayesUpdateable(MIXED), ds,
                                                k=5).to_dict(timing=False)


def test_prequential_single_instance_uses_untrained_model():
    x = FeatureVector((1,), LEGAL)
    (snap,) = prequential_evaluate(NaiveBayesUpdateable(BINARY), [x])
    assert snap.n_instances == 1
    # the untrained (0.5, 0.5) tie goes to Fraud
    assert snap.confusion == ConfusionMatrix(fp=1)
    assert snap.rmse == 0.5


def test_prequential_alternating_majority_trace():
    stream = [FeatureVector((0,), FRAUD if i % 2 == 0 else LEGAL) for i in range(1000)]
    snaps = prequential_evaluate(Majority(BINARY), stream, report_every=100)
    assert [s.n_instances for s in snaps] == list(range(100, 1001, 100))
    # Fraud holds the majority or a tie at every step, so every Fraud is caught
    # and every Legal is missed
    assert all(s.accuracy == 0.5 for s in snaps)
    assert snaps[-1].confusion == ConfusionMatrix(tp=500, fp=500)


def test_prequential_final_snapshot_covers_stream():
    ds = random_dataset(MIXED, 1234, seed=3)
    snaps = prequential_evaluate(NaiveBayesUpdateable(MIXED), ds, report_every=500)
    assert [s.n_instances for s in snaps] == [500, 1000, 1234]
    loop = prequential_evaluate(NaiveBayesUpdateable(MIXED), iter(ds.rows), report_every=500)
    assert [s.confusion for s in loop] == [s.confusion for s in snaps]


def _max_drawdown(accuracy, start):
    peak = -np.inf
    worst = 0.0
    for a in accuracy[start:]:
        peak = max(peak, a)
        worst = max(worst, peak - a)
    return worst


@pytest.mark.parametrize("shuffle", [False, True])
def test_nb_prequential_accuracy_does_not_sag(default_dataset, shuffle):
    ds = default_dataset
    if shuffle:
        ds = ds.subset(np.random.default_rng(0).permutation(len(ds)))
    snaps = prequential_evaluate(NaiveBayesUpdateable(ds.schema), ds, report_every=100)
    acc = [s.accuracy for s in snaps]
    assert _max_drawdown(acc, len(acc) // 20) <= 0.02


def test_compare_sorts_by_cost_and_shares_folds():
    ds = random_dataset(MIXED, 300, seed=4)
    configs = [build_config(n, MIXED, seed=0, bag_size=3) for n in CLASSIFIERS]
    table = compare(configs, ds, k=5, seed=1)
    costs = [r.cost for r in table.rows]
    assert costs == sorted(costs)
    assert {r.classifier for r in table.rows} == set(CLASSIFIERS)
    assert all(r.protocol["seed"] == 1 and r.n_instances == len(ds) for r in table.rows)


def test_compare_identical_configs_identical_rows():
    ds = random_dataset(MIXED, 200, seed=5)
    cfg = build_config("nb", MIXED)
    a, b = compare([cfg, cfg], ds, k=4).rows
    assert a.to_dict(timing=False) == b.to_dict(timing=False)


def test_unit_weights_rank_by_misclassifications():
    ds = random_dataset(MIXED, 300, seed=6)
    configs = [build_config(n, MIXED, bag_size=3) for n in CLASSIFIERS]
    table = compare(configs, ds, k=5, w=CostParams(1, 1))
    errors = [r.confusion.fp + r.confusion.fn for r in table.rows]
    assert errors == sorted(errors)
    assert all(r.cost == r.confusion.fp + r.confusion.fn for r in table.rows)
