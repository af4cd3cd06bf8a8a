import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _helpers import MIXED, TYPE_ONLY, batch_nb, probes, random_dataset
from afdm.data import FRAUD, LEGAL, Attribute, DatasetSchema, FeatureVector, LabeledDataset
from afdm.naive_bayes import NaiveBayesUpdateable


BINARY = DatasetSchema((Attribute("t", "categorical", ("a", "b")),))


def test_welford_example(backend):
    schema = DatasetSchema((Attribute("v", "numeric"),))
    nb = NaiveBayesUpdateable(schema, backend=backend)
    for v in (2.0, 4.0, 6.0):
        nb.update(FeatureVector((v,), FRAUD))
    count, mean, m2 = nb.moments("v", FRAUD)
    assert (count, mean) == (3, 4.0)
    assert m2 / (count - 1) == pytest.approx(4.0, abs=1e-12)


def test_single_update_has_zero_m2(backend):
    nb = NaiveBayesUpdateable(DatasetSchema((Attribute("v", "numeric"),)), backend=backend)
    nb.update(FeatureVector((3.5,), LEGAL))
    assert nb.moments("v", LEGAL) == (1, 3.5, 0.0)


def test_categorical_counts_and_posterior(backend):
    nb = NaiveBayesUpdateable(BINARY, backend=backend)
    for x in [FeatureVector((1,), FRAUD), FeatureVector((0,), LEGAL), FeatureVector((0,), LEGAL)]:
        nb.update(x)
    assert nb.get_state()["cat_counts"][FRAUD][0] == [0, 1]
    assert nb.class_counts == {FRAUD: 1, LEGAL: 2}
    expected = (2 / 5 * 2 / 3) / (2 / 5 * 2 / 3 + 3 / 5 * 1 / 4)
    assert expected == pytest.approx(0.64, abs=1e-12)
    assert nb.predict_proba(FeatureVector((1,))).p_fraud == pytest.approx(0.64, abs=1e-9)


def test_update_raises_own_label_probability(backend):
    x = FeatureVector((1, 0.3, 0, -1.2), FRAUD)
    nb = NaiveBayesUpdateable(MIXED, backend=backend)
    before = nb.predict_proba(x).p_fraud
    nb.update(x)
    assert nb.predict_proba(x).p_fraud > before


def test_incremental_matches_batch_oracle(backend):
    ds = random_dataset(MIXED, 400, seed=21)
    nb = NaiveBayesUpdateable(MIXED, backend=backend)
    for x in ds:
        nb.update(x)
    for x in probes(MIXED, 100, seed=5):
        assert nb.predict_proba(x).p_fraud == pytest.approx(batch_nb(MIXED, ds.rows, x), abs=1e-9)


def test_numeric_skipped_until_both_classes_seen(backend):
    schema = DatasetSchema((Attribute("v", "numeric"),))
    nb = NaiveBayesUpdateable(schema, backend=backend)
    nb.update(FeatureVector((10.0,), FRAUD))
    nb.update(FeatureVector((12.0,), FRAUD))
    # only the class prior speaks: (2+1)/(2+2)
    assert nb.predict_proba(FeatureVector((-50.0,))).p_fraud == pytest.approx(0.75, abs=1e-12)


def test_doubling_with_alpha_zero_is_invariant(backend):
    schema = DatasetSchema((TYPE_ONLY.attributes[0], Attribute("flag", "categorical", ("n", "y"))))
    rows = random_dataset(schema, 200, seed=3).rows
    once = NaiveBayesUpdateable(schema, alpha=0.0, backend=backend)
    twice = NaiveBayesUpdateable(schema, alpha=0.0, backend=backend)
    for x in rows:
        once.update(x)
        twice.update(x)
        twice.update(x)
    for t in range(5):
        for f in range(2):
            x = FeatureVector((t, f))
            a, b = once.predict_proba(x), twice.predict_proba(x)
            assert a.p_fraud == pytest.approx(b.p_fraud, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.floats(-1e300, 1e300), st.integers(0, 1),
                          st.floats(-1e6, 1e6), st.integers(0, 1)), min_size=0, max_size=30),
       st.tuples(st.integers(0, 2), st.floats(-1e300, 1e300), st.integers(0, 1),
                 st.floats(-1e300, 1e300)))
def test_scores_always_finite(rows, probe):
    nb = NaiveBayesUpdateable(MIXED)
    for c, x, f, y, label in rows:
        nb.update(FeatureVector((c, x, f, y), label))
    d = nb.predict_proba(FeatureVector(probe))
    assert math.isfinite(d.p_fraud) and math.isfinite(d.p_legal)
    assert d.p_fraud + d.p_legal == pytest.approx(1.0, abs=1e-9)


def test_state_invariants(backend):
    nb = NaiveBayesUpdateable(MIXED, backend=backend)
    nb.update_many(random_dataset(MIXED, 300, seed=13))
    s = nb.get_state()
    for c in (LEGAL, FRAUD):
        for table in s["cat_counts"][c]:
            assert sum(table) == s["class_counts"][c]
        for count, m2 in zip(s["num_count"][c], s["num_m2"][c]):
            assert count <= s["class_counts"][c] and m2 >= 0


def test_bulk_update_equals_loop(backend):
    ds = random_dataset(MIXED, 300, seed=17)
    a = NaiveBayesUpdateable(MIXED, backend=backend)
    b = NaiveBayesUpdateable(MIXED, backend=backend)
    a.update_many(ds)
    for x in ds:
        b.update(x)
    assert a.get_state() == b.get_state()
    pa = a.predict_many(ds)
    pb = np.array([[b.predict_proba(x).p_legal, b.predict_proba(x).p_fraud] for x in ds])
    assert np.array_equal(pa, pb)


def test_rejects_other_schema(backend):
    nb = NaiveBayesUpdateable(MIXED, backend=backend)
    with pytest.raises(ValueError):
        nb.update_many(LabeledDataset(TYPE_ONLY, [FeatureVector((0,), FRAUD)]))


def test_parameter_validation():
    with pytest.raises(ValueError):
        NaiveBayesUpdateable(MIXED, alpha=-1)
    with pytest.raises(ValueError):
        NaiveBayesUpdateable(MIXED, var_floor=0)
