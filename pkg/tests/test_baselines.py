import numpy as np
import pytest

from _helpers import MIXED, NUM1, TYPE_ONLY, probes, random_dataset
from afdm.baselines import BatchTree, LogisticRegression, logistic_grad, logistic_loss, sigmoid
from afdm.data import FRAUD, LEGAL, Attribute, DatasetSchema, FeatureVector, LabeledDataset

BINARY2 = DatasetSchema((Attribute("a", "categorical", ("0", "1")),
                         Attribute("b", "categorical", ("0", "1"))))


def _accuracy(model, ds):
    return float(np.mean([model.classify(x) == x.label for x in ds]))


def test_tree_single_separating_attribute():
    rows = [FeatureVector((t,), FRAUD if t == 4 else LEGAL) for t in [0, 1, 2, 3, 4] * 6]
    tree = BatchTree().fit(LabeledDataset(TYPE_ONLY, rows))
    assert tree.depth == 1
    assert _accuracy(tree, rows) == 1.0


def test_tree_pure_labels_single_leaf():
    tree = BatchTree().fit(random_dataset(MIXED, 50, seed=1, fraud_rate=0.0))
    assert tree.depth == 0 and tree.n_leaves == 1


def test_tree_xor_depth_two():
    rows = [FeatureVector((a, b), FRAUD if a != b else LEGAL) for a in (0, 1) for b in (0, 1)]
    tree = BatchTree(min_leaf=1).fit(LabeledDataset(BINARY2, rows))
    # both root candidates have zero gain, so the earlier attribute wins the tie
    assert tree.root.attribute == 0
    assert tree.depth == 2
    assert _accuracy(tree, rows) == 1.0


def test_tree_numeric_threshold_is_midpoint():
    rows = [FeatureVector((v,), FRAUD if v > 4 else LEGAL) for v in (1.0, 2.0, 3.0, 4.0, 6.0, 7.0, 8.0)]
    tree = BatchTree(min_leaf=1).fit(LabeledDataset(NUM1, rows))
    assert tree.root.threshold == 5.0


def test_tree_leaf_smoothing():
    rows = [FeatureVector((0,), FRAUD)] * 3 + [FeatureVector((0,), LEGAL)]
    tree = BatchTree().fit(LabeledDataset(TYPE_ONLY, rows))
    d = tree.predict_proba(FeatureVector((0,)))
    assert (d.p_fraud, d.p_legal) == pytest.approx((4 / 6, 2 / 6), abs=1e-15)


def test_tree_row_order_invariant():
    ds = random_dataset(MIXED, 400, seed=2, integer_numerics=True)
    ref = BatchTree().fit(ds).get_state()
    for s in range(3):
        perm = np.random.default_rng(s).permutation(len(ds))
        assert BatchTree().fit(ds.subset(perm)).get_state() == ref


def test_tree_respects_depth_cap_and_min_leaf():
    ds = random_dataset(MIXED, 500, seed=3)
    assert BatchTree(max_depth=2).fit(ds).depth <= 2
    with pytest.raises(ValueError):
        BatchTree(min_leaf=0)


def test_empty_dataset_rejected():
    empty = random_dataset(MIXED, 0)
    with pytest.raises(ValueError):
        BatchTree().fit(empty)
    with pytest.raises(ValueError):
        LogisticRegression().fit(empty)


def test_sigmoid_zero_and_extremes():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(1000.0) == 1.0 and sigmoid(-1000.0) == 0.0


def test_logistic_separable_1d():
    xs = [-3.0, -2.5, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 2.5, 3.0]
    rows = [FeatureVector((x,), FRAUD if x > 0 else LEGAL) for x in xs]
    model = LogisticRegression().fit(LabeledDataset(NUM1, rows))
    w, b = model.weights
    # closed-form sign check: the decision boundary sits between the classes
    boundary = model.mean[0] - b / w * model.scale[0]
    assert w > 0 and -0.5 < boundary < 0.5
    assert _accuracy(model, rows) == 1.0


def test_logistic_l2_shrinks_weights():
    ds = random_dataset(MIXED, 300, seed=4)
    norms = [np.linalg.norm(LogisticRegression(l2=l2).fit(ds).weights[:-1])
             for l2 in (0.01, 1.0, 100.0)]
    assert norms[0] > norms[1] > norms[2]
    assert norms[2] < 0.05


def test_logistic_strong_l2_predicts_prior_via_bias():
    ds = random_dataset(MIXED, 400, seed=5)
    model = LogisticRegression(l2=1e6, epochs=2000).fit(ds)
    prior = float(ds.labels.mean())
    for x in probes(MIXED, 20):
        assert model.predict_proba(x).p_fraud == pytest.approx(prior, abs=0.01)


def test_logistic_zero_epochs_is_uniform():
    model = LogisticRegression(epochs=0).fit(random_dataset(MIXED, 50, seed=6))
    for x in probes(MIXED, 20):
        assert model.predict_proba(x) == (0.5, 0.5)


def test_untrained_models_are_uniform():
    x = FeatureVector((0, 1.0, 1, 1.0))
    assert BatchTree().predict_proba(x) == (0.5, 0.5)
    assert LogisticRegression().predict_proba(x) == (0.5, 0.5)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(50):
        X = np.hstack([rng.normal(size=(20, 4)), np.ones((20, 1))])
        y = (rng.random(20) < 0.4).astype(float)
        w = rng.normal(size=5)
        l2 = float(rng.uniform(0, 1))
        fd = np.array([(logistic_loss(w + h * e, X, y, l2) - logistic_loss(w - h * e, X, y, l2)) / (2 * h)
                       for e in np.eye(5)])
        g = logistic_grad(w, X, y, l2)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), np.linalg.norm(fd))


def test_vector_and_scalar_predictions_agree():
    ds = random_dataset(MIXED, 300, seed=7)
    for model in (BatchTree().fit(ds), LogisticRegression().fit(ds)):
        ps = random_dataset(MIXED, 50, seed=9)
        bulk = model.predict_many(ps)
        for row, x in zip(bulk, ps):
            d = model.predict_proba(x)
            assert (row[FRAUD], row[LEGAL]) == pytest.approx((d.p_fraud, d.p_legal), abs=1e-12)


def test_prediction_is_pure():
    ds = random_dataset(MIXED, 300, seed=8)
    for model in (BatchTree().fit(ds), LogisticRegression().fit(ds)):
        before = model.get_state()
        model.predict_many(probes(MIXED, 50))
        assert model.get_state() == before
