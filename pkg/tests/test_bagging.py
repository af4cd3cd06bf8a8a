import math

import numpy as np
import pytest

from _helpers import MIXED, probes, random_dataset
from afdm._backend import get_kernels
from afdm.bagging import BootstrapBagging, OnlineBagging, _mean_distribution
from afdm.base import ClassDistribution
from afdm.baselines import BatchTree
from afdm.hoeffding import HoeffdingTree
from afdm.naive_bayes import NaiveBayesUpdateable


def test_poisson_zero_share(backend):
    k = get_kernels(backend)
    draws = np.array([k.poisson1(7, m, p) for m in range(10) for p in range(10_000)])
    assert abs(np.mean(draws == 0) - math.exp(-1)) <= 0.01
    assert abs(draws.mean() - 1.0) <= 0.02


def test_poisson_pmf_matches(backend):
    k = get_kernels(backend)
    draws = np.array([k.poisson1(3, 0, p) for p in range(100_000)])
    for j in range(4):
        pmf = math.exp(-1) / math.factorial(j)
        assert abs(np.mean(draws == j) - pmf) <= 0.01


def test_draws_identical_across_backends():
    from afdm._backend import available_backends
    kernels = [get_kernels(b) for b in available_backends()]
    for m in range(5):
        for p in range(2000):
            assert len({k.poisson1(11, m, p) for k in kernels}) == 1


def test_single_member_with_unit_replication_equals_learner():
    ds = random_dataset(MIXED, 300, seed=1)
    ens = OnlineBagging(NaiveBayesUpdateable(MIXED), 1, replication=lambda m, p: 1)
    single = NaiveBayesUpdateable(MIXED)
    ens.update_many(ds)
    single.update_many(ds)
    for x in probes(MIXED, 100):
        assert ens.predict_proba(x) == single.predict_proba(x)


def test_mean_example():
    d = _mean_distribution([ClassDistribution(0.8, 0.2), ClassDistribution(0.4, 0.6)])
    assert (d.p_fraud, d.p_legal) == pytest.approx((0.6, 0.4), abs=1e-15)


def test_identical_members_give_member_output():
    d = ClassDistribution(0.3, 0.7)
    assert _mean_distribution([d] * 10) == pytest.approx(d, abs=1e-15)


def test_outputs_are_distributions(backend):
    ens = OnlineBagging(NaiveBayesUpdateable(MIXED, backend=backend), 10, seed=2)
    ens.update_many(random_dataset(MIXED, 500, seed=2))
    proba = ens.predict_many(probes(MIXED, 10_000))
    assert np.all(proba >= 0)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-12)


def test_same_seed_same_members(backend):
    ds = random_dataset(MIXED, 400, seed=3)
    states = []
    for _ in range(2):
        ens = OnlineBagging(NaiveBayesUpdateable(MIXED, backend=backend), 10, seed=5)
        ens.update_many(ds)
        states.append(ens.get_state())
    assert states[0] == states[1]
    other = OnlineBagging(NaiveBayesUpdateable(MIXED, backend=backend), 10, seed=6)
    other.update_many(ds)
    assert other.get_state() != states[0]


def test_fused_path_matches_generic_loop(backend):
    ds = random_dataset(MIXED, 400, seed=4)
    fused = OnlineBagging(NaiveBayesUpdateable(MIXED, backend=backend), 10, seed=9)
    k = get_kernels(backend)
    generic = OnlineBagging(NaiveBayesUpdateable(MIXED, backend=backend), 10, seed=9,
                            replication=lambda m, p: k.poisson1(9, m, p))
    a = fused.prequential_many(ds)
    b = np.array([[d.p_legal, d.p_fraud] for d in _preq(generic, ds)])
    assert np.array_equal(a, b)
    assert fused.get_state() == generic.get_state()


def _preq(learner, ds):
    out = []
    for x in ds:
        out.append(learner.predict_proba(x))
        learner.update(x)
    return out


def test_position_keyed_draws_make_order_irrelevant(backend):
    ds = random_dataset(MIXED, 600, seed=5)
    ref = OnlineBagging(NaiveBayesUpdateable(MIXED, backend=backend), 10, seed=1)
    ref.update_many(ds)
    ps = probes(MIXED, 200)
    expected = ref.predict_many(ps)
    for perm_seed in range(3):
        order = np.random.default_rng(perm_seed).permutation(len(ds))
        ens = OnlineBagging(NaiveBayesUpdateable(MIXED, backend=backend), 10, seed=1)
        for i in order:
            ens.update(ds.rows[i], position=int(i))
        assert np.allclose(ens.predict_many(ps), expected, atol=1e-9, rtol=0)


def test_wraps_other_learners():
    ds = random_dataset(MIXED, 500, seed=6)
    ens = OnlineBagging(HoeffdingTree(MIXED, grace_period=50), 4, seed=0)
    ens.update_many(ds)
    assert ens.n_seen == 500
    assert all(0 < m.n_seen for m in ens.members)


def test_bootstrap_unique_fraction():
    bag = BootstrapBagging(BatchTree, 5, seed=0)
    for m in range(5):
        idx = bag.sample_indices(m, 10_000)
        assert abs(len(np.unique(idx)) / 10_000 - (1 - math.exp(-1))) <= 0.02


def test_bootstrap_identity_sampler_equals_plain_model():
    ds = random_dataset(MIXED, 300, seed=7)
    bag = BootstrapBagging(BatchTree, 1, sampler=lambda rng, n: np.arange(n)).fit(ds)
    plain = BatchTree().fit(ds)
    ps = probes(MIXED, 100)
    assert np.array_equal(bag.predict_many(ps), plain.predict_many(ps))


def test_bootstrap_deterministic():
    a = BootstrapBagging(BatchTree, 3, seed=4)
    b = BootstrapBagging(BatchTree, 3, seed=4)
    for m in range(3):
        assert np.array_equal(a.sample_indices(m, 500), b.sample_indices(m, 500))
    assert not np.array_equal(a.sample_indices(0, 500), a.sample_indices(1, 500))


def test_bootstrap_empty_dataset():
    with pytest.raises(ValueError):
        BootstrapBagging(BatchTree).fit(random_dataset(MIXED, 0))


def test_member_count_validated():
    with pytest.raises(ValueError):
        OnlineBagging(NaiveBayesUpdateable(MIXED), 0)
    with pytest.raises(ValueError):
        BootstrapBagging(BatchTree, 0)
