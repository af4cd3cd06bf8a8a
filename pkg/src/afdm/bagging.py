"""Online (Poisson) bagging for incremental learners and bootstrap bagging for batch models."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ._backend import get_kernels
from .base import BatchModel, ClassDistribution, ContractError, IncrementalLearner
from .data import FRAUD, LEGAL, LabeledDataset
from .naive_bayes import NaiveBayesUpdateable


def _mean_distribution(dists) -> ClassDistribution:
    # same summation order as the compiled ensemble kernel; one member passes through
    a = 0.0
    b = 0.0
    for d in dists:
        a += d.p_legal
        b += d.p_fraud
    m = len(dists)
    if m == 1:
        return dists[0]
    a /= m
    b /= m
    s = a + b
    return ClassDistribution(b / s, a / s)


class OnlineBagging(IncrementalLearner):
    """Ensemble of ``n_members`` copies of an incremental learner.

    Each instance is shown to member ``i`` ``k ~ Poisson(1)`` times, where ``k``
    is a counter-based draw keyed by ``(seed, i, stream position)``. The stream
    position defaults to the number of instances the ensemble has seen and can
    be passed explicitly to :meth:`update`. Predictions average the members'
    distributions.

    ``replication`` overrides the draw with a callable ``(member, position) -> k``.
    """

    algorithm = "online_bagging"

    def __init__(self, base: IncrementalLearner, n_members: int = 10, seed: int = 0,
                 replication: Callable[[int, int], int] | None = None):
        super().__init__(base.schema)
        if n_members < 1:
            raise ValueError("n_members must be >= 1")
        self.base = base.clone()
        self.n_members = int(n_members)
        self.seed = int(seed)
        self.replication = replication
        self.members = [base.clone() for _ in range(self.n_members)]
        self._kernels = get_kernels(getattr(base, "backend", None))

    def params(self) -> dict:
        return {"n_members": self.n_members, "seed": self.seed,
                "base": {"algorithm": self.base.algorithm, "params": self.base.params()}}

    def clone(self) -> "OnlineBagging":
        return OnlineBagging(self.base, self.n_members, self.seed, self.replication)

    def reset(self) -> None:
        for m in self.members:
            m.reset()
        self._n_seen = 0

    def draw(self, member: int, position: int) -> int:
        if self.replication is not None:
            return self.replication(member, position)
        return self._kernels.poisson1(self.seed, member, position)

    def update(self, x, position: int | None = None) -> None:
        if x.label not in (LEGAL, FRAUD):
            raise ContractError("update needs a labeled feature vector")
        self._check(x)
        self._apply(x, self._n_seen if position is None else position)
        self._n_seen += 1

    def _update(self, x) -> None:
        self._apply(x, self._n_seen)

    def _apply(self, x, position: int) -> None:
        for i, m in enumerate(self.members):
            for _ in range(self.draw(i, position)):
                m.update(x)

    def _predict(self, x) -> ClassDistribution:
        return _mean_distribution([m.predict_proba(x) for m in self.members])

    # fused NB fast paths; identical draws and arithmetic to the generic loop

    def _fused(self) -> bool:
        return (self.replication is None
                and all(isinstance(m, NaiveBayesUpdateable) for m in self.members)
                and all(m.backend == self._kernels.BACKEND for m in self.members))

    def update_many(self, ds: LabeledDataset) -> None:
        if not self._fused():
            return super().update_many(ds)
        cat, num, labels = ds.arrays()
        self._kernels.bagged_update_many([m.core for m in self.members], self.seed,
                                         self._n_seen, cat, num, labels)
        self._n_seen += len(ds)

    def predict_many(self, ds) -> np.ndarray:
        if not (isinstance(ds, LabeledDataset) and self._fused()):
            return super().predict_many(ds)
        cat, num, _ = ds.arrays()
        return self._kernels.bagged_proba_many([m.core for m in self.members], cat, num)

    def prequential_many(self, ds: LabeledDataset) -> np.ndarray:
        if not self._fused():
            return super().prequential_many(ds)
        cat, num, labels = ds.arrays()
        out = self._kernels.bagged_prequential([m.core for m in self.members], self.seed,
                                               self._n_seen, cat, num, labels)
        self._n_seen += len(ds)
        return out

    def get_state(self) -> dict:
        return {"n_seen": self._n_seen,
                "members": [m.get_state() for m in self.members]}

    @classmethod
    def from_state(cls, schema, params, state, base_cls=None) -> "OnlineBagging":
        base = base_cls(schema, **params["base"]["params"])
        ens = cls(base, params["n_members"], params["seed"])
        ens.members = [base_cls.from_state(schema, params["base"]["params"], s)
                       for s in state["members"]]
        ens._n_seen = int(state["n_seen"])
        return ens


class BootstrapBagging(BatchModel):
    """``n_members`` batch models, each fit on an N-row with-replacement resample.

    Member ``i`` draws its sample from ``PCG64`` seeded with ``[seed, i]``.
    ``sampler`` overrides resampling with a callable ``(rng, n) -> indices``.
    """

    algorithm = "bootstrap_bagging"

    def __init__(self, factory: Callable[[], BatchModel], n_members: int = 10, seed: int = 0,
                 sampler: Callable | None = None):
        if n_members < 1:
            raise ValueError("n_members must be >= 1")
        self.factory = factory
        self.n_members = int(n_members)
        self.seed = int(seed)
        self.sampler = sampler
        self.members: list[BatchModel] = []
        self.schema = None

    def sample_indices(self, member: int, n: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64([self.seed, member]))
        if self.sampler is not None:
            return np.asarray(self.sampler(rng, n), dtype=np.int64)
        return rng.integers(0, n, size=n)

    def fit(self, ds: LabeledDataset) -> "BootstrapBagging":
        if len(ds) == 0:
            raise ValueError("cannot bag an empty dataset")
        self.schema = ds.schema
        self.n_seen = len(ds)
        self.members = [self.factory().fit(ds.subset(self.sample_indices(i, len(ds))))
                        for i in range(self.n_members)]
        return self

    def predict_proba(self, x) -> ClassDistribution:
        return _mean_distribution([m.predict_proba(x) for m in self.members])

    def predict_many(self, ds) -> np.ndarray:
        probs = [m.predict_many(ds) for m in self.members]
        a = np.zeros(len(probs[0]))
        b = np.zeros(len(probs[0]))
        for p in probs:
            a += p[:, LEGAL]
            b += p[:, FRAUD]
        if len(probs) == 1:
            return probs[0]
        a /= len(probs)
        b /= len(probs)
        s = a + b
        out = np.empty((len(a), 2))
        out[:, LEGAL] = a / s
        out[:, FRAUD] = b / s
        return out

    def params(self) -> dict:
        base = self.members[0] if self.members else self.factory()
        return {"n_members": self.n_members, "seed": self.seed,
                "base": {"algorithm": base.algorithm, "params": base.params()}}

    def get_state(self) -> dict:
        return {"members": [m.get_state() for m in self.members]}

    @classmethod
    def from_state(cls, schema, params, state, base_cls=None) -> "BootstrapBagging":
        bp = params["base"]["params"]
        ens = cls(lambda: base_cls(**bp), params["n_members"], params["seed"])
        ens.schema = schema
        ens.members = [base_cls.from_state(schema, bp, s) for s in state["members"]]
        return ens
