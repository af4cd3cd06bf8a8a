"""Updateable Naive Bayes: Laplace-smoothed categorical counts and Welford Gaussians."""
from __future__ import annotations

import numpy as np

from ._backend import get_kernels
from .base import ClassDistribution, IncrementalLearner
from .data import FRAUD, LEGAL, DatasetSchema, FeatureVector, LabeledDataset


class NaiveBayesUpdateable(IncrementalLearner):
    """Two-class Naive Bayes whose sufficient statistics grow one instance at a time.

    Categorical likelihoods are ``(count + alpha) / (class_count + alpha * |values|)``;
    numeric attributes use a Gaussian with the running sample variance, floored
    at ``var_floor``. A numeric attribute only contributes once both classes
    have observed it. Scoring happens in log space.

    Parameters
    ----------
    schema : DatasetSchema
    alpha : float
        Laplace constant for the class prior and categorical likelihoods.
    var_floor : float
        Minimum Gaussian variance.
    backend : str, optional
        ``"cython"`` or ``"python"``; defaults to the backend chosen at import.
    """

    algorithm = "nb_updateable"

    def __init__(self, schema: DatasetSchema, alpha: float = 1.0, var_floor: float = 1e-6,
                 backend: str | None = None):
        super().__init__(schema)
        if alpha < 0 or var_floor <= 0:
            raise ValueError("alpha must be >= 0 and var_floor > 0")
        self.alpha = float(alpha)
        self.var_floor = float(var_floor)
        self._kernels = get_kernels(backend)
        self._cat_pos = schema.cat_positions
        self._num_pos = schema.num_positions
        self.core = self._kernels.NBCore(schema.cat_sizes, len(self._num_pos),
                                         self.alpha, self.var_floor)

    @property
    def backend(self) -> str:
        return self._kernels.BACKEND

    def params(self) -> dict:
        return {"alpha": self.alpha, "var_floor": self.var_floor}

    def clone(self) -> "NaiveBayesUpdateable":
        return NaiveBayesUpdateable(self.schema, self.alpha, self.var_floor,
                                    backend=self.backend)

    def reset(self) -> None:
        self.core.reset()

    @property
    def n_seen(self) -> int:
        return int(self.core.n_seen)

    def _split(self, x: FeatureVector):
        v = x.values
        return [v[i] for i in self._cat_pos], [v[i] for i in self._num_pos]

    def _predict(self, x: FeatureVector) -> ClassDistribution:
        cat, num = self._split(x)
        p_legal, p_fraud = self.core.proba(cat, num)
        return ClassDistribution(p_fraud, p_legal)

    def _update(self, x: FeatureVector) -> None:
        cat, num = self._split(x)
        self.core.update(cat, num, x.label, 1)

    # bulk paths: same arithmetic as the per-instance calls, one kernel call per batch

    def update_many(self, ds: LabeledDataset) -> None:
        self._check_schema(ds)
        cat, num, labels = ds.arrays()
        self.core.update_many(cat, num, labels)

    def predict_many(self, ds) -> np.ndarray:
        if not isinstance(ds, LabeledDataset):
            return super().predict_many(ds)
        self._check_schema(ds)
        cat, num, _ = ds.arrays()
        return self.core.proba_many(cat, num)

    def prequential_many(self, ds: LabeledDataset) -> np.ndarray:
        self._check_schema(ds)
        cat, num, labels = ds.arrays()
        return self.core.prequential(cat, num, labels)

    def _check_schema(self, ds: LabeledDataset) -> None:
        if ds.schema != self.schema:
            raise ValueError("dataset schema differs from the learner's schema")

    # statistics views, keyed by class label

    @property
    def class_counts(self) -> dict[int, int]:
        cc = self.core.get_state()["class_counts"]
        return {LEGAL: cc[LEGAL], FRAUD: cc[FRAUD]}

    def moments(self, attribute: str, label: int) -> tuple[int, float, float]:
        """``(count, mean, m2)`` of a numeric attribute within one class."""
        j = [self.schema.attributes[i].name for i in self._num_pos].index(attribute)
        st = self.core.get_state()
        return st["num_count"][label][j], st["num_mean"][label][j], st["num_m2"][label][j]

    def get_state(self) -> dict:
        return self.core.get_state()

    @classmethod
    def from_state(cls, schema, params, state, backend=None) -> "NaiveBayesUpdateable":
        nb = cls(schema, backend=backend, **params)
        nb.core.set_state(state)
        return nb
