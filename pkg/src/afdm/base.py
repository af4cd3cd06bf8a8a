"""The incremental-learner contract shared by every streaming classifier."""
from __future__ import annotations

import abc
from typing import Iterable, NamedTuple

import numpy as np

from .data import FRAUD, LEGAL, DatasetSchema, FeatureVector, LabeledDataset, check_vector

TIE_TOLERANCE = 1e-12


class ContractError(ValueError):
    """Raised when a learner is called with input that breaks its contract."""


class ClassDistribution(NamedTuple):
    p_fraud: float
    p_legal: float

    @classmethod
    def from_row(cls, row) -> "ClassDistribution":
        return cls(float(row[FRAUD]), float(row[LEGAL]))


def classify(dist: ClassDistribution) -> int:
    """Argmax label; exact ties go to Fraud, the more expensive class to miss."""
    if abs(dist.p_fraud - dist.p_legal) <= TIE_TOLERANCE:
        return FRAUD
    return FRAUD if dist.p_fraud > dist.p_legal else LEGAL


def verdict(dist: ClassDistribution, threshold: float = 0.5) -> int:
    """Label at a decision threshold on p(Fraud).

    At 0.5 this is :func:`classify`. Otherwise Fraud when ``p_fraud`` reaches
    the threshold (within 1e-12); a threshold of 1.0 or more is strict, so it
    never flags anything.
    """
    if threshold == 0.5:
        return classify(dist)
    if threshold >= 1.0:
        return FRAUD if dist.p_fraud > threshold else LEGAL
    return FRAUD if dist.p_fraud >= threshold - TIE_TOLERANCE else LEGAL


def verdicts(proba: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Vectorized :func:`verdict` / :func:`classify` over an ``(n, 2)`` probability array."""
    pf = proba[:, FRAUD]
    if threshold == 0.5:
        fraud = (np.abs(pf - proba[:, LEGAL]) <= TIE_TOLERANCE) | (pf > proba[:, LEGAL])
    elif threshold >= 1.0:
        fraud = pf > threshold
    else:
        fraud = pf >= threshold - TIE_TOLERANCE
    return np.where(fraud, FRAUD, LEGAL).astype(np.int8)


class Model(abc.ABC):
    """Anything that turns feature vectors into class distributions."""

    algorithm: str = ""
    schema: DatasetSchema

    @abc.abstractmethod
    def predict_proba(self, x: FeatureVector) -> ClassDistribution: ...

    def classify(self, x: FeatureVector) -> int:
        return classify(self.predict_proba(x))

    def predict_many(self, ds: LabeledDataset | Iterable[FeatureVector]) -> np.ndarray:
        """Probabilities for many rows as an ``(n, 2)`` array indexed by class."""
        rows = list(ds)
        out = np.empty((len(rows), 2))
        for i, x in enumerate(rows):
            d = self.predict_proba(x)
            out[i, FRAUD] = d.p_fraud
            out[i, LEGAL] = d.p_legal
        return out

    @abc.abstractmethod
    def params(self) -> dict: ...

    @abc.abstractmethod
    def get_state(self) -> dict: ...

    @classmethod
    @abc.abstractmethod
    def from_state(cls, schema: DatasetSchema, params: dict, state: dict) -> "Model": ...


class IncrementalLearner(Model):
    """Base class for learners updated one labeled instance at a time.

    Subclasses implement ``_predict`` and ``_update``; input validation and
    the instance counter live here.
    """

    def __init__(self, schema: DatasetSchema):
        self.schema = schema
        self._n_seen = 0

    @property
    def n_seen(self) -> int:
        """Number of update calls applied since construction or the last reset."""
        return self._n_seen

    def _check(self, x: FeatureVector) -> None:
        try:
            check_vector(x, self.schema)
        except ValueError as err:
            raise ContractError(str(err)) from None

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        self._check(x)
        return self._predict(x)

    def update(self, x: FeatureVector) -> None:
        if x.label not in (LEGAL, FRAUD):
            raise ContractError("update needs a labeled feature vector")
        self._check(x)
        self._update(x)
        self._n_seen += 1

    def update_many(self, ds: LabeledDataset) -> None:
        for x in ds:
            self.update(x)

    def prequential_many(self, ds: LabeledDataset) -> np.ndarray:
        """Test-then-train over ``ds`` in order; returns the pre-update probabilities."""
        out = np.empty((len(ds), 2))
        for i, x in enumerate(ds):
            d = self.predict_proba(x)
            out[i, FRAUD] = d.p_fraud
            out[i, LEGAL] = d.p_legal
            self.update(x)
        return out

    @abc.abstractmethod
    def _predict(self, x: FeatureVector) -> ClassDistribution: ...

    @abc.abstractmethod
    def _update(self, x: FeatureVector) -> None: ...

    @abc.abstractmethod
    def reset(self) -> None: ...

    def clone(self) -> "IncrementalLearner":
        """A fresh, untrained learner with the same schema and parameters."""
        return type(self)(self.schema, **self.params())


class BatchModel(Model):
    """Base class for learners trained once on a whole dataset."""

    n_seen = 0

    @abc.abstractmethod
    def fit(self, ds: LabeledDataset) -> "BatchModel": ...
