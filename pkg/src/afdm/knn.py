"""Sliding-window k-nearest-neighbour classifier over a mixed categorical/numeric metric."""
from __future__ import annotations

import math

import numpy as np

from ._backend import get_kernels
from .base import ClassDistribution, IncrementalLearner
from .data import FRAUD, LEGAL, DatasetSchema, FeatureVector

WEIGHTINGS = ("uniform", "inverse_distance")


def knn_distance(a: FeatureVector, b: FeatureVector, schema: DatasetSchema,
                 lo, hi) -> float:
    """Distance between two vectors given per-numeric-attribute ranges ``[lo, hi]``.

    Categorical attributes add 0 or 1; numeric ones add the squared
    range-normalized difference, or nothing when the range is empty.
    """
    if len(a.values) != len(schema) or len(b.values) != len(schema):
        raise ValueError("vectors do not match the schema")
    d2 = 0.0
    for i in schema.cat_positions:
        if a.values[i] != b.values[i]:
            d2 += 1.0
    for j, i in enumerate(schema.num_positions):
        span = hi[j] - lo[j]
        if span > 0.0:
            diff = (a.values[i] - b.values[i]) / span
            d2 += diff * diff
    return math.sqrt(d2)


class WindowedKNN(IncrementalLearner):
    """k-NN over the most recent ``window_capacity`` labeled instances.

    Numeric attributes are normalized by the min/max of the instances currently
    in the window. Equal distances are resolved in favour of the newer
    instance. Class probabilities are add-one smoothed votes,
    ``(votes_c + 1) / (total + 2)``.
    """

    algorithm = "knn_window"

    def __init__(self, schema: DatasetSchema, k: int = 1, window_capacity: int = 5000,
                 weighting: str = "uniform", backend: str | None = None):
        super().__init__(schema)
        if not 1 <= k <= window_capacity:
            raise ValueError("need 1 <= k <= window_capacity")
        if weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        self.k = int(k)
        self.window_capacity = int(window_capacity)
        self.weighting = weighting
        self._kernels = get_kernels(backend)
        self._cat_pos = schema.cat_positions
        self._num_pos = schema.num_positions
        self.reset()

    def params(self) -> dict:
        return {"k": self.k, "window_capacity": self.window_capacity,
                "weighting": self.weighting}

    def clone(self) -> "WindowedKNN":
        return WindowedKNN(self.schema, backend=self._kernels.BACKEND, **self.params())

    def reset(self) -> None:
        cap = self.window_capacity
        self._num = np.zeros((cap, len(self._num_pos)))
        self._cat = np.zeros((cap, len(self._cat_pos)), dtype=np.int64)
        self._lab = np.zeros(cap, dtype=np.int8)
        self._seq = np.zeros(cap, dtype=np.int64)
        self._size = 0
        self._head = 0           # slot the next instance goes into
        self._n_seen = 0
        self._lo = np.full(len(self._num_pos), np.inf)
        self._hi = np.full(len(self._num_pos), -np.inf)
        self._range_dirty = False

    @property
    def size(self) -> int:
        return self._size

    def window(self) -> list[FeatureVector]:
        """Window contents, oldest first."""
        out = []
        for slot in self._chronological_slots():
            vals = [None] * len(self.schema)
            for j, i in enumerate(self._cat_pos):
                vals[i] = int(self._cat[slot, j])
            for j, i in enumerate(self._num_pos):
                vals[i] = float(self._num[slot, j])
            out.append(FeatureVector(tuple(vals), int(self._lab[slot])))
        return out

    def _chronological_slots(self):
        return sorted(range(self._size), key=lambda s: self._seq[s])

    def _update(self, x: FeatureVector) -> None:
        slot = self._head
        if self._size == self.window_capacity:
            evicted = self._num[slot]
            if np.any(evicted <= self._lo) or np.any(evicted >= self._hi):
                self._range_dirty = True
        else:
            self._size += 1
        num = [x.values[i] for i in self._num_pos]
        self._num[slot] = num
        self._cat[slot] = [x.values[i] for i in self._cat_pos]
        self._lab[slot] = x.label
        self._seq[slot] = self._n_seen
        self._head = (slot + 1) % self.window_capacity
        if not self._range_dirty:
            np.minimum(self._lo, num, out=self._lo)
            np.maximum(self._hi, num, out=self._hi)

    def range(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-numeric-attribute ``(min, max)`` over the window."""
        if self._range_dirty:
            filled = self._num[:self._size]
            self._lo = filled.min(axis=0)
            self._hi = filled.max(axis=0)
            self._range_dirty = False
        return self._lo.copy(), self._hi.copy()

    def neighbours(self, x: FeatureVector) -> tuple[np.ndarray, np.ndarray]:
        """Window slots of the k nearest instances and their distances, nearest first."""
        self._check(x)
        lo, hi = self.range()
        span = np.where(hi > lo, hi - lo, 0.0) if self._size else np.zeros_like(lo)
        q_num = np.array([x.values[i] for i in self._num_pos], dtype=np.float64)
        q_cat = np.array([x.values[i] for i in self._cat_pos], dtype=np.int64)
        slots, d2 = self._kernels.knn_query(self._num, self._cat, self._seq, self._size,
                                            lo, span, q_num, q_cat, self.k)
        return slots, np.sqrt(d2)

    def _predict(self, x: FeatureVector) -> ClassDistribution:
        if self._size == 0:
            return ClassDistribution(0.5, 0.5)
        slots, dist = self.neighbours(x)
        votes = [0.0, 0.0]
        for s, d in zip(slots, dist):
            w = 1.0 if self.weighting == "uniform" else 1.0 / max(d, 1e-12)
            votes[self._lab[s]] += w
        total = votes[0] + votes[1] + 2.0
        return ClassDistribution((votes[FRAUD] + 1.0) / total, (votes[LEGAL] + 1.0) / total)

    def get_state(self) -> dict:
        return {
            "n_seen": self._n_seen,
            "seq": [int(self._seq[s]) for s in self._chronological_slots()],
            "window": [[list(fv.values), fv.label] for fv in self.window()],
        }

    @classmethod
    def from_state(cls, schema, params, state, backend=None) -> "WindowedKNN":
        knn = cls(schema, backend=backend, **params)
        for (values, label), seq in zip(state["window"], state["seq"]):
            knn._n_seen = seq
            knn._update(FeatureVector(tuple(values), label))
        knn._n_seen = int(state["n_seen"])
        return knn
