"""Batch comparison learners: a gain-ratio decision tree and L2 logistic regression."""
from __future__ import annotations

import numpy as np

from .base import BatchModel, ClassDistribution
from .data import FRAUD, LEGAL, DatasetSchema, FeatureVector, LabeledDataset


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy (bits) of a ``(..., k)`` count array."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


class _Leaf:
    __slots__ = ("counts",)

    def __init__(self, counts):
        self.counts = [int(counts[0]), int(counts[1])]


class _Split:
    __slots__ = ("attribute", "threshold", "children")

    def __init__(self, attribute, threshold, children):
        self.attribute = attribute
        self.threshold = threshold
        self.children = children


class BatchTree(BatchModel):
    """C4.5-style tree grown greedily by gain ratio, without pruning.

    Categorical attributes split multiway (one child per value); numeric ones
    split binary at midpoints between consecutive distinct values. Growth
    stops on purity, when a node is too small to give every child
    ``min_leaf`` rows, at ``max_depth``, or when no attribute separates the
    rows. Ties go to the earlier attribute, then the lower threshold.
    """

    algorithm = "batch_tree"

    def __init__(self, min_leaf: int = 2, max_depth: int | None = None, alpha: float = 1.0):
        if min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        self.min_leaf = int(min_leaf)
        self.max_depth = max_depth
        self.alpha = float(alpha)
        self.root = None
        self.schema: DatasetSchema | None = None

    def params(self) -> dict:
        return {"min_leaf": self.min_leaf, "max_depth": self.max_depth, "alpha": self.alpha}

    def fit(self, ds: LabeledDataset) -> "BatchTree":
        if len(ds) == 0:
            raise ValueError("cannot train on an empty dataset")
        self.schema = ds.schema
        self.n_seen = len(ds)
        cat, num, y = ds.arrays()
        self._cat, self._num, self._y = cat, num, y.astype(np.int64)
        self._col = {}
        for j, i in enumerate(ds.schema.cat_positions):
            self._col[i] = ("cat", j)
        for j, i in enumerate(ds.schema.num_positions):
            self._col[i] = ("num", j)
        self.root = self._grow(np.arange(len(ds)), 0)
        del self._cat, self._num, self._y
        return self

    def _grow(self, idx: np.ndarray, depth: int):
        y = self._y[idx]
        counts = np.bincount(y, minlength=2)
        if (counts[0] == 0 or counts[1] == 0 or len(idx) < 2 * self.min_leaf
                or (self.max_depth is not None and depth >= self.max_depth)):
            return _Leaf(counts)
        best = self._best_split(idx, y, counts)
        if best is None:
            return _Leaf(counts)
        attr, threshold = best
        kind, j = self._col[attr]
        if kind == "cat":
            vals = self._cat[idx, j]
            children = []
            for v in range(len(self.schema.attributes[attr].values)):
                sub = idx[vals == v]
                children.append(self._grow(sub, depth + 1) if len(sub) else _Leaf(counts))
        else:
            mask = self._num[idx, j] <= threshold
            children = [self._grow(idx[mask], depth + 1), self._grow(idx[~mask], depth + 1)]
        return _Split(attr, threshold, children)

    def _best_split(self, idx, y, counts):
        parent_h = _entropy_rows(counts)
        n = len(idx)
        best = None   # (gain_ratio, attribute, threshold)
        for attr, a in enumerate(self.schema.attributes):
            kind, j = self._col[attr]
            if kind == "cat":
                table = np.zeros((len(a.values), 2), dtype=np.int64)
                np.add.at(table, (self._cat[idx, j], y), 1)
                sizes = table.sum(axis=1)
                if np.count_nonzero(sizes) < 2 or np.count_nonzero(sizes >= self.min_leaf) < 2:
                    continue
                gain = parent_h - (sizes / n * _entropy_rows(table)).sum()
                split_info = _entropy_rows(sizes)
                cand = (max(gain, 0.0) / split_info, attr, None)
            else:
                vals = self._num[idx, j]
                order = np.argsort(vals, kind="stable")
                sv, sy = vals[order], y[order]
                left_fraud = np.cumsum(sy)[:-1]
                left_n = np.arange(1, n)
                ok = (sv[:-1] != sv[1:]) & (left_n >= self.min_leaf) & (n - left_n >= self.min_leaf)
                if not ok.any():
                    continue
                pos = np.flatnonzero(ok)
                ln = left_n[pos]
                lf = left_fraud[pos]
                left = np.stack([ln - lf, lf], axis=1)
                right = counts[None, :] - left
                gain = parent_h - (ln / n * _entropy_rows(left) + (n - ln) / n * _entropy_rows(right))
                split_info = _entropy_rows(np.stack([ln, n - ln], axis=1))
                ratio = np.maximum(gain, 0.0) / split_info
                k = int(np.argmax(ratio))
                p = pos[k]
                cand = (float(ratio[k]), attr, float((sv[p] + sv[p + 1]) / 2.0))
            if best is None or cand[0] > best[0]:
                best = cand
        return None if best is None else (best[1], best[2])

    def _leaf_for(self, values):
        node = self.root
        while isinstance(node, _Split):
            v = values[node.attribute]
            if node.threshold is None:
                node = node.children[v]
            else:
                node = node.children[0 if v <= node.threshold else 1]
        return node

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        if self.root is None:
            return ClassDistribution(0.5, 0.5)
        c = self._leaf_for(x.values).counts
        total = c[0] + c[1] + 2 * self.alpha
        if total == 0:
            return ClassDistribution(0.5, 0.5)
        return ClassDistribution((c[FRAUD] + self.alpha) / total, (c[LEGAL] + self.alpha) / total)

    @property
    def depth(self) -> int:
        def walk(node):
            return 0 if isinstance(node, _Leaf) else 1 + max(walk(c) for c in node.children)
        return walk(self.root) if self.root is not None else 0

    @property
    def n_leaves(self) -> int:
        def walk(node):
            return 1 if isinstance(node, _Leaf) else sum(walk(c) for c in node.children)
        return walk(self.root) if self.root is not None else 0

    def get_state(self) -> dict:
        def dump(node):
            if isinstance(node, _Leaf):
                return {"counts": node.counts}
            return {"split": node.attribute, "threshold": node.threshold,
                    "children": [dump(c) for c in node.children]}
        return {"root": dump(self.root) if self.root is not None else None}

    @classmethod
    def from_state(cls, schema, params, state) -> "BatchTree":
        def load(d):
            if "counts" in d:
                return _Leaf(d["counts"])
            return _Split(d["split"], d["threshold"], [load(c) for c in d["children"]])
        tree = cls(**params)
        tree.schema = schema
        tree.root = load(state["root"]) if state["root"] is not None else None
        return tree


# ---------------------------------------------------------------------------
# logistic regression


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -np.asarray(z, dtype=np.float64)))


def logistic_loss(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean log loss plus ``l2/2 * ||w||^2`` over all weights but the last (bias)."""
    z = X @ w
    loss = np.mean(np.where(y == 1, np.logaddexp(0.0, -z), np.logaddexp(0.0, z)))
    return float(loss + 0.5 * l2 * np.dot(w[:-1], w[:-1]))


def logistic_grad(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    """Gradient of :func:`logistic_loss`."""
    g = X.T @ (sigmoid(X @ w) - y) / len(y)
    g[:-1] += l2 * w[:-1]
    return g


class LogisticRegression(BatchModel):
    """Binary logistic regression fit by full-batch gradient descent.

    Inputs are standardized numerics, one-hot categoricals and a trailing bias
    column. Each epoch takes a gradient step on the mean log loss and then
    applies the L2 penalty as an exact proximal shrink, ``w / (1 + lr * l2)``,
    which is stable for any penalty strength. The bias is not penalized.
    Weights start at zero.
    """

    algorithm = "logistic"

    def __init__(self, l2: float = 1e-4, learning_rate: float = 0.1, epochs: int = 200,
                 standardize: bool = True):
        if l2 < 0 or learning_rate <= 0 or epochs < 0:
            raise ValueError("invalid logistic regression parameters")
        self.l2 = float(l2)
        self.learning_rate = float(learning_rate)
        self.epochs = int(epochs)
        self.standardize = bool(standardize)
        self.weights: np.ndarray | None = None
        self.mean = None
        self.scale = None
        self.schema: DatasetSchema | None = None

    def params(self) -> dict:
        return {"l2": self.l2, "learning_rate": self.learning_rate, "epochs": self.epochs,
                "standardize": self.standardize}

    def design(self, cat: np.ndarray, num: np.ndarray) -> np.ndarray:
        """Design matrix: scaled numerics, one-hot categoricals, then the bias column."""
        parts = [(num - self.mean) / self.scale]
        for j, size in enumerate(self.schema.cat_sizes):
            parts.append(np.eye(size)[cat[:, j]])
        parts.append(np.ones((len(num), 1)))
        return np.hstack(parts)

    def fit(self, ds: LabeledDataset) -> "LogisticRegression":
        if len(ds) == 0:
            raise ValueError("cannot train on an empty dataset")
        self.schema = ds.schema
        self.n_seen = len(ds)
        cat, num, y = ds.arrays()
        if self.standardize:
            self.mean = num.mean(axis=0)
            sd = num.std(axis=0)
            self.scale = np.where(sd > 0, sd, 1.0)
        else:
            self.mean = np.zeros(num.shape[1])
            self.scale = np.ones(num.shape[1])
        X = self.design(cat, num)
        yf = y.astype(np.float64)
        w = np.zeros(X.shape[1])
        shrink = 1.0 / (1.0 + self.learning_rate * self.l2)
        for _ in range(self.epochs):
            w -= self.learning_rate * logistic_grad(w, X, yf, 0.0)
            w[:-1] *= shrink
        self.weights = w
        return self

    def predict_many(self, ds) -> np.ndarray:
        if not isinstance(ds, LabeledDataset):
            return super().predict_many(ds)
        cat, num, _ = ds.arrays()
        p = sigmoid(self.design(cat, num) @ self.weights)
        return np.stack([1.0 - p, p], axis=1)

    def predict_proba(self, x: FeatureVector) -> ClassDistribution:
        if self.weights is None:
            return ClassDistribution(0.5, 0.5)
        cat = np.array([[x.values[i] for i in self.schema.cat_positions]], dtype=np.int64)
        num = np.array([[x.values[i] for i in self.schema.num_positions]], dtype=np.float64)
        p = float(sigmoid(self.design(cat, num) @ self.weights)[0])
        return ClassDistribution(p, 1.0 - p)

    def get_state(self) -> dict:
        return {"weights": [float(v) for v in self.weights],
                "mean": [float(v) for v in self.mean],
                "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_state(cls, schema, params, state) -> "LogisticRegression":
        m = cls(**params)
        m.schema = schema
        m.weights = np.array(state["weights"], dtype=np.float64)
        m.mean = np.array(state["mean"], dtype=np.float64)
        m.scale = np.array(state["scale"], dtype=np.float64)
        return m
