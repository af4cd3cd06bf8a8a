"""Hoeffding tree (VFDT) with information-gain splits and equal-width numeric bins."""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import asdict, dataclass

from .base import ClassDistribution, ContractError, IncrementalLearner
from .data import FRAUD, LEGAL, DatasetSchema, FeatureVector


def hoeffding_bound(range_r: float, delta: float, n: int) -> float:
    """``sqrt(R^2 ln(1/delta) / (2n))``."""
    if not range_r > 0:
        raise ContractError("range must be positive")
    if not 0 < delta <= 1:
        raise ContractError("delta must lie in (0, 1]")
    if n < 1:
        raise ContractError("n must be >= 1")
    return math.sqrt(range_r * range_r * math.log(1.0 / delta) / (2.0 * n))


def entropy(counts) -> float:
    total = sum(counts)
    if total <= 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log2(p)
    return h


def info_gain(parent, branches) -> float:
    total = sum(parent)
    if total <= 0:
        return 0.0
    return entropy(parent) - sum(sum(b) / total * entropy(b) for b in branches if sum(b))


@dataclass(frozen=True)
class HtParams:
    delta: float = 1e-7
    grace_period: int = 200
    tie_tau: float = 0.05
    n_bins: int = 10
    alpha: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.grace_period < 1 or self.tie_tau < 0 or self.n_bins < 2 or self.alpha < 0:
            raise ValueError("invalid Hoeffding tree parameters")


class _Leaf:
    __slots__ = ("counts", "inherited", "cat_stats", "buffer", "edges", "bins",
                 "since_check", "used")

    def __init__(self, schema: DatasetSchema, used: frozenset, inherited=(0, 0)):
        self.counts = [0, 0]
        self.inherited = list(inherited)
        self.used = used
        self.cat_stats = {i: [[0, 0] for _ in a.values]
                          for i, a in enumerate(schema.attributes)
                          if a.is_categorical and i not in used}
        num = [i for i, a in enumerate(schema.attributes) if not a.is_categorical]
        self.buffer = {i: [] for i in num}   # raw (value, label) until edges freeze
        self.edges = None                    # attr -> interior bin edges
        self.bins = None                     # attr -> [[legal, fraud]] * n_bins
        self.since_check = 0

    def stat_cells(self) -> int:
        n = sum(len(t) for t in self.cat_stats.values())
        if self.bins is not None:
            n += sum(len(b) for b in self.bins.values())
        return n


class _Split:
    __slots__ = ("attribute", "threshold", "children")

    def __init__(self, attribute: int, threshold, children: list):
        self.attribute = attribute
        self.threshold = threshold   # None for a categorical multiway split
        self.children = children

    def branch(self, x) -> int:
        v = x[self.attribute]
        if self.threshold is None:
            return v
        return 0 if v <= self.threshold else 1


class HoeffdingTree(IncrementalLearner):
    """Incremental decision tree that splits once the Hoeffding bound certifies the winner.

    Every ``grace_period`` instances a leaf compares the information gain of
    its best two attributes and splits when the gap exceeds the bound (or the
    bound drops below ``tie_tau``). Numeric attributes are binned equal-width
    between the leaf's observed min and max; edges freeze at the leaf's first
    check, and until then raw values are buffered. Leaves predict their
    Laplace-smoothed class distribution.
    """

    algorithm = "hoeffding_tree"

    def __init__(self, schema: DatasetSchema, delta: float = 1e-7, grace_period: int = 200,
                 tie_tau: float = 0.05, n_bins: int = 10, alpha: float = 1.0):
        super().__init__(schema)
        self.hparams = HtParams(delta, grace_period, tie_tau, n_bins, alpha)
        self.reset()

    def params(self) -> dict:
        return asdict(self.hparams)

    def reset(self) -> None:
        self.root = _Leaf(self.schema, frozenset())
        self._n_seen = 0
        self.n_splits = 0

    def _route(self, values):
        node = self.root
        while isinstance(node, _Split):
            node = node.children[node.branch(values)]
        return node

    def _predict(self, x: FeatureVector) -> ClassDistribution:
        leaf = self._route(x.values)
        a = self.hparams.alpha
        legal = leaf.counts[LEGAL] + leaf.inherited[LEGAL]
        fraud = leaf.counts[FRAUD] + leaf.inherited[FRAUD]
        total = legal + fraud + 2 * a
        if total == 0:
            return ClassDistribution(0.5, 0.5)
        return ClassDistribution((fraud + a) / total, (legal + a) / total)

    def _update(self, x: FeatureVector) -> None:
        values, y = x.values, x.label
        leaf = self._route(values)
        leaf.counts[y] += 1
        for i, table in leaf.cat_stats.items():
            table[values[i]][y] += 1
        if leaf.edges is None:
            for i, buf in leaf.buffer.items():
                buf.append((values[i], y))
        else:
            for i, edges in leaf.edges.items():
                leaf.bins[i][bisect_left(edges, values[i])][y] += 1
        leaf.since_check += 1
        if leaf.since_check >= self.hparams.grace_period:
            leaf.since_check = 0
            if leaf.edges is None:
                self._freeze(leaf)
            if leaf.counts[LEGAL] and leaf.counts[FRAUD]:
                self._attempt_split(leaf)

    def _freeze(self, leaf: _Leaf) -> None:
        nb = self.hparams.n_bins
        leaf.edges, leaf.bins = {}, {}
        for i, buf in leaf.buffer.items():
            lo = min(v for v, _ in buf)
            hi = max(v for v, _ in buf)
            width = (hi - lo) / nb
            edges = [lo + k * width for k in range(1, nb)] if hi > lo else []
            bins = [[0, 0] for _ in range(len(edges) + 1)]
            for v, y in buf:
                bins[bisect_left(edges, v)][y] += 1
            leaf.edges[i], leaf.bins[i] = edges, bins
        leaf.buffer = {}

    def _candidates(self, leaf: _Leaf):
        """Best split per attribute as ``(gain, attribute, threshold, branch_counts)``."""
        out = []
        for i, table in leaf.cat_stats.items():
            if sum(1 for row in table if sum(row)) < 2:
                continue
            out.append((info_gain(leaf.counts, table), i, None, [list(r) for r in table]))
        for i, edges in leaf.edges.items():
            bins = leaf.bins[i]
            best = None
            left = [0, 0]
            for k, t in enumerate(edges):
                left = [left[0] + bins[k][0], left[1] + bins[k][1]]
                right = [leaf.counts[0] - left[0], leaf.counts[1] - left[1]]
                if not sum(left) or not sum(right):
                    continue
                g = info_gain(leaf.counts, (left, right))
                if best is None or g > best[0]:
                    best = (g, i, t, [left, right])
            if best is not None:
                out.append(best)
        return out

    def _attempt_split(self, leaf: _Leaf) -> None:
        cands = self._candidates(leaf)
        if not cands:
            return
        cands.sort(key=lambda c: (-c[0], c[1]))
        g1 = cands[0][0]
        g2 = cands[1][0] if len(cands) > 1 else 0.0
        n = leaf.counts[0] + leaf.counts[1]
        eps = hoeffding_bound(1.0, self.hparams.delta, n)
        if g1 > 0 and (g1 - g2 > eps or eps < self.hparams.tie_tau):
            self._split(leaf, cands[0])

    def _split(self, leaf: _Leaf, cand) -> None:
        _, attr, threshold, branches = cand
        used = leaf.used | {attr} if threshold is None else leaf.used
        children = [_Leaf(self.schema, used, counts) for counts in branches]
        node = _Split(attr, threshold, children)
        parent, idx = self._parent_of(leaf)
        if parent is None:
            self.root = node
        else:
            parent.children[idx] = node
        self.n_splits += 1

    def _parent_of(self, leaf):
        stack = [(self.root, None, None)]
        while stack:
            node, parent, idx = stack.pop()
            if node is leaf:
                return parent, idx
            if isinstance(node, _Split):
                stack.extend((c, node, k) for k, c in enumerate(node.children))
        raise RuntimeError("leaf not in tree")

    # structure introspection

    def _walk(self):
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            if isinstance(node, _Split):
                stack.extend((c, depth + 1) for c in node.children)

    @property
    def n_nodes(self) -> int:
        return sum(1 for _ in self._walk())

    @property
    def n_leaves(self) -> int:
        return sum(1 for n, _ in self._walk() if isinstance(n, _Leaf))

    @property
    def depth(self) -> int:
        return max(d for _, d in self._walk())

    @property
    def root_attribute(self) -> str | None:
        if isinstance(self.root, _Split):
            return self.schema.attributes[self.root.attribute].name
        return None

    def stat_cells(self) -> int:
        """Class-count cells held by all leaves (excluding pre-freeze buffers)."""
        return sum(n.stat_cells() for n, _ in self._walk() if isinstance(n, _Leaf))

    # snapshots

    def get_state(self) -> dict:
        return {"n_seen": self._n_seen, "n_splits": self.n_splits,
                "root": _node_to_dict(self.root)}

    @classmethod
    def from_state(cls, schema, params, state) -> "HoeffdingTree":
        tree = cls(schema, **params)
        tree.root = _node_from_dict(state["root"], schema)
        tree._n_seen = int(state["n_seen"])
        tree.n_splits = int(state["n_splits"])
        return tree


def _node_to_dict(node) -> dict:
    if isinstance(node, _Split):
        return {"split": node.attribute, "threshold": node.threshold,
                "children": [_node_to_dict(c) for c in node.children]}
    d = {
        "counts": list(node.counts),
        "inherited": list(node.inherited),
        "used": sorted(node.used),
        "since_check": node.since_check,
        "cat_stats": {str(i): t for i, t in sorted(node.cat_stats.items())},
    }
    if node.edges is None:
        d["buffer"] = {str(i): [[v, y] for v, y in b] for i, b in sorted(node.buffer.items())}
    else:
        d["edges"] = {str(i): e for i, e in sorted(node.edges.items())}
        d["bins"] = {str(i): b for i, b in sorted(node.bins.items())}
    return d


def _node_from_dict(d: dict, schema: DatasetSchema):
    if "split" in d:
        return _Split(d["split"], d["threshold"],
                      [_node_from_dict(c, schema) for c in d["children"]])
    leaf = _Leaf(schema, frozenset(d["used"]), d["inherited"])
    leaf.counts = list(d["counts"])
    leaf.since_check = d["since_check"]
    leaf.cat_stats = {int(i): [list(r) for r in t] for i, t in d["cat_stats"].items()}
    if "buffer" in d:
        leaf.buffer = {int(i): [(v, y) for v, y in b] for i, b in d["buffer"].items()}
    else:
        leaf.buffer = {}
        leaf.edges = {int(i): list(e) for i, e in d["edges"].items()}
        leaf.bins = {int(i): [list(r) for r in b] for i, b in d["bins"].items()}
    return leaf
