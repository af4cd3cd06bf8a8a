"""Pure-Python hot kernels.

Reference semantics for the compiled ``_kernels`` extension; every routine here
has a bit-compatible twin there. Class index 0 is Legal, 1 is Fraud.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

MASK64 = 0xFFFFFFFFFFFFFFFF
EXP_M1 = 0.36787944117144233  # exp(-1)
POISSON_CAP = 30
LOG_2PI = 1.8378770664093453
# keeps log(var) finite when the running m2 overflows
VAR_CEIL = 1e300


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def uniform01(seed: int, member: int, position: int) -> float:
    """Counter-based uniform draw in [0, 1) keyed by (seed, member, position)."""
    h = _mix64(_mix64(_mix64(seed & MASK64) ^ (member & MASK64)) ^ (position & MASK64))
    return (h >> 11) * (1.0 / 9007199254740992.0)


def poisson1(seed: int, member: int, position: int) -> int:
    """Poisson(1) draw by CDF inversion of :func:`uniform01`."""
    u = uniform01(seed, member, position)
    k = 0
    p = EXP_M1
    cdf = p
    while u >= cdf and k < POISSON_CAP:
        k += 1
        p = p / k
        cdf += p
    return k


def _normalize(s0: float, s1: float) -> tuple[float, float]:
    if s0 == s1:
        return 0.5, 0.5
    d = s1 - s0
    if d >= 0:
        e = math.exp(-d)
        return e / (1.0 + e), 1.0 / (1.0 + e)
    e = math.exp(d)
    return 1.0 / (1.0 + e), e / (1.0 + e)


def _log_ratio(a: float, b: float) -> float:
    if a <= 0.0:
        return -math.inf
    return math.log(a / b)


class NBCore:
    """Sufficient statistics of a two-class Naive Bayes model."""

    def __init__(self, cat_sizes, n_num: int, alpha: float = 1.0, var_floor: float = 1e-6):
        self.cat_sizes = tuple(int(s) for s in cat_sizes)
        self.n_num = int(n_num)
        self.alpha = float(alpha)
        self.var_floor = float(var_floor)
        self.reset()

    def reset(self):
        self.class_counts = [0, 0]
        self.cat_counts = [[[0] * s for s in self.cat_sizes] for _ in range(2)]
        self.num_count = [[0] * self.n_num for _ in range(2)]
        self.num_mean = [[0.0] * self.n_num for _ in range(2)]
        self.num_m2 = [[0.0] * self.n_num for _ in range(2)]

    @property
    def n_seen(self) -> int:
        return self.class_counts[0] + self.class_counts[1]

    def update(self, cat, num, label: int, times: int = 1):
        c = label
        cc = self.cat_counts[c]
        cnt, mean, m2 = self.num_count[c], self.num_mean[c], self.num_m2[c]
        for _ in range(times):
            self.class_counts[c] += 1
            for a, v in enumerate(cat):
                cc[a][v] += 1
            for j in range(self.n_num):
                v = float(num[j])
                cnt[j] += 1
                delta = v - mean[j]
                mean[j] += delta / cnt[j]
                m2[j] += delta * (v - mean[j])

    def _log_scores(self, cat, num) -> tuple[float, float]:
        alpha = self.alpha
        n = self.class_counts[0] + self.class_counts[1]
        use_num = [self.num_count[0][j] >= 1 and self.num_count[1][j] >= 1
                   for j in range(self.n_num)]
        out = []
        for c in (0, 1):
            ccount = self.class_counts[c]
            s = _log_ratio(ccount + alpha, n + 2.0 * alpha)
            counts = self.cat_counts[c]
            for a, v in enumerate(cat):
                s += _log_ratio(counts[a][v] + alpha, ccount + alpha * self.cat_sizes[a])
            cnt, mean, m2 = self.num_count[c], self.num_mean[c], self.num_m2[c]
            for j in range(self.n_num):
                if not use_num[j]:
                    continue
                var = m2[j] / (cnt[j] - 1) if cnt[j] >= 2 else self.var_floor
                if var < self.var_floor:
                    var = self.var_floor
                elif var > VAR_CEIL:
                    var = VAR_CEIL
                d = float(num[j]) - mean[j]
                s += -0.5 * (LOG_2PI + math.log(var)) - d * d / (2.0 * var)
            out.append(s)
        return out[0], out[1]

    def proba(self, cat, num) -> tuple[float, float]:
        s0, s1 = self._log_scores(cat, num)
        return _normalize(s0, s1)

    def update_many(self, cat, num, labels):
        for i in range(labels.shape[0]):
            self.update(cat[i], num[i], int(labels[i]))

    def proba_many(self, cat, num) -> np.ndarray:
        out = np.empty((cat.shape[0], 2))
        for i in range(cat.shape[0]):
            out[i] = self.proba(cat[i], num[i])
        return out

    def prequential(self, cat, num, labels) -> np.ndarray:
        out = np.empty((cat.shape[0], 2))
        for i in range(cat.shape[0]):
            out[i] = self.proba(cat[i], num[i])
            self.update(cat[i], num[i], int(labels[i]))
        return out

    def get_state(self) -> dict:
        return {
            "class_counts": list(self.class_counts),
            "cat_counts": [[list(r) for r in c] for c in self.cat_counts],
            "num_count": [list(r) for r in self.num_count],
            "num_mean": [list(r) for r in self.num_mean],
            "num_m2": [list(r) for r in self.num_m2],
        }

    def set_state(self, state: dict):
        self.class_counts = [int(v) for v in state["class_counts"]]
        self.cat_counts = [[[int(v) for v in r] for r in c] for c in state["cat_counts"]]
        self.num_count = [[int(v) for v in r] for r in state["num_count"]]
        self.num_mean = [[float(v) for v in r] for r in state["num_mean"]]
        self.num_m2 = [[float(v) for v in r] for r in state["num_m2"]]


def _bagged_proba(cores, cat_row, num_row) -> tuple[float, float]:
    a = 0.0
    b = 0.0
    for core in cores:
        p0, p1 = core.proba(cat_row, num_row)
        a += p0
        b += p1
    m = len(cores)
    if m == 1:
        return a, b
    a /= m
    b /= m
    s = a + b
    return a / s, b / s


def _bagged_update(cores, seed, position, cat_row, num_row, label):
    for m, core in enumerate(cores):
        k = poisson1(seed, m, position)
        if k:
            core.update(cat_row, num_row, label, k)


def bagged_proba_many(cores, cat, num) -> np.ndarray:
    out = np.empty((cat.shape[0], 2))
    for i in range(cat.shape[0]):
        out[i] = _bagged_proba(cores, cat[i], num[i])
    return out


def bagged_update_many(cores, seed: int, position0: int, cat, num, labels):
    for i in range(labels.shape[0]):
        _bagged_update(cores, seed, position0 + i, cat[i], num[i], int(labels[i]))


def bagged_prequential(cores, seed: int, position0: int, cat, num, labels) -> np.ndarray:
    out = np.empty((cat.shape[0], 2))
    for i in range(cat.shape[0]):
        out[i] = _bagged_proba(cores, cat[i], num[i])
        _bagged_update(cores, seed, position0 + i, cat[i], num[i], int(labels[i]))
    return out


def knn_query(win_num, win_cat, win_seq, size: int, lo, span, q_num, q_cat, k: int):
    """k nearest window rows to a query.

    Squared distance sums categorical mismatches first, then range-normalized
    numeric differences in column order. Ties on distance go to the row with
    the larger sequence number. Returns ``(rows, squared_distances)`` nearest
    first.
    """
    if size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    d2 = np.zeros(size)
    for j in range(win_cat.shape[1]):
        d2 += (win_cat[:size, j] != q_cat[j])
    for j in range(win_num.shape[1]):
        if span[j] > 0.0:
            diff = (win_num[:size, j] - q_num[j]) / span[j]
            d2 += diff * diff
    order = np.lexsort((-win_seq[:size], d2))[:k]
    return order.astype(np.int64), d2[order]
