# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_kernels_py`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

BACKEND = "cython"

cdef double EXP_M1 = 0.36787944117144233
cdef int POISSON_CAP = 30
cdef double LOG_2PI = 1.8378770664093453
# keeps log(var) finite when the running m2 overflows
cdef double VAR_CEIL = 1e300
MASK64 = 0xFFFFFFFFFFFFFFFF


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = z + <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t seed, uint64_t member, uint64_t position) nogil:
    cdef uint64_t h = _mix64(_mix64(_mix64(seed) ^ member) ^ position)
    return <double>(h >> 11) * (1.0 / 9007199254740992.0)


cdef inline int _poisson1(uint64_t seed, uint64_t member, uint64_t position) nogil:
    cdef double u = _uniform(seed, member, position)
    cdef int k = 0
    cdef double p = EXP_M1
    cdef double cdf = p
    while u >= cdf and k < POISSON_CAP:
        k += 1
        p = p / k
        cdf += p
    return k


def uniform01(seed, member, position):
    return _uniform(<uint64_t>(seed & MASK64), <uint64_t>(member & MASK64),
                    <uint64_t>(position & MASK64))


def poisson1(seed, member, position):
    return _poisson1(<uint64_t>(seed & MASK64), <uint64_t>(member & MASK64),
                     <uint64_t>(position & MASK64))


cdef inline double _log_ratio(double a, double b) nogil:
    if a <= 0.0:
        return -INFINITY
    return log(a / b)


cdef inline void _normalize(double s0, double s1, double* p0, double* p1) nogil:
    cdef double d, e
    if s0 == s1:
        p0[0] = 0.5
        p1[0] = 0.5
        return
    d = s1 - s0
    if d >= 0:
        e = exp(-d)
        p0[0] = e / (1.0 + e)
        p1[0] = 1.0 / (1.0 + e)
    else:
        e = exp(d)
        p0[0] = 1.0 / (1.0 + e)
        p1[0] = e / (1.0 + e)


cdef class NBCore:
    """Sufficient statistics of a two-class Naive Bayes model."""

    cdef public tuple cat_sizes
    cdef public int n_num
    cdef public double alpha
    cdef public double var_floor
    cdef int n_cat
    cdef int cat_total
    cdef int64_t class_counts_[2]
    cdef int64_t[::1] cat_offsets
    cdef int64_t[::1] cat_sizes_
    cdef int64_t[:, ::1] cat_counts_     # [class, offset + value]
    cdef int64_t[:, ::1] num_count_
    cdef double[:, ::1] num_mean_
    cdef double[:, ::1] num_m2_
    cdef int64_t[::1] cbuf
    cdef double[::1] xbuf

    def __init__(self, cat_sizes, int n_num, double alpha=1.0, double var_floor=1e-6):
        self.cat_sizes = tuple(int(s) for s in cat_sizes)
        self.n_num = n_num
        self.alpha = alpha
        self.var_floor = var_floor
        self.n_cat = len(self.cat_sizes)
        sizes = np.asarray(self.cat_sizes, dtype=np.int64).reshape(-1)
        offsets = np.zeros(self.n_cat, dtype=np.int64)
        if self.n_cat:
            offsets[1:] = np.cumsum(sizes)[:-1]
        self.cat_sizes_ = sizes
        self.cat_offsets = offsets
        self.cat_total = int(sizes.sum())
        self.cbuf = np.zeros(max(self.n_cat, 1), dtype=np.int64)
        self.xbuf = np.zeros(max(self.n_num, 1))
        self.reset()

    def reset(self):
        self.class_counts_[0] = 0
        self.class_counts_[1] = 0
        self.cat_counts_ = np.zeros((2, max(self.cat_total, 1)), dtype=np.int64)
        self.num_count_ = np.zeros((2, max(self.n_num, 1)), dtype=np.int64)
        self.num_mean_ = np.zeros((2, max(self.n_num, 1)))
        self.num_m2_ = np.zeros((2, max(self.n_num, 1)))

    @property
    def n_seen(self):
        return self.class_counts_[0] + self.class_counts_[1]

    @property
    def class_counts(self):
        return [self.class_counts_[0], self.class_counts_[1]]

    cdef void _update(self, const int64_t* cat, const double* num, int c, int times) noexcept nogil:
        cdef int t, a, j
        cdef double v, delta
        for t in range(times):
            self.class_counts_[c] += 1
            for a in range(self.n_cat):
                self.cat_counts_[c, self.cat_offsets[a] + cat[a]] += 1
            for j in range(self.n_num):
                v = num[j]
                self.num_count_[c, j] += 1
                delta = v - self.num_mean_[c, j]
                self.num_mean_[c, j] += delta / self.num_count_[c, j]
                self.num_m2_[c, j] += delta * (v - self.num_mean_[c, j])

    cdef void _proba(self, const int64_t* cat, const double* num,
                     double* p0, double* p1) noexcept nogil:
        cdef double alpha = self.alpha
        cdef double n = <double>(self.class_counts_[0] + self.class_counts_[1])
        cdef double s[2]
        cdef double ccount, var, d
        cdef int c, a, j
        cdef int64_t cnt
        for c in range(2):
            ccount = <double>self.class_counts_[c]
            s[c] = _log_ratio(ccount + alpha, n + 2.0 * alpha)
            for a in range(self.n_cat):
                s[c] += _log_ratio(
                    self.cat_counts_[c, self.cat_offsets[a] + cat[a]] + alpha,
                    ccount + alpha * self.cat_sizes_[a])
            for j in range(self.n_num):
                if self.num_count_[0, j] < 1 or self.num_count_[1, j] < 1:
                    continue
                cnt = self.num_count_[c, j]
                if cnt >= 2:
                    var = self.num_m2_[c, j] / (cnt - 1)
                else:
                    var = self.var_floor
                if var < self.var_floor:
                    var = self.var_floor
                elif var > VAR_CEIL:
                    var = VAR_CEIL
                d = num[j] - self.num_mean_[c, j]
                s[c] += -0.5 * (LOG_2PI + log(var)) - d * d / (2.0 * var)
        _normalize(s[0], s[1], p0, p1)

    cdef int _load_row(self, cat, num) except -1:
        cdef Py_ssize_t a, j
        cdef int64_t v
        if len(cat) != self.n_cat or len(num) != self.n_num:
            raise ValueError("row does not match the model's attribute layout")
        for a in range(self.n_cat):
            v = cat[a]
            if v < 0 or v >= self.cat_sizes_[a]:
                raise ValueError(f"categorical index {v} out of range")
            self.cbuf[a] = v
        for j in range(self.n_num):
            self.xbuf[j] = num[j]
        return 0

    def update(self, cat, num, int label, int times=1):
        if label != 0 and label != 1:
            raise ValueError("label must be 0 or 1")
        self._load_row(cat, num)
        self._update(&self.cbuf[0], &self.xbuf[0], label, times)

    def proba(self, cat, num):
        self._load_row(cat, num)
        cdef double p0, p1
        self._proba(&self.cbuf[0], &self.xbuf[0], &p0, &p1)
        return p0, p1

    def update_many(self, cat, num, labels):
        cdef int64_t[:, ::1] C = _cat2d(cat)
        cdef double[:, ::1] X = _num2d(num)
        cdef const signed char[::1] y = np.ascontiguousarray(labels, dtype=np.int8)
        cdef Py_ssize_t i
        with nogil:
            for i in range(y.shape[0]):
                self._update(&C[i, 0], &X[i, 0], y[i], 1)

    def proba_many(self, cat, num):
        cdef int64_t[:, ::1] C = _cat2d(cat)
        cdef double[:, ::1] X = _num2d(num)
        out = np.empty((C.shape[0], 2))
        cdef double[:, ::1] o = out
        cdef Py_ssize_t i
        with nogil:
            for i in range(C.shape[0]):
                self._proba(&C[i, 0], &X[i, 0], &o[i, 0], &o[i, 1])
        return out

    def prequential(self, cat, num, labels):
        cdef int64_t[:, ::1] C = _cat2d(cat)
        cdef double[:, ::1] X = _num2d(num)
        cdef const signed char[::1] y = np.ascontiguousarray(labels, dtype=np.int8)
        out = np.empty((y.shape[0], 2))
        cdef double[:, ::1] o = out
        cdef Py_ssize_t i
        with nogil:
            for i in range(y.shape[0]):
                self._proba(&C[i, 0], &X[i, 0], &o[i, 0], &o[i, 1])
                self._update(&C[i, 0], &X[i, 0], y[i], 1)
        return out

    def get_state(self):
        cat_counts = []
        for c in range(2):
            per = []
            for a in range(self.n_cat):
                off = self.cat_offsets[a]
                per.append([int(self.cat_counts_[c, off + v]) for v in range(self.cat_sizes_[a])])
            cat_counts.append(per)
        return {
            "class_counts": [int(self.class_counts_[0]), int(self.class_counts_[1])],
            "cat_counts": cat_counts,
            "num_count": [[int(self.num_count_[c, j]) for j in range(self.n_num)] for c in range(2)],
            "num_mean": [[float(self.num_mean_[c, j]) for j in range(self.n_num)] for c in range(2)],
            "num_m2": [[float(self.num_m2_[c, j]) for j in range(self.n_num)] for c in range(2)],
        }

    def set_state(self, state):
        self.reset()
        self.class_counts_[0] = int(state["class_counts"][0])
        self.class_counts_[1] = int(state["class_counts"][1])
        for c in range(2):
            for a in range(self.n_cat):
                off = self.cat_offsets[a]
                for v, n in enumerate(state["cat_counts"][c][a]):
                    self.cat_counts_[c, off + v] = int(n)
            for j in range(self.n_num):
                self.num_count_[c, j] = int(state["num_count"][c][j])
                self.num_mean_[c, j] = float(state["num_mean"][c][j])
                self.num_m2_[c, j] = float(state["num_m2"][c][j])


cdef int64_t[:, ::1] _cat2d(cat):
    a = np.ascontiguousarray(cat, dtype=np.int64)
    if a.shape[1] == 0:
        a = np.zeros((a.shape[0], 1), dtype=np.int64)
    return a


cdef double[:, ::1] _num2d(num):
    a = np.ascontiguousarray(num, dtype=np.float64)
    if a.shape[1] == 0:
        a = np.zeros((a.shape[0], 1))
    return a


def _as_cores(cores):
    cores = list(cores)
    for c in cores:
        if not isinstance(c, NBCore):
            raise TypeError("bagged kernels need compiled NBCore members")
    if not cores:
        raise ValueError("ensemble has no members")
    return cores


def bagged_proba_many(cores, cat, num):
    cores = _as_cores(cores)
    cdef int64_t[:, ::1] C = _cat2d(cat)
    cdef double[:, ::1] X = _num2d(num)
    out = np.empty((C.shape[0], 2))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, m = len(cores)
    cdef double a, b, p0, p1, s
    cdef NBCore core
    for i in range(C.shape[0]):
        a = 0.0
        b = 0.0
        for j in range(m):
            core = <NBCore>cores[j]
            core._proba(&C[i, 0], &X[i, 0], &p0, &p1)
            a += p0
            b += p1
        if m > 1:
            a /= m
            b /= m
            s = a + b
            a /= s
            b /= s
        o[i, 0] = a
        o[i, 1] = b
    return out


def bagged_update_many(cores, seed, position0, cat, num, labels):
    _bagged_run(cores, seed, position0, cat, num, labels, None)


def bagged_prequential(cores, seed, position0, cat, num, labels):
    out = np.empty((np.asarray(labels).shape[0], 2))
    _bagged_run(cores, seed, position0, cat, num, labels, out)
    return out


cdef _bagged_run(cores, seed, position0, cat, num, labels, out):
    cores = _as_cores(cores)
    cdef int64_t[:, ::1] C = _cat2d(cat)
    cdef double[:, ::1] X = _num2d(num)
    cdef const signed char[::1] y = np.ascontiguousarray(labels, dtype=np.int8)
    cdef double[:, ::1] o
    cdef bint predict = out is not None
    if predict:
        o = out
    cdef uint64_t s64 = <uint64_t>(seed & MASK64)
    cdef uint64_t pos0 = <uint64_t>(position0 & MASK64)
    cdef Py_ssize_t i, j, m = len(cores)
    cdef double a, b, p0, p1, s
    cdef int k
    cdef NBCore core
    for i in range(y.shape[0]):
        if predict:
            a = 0.0
            b = 0.0
            for j in range(m):
                core = <NBCore>cores[j]
                core._proba(&C[i, 0], &X[i, 0], &p0, &p1)
                a += p0
                b += p1
            if m > 1:
                a /= m
                b /= m
                s = a + b
                a /= s
                b /= s
            o[i, 0] = a
            o[i, 1] = b
        for j in range(m):
            k = _poisson1(s64, <uint64_t>j, pos0 + <uint64_t>i)
            if k:
                core = <NBCore>cores[j]
                core._update(&C[i, 0], &X[i, 0], y[i], k)


def knn_query(win_num, win_cat, win_seq, Py_ssize_t size, lo, span, q_num, q_cat, Py_ssize_t k):
    """k nearest window rows; same distance and tie rule as the Python kernel."""
    if size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    cdef const double[:, ::1] W = np.ascontiguousarray(win_num, dtype=np.float64)
    cdef const int64_t[:, ::1] WC = np.ascontiguousarray(win_cat, dtype=np.int64)
    cdef const int64_t[::1] seq = np.ascontiguousarray(win_seq, dtype=np.int64)
    cdef const double[::1] sp = np.ascontiguousarray(span, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(q_num, dtype=np.float64)
    cdef const int64_t[::1] qc = np.ascontiguousarray(q_cat, dtype=np.int64)
    if k > size:
        k = size
    best_i = np.empty(k, dtype=np.int64)
    best_d = np.empty(k)
    cdef int64_t[::1] bi = best_i
    cdef double[::1] bd = best_d
    cdef Py_ssize_t n_num = W.shape[1], n_cat = WC.shape[1]
    cdef Py_ssize_t i, j, filled = 0, pos
    cdef double d2, diff
    with nogil:
        for i in range(size):
            d2 = 0.0
            for j in range(n_cat):
                if WC[i, j] != qc[j]:
                    d2 += 1.0
            for j in range(n_num):
                if sp[j] > 0.0:
                    diff = (W[i, j] - q[j]) / sp[j]
                    d2 += diff * diff
            if filled == k:
                pos = k - 1
                if d2 > bd[pos] or (d2 == bd[pos] and seq[i] < seq[bi[pos]]):
                    continue
            else:
                pos = filled
                filled += 1
            # insertion into the sorted top-k list
            while pos > 0 and (d2 < bd[pos - 1] or (d2 == bd[pos - 1] and seq[i] > seq[bi[pos - 1]])):
                bd[pos] = bd[pos - 1]
                bi[pos] = bi[pos - 1]
                pos -= 1
            bd[pos] = d2
            bi[pos] = i
    return best_i, best_d
