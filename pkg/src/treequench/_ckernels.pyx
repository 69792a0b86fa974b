# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: exact map iteration and the Monte Carlo tree sampler.

Mirrors ``_purekernels`` operation for operation. Build with
``-ffp-contract=off`` so no fused multiply-adds change rounding.
"""
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport fabs
from libc.stdlib cimport malloc, free

import numpy as np

BACKEND = "cython"

cdef enum:
    S_MAXITER = 0
    S_CONVERGED = 1
    S_RENORM_FAILED = -1

STATUS_MAXITER = S_MAXITER
STATUS_CONVERGED = S_CONVERGED
STATUS_RENORM_FAILED = S_RENORM_FAILED

cdef enum:
    C_STANDARD = 0
    C_MUTATION = 1
    C_DARY = 2
    C_TABLE = 3

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15
cdef uint64_t M1 = 0xBF58476D1CE4E5B9
cdef uint64_t M2 = 0x94D049BB133111EB
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double EPS_SUM = 1e-12


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


def mix64(uint64_t z):
    return _mix64(z)


def stream_key(uint64_t master_seed, uint64_t sample_index):
    return _mix64(_mix64(master_seed) + sample_index * GAMMA)


# ---------------------------------------------------------------- exact maps

cdef inline double _power(double t, int n) noexcept nogil:
    cdef double r = 1.0
    cdef int i
    for i in range(n):
        r *= t
    return r


cdef void _map_step(const double* x, double* y, int k1, int code, double q,
                    int arity, const int64_t* table) noexcept nogil:
    cdef int k = k1 - 1
    cdef int i, j
    cdef double e, s, acc, ep, total
    if code == C_STANDARD:
        e = x[k]
        for i in range(k):
            y[i] = x[i] * x[i] + 2.0 * x[i] * e
        s = 0.0
        acc = 0.0
        for j in range(k):
            acc += x[j] * s
            s += x[j]
        y[k] = e * e + 2.0 * acc
    elif code == C_MUTATION:
        y[0] = x[0] * x[0] + 2.0 * q * x[0] * x[2]
        y[1] = x[1] * x[1] + 2.0 * q * x[1] * x[2]
        y[2] = (x[2] * x[2] + 2.0 * x[0] * x[1] + 2.0 * (1.0 - q) * x[0] * x[2]
                + 2.0 * (1.0 - q) * x[1] * x[2])
    elif code == C_DARY:
        e = x[k]
        ep = _power(e, arity)
        total = 0.0
        for i in range(k):
            y[i] = _power(x[i] + e, arity) - ep
        for i in range(k):
            total += y[i]
        y[k] = 1.0 - total
    else:
        for i in range(k1):
            y[i] = 0.0
        for i in range(k1):
            for j in range(k1):
                y[table[i * k1 + j]] += x[i] * x[j]


cdef int _renormalize(double* y, int k1) noexcept nogil:
    cdef int i
    cdef double s = 0.0
    for i in range(k1):
        if y[i] < 0.0:
            if y[i] < -EPS_SUM:
                return -1
            y[i] = 0.0
    for i in range(k1):
        s += y[i]
    if fabs(s - 1.0) > EPS_SUM:
        return -1
    for i in range(k1):
        y[i] = y[i] / s
    return 0


def map_step(x, int code, double q, int arity, const int64_t[::1] table):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef int k1 = xv.shape[0]
    cdef double* y = <double*> malloc(k1 * sizeof(double))
    try:
        _map_step(&xv[0], y, k1, code, q, arity, &table[0])
        return [y[i] for i in range(k1)]
    finally:
        free(y)


def renormalize(y):
    cdef double[::1] buf = np.array(y, dtype=np.float64)
    cdef int i
    cdef int k1 = buf.shape[0]
    if _renormalize(&buf[0], k1) != 0:
        return None
    return [buf[i] for i in range(k1)]


def run_map(const double[::1] x0, double[:, ::1] out, int code, double q, int arity,
            const int64_t[::1] table, long n_max, double conv_tol):
    cdef int k1 = x0.shape[0]
    cdef bint stream = out.shape[0] == 1
    cdef double* x = <double*> malloc(k1 * sizeof(double))
    cdef double* y = <double*> malloc(k1 * sizeof(double))
    cdef double* tmp
    cdef double diff, dv
    cdef long t, row
    cdef int i, status = S_MAXITER
    cdef long taken = n_max
    if x == NULL or y == NULL:
        free(x)
        free(y)
        raise MemoryError()
    if not stream and out.shape[0] < n_max:
        raise ValueError("output buffer shorter than n_max")
    for i in range(k1):
        x[i] = x0[i]
    with nogil:
        for t in range(n_max):
            _map_step(x, y, k1, code, q, arity, &table[0])
            if _renormalize(y, k1) != 0:
                status = S_RENORM_FAILED
                taken = t
                break
            diff = 0.0
            for i in range(k1):
                dv = fabs(y[i] - x[i])
                if dv > diff:
                    diff = dv
            row = 0 if stream else t
            for i in range(k1):
                out[row, i] = y[i]
            tmp = x
            x = y
            y = tmp
            if diff < conv_tol:
                status = S_CONVERGED
                taken = t + 1
                break
    free(x)
    free(y)
    return taken, status


# ----------------------------------------------------------- tree sampler

cdef struct Sampler:
    uint64_t key
    uint64_t counter
    const double* cum
    const int64_t* table
    int k
    int code
    double q
    int arity


cdef inline double _uniform(Sampler* s) noexcept nogil:
    s.counter += 1
    return <double> (_mix64(s.key + s.counter * GAMMA) >> 11) * TWO_M53


cdef int _eval_node(Sampler* s, int h) noexcept nogil:
    cdef int a, b, c, acc, single, i, state
    cdef bint conflict
    cdef double u
    if h == 0:
        u = _uniform(s)
        state = 0
        while state < s.k and u >= s.cum[state]:
            state += 1
        return state
    if s.code == C_TABLE:
        a = _eval_node(s, h - 1)
        b = _eval_node(s, h - 1)
        return <int> s.table[a * (s.k + 1) + b]
    if s.code == C_MUTATION:
        a = _eval_node(s, h - 1)
        b = _eval_node(s, h - 1)
        if a == b:
            return a
        if a == s.k:
            single = b
        elif b == s.k:
            single = a
        else:
            return s.k
        if _uniform(s) < s.q:
            return single
        return s.k
    acc = s.k
    conflict = False
    for i in range(s.arity):
        c = _eval_node(s, h - 1)
        if c != s.k:
            if acc == s.k:
                acc = c
            elif acc != c:
                conflict = True
    if conflict:
        return s.k
    return acc


cdef inline int _leaf(Sampler* s) noexcept nogil:
    # cum is nondecreasing, so the first i with u < cum[i] equals the count of cum[i] <= u
    cdef double u = _uniform(s)
    cdef int i, state = 0
    for i in range(s.k):
        state += u >= s.cum[i]
    return state


cdef inline int _coin_combine(Sampler* s, int pair, const int* combo,
                              const int* need_coin) noexcept nogil:
    # The coin value is computed unconditionally but only consumed (counter
    # advanced) when the pair needs one; avoids a data-dependent branch.
    cdef int need = need_coin[pair]
    cdef int v = combo[pair]
    cdef double u = <double> (_mix64(s.key + (s.counter + 1) * GAMMA) >> 11) * TWO_M53
    cdef int drop = need & (u >= s.q)
    s.counter += need
    return v + drop * (s.k - v)


cdef int _eval_binary(Sampler* s, int height, const int* combo, const int* need_coin,
                      int* stack, bint coins) noexcept nogil:
    # Same visiting order as _eval_node: a node is combined as soon as its right
    # subtree finishes, so coins are drawn exactly where the recursion draws them.
    cdef long j, m, n_pairs
    cdef int v, a, lvl, k1 = s.k + 1
    if height == 0:
        return _leaf(s)
    n_pairs = 1L << (height - 1)
    for j in range(n_pairs):
        a = _leaf(s)
        v = _leaf(s)
        if coins:
            v = _coin_combine(s, a * k1 + v, combo, need_coin)
        else:
            v = combo[a * k1 + v]
        lvl = 1
        m = j + 1
        while (m & 1) == 0:
            if coins:
                v = _coin_combine(s, stack[lvl] * k1 + v, combo, need_coin)
            else:
                v = combo[stack[lvl] * k1 + v]
            m >>= 1
            lvl += 1
        stack[lvl] = v
    return stack[height]


def sample_counts(const double[::1] cum, int code, double q, int arity,
                  const int64_t[::1] table, int k, int height, uint64_t seed,
                  long start, long stop, int64_t[::1] counts):
    cdef Sampler s
    cdef long idx
    cdef uint64_t base = _mix64(seed)
    cdef double dummy = 0.0
    cdef int k1 = k + 1
    cdef int a, b, i
    cdef int* combo
    cdef int* need_coin
    cdef int* stack
    cdef bint binary = code != C_DARY and height <= 40
    s.cum = &cum[0] if cum.shape[0] > 0 else &dummy
    s.table = &table[0]
    s.k = k
    s.code = code
    s.q = q
    s.arity = arity
    combo = <int*> malloc(k1 * k1 * sizeof(int))
    need_coin = <int*> malloc(k1 * k1 * sizeof(int))
    stack = <int*> malloc((height + 1) * sizeof(int))
    if combo == NULL or need_coin == NULL or stack == NULL:
        free(combo)
        free(need_coin)
        free(stack)
        raise MemoryError()
    for a in range(k1):
        for b in range(k1):
            need_coin[a * k1 + b] = 0
            if code == C_TABLE:
                combo[a * k1 + b] = <int> table[a * k1 + b]
            elif a == b:
                combo[a * k1 + b] = a
            elif a == k:
                combo[a * k1 + b] = b
                need_coin[a * k1 + b] = code == C_MUTATION
            elif b == k:
                combo[a * k1 + b] = a
                need_coin[a * k1 + b] = code == C_MUTATION
            else:
                combo[a * k1 + b] = k
    with nogil:
        for idx in range(start, stop):
            s.key = _mix64(base + <uint64_t> idx * GAMMA)
            s.counter = 0
            if binary:
                counts[_eval_binary(&s, height, combo, need_coin, stack, code == C_MUTATION)] += 1
            else:
                counts[_eval_node(&s, height)] += 1
    free(combo)
    free(need_coin)
    free(stack)
