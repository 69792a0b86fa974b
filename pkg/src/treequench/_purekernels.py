"""Pure-Python kernels. Reference implementation and fallback for ``_ckernels``.

Every floating-point expression here is written in the same order as the
Cython version so both produce bit-identical results.
"""
from __future__ import annotations

from .rules import DARY, MUTATION, STANDARD, TABLE

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
EPS_SUM = 1e-12

STATUS_MAXITER, STATUS_CONVERGED, STATUS_RENORM_FAILED = 0, 1, -1

BACKEND = "python"


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(master_seed, sample_index):
    return mix64((mix64(master_seed) + sample_index * GAMMA) & MASK64)


class CounterStream:
    """Sequential uniforms from a counter-based generator keyed by a 64-bit key."""

    __slots__ = ("key", "counter")

    def __init__(self, key, counter=0):
        self.key = key & MASK64
        self.counter = counter

    def next_u64(self):
        self.counter += 1
        return mix64((self.key + self.counter * GAMMA) & MASK64)

    def uniform(self):
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)


def _power(t, n):
    r = 1.0
    for _ in range(n):
        r *= t
    return r


def map_step(x, code, q, arity, table):
    """One raw (unnormalized) application of the rule's map to the list ``x``."""
    k1 = len(x)
    k = k1 - 1
    if code == STANDARD:
        e = x[k]
        y = [xi * xi + 2.0 * xi * e for xi in x[:k]]
        s = 0.0
        acc = 0.0
        for j in range(k):
            acc += x[j] * s
            s += x[j]
        y.append(e * e + 2.0 * acc)
        return y
    if code == MUTATION:
        x0, x1, x2 = x
        return [
            x0 * x0 + 2.0 * q * x0 * x2,
            x1 * x1 + 2.0 * q * x1 * x2,
            x2 * x2 + 2.0 * x0 * x1 + 2.0 * (1.0 - q) * x0 * x2 + 2.0 * (1.0 - q) * x1 * x2,
        ]
    if code == DARY:
        e = x[k]
        ep = _power(e, arity)
        y = [_power(x[i] + e, arity) - ep for i in range(k)]
        total = 0.0
        for v in y:
            total += v
        y.append(1.0 - total)
        return y
    if code == TABLE:
        y = [0.0] * k1
        for i in range(k1):
            for j in range(k1):
                y[table[i * k1 + j]] += x[i] * x[j]
        return y
    raise ValueError(f"unknown rule code {code}")


def renormalize(y):
    """Clamp round-off negatives and divide by the sum; ``None`` if ``y`` is off the simplex."""
    for i, v in enumerate(y):
        if v < 0.0:
            if v < -EPS_SUM:
                return None
            y[i] = 0.0
    s = 0.0
    for v in y:
        s += v
    if abs(s - 1.0) > EPS_SUM:
        return None
    return [v / s for v in y]


def run_map(x0, out, code, q, arity, table, n_max, conv_tol):
    """Iterate the map from ``x0`` for at most ``n_max`` steps.

    Rows of ``out`` receive successive states; a single-row ``out`` is
    overwritten in place so arbitrarily long runs need O(k) memory.
    Returns ``(steps_taken, status)``.
    """
    x = [float(v) for v in x0]
    table = [int(v) for v in table]
    stream = out.shape[0] == 1
    for t in range(n_max):
        y = renormalize(map_step(x, code, q, arity, table))
        if y is None:
            return t, STATUS_RENORM_FAILED
        diff = 0.0
        for a, b in zip(x, y):
            dv = abs(b - a)
            if dv > diff:
                diff = dv
        out[0 if stream else t, :] = y
        x = y
        if diff < conv_tol:
            return t + 1, STATUS_CONVERGED
    return n_max, STATUS_MAXITER


def eval_node(stream, cum, k, code, q, arity, table, h):
    """Post-order evaluation of one subtree of height ``h``; returns a 0-based state."""
    if h == 0:
        u = stream.uniform()
        state = 0
        while state < k and u >= cum[state]:
            state += 1
        return state
    if code == TABLE:
        a = eval_node(stream, cum, k, code, q, arity, table, h - 1)
        b = eval_node(stream, cum, k, code, q, arity, table, h - 1)
        return table[a * (k + 1) + b]
    if code == MUTATION:
        a = eval_node(stream, cum, k, code, q, arity, table, h - 1)
        b = eval_node(stream, cum, k, code, q, arity, table, h - 1)
        if a == b:
            return a
        if a == k:
            single = b
        elif b == k:
            single = a
        else:
            return k
        return single if stream.uniform() < q else k
    acc = k
    conflict = False
    for _ in range(arity):
        c = eval_node(stream, cum, k, code, q, arity, table, h - 1)
        if c != k:
            if acc == k:
                acc = c
            elif acc != c:
                conflict = True
    return k if conflict else acc


def sample_counts(cum, code, q, arity, table, k, height, seed, start, stop, counts):
    """Add root states of samples ``start..stop-1`` into ``counts``."""
    cum = [float(v) for v in cum]
    table = [int(v) for v in table]
    base = mix64(seed)
    for idx in range(start, stop):
        stream = CounterStream(mix64((base + idx * GAMMA) & MASK64))
        counts[eval_node(stream, cum, k, code, q, arity, table, height)] += 1
