"""Monte Carlo estimation of the root law on finite trees.

Each sample owns a counter-based random stream keyed by
``(master_seed, sample_index)``. Within a sample, values are consumed in
post-order: every leaf takes one value for its state (inverse CDF over the
weights in coordinate order, half-open intervals), and under mutation rules
a node with exactly one infected child takes one more value for its coin,
after both child subtrees are finished. Because streams never depend on
scheduling, counts are bit-identical for any number of workers.
"""
from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _purekernels
from ._backend import kernels
from .rules import DAry, Mutation, RuleError, RuleSet, Standard, Table, kernel_params
from .simplex import Distribution, format_float, make_distribution

MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    height: int
    samples: int
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.height < 0:
            raise ValueError("height must be >= 0")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0 <= self.master_seed <= MAX_SEED:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class RootHistogram:
    counts: tuple[int, ...]
    total: int

    def __post_init__(self):
        if sum(self.counts) != self.total:
            raise ValueError("counts do not add up to total")

    @property
    def k(self) -> int:
        return len(self.counts) - 1

    @property
    def empirical(self) -> Distribution:
        return make_distribution(self.k, [c / self.total for c in self.counts])

    def tv_distance(self, d: Distribution) -> float:
        return 0.5 * sum(abs(a - b) for a, b in zip(self.empirical.weights, d.weights))

    def to_dict(self) -> dict:
        return {"counts": list(self.counts), "total": self.total,
                "empirical": list(self.empirical.weights)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        lines = ["state,count,empirical"]
        for s, (c, e) in enumerate(zip(self.counts, self.empirical.weights), start=1):
            lines.append(f"{s},{c},{format_float(e)}")
        return "\n".join(lines) + "\n"


def combine(children: Sequence[int], rules: RuleSet, k: int, coin: float | None = None) -> int:
    """Parent state from child states (1-based, ``k+1`` is empty).

    ``coin`` is a uniform draw in [0, 1), needed only under mutation rules
    when exactly one child is infected; it is ignored otherwise.
    """
    empty = k + 1
    if len(children) != rules.arity:
        raise RuleError(f"{rules} takes {rules.arity} children, got {len(children)}")
    for c in children:
        if not 1 <= c <= empty:
            raise RuleError(f"state {c} outside 1..{empty}")
    if isinstance(rules, Table):
        if rules.table.k != k:
            raise RuleError("table dimension does not match k")
        return rules.table(*children)
    infected = {c for c in children if c != empty}
    if len(infected) != 1:
        return empty
    (s,) = infected
    if isinstance(rules, Mutation) and empty in children:
        if coin is None:
            raise RuleError("mutation rules need a coin when one child is infected")
        return s if coin < rules.q else empty
    return s


def leaf_cdf(d0: Distribution) -> np.ndarray:
    """Cumulative infection weights; a uniform ``u`` maps to the first state with ``u < cdf``."""
    return np.array(list(itertools.accumulate(d0.infected)), dtype=np.float64)


def sample_stream(master_seed: int, sample_index: int) -> _purekernels.CounterStream:
    return _purekernels.CounterStream(_purekernels.stream_key(master_seed, sample_index))


def sample_root(d0: Distribution, rules: RuleSet, height: int, rng_stream) -> int:
    """One root state (1-based) of a height-``height`` tree, by recursive post-order.

    ``rng_stream`` is any object with a ``uniform()`` method; it is consumed
    in the documented schedule, so a :func:`sample_stream` reproduces the
    counts of :func:`run_sim` sample by sample.
    """
    if height < 0:
        raise ValueError("height must be >= 0")
    code, q, arity, table = kernel_params(rules, d0.k)
    state = _purekernels.eval_node(
        rng_stream, leaf_cdf(d0).tolist(), d0.k, code, q, arity, table.tolist(), height
    )
    return state + 1


def _ranges(samples: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, samples, parts + 1).round().astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_sim(d0: Distribution, rules: RuleSet, cfg: SimConfig, backend=None) -> RootHistogram:
    """Root-state counts over ``cfg.samples`` independent trees."""
    backend = backend or kernels
    code, q, arity, table = kernel_params(rules, d0.k)
    cum = leaf_cdf(d0)
    k1 = d0.k + 1

    def work(span):
        counts = np.zeros(k1, dtype=np.int64)
        backend.sample_counts(cum, code, q, arity, table, d0.k, cfg.height,
                              cfg.master_seed, span[0], span[1], counts)
        return counts

    spans = _ranges(cfg.samples, cfg.workers)
    if cfg.workers == 1:
        parts = [work(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(work, spans))
    total = np.sum(parts, axis=0)
    return RootHistogram(tuple(int(c) for c in total), cfg.samples)


__all__ = [
    "DAry",
    "Mutation",
    "RootHistogram",
    "SimConfig",
    "Standard",
    "Table",
    "combine",
    "leaf_cdf",
    "run_sim",
    "sample_root",
    "sample_stream",
]
