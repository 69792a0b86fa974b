"""Exact root law of small trees by enumerating every leaf assignment.

This deliberately shares nothing with the closed-form maps: it only knows
the per-node rule (:func:`treequench.sim.combine`) and the fact that leaves
are i.i.d. Mutation coins are integrated out exactly, node by node, so the
work is ``(k+1)^(leaves)`` regardless of the rule set.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .rules import Mutation, RuleSet
from .sim import combine
from .simplex import Distribution, make_distribution

MAX_CONFIGURATIONS = 10**7
_CHUNK = 1 << 15


class GuardExceeded(ValueError):
    pass


@dataclass(frozen=True)
class EnumerationResult:
    distribution: Distribution
    configurations: int


def outcome_tensor(rules: RuleSet, k: int) -> np.ndarray:
    """``T[s_1, ..., s_d, s]`` = P(parent is ``s`` | children ``s_1..s_d``), 0-based."""
    k1 = k + 1
    d = rules.arity
    T = np.zeros((k1,) * (d + 1))
    for kids in itertools.product(range(k1), repeat=d):
        states = [s + 1 for s in kids]
        if isinstance(rules, Mutation):
            # coin < q keeps a lone infection, coin >= q drops it
            keep = combine(states, rules, k, coin=0.0)
            drop = combine(states, rules, k, coin=rules.q)
            T[kids + (keep - 1,)] += rules.q
            T[kids + (drop - 1,)] += 1.0 - rules.q
        else:
            T[kids + (combine(states, rules, k) - 1,)] = 1.0
    return T


def _einsum_spec(d: int) -> str:
    letters = "abcdefghij"[:d]
    kids = ",".join(f"n{c}" for c in letters)
    return f"{kids},{letters}s->ns"


def _chunk_law(codes: np.ndarray, probs: np.ndarray, T: np.ndarray, k1: int, d: int,
               height: int) -> np.ndarray:
    n_leaves = d**height
    # digits of each configuration index: leaf j's state, leftmost leaf most significant
    powers = k1 ** np.arange(n_leaves - 1, -1, -1, dtype=np.int64)
    leaves = (codes[:, None] // powers[None, :]) % k1
    weight = np.prod(probs[leaves], axis=1)
    nodes = np.eye(k1)[leaves]  # (n, leaves, k1)
    spec = _einsum_spec(d)
    for _ in range(height):
        n, m, _ = nodes.shape
        groups = nodes.reshape(n, m // d, d, k1)
        parents = [np.einsum(spec, *[groups[:, g, c, :] for c in range(d)], T)
                   for g in range(m // d)]
        nodes = np.stack(parents, axis=1)
    return np.sum(weight[:, None] * nodes[:, 0, :], axis=0)


def enumerate_root(
    d0: Distribution, rules: RuleSet, height: int, order: np.ndarray | None = None
) -> EnumerationResult:
    """Exact law of the root of a height-``height`` tree.

    ``order`` optionally permutes the configuration indices before they are
    visited, to check that the result does not depend on enumeration order.
    """
    if height < 0:
        raise ValueError("height must be >= 0")
    k1 = d0.k + 1
    d = rules.arity
    n_leaves = d**height
    total = k1**n_leaves
    if total > MAX_CONFIGURATIONS:
        raise GuardExceeded(f"{total} leaf configurations exceed the guard {MAX_CONFIGURATIONS}")
    T = outcome_tensor(rules, d0.k)
    probs = d0.as_array()
    if order is None:
        order = np.arange(total, dtype=np.int64)
    elif sorted(order.tolist()) != list(range(total)):
        raise ValueError("order must be a permutation of the configuration indices")
    partials = [
        _chunk_law(order[a:a + _CHUNK], probs, T, k1, d, height)
        for a in range(0, total, _CHUNK)
    ]
    law = np.sum(np.array(partials), axis=0)
    return EnumerationResult(make_distribution(d0.k, law.tolist()), total)
