import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treequench import _backend
from treequench.dynamics import evolve
from treequench.oracle import GuardExceeded, enumerate_root
from treequench.rules import CombineTable, DAry, Mutation, RuleError, Standard, Table
from treequench.sim import (
    RootHistogram,
    SimConfig,
    combine,
    leaf_cdf,
    run_sim,
    sample_root,
    sample_stream,
)
from treequench.simplex import make_distribution

from conftest import needs_compiled

D0 = make_distribution(2, [0.4, 0.3, 0.3])


# ------------------------------------------------------------------ combine


def test_combine_standard():
    assert combine((3, 3), Standard(), 2) == 3
    assert combine((1, 1), Standard(), 2) == 1
    assert combine((1, 2), Standard(), 2) == 3
    assert combine((3, 2), Standard(), 2) == 2


def test_combine_mutation_coin():
    m = Mutation(0.5)
    assert combine((1, 3), m, 2, coin=0.9) == 3
    assert combine((1, 3), m, 2, coin=0.2) == 1
    assert combine((2, 2), m, 2) == 2
    assert combine((1, 2), m, 2) == 3
    with pytest.raises(RuleError):
        combine((1, 3), m, 2)


def test_combine_dary_and_table():
    assert combine((1, 3, 1), DAry(3), 2) == 1
    assert combine((1, 2, 3), DAry(3), 2) == 3
    assert combine((3, 3, 3), DAry(3), 2) == 3
    t = Table(CombineTable(2, [[2, 1, 3], [1, 3, 2], [3, 2, 1]]))
    assert combine((1, 1), t, 2) == 2 and combine((2, 3), t, 2) == 2


def test_combine_arity_mismatch():
    with pytest.raises(RuleError):
        combine((1, 2, 3), Standard(), 2)
    with pytest.raises(RuleError):
        combine((1, 4), Standard(), 2)


@given(st.sampled_from([Standard(), Mutation(0.4), DAry(3), DAry(4)]), st.data())
def test_combine_symmetric(rules, data):
    kids = data.draw(st.lists(st.integers(1, 3), min_size=rules.arity, max_size=rules.arity))
    coin = data.draw(st.floats(0, 0.999))
    results = {combine(p, rules, 2, coin=coin) for p in itertools.permutations(kids)}
    assert len(results) == 1


# ------------------------------------------------------------------ sampling


def test_leaf_cdf_half_open():
    d = make_distribution(2, [0.5, 0.0, 0.5])
    assert leaf_cdf(d).tolist() == [0.5, 0.5]

    class Fixed:
        def __init__(self, u):
            self.u = u

        def uniform(self):
            return self.u

    # u = 0.5 lands in [0.5, 1): state 2 has zero width, so empty
    assert sample_root(d, Standard(), 0, Fixed(0.5)) == 3
    assert sample_root(d, Standard(), 0, Fixed(0.4999)) == 1


def test_height_zero_is_leaf_law():
    h = run_sim(D0, Standard(), SimConfig(0, 200_000, 3))
    # binomial 4 sigma with n = 2e5
    for c, p in zip(h.counts, D0.weights):
        assert abs(c / h.total - p) <= 4 * math.sqrt(p * (1 - p) / h.total)


def test_empty_leaves_stay_empty():
    d = make_distribution(2, [0, 0, 1])
    for rules in (Standard(), Mutation(0.6), DAry(3)):
        assert run_sim(d, rules, SimConfig(4, 1000, 1)).counts == (0, 0, 1000)


def test_single_sample():
    h = run_sim(D0, Mutation(0.7), SimConfig(5, 1, 11))
    assert h.total == 1 and sum(h.counts) == 1


@pytest.mark.parametrize("rules", [Standard(), Mutation(0.75), DAry(3),
                                   Table(CombineTable.standard(2))], ids=str)
def test_run_sim_equals_sample_root_loop(rules):
    height = 3 if rules.arity == 2 else 2
    h = run_sim(D0, rules, SimConfig(height, 300, 99))
    counts = [0, 0, 0]
    for i in range(300):
        counts[sample_root(D0, rules, height, sample_stream(99, i)) - 1] += 1
    assert tuple(counts) == h.counts


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_worker_count_does_not_change_counts(workers):
    cfg = SimConfig(6, 20_001, 2024)
    base = run_sim(D0, Mutation(0.6), cfg)
    again = run_sim(D0, Mutation(0.6), SimConfig(6, 20_001, 2024, workers))
    assert base == again
    assert run_sim(D0, Mutation(0.6), cfg) == base


def test_seeds_differ():
    a = run_sim(D0, Standard(), SimConfig(4, 10_000, 1))
    b = run_sim(D0, Standard(), SimConfig(4, 10_000, 2))
    assert a != b


def test_config_validation():
    for bad in ({"height": -1, "samples": 1}, {"height": 1, "samples": 0},
                {"height": 1, "samples": 1, "master_seed": -1},
                {"height": 1, "samples": 1, "master_seed": 1 << 64},
                {"height": 1, "samples": 1, "workers": 0}):
        with pytest.raises(ValueError):
            SimConfig(**bad)


def test_mutation_needs_k2():
    with pytest.raises(RuleError):
        run_sim(make_distribution(3, [0.25] * 4), Mutation(0.5), SimConfig(2, 10))


def test_histogram_serialization():
    h = RootHistogram((3, 1, 0), 4)
    assert h.to_dict() == {"counts": [3, 1, 0], "total": 4, "empirical": [0.75, 0.25, 0.0]}
    assert h.to_csv().splitlines() == ["state,count,empirical", "1,3,0.75", "2,1,0.25", "3,0,0"]
    with pytest.raises(ValueError):
        RootHistogram((1, 1), 3)


def test_stream_is_counter_based():
    s = sample_stream(5, 7)
    vals = [s.uniform() for _ in range(5)]
    assert all(0.0 <= v < 1.0 for v in vals)
    assert vals == [sample_stream(5, 7).uniform() for _ in range(1)] + vals[1:]
    assert len(set(vals)) == 5


def _within_4_sigma(hist, law):
    n = hist.total
    for c, p in zip(hist.counts, law.weights):
        sigma = math.sqrt(max(p * (1 - p), 1e-300) / n)
        if abs(c / n - p) > 4 * sigma + 1e-12:
            return False
    return True


@needs_compiled
@pytest.mark.parametrize("rules", [Standard(), Mutation(0.25), Mutation(0.5), Mutation(0.75),
                                   DAry(3)], ids=str)
@pytest.mark.parametrize("k", [1, 2])
def test_distributional_correctness(rules, k):
    if isinstance(rules, Mutation) and k != 2:
        pytest.skip("mutation rules are k=2 only")
    d0 = make_distribution(k, [0.4, 0.6] if k == 1 else [0.35, 0.25, 0.4])
    for h in range(4):
        hist = run_sim(d0, rules, SimConfig(h, 10**6, 1000 + h))
        try:
            law = enumerate_root(d0, rules, h).distribution
        except GuardExceeded:  # 3^27 configurations for d=3, h=3
            law = evolve(d0, rules, h)
        assert _within_4_sigma(hist, law)


def test_recursion_consistency_height_8():
    d0 = make_distribution(2, [0.36, 0.34, 0.30])
    n = 200_000 if _backend.kernels is not _backend.pure else 2_000
    hist = run_sim(d0, Standard(), SimConfig(8, n, 5))
    assert _within_4_sigma(hist, evolve(d0, Standard(), 8))
