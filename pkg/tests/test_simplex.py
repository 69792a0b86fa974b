import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treequench.simplex import (
    EPS_SUM,
    Distribution,
    SimplexError,
    make_distribution,
    max_infected_block,
)

from conftest import distributions


def test_valid_distribution():
    d = make_distribution(2, [0.4, 0.3, 0.3])
    assert d.k == 2
    assert d.weights == (0.4, 0.3, 0.3)
    assert d.empty == 0.3


def test_sum_off_by_a_tenth_rejected():
    with pytest.raises(SimplexError):
        make_distribution(2, [0.4, 0.3, 0.2])


def test_single_infection_state():
    d = make_distribution(1, [0.5, 0.5])
    assert d.k == 1 and d.infected == (0.5,)


@pytest.mark.parametrize("k, w", [(0, [1.0]), (2, [0.5, 0.5]), (2, [1.2, -0.1, -0.1]),
                                  (1, [float("nan"), 1.0])])
def test_rejections(k, w):
    with pytest.raises(SimplexError):
        make_distribution(k, w)


def test_tiny_negative_clamped_and_renormalized():
    d = make_distribution(2, [0.5, -1e-14, 0.5 + 1e-13])
    assert d.weights[1] == 0.0
    assert min(d.weights) >= 0.0
    assert abs(sum(d.weights) - 1.0) <= EPS_SUM


def test_constructor_is_strict():
    with pytest.raises(SimplexError):
        Distribution(2, (0.5, 0.5, 0.1))


@pytest.mark.parametrize(
    "w, tol, expected",
    [
        ([0.4, 0.4, 0.2], 0.0, (2, 0.4, [1, 2])),
        ([0.5, 0.3, 0.2], 0.0, (1, 0.5, [1])),
        ([0.4, 0.4 - 1e-15, 0.2 + 1e-15], 1e-12, (2, 0.4, [1, 2])),
    ],
)
def test_max_infected_block(w, tol, expected):
    assert max_infected_block(make_distribution(len(w) - 1, w), tol) == expected


def test_max_block_never_contains_empty():
    d = make_distribution(2, [0.1, 0.1, 0.8])
    assert max_infected_block(d, 1.0)[2] == [1, 2]


@given(distributions())
def test_make_distribution_output_is_on_simplex(d):
    assert all(x >= 0 for x in d.weights)
    assert abs(sum(d.weights) - 1.0) <= EPS_SUM


@given(st.data())
def test_distinct_entries_give_argmax(data):
    k = data.draw(st.integers(1, 6))
    vals = data.draw(st.lists(st.integers(1, 10**6), min_size=k, max_size=k, unique=True))
    total = sum(vals) + 10**6
    d = make_distribution(k, [v / total for v in vals] + [10**6 / total])
    count, top, idx = max_infected_block(d, 0.0)
    assert count == 1
    assert idx == [vals.index(max(vals)) + 1]
    assert top == max(d.infected)


@given(distributions(min_k=2), st.randoms())
def test_block_indices_permute_with_coordinates(d, rnd):
    perm = list(range(d.k))
    rnd.shuffle(perm)
    moved = d.permute(perm)
    _, _, idx = max_infected_block(d, 1e-9)
    _, _, idx2 = max_infected_block(moved, 1e-9)
    # new state j holds old state perm[j]
    assert sorted(perm[j - 1] + 1 for j in idx2) == idx


def test_json_and_csv_roundtrip():
    d = make_distribution(2, [0.1, 0.2, 0.7])
    assert json.loads(d.to_json()) == {"k": 2, "weights": [0.1, 0.2, 0.7]}
    assert Distribution.from_json(d.to_json()) == d
    assert d.to_csv_row() == "0.10000000000000001,0.20000000000000001,0.69999999999999996"
    assert Distribution.from_csv_row(d.to_csv_row()) == d
