import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from augsel.acquisition import (
    SELECT_MAX,
    SELECT_MIN,
    AcquisitionScore,
    entropy_score,
    margin_score,
    neighbour_margin_score,
    random_select,
    score_pool,
    select_batch,
)
from augsel.errors import DomainError


def fsum_entropy(p):
    return -math.fsum(v * math.log(v) for v in p if v > 0)


def sort_margin(p):
    # independent oracle: Python's sorted() on (-prob, class) pairs
    ranked = sorted((-v, c) for c, v in enumerate(p))
    return -ranked[0][0] - (-ranked[1][0]), ranked[0][1], ranked[1][1]


# ---------------------------------------------------------------- entropy


def test_entropy_uniform():
    s = entropy_score([0.25] * 4)
    assert s.value == pytest.approx(math.log(4), abs=1e-12)
    assert s.direction == SELECT_MAX


def test_entropy_one_hot_is_zero():
    assert entropy_score([1, 0, 0, 0]).value == 0.0


def test_entropy_skewed():
    p = (0.7, 0.1, 0.1, 0.1)
    assert entropy_score(p).value == pytest.approx(fsum_entropy(p), abs=1e-12)
    assert entropy_score(p).value == pytest.approx(0.940447, abs=2e-6)


@pytest.mark.parametrize("p", [(0.5, 0.6, -0.1, 0.0), (0.3, 0.3, 0.3, 0.3), (0.5, float("nan"), 0.5, 0)])
def test_invalid_vectors_rejected(p):
    for scorer in (entropy_score, margin_score, neighbour_margin_score):
        with pytest.raises(DomainError):
            scorer(p)


# ---------------------------------------------------------------- margins


@pytest.mark.parametrize(
    "p, expected",
    [((0.4, 0.35, 0.15, 0.10), None), ((0.5, 0.5, 0, 0), 0.0), ((1, 0, 0, 0), 1.0)],
)
def test_margin_examples(p, expected):
    s = margin_score(p)
    assert s.direction == SELECT_MIN
    if expected is None:
        expected = sort_margin(p)[0]
        assert expected == pytest.approx(0.05)
    assert s.value == pytest.approx(expected, abs=1e-15)


def test_neighbour_margin_adjacent():
    s = neighbour_margin_score((0.4, 0.35, 0.15, 0.10))
    assert s.finite and s.value == pytest.approx(sort_margin((0.4, 0.35, 0.15, 0.10))[0]) == pytest.approx(0.05)


def test_neighbour_margin_non_adjacent_is_excluded():
    s = neighbour_margin_score((0.45, 0.05, 0.45, 0.05))
    assert not s.finite and s.value == math.inf
    assert s.fallback == 0.0


def test_neighbour_margin_inner_pair():
    s = neighbour_margin_score((0.1, 0.5, 0.4, 0.0))
    assert s.finite and s.value == pytest.approx(0.1, abs=1e-15)


def test_infinite_score_serializes_without_infinity():
    d = neighbour_margin_score((0.45, 0.05, 0.45, 0.05)).to_dict()
    assert d == {"value": None, "finite": False, "fallback": 0.0}


# ---------------------------------------------------------------- score_pool


def test_score_pool_empty():
    assert score_pool(np.zeros((0, 4)), "entropy") == []


def test_score_pool_identical_rows():
    rows = np.tile([0.1, 0.2, 0.3, 0.4], (5, 1))
    for strategy in ("entropy", "margin", "neighbour-margin"):
        scores = score_pool(rows, strategy)
        assert len({s.value for s in scores}) == 1


def test_score_pool_entropy_composition():
    scores = score_pool(np.array([[0.25] * 4, [1, 0, 0, 0]]), "entropy")
    assert [s.value for s in scores] == pytest.approx([math.log(4), 0.0])


def test_score_pool_reports_bad_row():
    rows = np.array([[0.25] * 4, [0.5, 0.5, 0.5, 0.0]])
    with pytest.raises(DomainError, match="row 1"):
        score_pool(rows, "margin")


def test_score_pool_rejects_unscored_strategy():
    with pytest.raises(DomainError):
        score_pool(np.full((1, 4), 0.25), "coreset")


# ---------------------------------------------------------------- select_batch


def mins(values):
    return [AcquisitionScore(v, SELECT_MIN) for v in values]


def test_select_orders_by_score():
    assert select_batch(mins([0.3, 0.1, 0.2]), 2).chosen_ids == [1, 2]


def test_select_index_tie_break():
    assert select_batch(mins([0.2, 0.2, 0.2]), 1).chosen_ids == [0]


def test_select_max_direction():
    scores = [AcquisitionScore(v, SELECT_MAX) for v in (0.3, 0.9, 0.1)]
    assert select_batch(scores, 2).chosen_ids == [1, 0]


def test_select_fallback_fills_from_excluded():
    rows = [(0.45, 0.05, 0.45, 0.05), (0.5, 0.0, 0.0, 0.5), (0.7, 0.25, 0.05, 0.0), (0.6, 0.0, 0.4, 0.0)]
    scores = [neighbour_margin_score(r) for r in rows]
    assert [s.finite for s in scores] == [False, False, True, False]
    out = select_batch(scores, 3)
    # oracle: finite first, then excluded rows by their plain margin, index tie-break
    excluded = sorted((sort_margin(rows[i])[0], i) for i in (0, 1, 3))
    assert out.chosen_ids == [2] + [i for _, i in excluded[:2]]
    assert out.used_fallback


def test_select_spec_fallback_example():
    rows = [(0.45, 0.05, 0.45, 0.05), (0.3, 0.8 - 0.3, 0.1, 0.1), (0.6, 0.0, 0.4, 0.0)]
    scores = [neighbour_margin_score(r) for r in rows]
    out = select_batch(scores, 2)
    assert out.chosen_ids[0] == 1
    ranked = sorted((sort_margin(rows[i])[0], i) for i in (0, 2))
    assert out.chosen_ids[1] == ranked[0][1]


def test_select_empty_and_errors():
    assert select_batch([], 3).chosen_ids == []
    with pytest.raises(DomainError):
        select_batch(mins([0.1]), 0)
    with pytest.raises(DomainError):
        select_batch([AcquisitionScore(0.1, SELECT_MIN), AcquisitionScore(0.2, SELECT_MAX)], 1)


# ---------------------------------------------------------------- random


def test_random_exhaustive_draw():
    assert sorted(random_select(5, 5, 1).chosen_ids) == [0, 1, 2, 3, 4]


def test_random_deterministic():
    assert random_select(100, 10, 7).chosen_ids == random_select(100, 10, 7).chosen_ids
    assert len(set(random_select(100, 10, 7).chosen_ids)) == 10


def test_random_empty_pool():
    assert random_select(0, 3, 1).chosen_ids == []


# ---------------------------------------------------------------- properties


@st.composite
def prob_vectors(draw, k_min=2, k_max=6):
    k = draw(st.integers(k_min, k_max))
    raw = draw(st.lists(st.integers(0, 20), min_size=k, max_size=k).filter(lambda v: sum(v) > 0))
    total = sum(raw)
    return [v / total for v in raw]


@settings(max_examples=300, deadline=None)
@given(prob_vectors())
def test_entropy_bounds(p):
    h = entropy_score(p).value
    assert -1e-15 <= h <= math.log(len(p)) + 1e-12


@settings(max_examples=200, deadline=None)
@given(prob_vectors(), st.randoms(use_true_random=False))
def test_entropy_permutation_invariant(p, rnd):
    q = list(p)
    rnd.shuffle(q)
    assert entropy_score(q).value == pytest.approx(entropy_score(p).value, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(prob_vectors())
def test_margin_bounds_and_ties(p):
    m = margin_score(p).value
    assert 0.0 <= m <= 1.0
    top = sorted(p, reverse=True)
    assert (m == 0.0) == (top[0] == top[1])


@settings(max_examples=300, deadline=None)
@given(prob_vectors())
def test_neighbour_margin_consistency(p):
    nm, plain = neighbour_margin_score(p), margin_score(p)
    _, first, second = sort_margin(p)
    assert nm.finite == (abs(first - second) == 1)
    if nm.finite:
        assert nm.value == plain.value
    else:
        assert nm.fallback == plain.value


score_values = st.lists(st.integers(0, 6), min_size=0, max_size=25)


@settings(max_examples=300, deadline=None)
@given(score_values, st.lists(st.booleans(), min_size=25, max_size=25), st.integers(1, 30), st.booleans())
def test_selection_matches_sort_oracle(values, excluded, budget, maximize):
    direction = SELECT_MAX if maximize else SELECT_MIN
    sign = -1 if maximize else 1
    scores = [
        AcquisitionScore(math.inf, direction, False, v / 7) if excluded[i] else AcquisitionScore(v / 7, direction)
        for i, v in enumerate(values)
    ]
    key = [(excluded[i], sign * values[i], i) for i in range(len(values))]
    expected = [i for *_, i in sorted(key)][:budget]
    assert select_batch(scores, budget).chosen_ids == expected


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=20), st.integers(1, 20))
def test_selection_monotone_invariance(values, budget):
    base = select_batch(mins([float(v) for v in values]), budget).chosen_ids
    for f in (lambda v: 3.0 * v + 7.0, lambda v: math.exp(v / 10.0), lambda v: v**3):
        assert select_batch(mins([f(float(v)) for v in values]), budget).chosen_ids == base


def test_selection_matches_exhaustive_permutations():
    # tiny brute force: the chosen list is the lexicographically best ordering of (score, index)
    values = [0.2, 0.1, 0.2, 0.05]
    best = min(itertools.permutations(range(4)), key=lambda perm: [(values[i], i) for i in perm])
    assert select_batch(mins(values), 4).chosen_ids == list(best)
