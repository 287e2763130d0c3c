from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavymetric.counting_measure import (
    CountingMeasure,
    count_above,
    dm,
    embed,
    norm,
    restrict_above,
    truncate,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
measures = st.lists(finite, max_size=12).map(CountingMeasure)
ps = st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf])


def test_embed_drops_zeros_and_sorts():
    mu = embed([0.0, 1.0, -3.0, 0.0, 2.0])
    assert list(mu.atoms) == [-3.0, 2.0, 1.0]
    assert len(mu) == 3


def test_ties_put_positive_first():
    assert list(CountingMeasure([-2.0, 2.0, 1.0]).atoms) == [2.0, -2.0, 1.0]


def test_atoms_read_only():
    mu = embed([1.0, 2.0])
    with pytest.raises(ValueError):
        mu.atoms[0] = 5.0


def test_dm_examples():
    a, b = embed([3.0, 1.0]), embed([2.0])
    assert dm(a, b, 1) == 2.0
    assert dm(a, b, 2) == math.sqrt(2.0)
    assert dm(a, b, math.inf) == 1.0
    assert dm(embed([]), embed([4.0, -3.0]), 2) == 5.0


def test_norm_examples():
    mu = embed([3.0, -4.0])
    assert norm(mu, 2) == 5.0
    assert norm(mu, 1) == 7.0
    assert norm(mu, math.inf) == 4.0
    assert norm(embed([]), 2) == 0.0


def test_truncate_and_restrict():
    mu = embed([5.0, -1.0, 3.0, 0.5])
    assert list(truncate(mu, 2).atoms) == [5.0, 3.0]
    assert list(truncate(mu, 10).atoms) == list(mu.atoms)
    assert list(restrict_above(mu, 1.0).atoms) == [5.0, 3.0]
    assert count_above(mu, 0.75) == 3
    with pytest.raises(ValueError):
        truncate(mu, -1)
    with pytest.raises(ValueError):
        restrict_above(mu, 0.0)


def test_json_round_trip():
    mu = embed([1.5, -2.25, 1e-300])
    assert CountingMeasure.from_json(mu.to_json()) == mu
    assert hash(CountingMeasure.from_json(mu.to_json())) == hash(mu)


@given(measures, measures, ps)
def test_dm_symmetric_nonnegative(a, b, p):
    assert dm(a, b, p) == dm(b, a, p) >= 0.0
    assert dm(a, a, p) == 0.0


@given(measures, measures, measures, ps)
@settings(max_examples=200)
def test_dm_triangle(a, b, c, p):
    lhs = dm(a, c, p)
    rhs = dm(a, b, p) + dm(b, c, p)
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@given(st.lists(finite, max_size=12), ps)
def test_norm_is_distance_to_empty(values, p):
    mu = CountingMeasure(values)
    assert norm(mu, p) == dm(mu, CountingMeasure(), p)


@given(st.lists(finite, max_size=12), st.integers(min_value=0, max_value=15), ps)
def test_truncation_error_monotone(values, k, p):
    mu = CountingMeasure(values)
    assert dm(mu, truncate(mu, k + 1), p) <= dm(mu, truncate(mu, k), p)


@given(st.lists(finite, max_size=12), st.permutations(range(12)))
def test_canonical_order_ignores_insertion(values, perm):
    shuffled = [values[i] for i in perm if i < len(values)]
    assert CountingMeasure(values) == CountingMeasure(shuffled)


def test_bad_p_rejected():
    with pytest.raises(ValueError):
        dm(embed([1.0]), embed([2.0]), 0.5)


def test_opposite_sign_ties_follow_the_fixed_rule():
    # both sides sort to (5, -5), so the ordered matching pairs equal atoms
    assert dm(CountingMeasure([5.0, -5.0]), CountingMeasure([-5.0, 5.0]), 1) == 0.0
