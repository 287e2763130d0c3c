from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavymetric.chain_space import build_chain, hausdorff_truncation_gap, threshold_increments
from heavymetric.gh import (
    Correspondence,
    distortion,
    gh_bounds,
    gh_exact,
    gh_lower_bound,
    time_correspondence,
)


def brute_force_gh(DA, DB):
    """Minimum over every covering relation, by enumeration."""
    pairs = [(i, j) for i in range(len(DA)) for j in range(len(DB))]
    best = math.inf
    for mask in range(1, 1 << len(pairs)):
        rel = [pairs[k] for k in range(len(pairs)) if mask >> k & 1]
        if {i for i, _ in rel} != set(range(len(DA))) or {j for _, j in rel} != set(range(len(DB))):
            continue
        dis = max(abs(DA[i, k] - DB[j, l]) for i, j in rel for k, l in rel)
        best = min(best, dis)
    return best / 2


def random_metric(rng, size):
    pts = rng.normal(size=(size, 2))
    return np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))


def test_exact_matches_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(60):
        DA = random_metric(rng, int(rng.integers(1, 4)))
        DB = random_metric(rng, int(rng.integers(1, 4)))
        assert gh_exact(DA, DB).upper == pytest.approx(brute_force_gh(DA, DB), abs=1e-12)


def test_exact_known_values():
    two = np.array([[0.0, 1.0], [1.0, 0.0]])
    one = np.zeros((1, 1))
    assert gh_exact(two, one).upper == 0.5
    assert gh_exact(two, two).upper == 0.0
    tri = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=float)
    assert gh_exact(tri, two).upper == 0.5


def test_exact_cap():
    with pytest.raises(ValueError):
        gh_exact(np.zeros((6, 6)), np.zeros((1, 1)))


def test_correspondence_must_cover():
    with pytest.raises(ValueError):
        Correspondence(((0, 0),), 2, 1)
    with pytest.raises(ValueError):
        Correspondence(((0, 3),), 1, 1)
    c = Correspondence(((1, 0), (0, 0), (1, 0)), 2, 1)
    assert c.pairs == ((0, 0), (1, 0))


def test_distortion_value():
    DA = np.array([[0.0, 2.0], [2.0, 0.0]])
    DB = np.zeros((1, 1))
    assert distortion(Correspondence(((0, 0), (1, 0)), 2, 1), DA, DB) == 2.0


@st.composite
def chain_pairs(draw):
    def chain():
        k = draw(st.integers(1, 4))
        d = draw(st.integers(1, 3))
        inc = draw(st.lists(st.integers(0, 20), min_size=k * d, max_size=k * d))
        scheme = draw(st.sampled_from(["maxima", "walk"]))
        return build_chain(np.array(inc, float).reshape(k, d), scheme, draw(st.sampled_from([1.0, 2.0, math.inf])))
    return chain(), chain()


@given(chain_pairs())
@settings(max_examples=200, deadline=None)
def test_sandwich(pair):
    a, b = pair
    exact = gh_exact(a, b).upper
    est = gh_bounds(a, b)
    assert est.lower <= exact <= est.upper
    assert gh_lower_bound(a, b) <= exact


def test_bounds_identical_chain_is_zero():
    c = build_chain(np.arange(12, dtype=float).reshape(6, 2), "walk", 2.0)
    est = gh_bounds(c, c)
    assert est.lower == est.upper == 0.0


def test_time_correspondence_monotone():
    f, g = time_correspondence(np.linspace(0, 1, 5), np.linspace(0, 1, 9))
    assert np.all(np.diff(f) >= 0) and np.all(np.diff(g) >= 0)
    np.testing.assert_array_equal(f, [0, 2, 4, 6, 8])


def test_large_chains_skip_local_search():
    rng = np.random.default_rng(0)
    a = build_chain(rng.pareto(1.0, (400, 3)), "maxima", math.inf)
    b = build_chain(rng.pareto(1.0, (400, 3)), "maxima", math.inf)
    est = gh_bounds(a, b)
    assert 0 <= est.lower <= est.upper


def test_exact_oracle_examples():
    path = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    assert gh_exact(path, np.zeros((1, 1))).upper == 1.0
    a = np.array([[0.0, 3.0], [3.0, 0.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert gh_exact(a, b).upper == 1.0


def test_exact_symmetric_isometry_and_triangle():
    rng = np.random.default_rng(12)
    for _ in range(40):
        A, B, C = (random_metric(rng, int(rng.integers(1, 5))) for _ in range(3))
        ab, ba = gh_exact(A, B).upper, gh_exact(B, A).upper
        assert ab == pytest.approx(ba, abs=1e-12)
        assert gh_exact(A, C).upper <= ab + gh_exact(B, C).upper + 1e-12
        perm = rng.permutation(len(A))
        assert gh_exact(A, A[np.ix_(perm, perm)]).upper == 0.0


def test_upper_bound_below_truncation_gap():
    rng = np.random.default_rng(5)
    for _ in range(50):
        inc = rng.pareto(1.0, (6, 3))
        for scheme in ("maxima", "walk"):
            full = build_chain(inc, scheme, 2.0, scale=0.1)
            cut = build_chain(threshold_increments(inc, 2.0, 5.0, 1.0), scheme, 2.0, scale=0.1)
            assert gh_bounds(full, cut).upper <= hausdorff_truncation_gap(full, cut) + 1e-12
