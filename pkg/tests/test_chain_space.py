from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from heavymetric import heavy_tail as ht
from heavymetric._lp import lp_norm
from heavymetric.chain_space import (
    build_chain,
    grid_indices,
    hausdorff_truncation_gap,
    power_sum_constant,
    power_sum_constant_search,
    power_sum_gap,
    sample_grid_chain,
    threshold_increments,
)
from heavymetric.generators import ModelSpec

nonneg = arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 5)),
                elements=st.floats(min_value=0.0, max_value=1e3))
ps = st.sampled_from([1.0, 2.0, 3.5, math.inf])


def test_build_chain_examples():
    inc = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 1.0]])
    m = build_chain(inc, "maxima", 1.0)
    np.testing.assert_array_equal(m.points[-1], [3.0, 2.0])
    w = build_chain(inc, "walk", 1.0, scale=0.5, n=6)
    np.testing.assert_array_equal(w.points[-1], [4.0, 3.0])
    assert w.times[-1] == 0.5
    assert w.distance(0, 3) == 3.5
    assert m.diameter() == 5.0


def test_build_chain_validation():
    with pytest.raises(ValueError):
        build_chain(np.array([[-1.0]]), "maxima", 1.0)
    with pytest.raises(ValueError):
        build_chain(np.ones((2, 2)), "sideways", 1.0)
    with pytest.raises(ValueError):
        build_chain(np.ones((2, 2)), "walk", 1.0, scale=0.0)


@given(nonneg, ps, st.sampled_from(["maxima", "walk"]))
@settings(max_examples=60)
def test_chain_metric_and_diameter(inc, p, scheme):
    c = build_chain(inc, scheme, p, scale=0.25)
    D = c.distance_matrix()
    assert np.array_equal(D, D.T) and np.all(np.diag(D) == 0)
    tri = D[:, :, None] + D[None, :, :] - D[:, None, :]
    assert tri.min() >= -1e-9 * max(1.0, D.max())
    # the shortcut diameter agrees with the full matrix
    assert c.diameter() == pytest.approx(D.max(), rel=1e-12, abs=1e-300)


@given(nonneg, ps, st.floats(min_value=0.01, max_value=2.0))
@settings(max_examples=60)
def test_truncation_gap_bounds_pointwise_error(inc, p, s):
    for scheme in ("maxima", "walk"):
        full = build_chain(inc, scheme, p, scale=1e-2)
        cut = build_chain(threshold_increments(inc, p, s, 100.0), scheme, p, scale=1e-2)
        gap = hausdorff_truncation_gap(full, cut)
        err = (np.array([lp_norm(a - b, p) for a, b in zip(full.points, cut.points)]) * 1e-2).max()
        assert err <= gap * (1 + 1e-12) + 1e-300


def test_threshold_increments():
    x = np.array([[1.0, 1.0], [3.0, 0.0]])
    out = threshold_increments(x, 1.0, 1.0, 2.0)
    np.testing.assert_array_equal(out, [[0.0, 0.0], [3.0, 0.0]])
    assert x[0, 0] == 1.0


def test_power_sum_constant_dominates_search():
    for m in (2, 3):
        for p in (1.5, 2.0, 3.0):
            assert power_sum_constant_search(m, p, levels=6) <= power_sum_constant(m, p)


@given(st.lists(st.floats(min_value=-100, max_value=100), min_size=2, max_size=5),
       st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_power_sum_inequality(xs, p):
    lhs, rhs = power_sum_gap(xs, p)
    assert lhs <= power_sum_constant(len(xs), p) * rhs * (1 + 1e-9) + 1e-9


def test_grid_indices():
    np.testing.assert_array_equal(grid_indices(10, 1.0, [0.0, 0.25, 0.5, 1.0]), [0, 2, 5, 10])
    np.testing.assert_array_equal(grid_indices(3, 1.0, [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]), [0, 1, 2, 3])


def test_dense_grid_chain_matches_direct_build():
    spec = ModelSpec("IidRegVar", 0.5)
    grid = np.linspace(0, 1, 5)
    gc = sample_grid_chain(spec, "walk", 20, 1.0, grid, ht.stream(1, 2))
    assert gc.points is not None and len(gc) == 5
    D = gc.distance_matrix()
    assert D[0, -1] == pytest.approx(gc.diameter)
    assert np.all(np.diff(gc.origin_distances) >= 0)


@pytest.mark.parametrize("scheme", ["maxima", "walk"])
def test_sparse_sampler_matches_dense(scheme):
    spec = ModelSpec("IidRegVar", 0.5)
    grid = np.linspace(0, 1, 3)
    n = 200
    sparse = [sample_grid_chain(spec, scheme, n, 1.0, grid, ht.stream(9, 0, k), dense_budget=1000)
              for k in range(1500)]
    dense = [sample_grid_chain(spec, scheme, n, 1.0, grid, ht.stream(9, 1, k))
             for k in range(1500)]
    assert sparse[0].points is None and dense[0].points is not None
    for col in (1, 2):
        a = [c.origin_distances[col] for c in sparse]
        b = [c.origin_distances[col] for c in dense]
        assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_spike_grid_chain_uses_touched_coordinates():
    spec = ModelSpec("SingleSpike", 1.0, beta=2.0)
    gc = sample_grid_chain(spec, "maxima", 50, 1.0, np.linspace(0, 1, 4), ht.stream(3))
    assert gc.points.shape[1] <= 50
    assert gc.diameter == pytest.approx(gc.origin_distances[-1])
