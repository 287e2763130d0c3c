"""Prelimit chains {0, Y_1, ..., Y_n} of partial maxima or partial sums.

:class:`Chain` materializes every point and is meant for moderate sizes
(tests, GH search, export).  :func:`sample_grid_chain` streams the
increments of a model and keeps only the points at a set of grid times,
which is what the Monte Carlo experiments need at large n and d.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import heavy_tail as ht
from ._lp import INF, check_p, lp_norm, row_norms
from .generators import ModelKind, ModelSpec, sample_increments, sample_spikes, validate_scheme

MAXIMA = "maxima"
WALK = "walk"
SCHEMES = (MAXIMA, WALK)
DEFAULT_CAP = 4096


def _check_scheme(scheme: str) -> str:
    scheme = str(scheme).lower()
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return scheme


@dataclass(frozen=True)
class Chain:
    """Finite metric space of chain points with the scaled l_p metric.

    ``points[0]`` is the origin; ``times[i] = i / n``.
    """

    points: np.ndarray
    scheme: str
    p: float
    scale: float
    times: np.ndarray
    increments: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def distance(self, i: int, j: int) -> float:
        return lp_norm(self.points[j] - self.points[i], self.p) * self.scale

    def distances_from_origin(self) -> np.ndarray:
        return row_norms(self.points, self.p) * self.scale

    def distance_matrix(self, cap: int = DEFAULT_CAP) -> np.ndarray:
        return distance_matrix(self, cap)

    def diameter(self) -> float:
        if self.increments is not None and np.all(self.increments >= 0):
            # nonnegative increments: every point lies componentwise between
            # the origin and the last point
            return lp_norm(self.points[-1], self.p) * self.scale
        return float(distance_matrix(self).max())


def build_chain(increments, scheme: str, p: float, scale: float = 1.0, n: int | None = None) -> Chain:
    """Cumulative maxima or sums of the increments, with the origin prepended.

    Parameters
    ----------
    increments : array of shape (k, d)
    scheme : "maxima" or "walk"
    p : float
    scale : float
        Factor applied to every distance, normally 1/a_n.
    n : int, optional
        Time normalization; point i sits at time i/n (default n = k).
    """
    scheme = _check_scheme(scheme)
    p = check_p(p)
    x = np.asarray(increments, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("increments must be a nonempty (k, d) array")
    if not scale > 0:
        raise ValueError("scale must be positive")
    if scheme == MAXIMA:
        if np.any(x < 0):
            raise ValueError("the maxima scheme needs nonnegative increments")
        body = np.maximum.accumulate(x, axis=0)
    else:
        body = np.cumsum(x, axis=0)
    points = np.vstack([np.zeros((1, x.shape[1])), body])
    k = x.shape[0]
    n = k if n is None else int(n)
    times = np.arange(k + 1, dtype=float) / n
    return Chain(points, scheme, p, float(scale), times, x.copy())


def threshold_increments(increments, p: float, s: float, a_n: float) -> np.ndarray:
    """Zero every increment whose l_p norm is at most ``a_n * s``."""
    if not (s > 0 and a_n > 0):
        raise ValueError("s and a_n must be positive")
    p = check_p(p)
    x = np.array(increments, dtype=float, copy=True)
    if x.ndim == 1:
        x = x[None, :]
    small = row_norms(x, p) <= a_n * s
    x[small] = 0.0
    return x


def distance_matrix(chain, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Full matrix of scaled distances; refuses chains longer than ``cap``."""
    pts = chain.points
    L = pts.shape[0]
    if L > cap:
        raise ValueError(f"chain has {L} points, above the matrix cap {cap}")
    out = np.zeros((L, L))
    for i in range(L - 1):
        out[i, i + 1 :] = row_norms(pts[i + 1 :] - pts[i], chain.p) * chain.scale
    return out + out.T


def hausdorff_truncation_gap(chain: Chain, thresholded_chain: Chain) -> float:
    """Upper bound on the distance between a chain and its thresholded copy.

    Maxima: scaled l_p norm of the componentwise maximum of the removed
    increments.  Walk: scaled sum of the l_p norms of the removed increments.
    """
    if chain.increments is None or thresholded_chain.increments is None:
        raise ValueError("both chains must keep their increments")
    if chain.scheme != thresholded_chain.scheme or chain.increments.shape != thresholded_chain.increments.shape:
        raise ValueError("chains must share scheme and increment shape")
    removed = chain.increments - thresholded_chain.increments
    if chain.scheme == MAXIMA:
        return lp_norm(removed.max(axis=0), chain.p) * chain.scale
    return math.fsum(row_norms(removed, chain.p).tolist()) * chain.scale


# ------------------------------------------------ scalar inequalities

def power_sum_gap(x, p: float) -> tuple[float, float]:
    """(| |sum x|^p - sum |x|^p |, max_{i != j} |x_i| |x_j|^(p-1))."""
    x = np.asarray(x, dtype=float)
    lhs = abs(abs(x.sum()) ** p - np.sum(np.abs(x) ** p))
    a = np.abs(x)
    if a.size < 2:
        return float(lhs), 0.0
    prod = np.outer(a, a ** (p - 1.0))
    np.fill_diagonal(prod, 0.0)
    return float(lhs), float(prod.max())


def power_sum_constant(m: int, p: float) -> float:
    """A constant c(m, p) with | |sum x|^p - sum |x|^p | <= c max_{i!=j} |x_i||x_j|^(p-1).

    From the mean value theorem with the largest modulus split off:
    c = p (m-1) m^(p-1) + m.
    """
    return p * (m - 1) * m ** (p - 1.0) + m


def power_sum_constant_search(m: int, p: float, levels: int = 9) -> float:
    """Largest ratio of the two sides over a grid of sign/magnitude patterns.

    The ratio is homogeneous of degree zero, so the largest entry is fixed
    at 1 and the rest range over a symmetric grid in [-1, 1].
    """
    vals = np.concatenate([-np.geomspace(1.0, 1e-3, levels), [0.0], np.geomspace(1e-3, 1.0, levels)])
    best = 0.0
    for rest in itertools.product(vals, repeat=m - 1):
        lhs, rhs = power_sum_gap(np.array((1.0,) + rest), p)
        if rhs > 0:
            best = max(best, lhs / rhs)
    return best


# ------------------------------------------------- streamed grid chains

@dataclass(frozen=True)
class GridChain:
    """A prelimit chain observed at grid times.

    ``points`` holds the chain points at the grid indices restricted to the
    coordinates touched by at least one increment (the others are zero at
    every time), or is ``None`` when only distances to the origin were
    computed.
    """

    times: np.ndarray
    indices: np.ndarray
    origin_distances: np.ndarray
    diameter: float
    p: float
    scale: float
    scheme: str
    points: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.times.size)

    def distances_from_origin(self) -> np.ndarray:
        return self.origin_distances

    def distance_matrix(self, cap: int = DEFAULT_CAP) -> np.ndarray:
        if self.points is None:
            raise ValueError("points were not retained for this chain")
        return distance_matrix(self, cap)


def grid_indices(n: int, T: float, grid) -> np.ndarray:
    """Chain indices floor(n t) for the grid times, clipped to [0, floor(nT)]."""
    last = int(math.floor(n * T + 1e-9))
    idx = np.floor(np.asarray(grid, dtype=float) * n + 1e-9).astype(np.int64)
    return np.clip(idx, 0, last)


def _finish(spec, scheme, p, scale, grid, idx, snaps) -> GridChain:
    dist = row_norms(snaps, p) * scale
    diam = float(dist[-1])  # nonnegative increments: the last point is farthest
    return GridChain(np.asarray(grid, float), idx, dist, diam, p, scale, scheme, snaps)


def _dense_grid_chain(spec, scheme, n, N, grid, idx, rng, batch_elems):
    d = spec.dimension(n)
    p = spec.p
    scale = 1.0 / spec.a_n(n)
    snaps = np.zeros((idx.size, d))
    state = np.zeros(d)
    done = 0
    rows = max(1, batch_elems // max(d, 1))
    while done < N:
        b = min(rows, N - done)
        x = sample_increments(spec, n, b, rng)
        cum = np.maximum.accumulate(x, axis=0) if scheme == MAXIMA else np.cumsum(x, axis=0)
        cum = np.maximum(cum, state) if scheme == MAXIMA else cum + state
        sel = (idx > done) & (idx <= done + b)
        snaps[sel] = cum[idx[sel] - done - 1]
        state = cum[-1]
        done += b
    return _finish(spec, scheme, p, scale, grid, idx, snaps)


def _spike_grid_chain(spec, scheme, n, N, grid, idx, rng):
    pos, val = sample_spikes(spec, n, N, rng)
    p = spec.p
    scale = 1.0 / spec.a_n(n)
    cols, inv = np.unique(np.where(pos >= 0, pos, -1), return_inverse=True)
    keep = cols >= 0
    width = int(keep.sum())
    snaps = np.zeros((idx.size, max(width, 1)))
    offset = 0 if not np.any(~keep) else 1  # column index shift when -1 present
    state = np.zeros(max(width, 1))
    prev = 0
    for g, k in enumerate(idx.tolist()):
        if k > prev:
            c = inv[prev:k] - offset
            v = val[prev:k]
            ok = c >= 0
            if scheme == MAXIMA:
                np.maximum.at(state, c[ok], v[ok])
            else:
                np.add.at(state, c[ok], v[ok])
            prev = k
        snaps[g] = state
    return _finish(spec, scheme, p, scale, grid, idx, snaps)


def _iid_sup_profile(spec, scheme, n, N, grid, idx, rng, target_big):
    """Exact distances to the origin for iid Pareto coordinates, sup norm.

    Cells are split at a level tau into "big" cells (Binomial count, uniform
    distinct positions, Pareto(alpha, tau) values) and small cells (Pareto
    conditioned to be at most tau).  Maxima: a block maximum is its largest
    big value, or the maximum of its small cells drawn in one step.  Walk:
    only columns whose big mass could reach the leader are summed exactly;
    the rest are bounded by (row count) * tau.
    """
    d = spec.dimension(n)
    alpha = spec.tail
    cells = N * d
    tau = max(2.0, (cells / float(target_big)) ** (1.0 / alpha))
    q = tau ** (-alpha)
    K = int(rng.binomial(cells, q))
    flat = rng.choice(cells, size=K, replace=False) if K else np.zeros(0, np.int64)
    rows = flat // d
    cols = flat % d
    big = np.atleast_1d(ht.sample_pareto(alpha, tau, rng, K)) if K else np.zeros(0)
    scale = 1.0 / spec.a_n(n)

    def small_draw(size):
        return ht.sample_pareto_truncated(alpha, 1.0, tau, rng, size)

    def small_max(count):
        # maximum of `count` iid small cells via the largest uniform order statistic
        if count <= 0:
            return 0.0
        u = (1.0 - rng.random()) ** (1.0 / count)
        qq = tau ** (-alpha)
        return float(min((1.0 - u * (1.0 - qq)) ** (-1.0 / alpha), tau))

    G = idx.size
    values = np.zeros(G)
    bounds = np.concatenate([[0], idx])
    if scheme == MAXIMA:
        running = 0.0
        for g in range(G):
            lo, hi = bounds[g], bounds[g + 1]
            if hi > lo:
                in_block = (rows >= lo) & (rows < hi)
                if np.any(in_block):
                    block = float(big[in_block].max())
                else:
                    block = small_max((hi - lo) * d)
                running = max(running, block)
            values[g] = running
    else:
        order = np.argsort(rows, kind="stable")
        rows_s, cols_s, big_s = rows[order], cols[order], big[order]
        exact_cols: dict[int, np.ndarray] = {}

        def column_block_sums(c):
            # exact small-cell sums of column c over each grid block
            if c not in exact_cols:
                sums = np.zeros(G)
                here = rows_s[cols_s == c]
                for g in range(G):
                    lo, hi = bounds[g], bounds[g + 1]
                    m = (hi - lo) - int(np.count_nonzero((here >= lo) & (here < hi)))
                    sums[g] = math.fsum(np.atleast_1d(small_draw(m)).tolist()) if m > 0 else 0.0
                exact_cols[c] = np.cumsum(sums)
            return exact_cols[c]

        for g in range(G):
            k = int(idx[g])
            if k == 0:
                continue
            upto = np.searchsorted(rows_s, k, side="left")
            if upto == 0:
                raise _NeedsDense()
            c_pref, v_pref = cols_s[:upto], big_s[:upto]
            ucols, inv = np.unique(c_pref, return_inverse=True)
            bsum = np.bincount(inv, weights=v_pref)
            bcnt = np.bincount(inv)
            lower = bsum + (k - bcnt) * 1.0
            upper = bsum + (k - bcnt) * tau
            cand = np.nonzero(upper >= lower.max())[0]
            best = 0.0
            for j in cand.tolist():
                c = int(ucols[j])
                best = max(best, float(bsum[j]) + float(column_block_sums(c)[g]))
            if best < k * tau:
                raise _NeedsDense()
            values[g] = best
    dist = values * scale
    return GridChain(np.asarray(grid, float), idx, dist, float(dist[-1]), INF, scale, scheme, None)


class _NeedsDense(Exception):
    pass


def sample_grid_chain(
    spec: ModelSpec,
    scheme: str,
    n: int,
    T: float,
    grid,
    rng: np.random.Generator,
    *,
    dense_budget: int = 1 << 22,
    batch_elems: int = 1 << 21,
    target_big: int = 2048,
) -> GridChain:
    """Sample the chain built from floor(nT) increments, observed at ``grid``.

    Dense models are streamed in batches.  For iid Pareto coordinates with
    the sup norm and floor(nT) * d above ``dense_budget`` an exact sparse
    sampler returns the distances to the origin (no point snapshots).
    Spike models are handled through their single nonzero coordinate.
    """
    scheme = _check_scheme(scheme)
    validate_scheme(spec, scheme)
    if not T > 0:
        raise ValueError("T must be positive")
    N = int(math.floor(n * T + 1e-9))
    if N < 1:
        raise ValueError("n*T must be at least 1")
    idx = grid_indices(n, T, grid)
    d = spec.dimension(n)
    if spec.is_spike:
        return _spike_grid_chain(spec, scheme, n, N, grid, idx, rng)
    if spec.kind is ModelKind.IID and spec.p == INF and N * d > dense_budget:
        try:
            return _iid_sup_profile(spec, scheme, n, N, grid, idx, rng, target_big)
        except _NeedsDense:
            pass
    return _dense_grid_chain(spec, scheme, n, N, grid, idx, rng, batch_elems)


__all__ = [
    "Chain",
    "GridChain",
    "build_chain",
    "threshold_increments",
    "distance_matrix",
    "hausdorff_truncation_gap",
    "power_sum_gap",
    "power_sum_constant",
    "power_sum_constant_search",
    "sample_grid_chain",
    "grid_indices",
    "MAXIMA",
    "WALK",
]
