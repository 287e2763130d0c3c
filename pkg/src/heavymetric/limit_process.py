"""Poisson cluster processes above a threshold and the limit metric rho.

Events (t_k, mu_k) are sampled only above a norm threshold s.  For the
regular tail measures a cluster is m copies of a single Pareto atom; for the
Sibuya-cluster measure (sup-norm only) a cluster carries a Sibuya(1/r)
number of iid Pareto(r) atoms above s.  Lowering the threshold is done by
:func:`refine`, which keeps every existing event and adds the missing mass
with the exact conditional laws, so thresholds s1 > s2 stay coupled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import heavy_tail as ht
from ._lp import INF, check_p
from .counting_measure import CountingMeasure

# Largest number of atoms stored per Sibuya cluster; the stored atoms are the
# largest order statistics, which is all the sup-norm metric needs.
ATOM_CAP = 4096


@dataclass(frozen=True)
class TailMeasureSpec:
    """Either ``Regular{alpha, m}`` (clusters m*delta_x, x ~ theta_alpha)
    or ``SibuyaSingular{r}``."""

    variant: str
    alpha: float = 0.0
    m: int = 1
    r: float = 0.0

    @classmethod
    def regular(cls, alpha: float, m: int = 1) -> "TailMeasureSpec":
        if not alpha > 0 or int(m) < 1:
            raise ValueError("Regular tail measure needs alpha > 0 and m >= 1")
        return cls("Regular", alpha=float(alpha), m=int(m))

    @classmethod
    def sibuya(cls, r: float) -> "TailMeasureSpec":
        if not r > 1:
            raise ValueError("SibuyaSingular needs r > 1")
        return cls("SibuyaSingular", r=float(r))

    @property
    def is_regular(self) -> bool:
        return self.variant == "Regular"

    def atom_threshold(self, s: float, p: float) -> float:
        """Atom level x such that a cluster exceeds norm level s iff x > it."""
        if self.is_regular and p < INF:
            return s / self.m ** (1.0 / p)
        return s

    def tail_mass(self, s: float, p: float) -> float:
        """nu_p((s, inf)): mass of clusters with l_p norm above s."""
        p = check_p(p)
        if self.is_regular:
            return self.atom_threshold(s, p) ** (-self.alpha)
        if p < INF:
            return INF
        return 1.0 / s


@dataclass(frozen=True)
class ClusterProcess:
    """Realization of the Poisson cluster process on [0, T] above ``s``.

    ``counts[k]`` is the number of atoms of cluster k above the atom
    threshold; ``measures[k]`` stores them all, or the ``ATOM_CAP`` largest.
    """

    spec: TailMeasureSpec
    T: float
    s: float
    p: float
    times: np.ndarray
    measures: tuple
    counts: np.ndarray

    def __len__(self) -> int:
        return len(self.measures)

    @property
    def atom_threshold(self) -> float:
        return self.spec.atom_threshold(self.s, self.p)

    def norms(self, p: float | None = None) -> np.ndarray:
        """l_p norms of the clusters, in time order."""
        p = self.p if p is None else check_p(p)
        if not self.measures:
            return np.zeros(0)
        if self.spec.is_regular:
            x = np.array([mu.atoms[0] for mu in self.measures])
            return x if p == INF else x * self.spec.m ** (1.0 / p)
        if p < INF:
            raise ValueError("Sibuya clusters have no finite l_p norm")
        return np.array([mu.atoms[0] for mu in self.measures])

    def complete(self, k: int) -> bool:
        """True when every atom of cluster k above the threshold is stored."""
        return len(self.measures[k]) == int(self.counts[k])

    def counts_above(self, x: float) -> np.ndarray:
        """Per-cluster number of atoms above level ``x`` (>= atom threshold)."""
        out = np.empty(len(self), dtype=np.int64)
        for k, mu in enumerate(self.measures):
            c = int(np.count_nonzero(mu.atoms > x))
            if c == len(mu) and not self.complete(k):
                raise ValueError("count above x not determined by the stored atoms")
            out[k] = c
        return out

    def to_rows(self):
        """(t_k, atoms) pairs for CSV export."""
        return [(float(t), mu.atoms.tolist()) for t, mu in zip(self.times, self.measures)]


def _top_order_stats(count: int, rng, cap: int = ATOM_CAP) -> np.ndarray:
    """Smallest min(count, cap) of ``count`` iid uniforms, increasing."""
    k = int(min(count, cap))
    if k == 0:
        return np.zeros(0)
    logv = np.log(1.0 - rng.random(k))
    denom = float(count) - np.arange(k, dtype=float)
    return -np.expm1(np.cumsum(logv / denom))


def _pareto_band_atoms(count: int, r: float, lo: float, hi: float, rng, cap: int = ATOM_CAP):
    """Largest min(count, cap) of ``count`` iid Pareto(r, lo) draws
    conditioned to lie in (lo, hi] (``hi = inf`` allowed), decreasing."""
    u = _top_order_stats(count, rng, cap)
    q = 0.0 if hi == INF else (hi / lo) ** (-r)
    x = lo * (q + u * (1.0 - q)) ** (-1.0 / r)
    return np.minimum(x, hi)


def _sibuya_log_pmf(n, gamma: float):
    n = np.asarray(n, dtype=float)
    return (
        math.log(gamma)
        + np.log(special.poch(n, -gamma))
        - special.gammaln(1.0 - gamma)
        - np.log(n)
    )


def sample_cluster_process(spec: TailMeasureSpec, T: float, s: float, p: float, rng) -> ClusterProcess:
    """Events of the cluster process on [0, T] with cluster norm above ``s``."""
    p = check_p(p)
    if not (T > 0 and s > 0):
        raise ValueError("T and s must be positive")
    if not spec.is_regular and p < INF:
        raise ValueError("the Sibuya-cluster tail measure has no finite-p version")
    rate = T * spec.tail_mass(s, p)
    count = int(rng.poisson(rate))
    times = np.sort(rng.uniform(0.0, T, size=count))
    thr = spec.atom_threshold(s, p)
    if spec.is_regular:
        x = ht.sample_pareto(spec.alpha, thr, rng, count)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        measures = tuple(CountingMeasure._from_sorted(np.full(spec.m, v)) for v in x)
        counts = np.full(count, spec.m, dtype=np.int64)
    else:
        counts = np.atleast_1d(ht.sample_sibuya(1.0 / spec.r, rng, count)).astype(np.int64) if count else np.zeros(0, np.int64)
        measures = tuple(
            CountingMeasure._from_sorted(_pareto_band_atoms(int(c), spec.r, thr, INF, rng))
            for c in counts
        )
    return ClusterProcess(spec, float(T), float(s), p, times, measures, counts)


def _conditional_lower_counts(upper: np.ndarray, q: float, gamma: float, rng) -> np.ndarray:
    """Atoms falling in the new band for clusters with ``upper`` atoms above
    the old level.  Given k upper atoms the band count J has
    P{J = j} proportional to pi_{j+k} C(j+k, k) (1-q)^j; sampled by
    negative-binomial proposals accepted with probability pi_{j+k}/pi_k."""
    out = np.empty(upper.size, dtype=np.int64)
    for i, k in enumerate(upper.tolist()):
        log_pk = _sibuya_log_pmf(k, gamma)
        while True:
            j = int(rng.negative_binomial(k + 1, q))
            n = min(float(k) + j, float(ht.SIBUYA_MAX))
            if math.log(1.0 - rng.random()) <= float(_sibuya_log_pmf(n, gamma) - log_pk):
                out[i] = min(j, ht.SIBUYA_MAX - k)
                break
    return out


def _new_cluster_counts(count: int, q: float, gamma: float, rng) -> np.ndarray:
    """Atom counts of clusters lying entirely in the new band:
    P{N = j} proportional to pi_j (1-q)^j, j >= 1; geometric proposals
    accepted with probability pi_j / pi_1."""
    out = np.empty(count, dtype=np.int64)
    log_p1 = math.log(gamma)
    for i in range(count):
        while True:
            j = int(rng.geometric(q))
            if math.log(1.0 - rng.random()) <= float(_sibuya_log_pmf(j, gamma) - log_p1):
                out[i] = j
                break
    return out


def refine(process: ClusterProcess, s_new: float, rng) -> ClusterProcess:
    """Lower the threshold to ``s_new`` keeping every existing event.

    The returned process has the law of a fresh sample at ``s_new`` and
    restricts to ``process`` above the old threshold.
    """
    s_old = process.s
    if not 0 < s_new < s_old:
        raise ValueError("refinement needs 0 < s_new < current threshold")
    spec, T, p = process.spec, process.T, process.p
    hi = spec.atom_threshold(s_old, p)
    lo = spec.atom_threshold(s_new, p)
    extra_rate = T * (spec.tail_mass(s_new, p) - spec.tail_mass(s_old, p))
    extra = int(rng.poisson(extra_rate))
    new_times = rng.uniform(0.0, T, size=extra)
    if spec.is_regular:
        x = np.atleast_1d(ht.sample_pareto_truncated(spec.alpha, lo, hi, rng, extra))
        new_measures = [CountingMeasure._from_sorted(np.full(spec.m, v)) for v in x]
        new_counts = np.full(extra, spec.m, dtype=np.int64)
        old_measures = list(process.measures)
        old_counts = process.counts.copy()
    else:
        gamma = 1.0 / spec.r
        q = (hi / lo) ** (-spec.r)
        band = _conditional_lower_counts(process.counts, q, gamma, rng)
        old_measures = []
        for mu, k, j in zip(process.measures, process.counts.tolist(), band.tolist()):
            room = ATOM_CAP - len(mu) if len(mu) == k else 0
            add = _pareto_band_atoms(j, spec.r, lo, hi, rng, cap=max(room, 0)) if room > 0 else np.zeros(0)
            old_measures.append(CountingMeasure._from_sorted(np.concatenate([mu.atoms, add])))
        old_counts = np.minimum(process.counts + band, ht.SIBUYA_MAX)
        new_counts = _new_cluster_counts(extra, q, gamma, rng)
        new_measures = [
            CountingMeasure._from_sorted(_pareto_band_atoms(int(c), spec.r, lo, hi, rng))
            for c in new_counts
        ]
    times = np.concatenate([process.times, new_times])
    measures = old_measures + new_measures
    counts = np.concatenate([old_counts, new_counts]).astype(np.int64)
    order = np.argsort(times, kind="stable")
    return ClusterProcess(
        spec, T, float(s_new), p, times[order], tuple(measures[i] for i in order), counts[order]
    )


# ------------------------------------------------------------ limit metric

def _window_value(norms_p: np.ndarray, times: np.ndarray, t: float, t_prime: float, p: float) -> float:
    lo = np.searchsorted(times, t, side="right")
    hi = np.searchsorted(times, t_prime, side="right")
    if hi <= lo:
        return 0.0
    if p == INF:
        return float(norms_p[lo:hi].max())
    return math.fsum(norms_p[lo:hi].tolist()) ** (1.0 / p)


def rho(process: ClusterProcess, t: float, t_prime: float, p: float | None = None) -> float:
    """Limit distance between times t <= t_prime: the l_p combination of the
    cluster norms with t < t_k <= t_prime (their maximum when p = inf)."""
    if t > t_prime:
        raise ValueError("rho needs t <= t_prime")
    p = process.p if p is None else check_p(p)
    norms = process.norms(p)
    powered = norms if p == INF else norms**p
    return _window_value(powered, process.times, t, t_prime, p)


@dataclass(frozen=True)
class LimitSpace:
    """Finite metric space over grid times with the limit metric."""

    times: np.ndarray
    matrix: np.ndarray

    def __len__(self) -> int:
        return int(self.times.size)

    def distance_matrix(self, cap: int | None = None) -> np.ndarray:
        return self.matrix

    def diameter(self) -> float:
        return float(self.matrix.max()) if self.matrix.size else 0.0

    def distances_from_origin(self) -> np.ndarray:
        return self.matrix[0].copy()


def limit_chain(process: ClusterProcess, grid, p: float | None = None) -> LimitSpace:
    """Metric space over the grid times with metric rho(t_i, t_j)."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be a nondecreasing sequence of times")
    if grid[0] > 0 or grid[-1] < process.T:
        raise ValueError("grid must cover [0, T]")
    p = process.p if p is None else check_p(p)
    norms = process.norms(p)
    powered = norms if p == INF else norms**p
    g = grid.size
    mat = np.zeros((g, g))
    for i in range(g):
        for j in range(i + 1, g):
            v = _window_value(powered, process.times, grid[i], grid[j], p)
            mat[i, j] = mat[j, i] = v
    return LimitSpace(grid.copy(), mat)


def laplace_of_diameter(spec: TailMeasureSpec, T: float, p: float, lam: float) -> float:
    """E exp(-lam * rho(0, T)**p) for a regular tail measure and alpha < p < inf.

    Equals exp(-T m**(alpha/p) Gamma(1 - alpha/p) lam**(alpha/p)).
    """
    if not spec.is_regular:
        raise ValueError("closed form available for regular tail measures only")
    p = check_p(p)
    if not spec.alpha < p < INF:
        raise ValueError("need alpha < p < inf")
    if not lam > 0:
        raise ValueError("lam must be positive")
    g = spec.alpha / p
    return math.exp(-T * spec.m**g * math.gamma(1.0 - g) * lam**g)


def small_jump_laplace_factor(spec: TailMeasureSpec, T: float, p: float, s: float, lam: float) -> float:
    """Lower bound on E exp(-lam * R_s), R_s the p-th power mass of clusters
    with norm at most s.  The thresholded transform exceeds the full one by
    at most the reciprocal of this factor."""
    if not spec.is_regular or not spec.alpha < p < INF:
        raise ValueError("need a regular tail measure with alpha < p < inf")
    x = spec.atom_threshold(s, p)
    a = spec.alpha
    return math.exp(-T * lam * spec.m * a * x ** (p - a) / (p - a))
