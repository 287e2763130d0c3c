"""Gromov-Hausdorff estimates between finite metric spaces.

``gh_exact`` solves tiny instances exactly; ``gh_bounds`` brackets the
distance between time-indexed chains with a correspondence upper bound and
cheap lower bounds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORACLE_CAP = 5


@dataclass(frozen=True)
class Correspondence:
    """Relation between index sets of sizes ``size_a`` and ``size_b`` that
    covers both."""

    pairs: tuple
    size_a: int
    size_b: int

    def __post_init__(self):
        pairs = tuple(sorted({(int(i), int(j)) for i, j in self.pairs}))
        object.__setattr__(self, "pairs", pairs)
        left = {i for i, _ in pairs}
        right = {j for _, j in pairs}
        if any(not (0 <= i < self.size_a and 0 <= j < self.size_b) for i, j in pairs):
            raise ValueError("pair index out of range")
        if len(left) != self.size_a or len(right) != self.size_b:
            raise ValueError("relation does not cover both spaces")

    def arrays(self):
        a = np.array([i for i, _ in self.pairs], dtype=np.int64)
        b = np.array([j for _, j in self.pairs], dtype=np.int64)
        return a, b


@dataclass(frozen=True)
class GhEstimate:
    lower: float
    upper: float
    witness: Correspondence | None

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "witness": None if self.witness is None else [list(p) for p in self.witness.pairs],
        }


def _matrix(space) -> np.ndarray:
    if hasattr(space, "distance_matrix"):
        m = space.distance_matrix()
    else:
        m = space
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("a finite metric space is given by a square distance matrix")
    return m


def _times(space, size: int) -> np.ndarray:
    t = getattr(space, "times", None)
    if t is None:
        return np.linspace(0.0, 1.0, size) if size > 1 else np.zeros(1)
    return np.asarray(t, dtype=float)


def _distortion_arrays(DA, DB, ia, ib) -> float:
    return float(np.abs(DA[np.ix_(ia, ia)] - DB[np.ix_(ib, ib)]).max())


def distortion(corr: Correspondence, A, B) -> float:
    """max |d_A(a, a') - d_B(b, b')| over pairs (a, b), (a', b') in the relation."""
    DA, DB = _matrix(A), _matrix(B)
    if corr.size_a != DA.shape[0] or corr.size_b != DB.shape[0]:
        raise ValueError("correspondence does not match the spaces")
    ia, ib = corr.arrays()
    return _distortion_arrays(DA, DB, ia, ib)


# ------------------------------------------------------------ exact oracle

def _feasible(DA, DB, delta):
    """Search for a relation with distortion <= delta.

    Variables: one partner per point of A and one per point of B; every
    chosen pair must be compatible with every other.  Compatibility sets are
    bitmasks over the LA*LB pairs; depth-first search with forward checking
    and smallest-domain-first ordering.
    """
    LA, LB = DA.shape[0], DB.shape[0]
    P = LA * LB
    diff = np.abs(DA[:, None, :, None] - DB[None, :, None, :]).reshape(P, P)
    ok = diff <= delta
    compat = [int(sum(1 << q for q in np.nonzero(ok[p])[0].tolist())) for p in range(P)]
    domains = [sum(1 << (a * LB + b) for b in range(LB)) for a in range(LA)]
    domains += [sum(1 << (a * LB + b) for a in range(LA)) for b in range(LB)]
    full = (1 << P) - 1

    def search(allowed, todo, chosen):
        if not todo:
            return chosen
        best_v, best_dom, best_count = None, 0, P + 1
        for v in todo:
            dom = domains[v] & allowed
            c = bin(dom).count("1")
            if c == 0:
                return None
            if c < best_count:
                best_v, best_dom, best_count = v, dom, c
        rest = [v for v in todo if v != best_v]
        dom = best_dom
        while dom:
            low = dom & -dom
            p = low.bit_length() - 1
            dom ^= low
            found = search(allowed & compat[p], rest, chosen + [p])
            if found is not None:
                return found
        return None

    found = search(full, list(range(LA + LB)), [])
    if found is None:
        return None
    return [(p // LB, p % LB) for p in found]


def gh_exact(A, B) -> GhEstimate:
    """Exact distance for spaces with at most ``ORACLE_CAP`` points each.

    The optimal distortion is one of the values |d_A(a,a') - d_B(b,b')|;
    binary search over them with an exact feasibility search.
    """
    DA, DB = _matrix(A), _matrix(B)
    if DA.shape[0] > ORACLE_CAP or DB.shape[0] > ORACLE_CAP:
        raise ValueError(f"oracle limited to {ORACLE_CAP} points per space")
    if DA.shape[0] == 0 or DB.shape[0] == 0:
        raise ValueError("spaces must be nonempty")
    cand = np.unique(np.abs(DA[:, None, :, None] - DB[None, :, None, :]).ravel())
    lo, hi = 0, cand.size - 1
    best = _feasible(DA, DB, cand[hi])
    while lo < hi:
        mid = (lo + hi) // 2
        rel = _feasible(DA, DB, cand[mid])
        if rel is None:
            lo = mid + 1
        else:
            hi, best = mid, rel
    corr = Correspondence(tuple(best), DA.shape[0], DB.shape[0])
    value = 0.5 * distortion(corr, DA, DB)
    return GhEstimate(value, value, corr)


# ------------------------------------------------------------------ bounds

def _nearest(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Index into sorted ``dst`` of the nearest value to each of ``src``."""
    j = np.clip(np.searchsorted(dst, src), 1, max(dst.size - 1, 1))
    if dst.size == 1:
        return np.zeros(src.size, dtype=np.int64)
    left = dst[j - 1]
    right = dst[j]
    return np.where(src - left <= right - src, j - 1, j).astype(np.int64)


def _hausdorff_1d(x: np.ndarray, y: np.ndarray) -> float:
    xs, ys = np.sort(x), np.sort(y)
    dx = np.abs(xs - ys[_nearest(xs, ys)]).max()
    dy = np.abs(ys - xs[_nearest(ys, xs)]).max()
    return float(max(dx, dy))


def _profile_bound(DA, DB) -> float:
    """Distance sets seen from related points lie within the distortion in
    Hausdorff distance, and each basepoint is related to some point of the
    other space."""
    a0 = DA[0]
    b0 = DB[0]
    from_a = min(_hausdorff_1d(a0, DB[j]) for j in range(DB.shape[0]))
    from_b = min(_hausdorff_1d(b0, DA[i]) for i in range(DA.shape[0]))
    return max(from_a, from_b)


def gh_lower_bound(A, B) -> float:
    DA, DB = _matrix(A), _matrix(B)
    diam = abs(DA.max() - DB.max())
    return 0.5 * max(float(diam), _profile_bound(DA, DB))


def time_correspondence(times_a, times_b) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-time maps A -> B and B -> A (both monotone)."""
    ta = np.asarray(times_a, dtype=float)
    tb = np.asarray(times_b, dtype=float)
    return _nearest(ta, tb), _nearest(tb, ta)


def _relation(f, g):
    ia = np.concatenate([np.arange(f.size), g])
    ib = np.concatenate([f, np.arange(g.size)])
    return ia, ib


def _local_search(DA, DB, f, g, sweeps: int, max_pairs: int):
    """Greedy single-assignment moves keeping both maps monotone."""
    ia, ib = _relation(f, g)
    if ia.size > max_pairs:
        return f, g
    cur = _distortion_arrays(DA, DB, ia, ib)
    for _ in range(sweeps):
        D = np.abs(DA[np.ix_(ia, ia)] - DB[np.ix_(ib, ib)])
        u, v = np.unravel_index(int(np.argmax(D)), D.shape)
        improved = False
        for k in dict.fromkeys((int(u), int(v))):
            for step in (-1, 1):
                if k < f.size:
                    cand_f, cand_g = f.copy(), g
                    i = k
                    new = cand_f[i] + step
                    lo = cand_f[i - 1] if i > 0 else 0
                    hi = cand_f[i + 1] if i + 1 < f.size else DB.shape[0] - 1
                    if not lo <= new <= hi:
                        continue
                    cand_f[i] = new
                else:
                    cand_f, cand_g = f, g.copy()
                    j = k - f.size
                    new = cand_g[j] + step
                    lo = cand_g[j - 1] if j > 0 else 0
                    hi = cand_g[j + 1] if j + 1 < g.size else DA.shape[0] - 1
                    if not lo <= new <= hi:
                        continue
                    cand_g[j] = new
                ca, cb = _relation(cand_f, cand_g)
                val = _distortion_arrays(DA, DB, ca, cb)
                if val < cur:
                    f, g, ia, ib, cur = cand_f, cand_g, ca, cb, val
                    improved = True
                    break
            if improved:
                break
        if not improved:
            break
    return f, g


def gh_bounds(A, B, *, sweeps: int = 100, max_pairs: int = 600) -> GhEstimate:
    """Bracket the GH distance between two time-indexed spaces.

    Upper: half the distortion of the nearest-time correspondence, refined
    by up to ``sweeps`` greedy moves (skipped above ``max_pairs`` related
    pairs).  Lower: half the larger of the diameter gap and the basepoint
    distance-profile bound.
    """
    DA, DB = _matrix(A), _matrix(B)
    ta, tb = _times(A, DA.shape[0]), _times(B, DB.shape[0])
    f, g = time_correspondence(ta, tb)
    if sweeps > 0:
        f, g = _local_search(DA, DB, f, g, sweeps, max_pairs)
    ia, ib = _relation(f, g)
    corr = Correspondence(tuple(zip(ia.tolist(), ib.tolist())), DA.shape[0], DB.shape[0])
    upper = 0.5 * distortion(corr, DA, DB)
    lower = min(gh_lower_bound(DA, DB), upper)
    return GhEstimate(lower, upper, corr)
