"""Numerically careful l_p norms shared by the measure and chain modules."""
from __future__ import annotations

import math

import numpy as np

INF = math.inf


def check_p(p: float) -> float:
    """Validate an l_p index and return it as a float (``inf`` allowed)."""
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


def lp_norm(x, p: float) -> float:
    """l_p norm of a 1-d array.

    The sum of powers is rescaled by the largest modulus (no overflow for
    heavy-tailed entries) and accumulated with ``math.fsum``, which is
    correctly rounded and therefore independent of the entry order.
    """
    a = np.abs(np.asarray(x, dtype=float)).ravel()
    if a.size == 0:
        return 0.0
    m = float(a.max())
    if p == INF or m == 0.0 or not math.isfinite(m):
        return m
    if p == 1.0:
        return math.fsum(a.tolist())
    return m * math.fsum(((a / m) ** p).tolist()) ** (1.0 / p)


def row_norms(x, p: float) -> np.ndarray:
    """Vectorized l_p norms of the rows of a 2-d array.

    Uses plain pairwise summation, which is what the Monte Carlo paths need;
    use :func:`lp_norm` where order independence matters.
    """
    a = np.abs(np.asarray(x, dtype=float))
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] == 0:
        return np.zeros(a.shape[0])
    m = a.max(axis=1)
    if p == INF:
        return m
    if p == 1.0:
        return a.sum(axis=1)
    safe = np.where(m > 0, m, 1.0)
    return m * (((a / safe[:, None]) ** p).sum(axis=1)) ** (1.0 / p)
