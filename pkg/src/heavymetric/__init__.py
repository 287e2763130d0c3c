"""Random metric spaces from heavy-tailed extremes and random walks in growing
dimension, their Poisson-cluster limits, and Monte Carlo checks of the
conditions linking the two."""
from __future__ import annotations

__version__ = "0.1.0"

from .counting_measure import CountingMeasure, dm, embed, norm, restrict_above, truncate
from .generators import ModelSpec, sample_increment, tail_measure_of
from .limit_process import TailMeasureSpec, laplace_of_diameter, limit_chain, rho, sample_cluster_process

__all__ = [
    "CountingMeasure",
    "dm",
    "embed",
    "norm",
    "restrict_above",
    "truncate",
    "ModelSpec",
    "sample_increment",
    "tail_measure_of",
    "TailMeasureSpec",
    "laplace_of_diameter",
    "limit_chain",
    "rho",
    "sample_cluster_process",
]
