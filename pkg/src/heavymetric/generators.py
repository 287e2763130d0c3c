"""Generative models for the d-dimensional increments X^(d).

Five models are provided, each with a dimension growth rule
d(n) = max(1, floor(n**beta)) and the matching normalizing constant:

* ``IidRegVar``: d iid Pareto(alpha, 1) coordinates, a_n = (n d)**(1/alpha);
* ``SingleSpike``: one Pareto(alpha, 1) value at a random coordinate,
  a_n = n**(1/alpha);
* ``PositionSpike``: a Pareto value zeta placed at coordinate floor(zeta)
  when that coordinate exists, a_n = n**(1/alpha);
* ``MovingMaxima``: X_i = max(Z_i, Z_{i-1}) for iid Pareto Z_0..Z_d,
  a_n = (n d)**(1/alpha);
* ``Logistic``: the max-stable logistic law with P{X <= u} = exp(-||1/u||_r),
  drawn as zeta**(1/r) times iid Frechet(r) coordinates, a_n = n d**(1/r).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np

from . import heavy_tail as ht
from ._lp import INF, check_p
from .limit_process import TailMeasureSpec


class ModelKind(str, Enum):
    IID = "IidRegVar"
    SINGLE_SPIKE = "SingleSpike"
    POSITION_SPIKE = "PositionSpike"
    MOVING_MAXIMA = "MovingMaxima"
    LOGISTIC = "Logistic"


class ConfigError(ValueError):
    """Invalid model or experiment configuration."""


Weights = Union[str, Callable[[int], np.ndarray]]


@dataclass(frozen=True)
class ModelSpec:
    """A generative model with its tail parameter, growth exponent and p.

    Parameters
    ----------
    kind : ModelKind or str
    tail : float
        Tail index alpha, or the logistic index r for ``Logistic``.
    beta : float
        Growth exponent, d(n) = max(1, floor(n**beta)).
    p : float
        Target l_p index in [1, inf].
    weights : "uniform" or callable
        Spike-position law for ``SingleSpike``; a callable maps d to a
        probability vector of length d.
    """

    kind: ModelKind
    tail: float
    beta: float = 1.0
    p: float = INF
    weights: Weights = field(default="uniform", compare=False)

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ModelKind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown model kind {self.kind!r}") from None
        try:
            object.__setattr__(self, "p", check_p(self.p))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self._validate()

    def _validate(self):
        a, beta, p = float(self.tail), float(self.beta), self.p
        if not a > 0 or not math.isfinite(a):
            raise ConfigError("tail parameter must be a positive finite number")
        if not beta >= 0:
            raise ConfigError("growth exponent beta must be nonnegative")
        kind = self.kind
        if kind in (ModelKind.IID, ModelKind.MOVING_MAXIMA) and p < INF and not p > a:
            raise ConfigError(
                f"{kind.value} with finite p needs p > alpha (got p={p}, alpha={a})"
            )
        if kind is ModelKind.POSITION_SPIKE and not beta > 1.0 / a:
            raise ConfigError(
                "PositionSpike needs n = o(d^(alpha - delta)) for some delta > 0; "
                f"with d = n^beta this is beta > 1/alpha (got beta={beta}, 1/alpha={1.0 / a})"
            )
        if kind is ModelKind.MOVING_MAXIMA:
            bound = 1.0 if p == INF else p / (a + p)
            if not beta < bound:
                raise ConfigError(
                    "MovingMaxima needs d = O(n^(p/(alpha+p) - delta)) for some delta > 0; "
                    f"with d = n^beta this is beta < p/(alpha+p) = {bound} (got beta={beta})"
                )
        if kind is ModelKind.LOGISTIC and not a > 1:
            raise ConfigError(f"Logistic needs r > 1 (got r={a})")
        if kind is ModelKind.SINGLE_SPIKE and not (self.weights == "uniform" or callable(self.weights)):
            raise ConfigError("SingleSpike weights must be 'uniform' or a callable d -> weights")

    # -------------------------------------------------------------- helpers
    @property
    def alpha(self) -> float:
        """Tail index of the norm of X: alpha, or 1 for the logistic model."""
        return 1.0 if self.kind is ModelKind.LOGISTIC else float(self.tail)

    def dimension(self, n: int) -> int:
        return max(1, int(math.floor(float(n) ** self.beta + 1e-9)))

    def normalizer(self, n: int) -> ht.Normalizer:
        d = self.dimension(n)
        if self.kind in (ModelKind.IID, ModelKind.MOVING_MAXIMA):
            return ht.normalizer(ht.NormRule.IID, self.tail, n, d)
        if self.kind is ModelKind.LOGISTIC:
            return ht.normalizer(ht.NormRule.LOGISTIC, self.tail, n, d)
        return ht.normalizer(ht.NormRule.SPIKE, self.tail, n, d)

    def a_n(self, n: int) -> float:
        return self.normalizer(n).a_n

    def spike_weights(self, d: int) -> np.ndarray | None:
        """Spike-position probabilities (``None`` means uniform)."""
        if self.weights == "uniform":
            return None
        w = np.asarray(self.weights(d), dtype=float)
        if w.shape != (d,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ConfigError("spike weights must be a probability vector of length d")
        return w

    def with_p(self, p: float) -> "ModelSpec":
        return ModelSpec(self.kind, self.tail, self.beta, p, self.weights)

    @property
    def is_spike(self) -> bool:
        return self.kind in (ModelKind.SINGLE_SPIKE, ModelKind.POSITION_SPIKE)


def validate_scheme(spec: ModelSpec, scheme: str) -> None:
    """The random-walk scheme needs alpha in (0, 1) for the regular models."""
    if scheme == "walk" and spec.kind is not ModelKind.LOGISTIC and not spec.tail < 1:
        raise ConfigError(
            f"the random-walk scheme needs alpha in (0, 1) (got alpha={spec.tail})"
        )


# ------------------------------------------------------------- sampling

def sample_spikes(spec: ModelSpec, n: int, count: int, rng: np.random.Generator):
    """Sparse draws for the spike models.

    Returns ``(position, value)`` arrays of length ``count``; position -1
    marks the zero vector (PositionSpike with floor(zeta) > d).
    """
    if not spec.is_spike:
        raise ValueError("sparse draws exist only for the spike models")
    d = spec.dimension(n)
    zeta = ht.sample_pareto(spec.tail, 1.0, rng, count)
    if spec.kind is ModelKind.SINGLE_SPIKE:
        w = spec.spike_weights(d)
        if w is None:
            pos = rng.integers(0, d, size=count)
        else:
            pos = np.searchsorted(np.cumsum(w), rng.random(count) * w.sum(), side="right")
            pos = np.minimum(pos, d - 1)
        return pos.astype(np.int64), zeta
    k = np.floor(zeta)
    inside = k <= d
    pos = np.where(inside, k - 1, -1).astype(np.int64)
    return pos, np.where(inside, zeta, 0.0)


def sample_increments(spec: ModelSpec, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent draws of X^(d(n)) as a (count, d) array."""
    d = spec.dimension(n)
    kind = spec.kind
    if kind is ModelKind.IID:
        return ht.sample_pareto(spec.tail, 1.0, rng, (count, d))
    if kind is ModelKind.MOVING_MAXIMA:
        z = ht.sample_pareto(spec.tail, 1.0, rng, (count, d + 1))
        return np.maximum(z[:, 1:], z[:, :-1])
    if kind is ModelKind.LOGISTIC:
        r = spec.tail
        zeta = ht.sample_positive_stable(1.0 / r, rng, count)
        eta = ht.sample_frechet(r, rng, (count, d))
        return np.asarray(zeta)[:, None] ** (1.0 / r) * eta
    pos, val = sample_spikes(spec, n, count, rng)
    out = np.zeros((count, d))
    hit = pos >= 0
    out[np.nonzero(hit)[0], pos[hit]] = val[hit]
    return out


def sample_increment(spec: ModelSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """One draw of X^(d(n)); all coordinates are nonnegative."""
    return sample_increments(spec, n, 1, rng)[0]


def tail_measure_of(spec: ModelSpec) -> TailMeasureSpec:
    """Tail measure of the normalized increments.

    Single-atom clusters for the iid and spike models, doubled atoms for
    moving maxima, and the Sibuya-cluster singular measure for the logistic
    model.
    """
    if spec.kind is ModelKind.LOGISTIC:
        return TailMeasureSpec.sibuya(spec.tail)
    m = 2 if spec.kind is ModelKind.MOVING_MAXIMA else 1
    return TailMeasureSpec.regular(spec.tail, m)


def logistic_cdf(u, r: float) -> float:
    """P{X <= u} = exp(-||1/u||_r) for the logistic law."""
    u = np.asarray(u, dtype=float)
    return float(np.exp(-np.sum(u ** (-r)) ** (1.0 / r)))
