"""Exact samplers for the heavy-tailed building blocks and closed-form a_n.

All samplers take an explicit :class:`numpy.random.Generator` and an optional
``size``; with ``size=None`` they return a Python scalar.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

# Counts beyond this value saturate; reached with negligible probability
# unless the Sibuya exponent is very small.
SIBUYA_MAX = 2**62


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a (master seed, key path) pair.

    Replicate ``k`` of a run uses ``stream(seed, tag, k)``; the streams do not
    depend on how replicates are scheduled, which keeps parallel runs
    reproducible.
    """
    if int(seed) < 0:
        raise ValueError("seed must be a nonnegative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def _uniform_open(rng: np.random.Generator, size) -> np.ndarray | float:
    # uniform on (0, 1]: never zero, so negative powers stay finite
    return 1.0 - rng.random(size)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


class TailKind(str, Enum):
    PARETO = "Pareto"
    FRECHET = "Frechet"
    POSITIVE_STABLE = "PositiveStable"
    SIBUYA = "Sibuya"


@dataclass(frozen=True)
class TailLaw:
    """A one-dimensional tail law with its single shape parameter."""

    kind: TailKind
    parameter: float

    def __post_init__(self):
        if not self.parameter > 0:
            raise ValueError(f"{self.kind.value} parameter must be positive")
        if self.kind in (TailKind.POSITIVE_STABLE, TailKind.SIBUYA) and not self.parameter < 1:
            raise ValueError(f"{self.kind.value} exponent must lie in (0, 1)")

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind is TailKind.PARETO:
            return sample_pareto(self.parameter, 1.0, rng, size)
        if self.kind is TailKind.FRECHET:
            return sample_frechet(self.parameter, rng, size)
        if self.kind is TailKind.POSITIVE_STABLE:
            return sample_positive_stable(self.parameter, rng, size)
        return sample_sibuya(self.parameter, rng, size)


# ---------------------------------------------------------------- Pareto

def pareto_from_uniform(u, alpha: float, s: float = 1.0):
    """Inverse-CDF map ``s * u**(-1/alpha)`` for ``u`` in (0, 1]."""
    return _out(s * np.asarray(u, dtype=float) ** (-1.0 / alpha))


def sample_pareto(alpha: float, s: float, rng: np.random.Generator, size=None):
    """Pareto law with P{X > x} = (x/s)**(-alpha) for x >= s."""
    if not (alpha > 0 and s > 0):
        raise ValueError("alpha and s must be positive")
    return pareto_from_uniform(_uniform_open(rng, size), alpha, s)


def sample_pareto_truncated(alpha: float, lo: float, hi: float, rng, size=None):
    """Pareto(alpha, lo) conditioned to be at most ``hi``."""
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    u = _uniform_open(rng, size)
    # P{X > x | X <= hi} inverted; q is the mass above hi
    q = (hi / lo) ** (-alpha)
    tail = q + u * (1.0 - q)
    return _out(lo * np.minimum(tail ** (-1.0 / alpha), hi / lo))


# --------------------------------------------------------------- Frechet

def frechet_from_uniform(u, r: float):
    """Inverse-CDF map ``(-log u)**(-1/r)``."""
    return _out((-np.log(np.asarray(u, dtype=float))) ** (-1.0 / r))


def sample_frechet(r: float, rng: np.random.Generator, size=None):
    """Frechet law with CDF exp(-x**(-r))."""
    if not r > 0:
        raise ValueError("shape must be positive")
    e = rng.standard_exponential(size)
    return _out(np.asarray(e) ** (-1.0 / r))


# -------------------------------------------------------- positive stable

def kanter_a(theta, gamma: float):
    """Kanter's integrand A(theta) for the one-sided gamma-stable law."""
    theta = np.asarray(theta, dtype=float)
    num = np.sin(gamma * theta) ** gamma * np.sin((1.0 - gamma) * theta) ** (1.0 - gamma)
    return (num / np.sin(theta)) ** (1.0 / (1.0 - gamma))


def sample_positive_stable(gamma: float, rng: np.random.Generator, size=None):
    """One-sided stable law with Laplace transform exp(-t**gamma).

    Kanter's representation: ``(A(theta)/W)**((1-gamma)/gamma)`` with theta
    uniform on (0, pi) and W standard exponential.
    """
    if not 0 < gamma < 1:
        raise ValueError("stable exponent must lie in (0, 1)")
    theta = math.pi * _uniform_open(rng, size)
    # keep theta off the endpoint pi where sin vanishes
    theta = np.minimum(theta, math.pi * (1.0 - 2.0**-53))
    w = rng.standard_exponential(size)
    return _out((kanter_a(theta, gamma) / w) ** ((1.0 - gamma) / gamma))


# ---------------------------------------------------------------- Sibuya

_SIBUYA_TABLES: dict[str, np.ndarray] = {}
_SIBUYA_LOCK = threading.Lock()
_TABLE_SIZE = 1 << 16


def sibuya_pmf_table(gamma: float, size: int) -> np.ndarray:
    """Probabilities pi_1..pi_size from the recursion
    pi_1 = gamma, pi_{n+1} = pi_n (n - gamma) / (n + 1)."""
    n = np.arange(1, size, dtype=float)
    ratios = (n - gamma) / (n + 1.0)
    out = np.empty(size)
    out[0] = gamma
    out[1:] = gamma * np.cumprod(ratios)
    return out


def sibuya_survival(n, gamma: float):
    """P{N > n} = Gamma(n+1-gamma) / (Gamma(1-gamma) Gamma(n+1)), closed form."""
    n = np.asarray(n, dtype=float)
    return _out(special.poch(n + 1.0, -gamma) / special.gamma(1.0 - gamma))


def sibuya_pmf(n, gamma: float):
    """pi_n from the closed form gamma * P{N > n-1} / n."""
    n = np.asarray(n, dtype=float)
    return _out(gamma * np.asarray(sibuya_survival(n - 1.0, gamma)) / n)


def sibuya_pgf(z, gamma: float):
    return _out(1.0 - (1.0 - np.asarray(z, dtype=float)) ** gamma)


def _survival_table(gamma: float) -> np.ndarray:
    key = float(gamma).hex()
    table = _SIBUYA_TABLES.get(key)
    if table is None:
        with _SIBUYA_LOCK:
            table = _SIBUYA_TABLES.get(key)
            if table is None:
                n = np.arange(1, _TABLE_SIZE + 1, dtype=float)
                surv = np.concatenate([[1.0], np.cumprod(1.0 - gamma / n)])
                surv.setflags(write=False)
                _SIBUYA_TABLES[key] = table = surv
    return table


def sibuya_from_uniform(v, gamma: float):
    """Inverse-CDF map: smallest n >= 1 with P{N > n} < v, for v in (0, 1].

    A cached survival table covers small n; beyond it the closed-form
    survival function is inverted by bisection.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    table = _survival_table(gamma)
    out = np.searchsorted(-table, -v, side="right").astype(np.int64)
    big = out >= table.size
    if np.any(big):
        out[big] = _sibuya_tail_inverse(v[big], gamma, table.size - 1)
    return out


def _sibuya_tail_inverse(v: np.ndarray, gamma: float, start: int) -> np.ndarray:
    lo = np.full(v.shape, float(start))  # survival(lo) >= v
    hi = np.full(v.shape, float(SIBUYA_MAX))
    saturated = np.asarray(sibuya_survival(hi, gamma)) >= v
    for _ in range(80):
        mid = np.floor((lo + hi) / 2.0)
        active = (hi - lo) > 1.0
        if not np.any(active):
            break
        below = np.asarray(sibuya_survival(mid, gamma)) < v
        hi = np.where(active & below, mid, hi)
        lo = np.where(active & ~below, mid, lo)
    hi[saturated] = float(SIBUYA_MAX)
    return hi.astype(np.int64)


def sample_sibuya(gamma: float, rng: np.random.Generator, size=None):
    """Sibuya law on {1, 2, ...} with pgf 1 - (1 - z)**gamma."""
    if not 0 < gamma < 1:
        raise ValueError("Sibuya exponent must lie in (0, 1)")
    v = _uniform_open(rng, size)
    out = sibuya_from_uniform(v, gamma)
    return int(out[0]) if size is None else out.reshape(np.shape(v))


# ----------------------------------------------------------- normalizers

class NormRule(str, Enum):
    IID = "IidRule"
    SPIKE = "SpikeRule"
    LOGISTIC = "LogisticRule"


@dataclass(frozen=True)
class Normalizer:
    """Closed-form normalizing constant a_n for a pure-power tail."""

    a_n: float
    n: int
    d: int
    rule: NormRule


def normalizer(rule, tail_parameter: float, n: int, d: int = 1) -> Normalizer:
    """a_n for the three model families.

    ``IidRule``: (n d)**(1/alpha); ``SpikeRule``: n**(1/alpha);
    ``LogisticRule``: n * d**(1/r).
    """
    try:
        rule = NormRule(rule)
    except ValueError:
        raise ValueError(f"unknown normalizing rule {rule!r}") from None
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    if not tail_parameter > 0:
        raise ValueError("tail parameter must be positive")
    if rule is NormRule.IID:
        a = (float(n) * float(d)) ** (1.0 / tail_parameter)
    elif rule is NormRule.SPIKE:
        a = float(n) ** (1.0 / tail_parameter)
    else:
        a = float(n) * float(d) ** (1.0 / tail_parameter)
    return Normalizer(a_n=a, n=int(n), d=int(d), rule=rule)
