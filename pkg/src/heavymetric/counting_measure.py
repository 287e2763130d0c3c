"""Finite counting measures on the real line.

A measure is stored as its atoms sorted by decreasing modulus.  Equal moduli
are ordered positive first, then by insertion order, so the ordered matching
used by :func:`dm` is well defined.
"""
from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

from ._lp import INF, check_p, lp_norm


def _canonical(values) -> np.ndarray:
    a = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(a)):
        raise ValueError("atoms must be finite")
    a = a[a != 0.0]
    # lexsort uses the last key as primary: modulus (descending), then
    # sign (positive first), then position.
    order = np.lexsort((np.arange(a.size), (a < 0).astype(np.int8), -np.abs(a)))
    out = a[order]
    out.setflags(write=False)
    return out


class CountingMeasure:
    """Finite sum of Dirac masses at nonzero reals.

    Parameters
    ----------
    atoms : iterable of float
        Atom locations; zeros are dropped and the rest sorted canonically.
    """

    __slots__ = ("_atoms",)

    def __init__(self, atoms: Iterable[float] = ()):
        self._atoms = _canonical(list(atoms) if not isinstance(atoms, np.ndarray) else atoms)

    @classmethod
    def _from_sorted(cls, atoms: np.ndarray) -> "CountingMeasure":
        obj = cls.__new__(cls)
        atoms = np.asarray(atoms, dtype=float)
        atoms.setflags(write=False)
        obj._atoms = atoms
        return obj

    @property
    def atoms(self) -> np.ndarray:
        """Read-only array of atoms in canonical order."""
        return self._atoms

    def __len__(self) -> int:
        return int(self._atoms.size)

    def __iter__(self):
        return iter(self._atoms.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountingMeasure):
            return NotImplemented
        return np.array_equal(self._atoms, other._atoms)

    def __hash__(self) -> int:
        return hash(self._atoms.tobytes())

    def __repr__(self) -> str:
        return f"CountingMeasure({self._atoms.tolist()!r})"

    def norm(self, p: float) -> float:
        return norm(self, p)

    def to_json(self) -> str:
        return json.dumps(self._atoms.tolist())

    @classmethod
    def from_json(cls, text: str) -> "CountingMeasure":
        data = json.loads(text)
        if not isinstance(data, list):
            raise ValueError("a counting measure is serialized as a JSON array")
        return cls(data)

    def __add__(self, other: "CountingMeasure") -> "CountingMeasure":
        # superposition by atom-list concatenation
        return CountingMeasure(np.concatenate([self._atoms, other._atoms]))

    def scaled(self, c: float) -> "CountingMeasure":
        """Push the measure forward under x -> c x."""
        return CountingMeasure(self._atoms * float(c))


def embed(x: Sequence[float]) -> CountingMeasure:
    """Counting measure with one atom per nonzero entry of ``x``."""
    return CountingMeasure(np.asarray(x, dtype=float))


def norm(mu: CountingMeasure, p: float) -> float:
    """l_p norm of the atom sequence (``p = inf`` gives the largest modulus)."""
    p = check_p(p)
    return lp_norm(mu.atoms, p)


def _padded(mu: CountingMeasure, nu: CountingMeasure):
    length = max(len(mu), len(nu))
    a = np.zeros(length)
    b = np.zeros(length)
    a[: len(mu)] = mu.atoms
    b[: len(nu)] = nu.atoms
    return a, b


def dm(mu: CountingMeasure, nu: CountingMeasure, p: float) -> float:
    """Ordered-matching distance: l_p distance of the zero-padded atom lists."""
    p = check_p(p)
    a, b = _padded(mu, nu)
    return lp_norm(a - b, p)


def truncate(mu: CountingMeasure, k: int) -> CountingMeasure:
    """Keep the ``k`` atoms of largest modulus."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    return CountingMeasure._from_sorted(mu.atoms[:k].copy())


def restrict_above(mu: CountingMeasure, s: float) -> CountingMeasure:
    """Keep atoms with modulus strictly above ``s``."""
    if not s > 0:
        raise ValueError("s must be positive")
    a = mu.atoms
    return CountingMeasure._from_sorted(a[np.abs(a) > s].copy())


def count_above(mu: CountingMeasure, s: float) -> int:
    """Mass of the set {|x| > s}."""
    return len(restrict_above(mu, s))


__all__ = [
    "CountingMeasure",
    "embed",
    "norm",
    "dm",
    "truncate",
    "restrict_above",
    "count_above",
    "INF",
]
