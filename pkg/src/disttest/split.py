"""Bin-splitting reduction.

A split map assigns each bin ``i`` of ``[n]`` a multiplicity ``a_i >= 1`` and
replaces it by ``a_i`` sub-bins, each carrying ``p_i / a_i`` of the mass.
Splitting leaves l1 and chi-square distances between two distributions
unchanged while shrinking l2 norms, which is what lets a domain be
"flattened" before handing it to the l2 core: after splitting along
``Poi(k)`` samples of ``q``, the expected squared l2 norm of the split ``q``
is at most ``1/k`` regardless of how lumpy ``q`` was.

Sub-bins are laid out contiguously: sub-bin ``j`` of bin ``i`` (0-based) has
flat index ``offsets[i] + j``, so the flat domain is ``[n_split]`` with
``n_split = sum_i a_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ExplicitDistribution, SampleOracle, _vec

__all__ = [
    "SplitMap",
    "split_map_from_known",
    "split_map_from_samples",
    "split_sample",
    "split_explicit",
    "SplitOracle",
]

#: Slack added before flooring ``n * q_i``: counteracts cases like
#: ``3 * float(1/3) = 0.999...`` where exact arithmetic would give an integer.
_FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class SplitMap:
    """Multiplicities ``a`` plus the derived flat layout."""

    a: np.ndarray
    offsets: np.ndarray
    n: int
    n_split: int

    @classmethod
    def from_multiplicities(cls, a) -> "SplitMap":
        arr = np.asarray(a, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("multiplicities must be a 1-d non-empty array")
        if np.any(arr < 1):
            raise ValueError("every multiplicity must be at least 1")
        offsets = np.zeros(arr.size + 1, dtype=np.int64)
        np.cumsum(arr, out=offsets[1:])
        arr = arr.copy()
        arr.flags.writeable = False
        offsets.flags.writeable = False
        return cls(a=arr, offsets=offsets, n=int(arr.size), n_split=int(offsets[-1]))

    def flat_index(self, i: int, j: int) -> int:
        """Flat position of sub-bin ``j`` (0-based) of bin ``i``."""
        if not (0 <= j < self.a[i]):
            raise IndexError(f"sub-bin {j} out of range for bin {i}")
        return int(self.offsets[i] + j)

    def parent(self, flat) -> np.ndarray:
        """Original bin of each flat index (vectorized inverse of the layout)."""
        f = np.asarray(flat, dtype=np.int64)
        return np.searchsorted(self.offsets, f, side="right") - 1


def split_map_from_known(q, n: int | None = None) -> SplitMap:
    """Split map for a known distribution: ``a_i = 1 + floor(n * q_i)``.

    With this choice each sub-bin of the split ``q`` carries mass at most
    ``1/n``, and the split domain has at most ``2n`` bins.
    """
    qv = _vec(q)
    if n is None:
        n = qv.size
    a = 1 + np.floor(n * qv + _FLOOR_SLACK).astype(np.int64)
    return SplitMap.from_multiplicities(a)


def split_map_from_samples(
    oracle: SampleOracle, k: float, rng: np.random.Generator
) -> SplitMap:
    """Split map from ``Poi(k)`` draws of an oracle: ``a_i = 1 + #occurrences``.

    The draws are charged to the oracle's counter.  For any distribution ``q``
    this makes ``E[||q_split||_2^2] <= 1/k``.
    """
    total = int(rng.poisson(k))
    s = oracle.draw(total)
    counts = np.bincount(s, minlength=oracle.n)
    return SplitMap.from_multiplicities(1 + counts)


def split_sample(samples, sm: SplitMap, rng: np.random.Generator) -> np.ndarray:
    """Map base-domain samples to uniformly chosen sub-bins."""
    s = np.asarray(samples, dtype=np.int64)
    if s.size == 0:
        return np.empty(0, dtype=np.int64)
    sub = rng.integers(0, sm.a[s])
    return sm.offsets[s] + sub


def split_explicit(p, sm: SplitMap) -> ExplicitDistribution:
    """The split of an explicit distribution: mass ``p_i / a_i`` per sub-bin."""
    pv = _vec(p)
    if pv.size != sm.n:
        raise ValueError("distribution and split map disagree on domain size")
    return ExplicitDistribution(np.repeat(pv / sm.a, sm.a))


class SplitOracle(SampleOracle):
    """Sample access to the split of an oracle's distribution.

    Each draw consumes one base sample and places it uniformly among that
    bin's sub-bins; the cost is charged to the base oracle.
    """

    def __init__(self, base: SampleOracle, sm: SplitMap, rng: np.random.Generator):
        if base.n != sm.n:
            raise ValueError("oracle and split map disagree on domain size")
        super().__init__(sm.n_split)
        self._base = base
        self._sm = sm
        self._rng = rng

    def _draw(self, size: int) -> np.ndarray:
        return split_sample(self._base.draw(size), self._sm, self._rng)

    @property
    def samples_drawn(self) -> int:
        return self._base.samples_drawn
