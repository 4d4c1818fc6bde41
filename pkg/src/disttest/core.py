"""Core types: explicit distributions, sample oracles, counts, and distances.

Everything downstream works with three representations of a distribution on
``[n] = {0, ..., n-1}``:

* :class:`ExplicitDistribution` -- a normalized probability vector,
* :class:`PseudoDistribution` -- a non-negative measure that need not sum to 1,
* :class:`SampleOracle` -- draw-only access with an exact sample counter.

All randomness flows through ``numpy.random.Generator`` instances derived
from a single master seed (see :func:`spawn_rng`), so that every run is
replayable from one integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "ExplicitDistribution",
    "PseudoDistribution",
    "JointDistribution",
    "CountVector",
    "SampleOracle",
    "DistributionOracle",
    "ReplayOracle",
    "MappedOracle",
    "MixtureIndexOracle",
    "BudgetExceededError",
    "ReplayExhaustedError",
    "AliasTable",
    "spawn_rng",
    "sample",
    "poissonized_counts",
    "poissonized_count_matrix",
    "IntervalPartition",
    "l1_distance",
    "q_small_mass_profile",
    "l2_norm",
    "l23_quasinorm",
    "hellinger_sq",
    "chi_sq",
    "restrict",
    "condition",
]

#: Absolute tolerance on "sums to one" after normalization.
SUM_TOL = 1e-12

VectorLike = Union[np.ndarray, Sequence[float], "ExplicitDistribution", "PseudoDistribution"]


class BudgetExceededError(RuntimeError):
    """Raised when rejection sampling exceeds its hard draw cap."""


class ReplayExhaustedError(RuntimeError):
    """Raised when a file-backed oracle runs out of recorded samples."""


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Derive an independent generator from a master seed and an integer key path.

    The same ``(seed, key)`` pair always yields the same stream, and distinct
    key paths yield statistically independent streams.  This is the only
    sanctioned way to create randomness inside the package.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def _vec(p: VectorLike) -> np.ndarray:
    if isinstance(p, ExplicitDistribution):
        return p.probs
    if isinstance(p, PseudoDistribution):
        return p.mass
    return np.asarray(p, dtype=np.float64)


# ---------------------------------------------------------------------------
# distribution containers
# ---------------------------------------------------------------------------


class ExplicitDistribution:
    """A probability vector over ``[n]``, normalized at construction.

    Raises ``ValueError`` if the input has negative entries or its sum lies
    outside ``[0.5, 2.0]`` (sums that far from 1 indicate a caller bug rather
    than floating-point drift).
    """

    __slots__ = ("probs",)

    def __init__(self, probs: VectorLike):
        arr = np.array(_vec(probs), dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("probability vector must be 1-d and non-empty")
        if np.any(arr < 0):
            raise ValueError("probabilities must be non-negative")
        total = float(arr.sum())
        if not (0.5 <= total <= 2.0):
            raise ValueError(f"probability mass {total!r} outside [0.5, 2.0]")
        arr /= total
        # One more normalization pass in case of accumulated rounding.
        s = float(arr.sum())
        if abs(s - 1.0) > SUM_TOL:
            arr /= s
        arr.flags.writeable = False
        self.probs = arr

    @property
    def n(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size

    def __repr__(self) -> str:
        return f"ExplicitDistribution(n={self.n})"


class PseudoDistribution:
    """A non-negative measure over ``[n]``; the total mass may be anything."""

    __slots__ = ("mass", "total")

    def __init__(self, mass: VectorLike):
        arr = np.array(_vec(mass), dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("mass vector must be 1-d and non-empty")
        if np.any(arr < 0):
            raise ValueError("mass must be non-negative")
        arr.flags.writeable = False
        self.mass = arr
        self.total = float(arr.sum())

    @property
    def n(self) -> int:
        return self.mass.size

    def normalized(self) -> ExplicitDistribution:
        if self.total <= 0:
            raise ValueError("cannot normalize a zero measure")
        return ExplicitDistribution(self.mass / self.total)

    def __repr__(self) -> str:
        return f"PseudoDistribution(n={self.n}, total={self.total:.6g})"


class JointDistribution:
    """A distribution over a product domain ``[n_1] x ... x [n_d]``.

    Stored as a d-dimensional array; ``flatten`` gives the row-major
    one-dimensional view used by samplers and testers, so cell ``(i, j)``
    of an ``n x m`` table maps to flat index ``i * m + j``.
    """

    __slots__ = ("probs", "dims")

    def __init__(self, probs: np.ndarray):
        arr = np.array(probs, dtype=np.float64)
        if arr.ndim < 2:
            raise ValueError("joint distribution needs at least 2 axes")
        if np.any(arr < 0):
            raise ValueError("probabilities must be non-negative")
        total = float(arr.sum())
        if not (0.5 <= total <= 2.0):
            raise ValueError(f"probability mass {total!r} outside [0.5, 2.0]")
        arr /= total
        arr.flags.writeable = False
        self.probs = arr
        self.dims = tuple(arr.shape)

    def flatten(self) -> ExplicitDistribution:
        return ExplicitDistribution(self.probs.reshape(-1))

    def marginal(self, axis: int) -> ExplicitDistribution:
        axes = tuple(i for i in range(self.probs.ndim) if i != axis)
        return ExplicitDistribution(self.probs.sum(axis=axes))

    def __repr__(self) -> str:
        return f"JointDistribution(dims={self.dims})"


@dataclass(frozen=True)
class CountVector:
    """Integer occurrence counts over ``[n]``."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts)
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("counts must be integers")
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", arr.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n(self) -> int:
        return self.counts.size


# ---------------------------------------------------------------------------
# alias-table sampling
# ---------------------------------------------------------------------------


class AliasTable:
    """Walker/Vose alias table: O(n) build, O(1) per draw.

    Supports zero-probability bins and point masses.
    """

    __slots__ = ("n", "_prob", "_alias")

    def __init__(self, probs: VectorLike):
        p = _vec(probs)
        n = p.size
        total = p.sum()
        if total <= 0:
            raise ValueError("cannot build an alias table for zero total mass")
        scaled = p * (n / total)
        prob = np.ones(n, dtype=np.float64)
        alias = np.arange(n, dtype=np.int64)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        scaled = scaled.copy()
        while small and large:
            s = small.pop()
            g = large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        # Leftovers are 1 up to rounding; their prob stays 1.
        self.n = n
        self._prob = prob
        self._alias = alias

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size == 0:
            return np.empty(0, dtype=np.int64)
        idx = rng.integers(0, self.n, size=size)
        accept = rng.random(size) < self._prob[idx]
        return np.where(accept, idx, self._alias[idx])


# ---------------------------------------------------------------------------
# sample oracles
# ---------------------------------------------------------------------------


class SampleOracle:
    """Draw-only access to a distribution over ``[n]``.

    Subclasses implement :meth:`_draw`; the public :meth:`draw` maintains the
    exact counter that testers report in their verdicts.  ``samples_drawn``
    counts *primitive* draws: derived oracles (rejection, splitting, swaps)
    override :attr:`samples_drawn` to charge their base oracle's counter.
    """

    n: int

    def __init__(self, n: int):
        self.n = int(n)
        self._count = 0

    def draw(self, size: int) -> np.ndarray:
        if size < 0:
            raise ValueError("size must be non-negative")
        out = self._draw(int(size))
        self._count += int(size)
        return out

    def next_sample(self) -> int:
        return int(self.draw(1)[0])

    @property
    def samples_drawn(self) -> int:
        return self._count

    def _draw(self, size: int) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


class DistributionOracle(SampleOracle):
    """Oracle backed by an explicit distribution via an alias table."""

    def __init__(self, dist: VectorLike, rng: np.random.Generator):
        p = _vec(dist)
        super().__init__(p.size)
        self._table = AliasTable(p)
        self._rng = rng

    def _draw(self, size: int) -> np.ndarray:
        return self._table.draw(self._rng, size)


class ReplayOracle(SampleOracle):
    """Oracle that replays a fixed array of recorded samples.

    Raises :class:`ReplayExhaustedError` once the recording runs out, which
    the CLI maps to its "insufficient samples" exit code.
    """

    def __init__(self, samples: np.ndarray, n: int):
        super().__init__(n)
        arr = np.asarray(samples, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError("recorded samples out of domain range")
        self._samples = arr
        self._pos = 0

    @property
    def remaining(self) -> int:
        return self._samples.size - self._pos

    def _draw(self, size: int) -> np.ndarray:
        if self._pos + size > self._samples.size:
            raise ReplayExhaustedError(
                f"oracle exhausted: wanted {size}, have {self._samples.size - self._pos}"
            )
        out = self._samples[self._pos : self._pos + size]
        self._pos += size
        return out


class MappedOracle(SampleOracle):
    """Push samples of a base oracle through a fixed index map.

    Used for category/bucket marginals: ``labels[i]`` is the label of base
    bin ``i``.  Draws are charged to the base oracle.
    """

    def __init__(self, base: SampleOracle, labels: np.ndarray, n_labels: int):
        super().__init__(n_labels)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size != base.n:
            raise ValueError("label array must cover the base domain")
        self._base = base
        self._labels = labels

    def _draw(self, size: int) -> np.ndarray:
        return self._labels[self._base.draw(size)]

    @property
    def samples_drawn(self) -> int:
        return self._base.samples_drawn


class MixtureIndexOracle(SampleOracle):
    """Draws from a uniformly random member of an oracle family.

    Each draw picks an index ``i`` uniformly and takes one sample from
    ``members[i]``; the cost lands on the member's counter.
    """

    def __init__(self, members: Sequence[SampleOracle], rng: np.random.Generator):
        if not members:
            raise ValueError("need at least one member oracle")
        n = members[0].n
        if any(m.n != n for m in members):
            raise ValueError("member oracles must share a domain")
        super().__init__(n)
        self._members = list(members)
        self._rng = rng

    def _draw(self, size: int) -> np.ndarray:
        which = self._rng.integers(0, len(self._members), size=size)
        out = np.empty(size, dtype=np.int64)
        for i, m in enumerate(self._members):
            sel = which == i
            k = int(sel.sum())
            if k:
                out[sel] = m.draw(k)
        return out

    @property
    def samples_drawn(self) -> int:
        return sum(m.samples_drawn for m in self._members)


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------


def sample(dist: VectorLike, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` i.i.d. samples from an explicit distribution."""
    return AliasTable(_vec(dist)).draw(rng, size)


def poissonized_counts(
    oracle: SampleOracle, m: float, rng: np.random.Generator
) -> np.ndarray:
    """Counts of ``Poi(m)`` draws from ``oracle``, as an int64 vector.

    The count in each bin is then an independent Poisson variable with mean
    ``m * p_i``, which is what the l2 statistic's unbiasedness relies on.
    ``rng`` supplies the Poisson draw; the oracle supplies the samples.
    """
    total = int(rng.poisson(m))
    s = oracle.draw(total)
    return np.bincount(s, minlength=oracle.n).astype(np.int64)


def poissonized_count_matrix(
    oracle: SampleOracle, m: float, reps: int, rng: np.random.Generator
) -> np.ndarray:
    """Stacked Poissonized counts for ``reps`` independent repetitions.

    Equivalent to calling :func:`poissonized_counts` ``reps`` times but with
    a single bulk draw from the oracle.
    """
    sizes = rng.poisson(m, size=reps).astype(np.int64)
    s = oracle.draw(int(sizes.sum()))
    out = np.zeros((reps, oracle.n), dtype=np.int64)
    rep_idx = np.repeat(np.arange(reps), sizes)
    np.add.at(out, (rep_idx, s), 1)
    return out


# ---------------------------------------------------------------------------
# distances and norms
# ---------------------------------------------------------------------------


def l1_distance(p: VectorLike, q: VectorLike) -> float:
    """Total absolute difference ``sum_i |p_i - q_i|``."""
    return float(np.abs(_vec(p) - _vec(q)).sum())


def l2_norm(p: VectorLike) -> float:
    v = _vec(p)
    return float(np.sqrt((v * v).sum()))


def l23_quasinorm(p: VectorLike) -> float:
    """``(sum_i p_i^{2/3})^{3/2}``, the scale that governs instance-adapted budgets."""
    v = _vec(p)
    return float((v ** (2.0 / 3.0)).sum() ** 1.5)


def hellinger_sq(p: VectorLike, q: VectorLike) -> float:
    """Squared Hellinger distance ``(1/2) sum_i (sqrt(p_i) - sqrt(q_i))^2``."""
    d = np.sqrt(_vec(p)) - np.sqrt(_vec(q))
    return float(0.5 * (d * d).sum())


def chi_sq(p: VectorLike, q: VectorLike) -> float:
    """``sum_i (p_i - q_i)^2 / q_i`` over bins with ``q_i > 0``.

    Returns ``inf`` when some bin has ``q_i = 0 < p_i``; bins where both are
    zero contribute nothing.
    """
    pv, qv = _vec(p), _vec(q)
    zero = qv == 0
    if np.any(pv[zero] > 0):
        return float("inf")
    d = pv[~zero] - qv[~zero]
    return float((d * d / qv[~zero]).sum())


def q_small_mass_profile(p: VectorLike, m: float) -> tuple[int, float]:
    """Support size and l2 norm of the part of ``p`` below mass ``1/m``.

    Bins with ``p_i >= 1/m`` are zeroed out; the returned pair is
    ``(#remaining nonzero bins, l2 norm of the remaining sub-vector)``.
    These two numbers govern how many samples an adaptive tester must spend
    on the light part of a distribution.
    """
    v = _vec(p)
    kept = v[(v < 1.0 / m) & (v > 0)]
    return int(kept.size), float(np.sqrt((kept * kept).sum()))


def restrict(p: VectorLike, subset: np.ndarray) -> PseudoDistribution:
    """The measure ``p`` restricted to ``subset`` (indices), unnormalized."""
    v = _vec(p)
    idx = np.asarray(subset, dtype=np.int64)
    return PseudoDistribution(v[idx])


def condition(p: VectorLike, subset: np.ndarray) -> ExplicitDistribution:
    """The conditional distribution of ``p`` given ``subset``; indices are
    re-labelled ``0..len(subset)-1`` in the order given."""
    r = restrict(p, subset)
    if r.total <= 0:
        raise ValueError("cannot condition on a zero-mass subset")
    return ExplicitDistribution(r.mass / r.total)


@dataclass(frozen=True)
class IntervalPartition:
    """Contiguous intervals covering ``0..n-1``, each nonempty.

    ``bounds`` holds the ``k+1`` cut points: interval ``I`` spans
    ``bounds[I]..bounds[I+1]-1``.
    """

    bounds: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=np.int64)
        if b.size < 2 or b[0] != 0:
            raise ValueError("bounds must start at 0 and delimit at least one interval")
        if np.any(np.diff(b) <= 0):
            raise ValueError("every interval must be nonempty")
        object.__setattr__(self, "bounds", b)

    @classmethod
    def from_sizes(cls, sizes) -> "IntervalPartition":
        s = np.asarray(sizes, dtype=np.int64)
        return cls(np.concatenate(([0], np.cumsum(s))))

    @classmethod
    def equal(cls, n: int, k: int) -> "IntervalPartition":
        """``k`` near-even intervals; the first ``n % k`` get the extra bin."""
        if not (1 <= k <= n):
            raise ValueError("need 1 <= k <= n")
        base, extra = divmod(n, k)
        sizes = np.full(k, base, dtype=np.int64)
        sizes[:extra] += 1
        return cls.from_sizes(sizes)

    @property
    def n(self) -> int:
        return int(self.bounds[-1])

    @property
    def k(self) -> int:
        return int(self.bounds.size - 1)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.bounds)

    def owner(self) -> np.ndarray:
        """Interval index of every bin, as a length-``n`` label array."""
        return np.repeat(np.arange(self.k, dtype=np.int64), self.sizes)

    def intervals(self):
        return [(int(a), int(b)) for a, b in zip(self.bounds[:-1], self.bounds[1:])]
