"""Testing whether a distribution is flat on each interval of a partition.

The tester refines every interval into sub-bins, lightly where the
distribution is light and finely where a quick probe saw mass, then
compares the refined distribution against its own interval-flattened
version with the min-norm closeness engine.  A distribution that is flat
on every interval survives the comparison exactly; one that is far from
every such histogram keeps its full l1 gap through the refinement.
"""

from __future__ import annotations

import math

import numpy as np

from ..core import IntervalPartition, SampleOracle
from ..l2core import L2TestConfig, l2_closeness_test_min
from ..split import SplitMap, SplitOracle
from .common import BudgetTracker, TestVerdict

__all__ = ["k_histogram", "FlatteningOracle"]


class FlatteningOracle(SampleOracle):
    """Samples from the interval-flattened companion of a base oracle.

    A draw picks a base sample, looks up its interval, and lands on a
    uniformly random refined sub-bin of that interval.  The law places the
    base distribution's interval masses exactly flat across each refined
    interval; the cost is one base draw per sample.
    """

    def __init__(
        self,
        base: SampleOracle,
        part: IntervalPartition,
        sm: SplitMap,
        rng: np.random.Generator,
    ):
        if base.n != part.n or sm.n != part.n:
            raise ValueError("oracle, partition, and split map disagree on n")
        super().__init__(sm.n_split)
        self._base = base
        self._rng = rng
        self._owner = part.owner()
        self._start = sm.offsets[part.bounds[:-1]]
        ends = np.append(sm.offsets[1:], sm.n_split)
        self._width = ends[part.bounds[1:] - 1] - self._start

    def _draw(self, size: int) -> np.ndarray:
        iv = self._owner[self._base.draw(size)]
        return self._start[iv] + self._rng.integers(0, self._width[iv])

    @property
    def samples_drawn(self) -> int:
        return self._base.samples_drawn


def k_histogram(
    p: SampleOracle,
    part: IntervalPartition,
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_sample: float = 20.0,
    c_norm: float = 30.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Accepts when ``p`` is flat on every interval of ``part``.

    Rejects when ``p`` is ``eps``-far in l1 from every distribution that is
    flat on those intervals.  Each interval ``I`` is refined into
    ``ceil(n/(k|I|)) + floor(n a_I / (k|I|))`` sub-bins per original bin,
    where ``a_I`` counts hits from ``Poi(m)`` probe draws with
    ``m = min(k, n^(1/3) k^(1/3) eps^(-4/3))``; intervals carrying more
    mass are refined proportionally finer, which is what caps the refined
    squared norm near ``k/(nm)`` and keeps the main test cheap.
    """
    n = part.n
    k = part.k
    if p.n != n:
        raise ValueError("oracle and partition disagree on domain size")
    if not (0.0 < eps <= 2.0):
        raise ValueError("eps must lie in (0, 2]")

    tracker = BudgetTracker(p=p)
    m_probe = min(k, math.ceil(n ** (1.0 / 3.0) * k ** (1.0 / 3.0) * eps ** (-4.0 / 3.0)))
    m_eff = max(1, round(m_probe * budget_scale))

    rng_probe, rng_flat, rng_p, rng_main = rng.spawn(4)
    total = int(rng_probe.poisson(m_eff))
    probe = p.draw(total)
    owner = part.owner()
    a_iv = np.bincount(owner[probe], minlength=k)

    sizes = part.sizes
    t_iv = np.ceil(n / (k * sizes)).astype(np.int64) + (
        (n * a_iv) // (k * sizes)
    ).astype(np.int64)
    sm = SplitMap.from_multiplicities(t_iv[owner])

    p_split = SplitOracle(p, sm, rng_p)
    q_flat = FlatteningOracle(p, part, sm, rng_flat)

    cfg = L2TestConfig(
        epsilon=eps,
        b=2.0 * math.sqrt(k / (float(n) * float(m_eff))),
        fail_prob=fail_prob,
        c_sample=c_sample,
        c_norm=c_norm,
        budget_scale=budget_scale,
    )
    accept, trace = l2_closeness_test_min(p_split, q_flat, sm.n_split, cfg, rng_main)
    trace.insert(
        0,
        {
            "stage": "histogram_refine",
            "k": int(k),
            "m_refine": int(m_eff),
            "n_split": int(sm.n_split),
        },
    )
    return tracker.verdict(accept, trace)
