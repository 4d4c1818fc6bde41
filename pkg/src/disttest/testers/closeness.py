"""Two-sample closeness testing in l1 distance.

Both unknown distributions are pushed through a split map built from
``Poi(k)`` samples of the second one, which flattens the domain enough that
the l2 core's sample count collapses to ``O(n/(sqrt(k) eps^2))`` per oracle.
With the standard choice ``k = min(n, n^{2/3} eps^{-4/3})`` this realizes the
``O(max(n^{2/3}/eps^{4/3}, sqrt(n)/eps^2))`` closeness tester; with ``k``
capped by an external budget ``m1`` it becomes the unequal-sample-size
variant.
"""

from __future__ import annotations

import math

import numpy as np

from ..core import SampleOracle
from ..l2core import L2TestConfig, l2_closeness_test_min
from ..split import SplitOracle, split_map_from_samples
from .common import BudgetTracker, TestVerdict

__all__ = ["closeness_equal", "closeness_unequal", "closeness_split_size"]


def closeness_split_size(n: int, eps: float) -> int:
    """The standard splitting budget ``min(n, ceil(n^{2/3} eps^{-4/3}))``."""
    return min(int(n), math.ceil(n ** (2.0 / 3.0) * eps ** (-4.0 / 3.0)))


def _closeness_with_k(
    p: SampleOracle,
    q: SampleOracle,
    n: int,
    eps: float,
    k: int,
    rng: np.random.Generator,
    *,
    fail_prob: float,
    c_sample: float,
    c_norm: float,
    budget_scale: float,
) -> TestVerdict:
    if p.n != n or q.n != n:
        raise ValueError("oracles disagree with the stated domain size")
    tracker = BudgetTracker(p=p, q=q)
    rng_split, rng_p, rng_q, rng_main = rng.spawn(4)
    k_eff = max(1, int(round(k * budget_scale)))
    sm = split_map_from_samples(q, k_eff, rng_split)
    p_s = SplitOracle(p, sm, rng_p)
    q_s = SplitOracle(q, sm, rng_q)
    cfg = L2TestConfig(
        epsilon=eps,
        b=2.0 / math.sqrt(k_eff),
        fail_prob=fail_prob,
        c_sample=c_sample,
        c_norm=c_norm,
        budget_scale=budget_scale,
    )
    accept, trace = l2_closeness_test_min(p_s, q_s, sm.n_split, cfg, rng_main)
    trace.insert(0, {"stage": "split", "k": int(k_eff), "n_split": int(sm.n_split)})
    return tracker.verdict(accept, trace)


def closeness_equal(
    p: SampleOracle,
    q: SampleOracle,
    n: int,
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_sample: float = 20.0,
    c_norm: float = 30.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Distinguish ``p = q`` from ``||p - q||_1 > eps`` on ``[n]``.

    Accepts (YES) when the distributions are identical and rejects (NO) when
    they are eps-far, each with probability at least ``1 - fail_prob``.
    """
    k = closeness_split_size(n, eps)
    return _closeness_with_k(
        p,
        q,
        n,
        eps,
        k,
        rng,
        fail_prob=fail_prob,
        c_sample=c_sample,
        c_norm=c_norm,
        budget_scale=budget_scale,
    )


def closeness_unequal(
    q: SampleOracle,
    p: SampleOracle,
    n: int,
    eps: float,
    m1: int,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_sample: float = 20.0,
    c_norm: float = 30.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Closeness when only ``m1`` splitting samples of ``q`` are affordable.

    Identical to :func:`closeness_equal` except the split size is
    ``min(n, m1)``; the second phase then costs
    ``O(max(n/(sqrt(m1) eps^2), sqrt(n)/eps^2))`` draws per oracle.  With
    ``m1 >= n`` this reduces exactly to the equal-sample tester run at split
    size ``n``.
    """
    if m1 < 1:
        raise ValueError("m1 must be at least 1")
    k = min(int(n), int(m1))
    return _closeness_with_k(
        p,
        q,
        n,
        eps,
        k,
        rng,
        fail_prob=fail_prob,
        c_sample=c_sample,
        c_norm=c_norm,
        budget_scale=budget_scale,
    )
