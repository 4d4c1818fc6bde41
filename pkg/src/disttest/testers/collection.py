"""Testers for collections of distributions sharing one domain.

Two access models.  In the sampling model a single oracle returns pairs
(value, index) with a known index marginal, and the question is whether
every member of the collection is the same distribution over values.  In
the query model each member can be sampled on demand, and far members are
hunted with geometrically growing distances and pick counts.
"""

from __future__ import annotations

import math
from typing import List, Sequence

import numpy as np

from ..core import (
    ExplicitDistribution,
    MappedOracle,
    MixtureIndexOracle,
    SampleOracle,
)
from ..l2core import L2TestConfig, l2_closeness_test_min
from ..split import SplitMap, SplitOracle, split_map_from_known, split_map_from_samples
from .closeness import closeness_equal
from .common import BudgetTracker, TestVerdict
from .independence import CoordinateShuffleOracle, _axis_labels

__all__ = ["collection_sampling", "collection_query", "query_level_schedule"]


def collection_sampling(
    p: SampleOracle,
    known_marginal2: ExplicitDistribution,
    n: int,
    m: int,
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_sample: float = 20.0,
    c_norm: float = 30.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Sampling-model collection test over ``[n] x [m]`` pairs.

    The oracle emits flat labels ``x * m + i`` where ``x`` is the value and
    ``i`` the member index, and the index marginal is ``known_marginal2``.
    Accepts when all members are identical; rejects when the joint is
    ``eps``-far in l1 from having identical members.

    The value axis is split from ``Poi(k)`` of its own marginal with
    ``k = min(n, n^(2/3) m^(1/3) eps^(-4/3))``; the index axis needs no
    sampling because its marginal is known, so its sub-bin counts are the
    deterministic ``1 + floor(m * w_i)``.  A mismatch between the observed
    index marginal and ``known_marginal2`` is not checked: the access model
    guarantees it.
    """
    if m <= 0 or n <= 0:
        raise ValueError("domain sizes must be positive")
    if known_marginal2.n != m:
        raise ValueError("index marginal must live on m points")
    if p.n != n * m:
        raise ValueError("oracle domain must be the flat product [n] x [m]")
    if not (0.0 < eps <= 2.0):
        raise ValueError("eps must lie in (0, 2]")

    tracker = BudgetTracker(p=p)
    k = min(n, math.ceil(n ** (2.0 / 3.0) * m ** (1.0 / 3.0) * eps ** (-4.0 / 3.0)))
    k_eff = max(1, round(k * budget_scale))

    labels = _axis_labels((n, m))
    rng_split, rng_p, rng_q, rng_main = rng.spawn(4)

    value_marg = MappedOracle(p, labels[0], n)
    sm_value = split_map_from_samples(value_marg, k_eff, rng_split)
    sm_index = split_map_from_known(known_marginal2.probs, m)
    a_flat = np.multiply.outer(sm_value.a, sm_index.a).reshape(-1)
    sm = SplitMap.from_multiplicities(a_flat)

    q = CoordinateShuffleOracle(p, labels, (n, m))
    p_split = SplitOracle(p, sm, rng_p)
    q_split = SplitOracle(q, sm, rng_q)

    cfg = L2TestConfig(
        epsilon=eps,
        b=4.0 / math.sqrt(float(k_eff) * float(m)),
        fail_prob=fail_prob,
        c_sample=c_sample,
        c_norm=c_norm,
        budget_scale=budget_scale,
    )
    accept, trace = l2_closeness_test_min(p_split, q_split, sm.n_split, cfg, rng_main)
    trace.insert(
        0,
        {
            "stage": "collection_split",
            "k": int(k_eff),
            "n_split": int(sm.n_split),
            "axis_split_sizes": [int(sm_value.n_split), int(sm_index.n_split)],
        },
    )
    return tracker.verdict(accept, trace)


def query_level_schedule(m: int, eps: float, c_pick: float = 2.0) -> List[dict]:
    """Level plan for the query-model tester.

    Level ``k`` checks ``ceil(2^(5k/4) c_pick)`` random members at l1
    distance ``2^(k-1) eps``; levels whose distance reaches 2 are vacuous
    and marked skipped.  The level count grows with ``log2(m)`` but the
    skip rule caps the active levels at ``log2(4/eps)``, so the total work
    does not depend on ``m``.
    """
    if m <= 0:
        raise ValueError("need at least one member")
    if not (0.0 < eps <= 2.0):
        raise ValueError("eps must lie in (0, 2]")
    top = max(0, math.ceil(math.log2(m))) if m > 1 else 0
    plan = []
    for k in range(top + 1):
        radius = 2.0 ** (k - 1) * eps
        plan.append(
            {
                "level": k,
                "radius": radius,
                "picks": math.ceil(2.0 ** (1.25 * k) * c_pick),
                "skipped": radius >= 2.0,
            }
        )
    return plan


def collection_query(
    oracles: Sequence[SampleOracle],
    n: int,
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_pick: float = 2.0,
    c_sample: float = 20.0,
    c_norm: float = 30.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Query-model collection test: every member versus the mixture.

    The reference ``q*`` draws one sample by picking a uniformly random
    member and sampling it.  Level ``k`` compares ``q*`` against randomly
    picked members at distance ``2^(k-1) eps`` with failure probability
    shrinking like ``6^-k`` per pick, so a far member is met and rejected
    at the level matching how far and how numerous its kind is.  Accepts
    when all members are identical.
    """
    m = len(oracles)
    if m == 0:
        raise ValueError("need at least one member oracle")
    for i, orc in enumerate(oracles):
        if orc.n != n:
            raise ValueError(f"member {i} lives on {orc.n} points, expected {n}")
    if not (0.0 < eps <= 2.0):
        raise ValueError("eps must lie in (0, 2]")
    if c_pick <= 0:
        raise ValueError("c_pick must be positive")

    tracker = BudgetTracker(**{f"q{i}": orc for i, orc in enumerate(oracles)})
    rng_mix, rng_pickidx, rng_tests = rng.spawn(3)
    q_star = MixtureIndexOracle(list(oracles), rng_mix)

    plan = query_level_schedule(m, eps, c_pick)
    trace: List[dict] = [{"stage": "query_schedule", "m": int(m), "levels": plan}]
    for entry in plan:
        if entry["skipped"]:
            continue
        k = entry["level"]
        sub_fail = min(1.0 / 3.0, 3.0 * fail_prob * c_pick ** (-2.0) * 6.0 ** (-k))
        members = rng_pickidx.integers(0, m, size=entry["picks"])
        for t, i in enumerate(members):
            rng_child = rng_tests.spawn(1)[0]
            sub = closeness_equal(
                q_star,
                oracles[int(i)],
                n,
                entry["radius"],
                rng_child,
                fail_prob=sub_fail,
                c_sample=c_sample,
                c_norm=c_norm,
                budget_scale=budget_scale,
            )
            trace.append(
                {
                    "stage": "query_pick",
                    "level": int(k),
                    "pick": int(t),
                    "member": int(i),
                    "radius": float(entry["radius"]),
                    "accept": bool(sub.accept),
                    "trace": sub.trace,
                }
            )
            if not sub.accept:
                return tracker.verdict(False, trace)
    return tracker.verdict(True, trace)
