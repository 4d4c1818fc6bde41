"""Identity testing against an explicitly known distribution.

:func:`identity_known` splits each bin of the reference ``q`` into
``1 + floor(n q_i)`` sub-bins, after which no sub-bin carries more than
``1/n`` of the mass and the l2 core applies with ``b = O(1/sqrt(n))``,
giving an ``O(sqrt(n)/eps^2)`` tester.  Because splitting preserves
chi-square distance exactly, the accept side extends beyond ``p = q`` to
every ``p`` with ``chi2(p, q) <= eps^2 / 10``.

:func:`identity_instance_optimal` instead groups bins of ``q`` into
powers-of-two mass buckets, checks the total mass of every bucket, and runs
a conditional l2 test inside each bucket (where ``q`` is nearly flat).  Its
budget tracks the 2/3-quasinorm of ``q`` rather than ``sqrt(n)``, so for
spiky references it is far cheaper than the minimax bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from ..core import (
    DistributionOracle,
    ExplicitDistribution,
    SampleOracle,
    condition,
    l23_quasinorm,
    l2_norm,
)
from ..l2core import L2TestConfig, l2_closeness_test, l2_closeness_test_min
from ..split import SplitOracle, split_explicit, split_map_from_known
from .common import BudgetTracker, ConditionalOracle, TestVerdict

__all__ = ["identity_known", "BucketIndex", "identity_instance_optimal"]


def identity_known(
    q: ExplicitDistribution,
    p: SampleOracle,
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_sample: float = 20.0,
    c_norm: float = 30.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Distinguish ``p = q`` (or ``chi2(p,q) <= eps^2/10``) from ``||p-q||_1 > eps``."""
    if p.n != q.n:
        raise ValueError("oracle and reference disagree on domain size")
    tracker = BudgetTracker(p=p)
    rng_ref, rng_split, rng_main = rng.spawn(3)
    sm = split_map_from_known(q.probs)
    q_split = split_explicit(q.probs, sm)
    q_oracle = DistributionOracle(q_split, rng_ref)
    tracker.add("q_reference", q_oracle)
    p_split = SplitOracle(p, sm, rng_split)
    cfg = L2TestConfig(
        epsilon=eps,
        b=2.0 / math.sqrt(sm.n_split),
        fail_prob=fail_prob,
        c_sample=c_sample,
        c_norm=c_norm,
        budget_scale=budget_scale,
    )
    accept, trace = l2_closeness_test_min(p_split, q_oracle, sm.n_split, cfg, rng_main)
    trace.insert(0, {"stage": "split_known", "n_split": int(sm.n_split)})
    return tracker.verdict(accept, trace)


@dataclass(frozen=True)
class BucketIndex:
    """Bins of a known distribution grouped by dyadic mass level.

    Level ``j`` holds bins with ``q_i in (2^{-j-1}, 2^{-j}]``; everything
    lighter than ``2^{-k_max-1}`` (including zero-mass bins) lands in the
    overflow level ``k_max + 1``.
    """

    level: np.ndarray
    k_max: int

    @classmethod
    def build(cls, q: np.ndarray, n: int, eps: float) -> "BucketIndex":
        k_max = math.ceil(2.0 * math.log2(10.0 * n / eps))
        level = np.full(q.size, k_max + 1, dtype=np.int64)
        pos = q > 0
        # The 1e-12 nudge keeps exact powers of two on their own level.
        j = np.floor(-np.log2(q[pos]) + 1e-12).astype(np.int64)
        level[pos] = np.minimum(j, k_max + 1)
        return cls(level=level, k_max=k_max)

    @property
    def overflow_level(self) -> int:
        return self.k_max + 1

    def buckets(self) -> Dict[int, np.ndarray]:
        out: Dict[int, np.ndarray] = {}
        for j in np.unique(self.level):
            out[int(j)] = np.flatnonzero(self.level == j)
        return out


def identity_instance_optimal(
    q: ExplicitDistribution,
    p: SampleOracle,
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_sample: float = 20.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Identity test whose budget adapts to the shape of ``q``.

    Rejects when ``||p - q||_1 > eps``; accepts ``p = q``.  The work is
    ``O(polylog(n/eps) * (1 + ||q||_{2/3}) / eps^2)`` samples: a shared batch
    checks all bucket masses to additive ``eps / (10 log2(n/eps))``, then
    each bucket with enough reference mass gets a conditional l2 test at a
    radius scaled by ``1 / (log2(n/eps) * q(bucket))``.  Buckets whose scaled
    radius reaches 2 cannot hide any farness and are skipped.
    """
    n = q.n
    if p.n != n:
        raise ValueError("oracle and reference disagree on domain size")
    tracker = BudgetTracker(p=p)
    trace: List[dict] = []
    rng_mass, rng_cond = rng.spawn(2)

    big_l = math.log2(max(n / eps, 4.0))
    fail_each = min(1.0 / 3.0, 1.0 / (big_l * big_l))
    index = BucketIndex.build(q.probs, n, eps)
    buckets = index.buckets()
    q_mass = {j: float(q.probs[idx].sum()) for j, idx in buckets.items()}

    # Stage 1: one sample batch checks every bucket's total mass.
    delta_mass = eps / (10.0 * big_l)
    n_mass = math.ceil(
        budget_scale * math.log(2.0 / fail_each) / (2.0 * delta_mass**2)
    )
    mass_samples = p.draw(n_mass)
    level_counts = np.bincount(
        index.level[mass_samples], minlength=index.overflow_level + 1
    )
    mass_ok = True
    mass_records = []
    for j, idx in buckets.items():
        p_hat = level_counts[j] / n_mass
        dev = abs(p_hat - q_mass[j])
        mass_records.append(
            {"bucket": int(j), "q_mass": q_mass[j], "p_hat": float(p_hat)}
        )
        if dev > 2.0 * delta_mass:
            mass_ok = False
    trace.append(
        {
            "stage": "bucket_mass_check",
            "batch": int(n_mass),
            "delta_mass": float(delta_mass),
            "buckets": mass_records,
            "accept": bool(mass_ok),
        }
    )
    if not mass_ok:
        return tracker.verdict(False, trace)

    # Stage 2: conditional l2 test inside each bucket that could hide eps/L
    # of l1 discrepancy.  q restricted to a bucket is known exactly, so the
    # norm bound is analytic and the reference side is sampled synthetically.
    budget_bound = float(n_mass)
    for j, idx in sorted(buckets.items()):
        mass = q_mass[j]
        if mass <= 0:
            continue
        eps_j = eps / (big_l * mass)
        if eps_j >= 2.0 or idx.size == 1:
            trace.append(
                {"stage": "bucket_skip", "bucket": int(j), "eps_scaled": float(eps_j)}
            )
            continue
        cond_q = condition(q.probs, idx)
        rng_ref, rng_run = rng_cond.spawn(2)
        rng_cond = rng_run
        q_or = DistributionOracle(cond_q, rng_ref)
        tracker.add(f"q_reference_{j}", q_or)
        rate = max(mass - 2.0 * delta_mass, mass / 2.0)
        p_or = ConditionalOracle(p, idx, accept_rate=rate)
        cfg = L2TestConfig(
            epsilon=eps_j,
            b=l2_norm(cond_q),
            fail_prob=fail_each,
            c_sample=c_sample,
            budget_scale=budget_scale,
        )
        accept, rec = l2_closeness_test(p_or, q_or, int(idx.size), cfg, rng_run)
        rec["stage"] = "bucket_l2_test"
        rec["bucket"] = int(j)
        budget_bound += rec["m_poisson"] / rate
        trace.append(rec)
        if not accept:
            return tracker.verdict(False, trace)

    trace.append(
        {
            "stage": "budget_bound",
            "value": float(budget_bound),
            "l23_reference": float(l23_quasinorm(q.probs)),
        }
    )
    return tracker.verdict(True, trace)
