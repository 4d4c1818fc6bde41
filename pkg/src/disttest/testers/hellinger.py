"""Closeness testing under squared Hellinger distance.

For fat eps the l1 machinery already covers Hellinger farness, because
the l1 distance dominates the squared Hellinger distance.  For thin eps
the tester instead categorizes bins by a probe of ``q``: category masses
are compared empirically, each heavy category gets a padded l2 test whose
radius tracks the per-bin mass of that level, and bins the probe never
saw are tested conditionally in l1.  Padding hides the mass outside a
category in a sea of phantom bins so that the plain l2 statistic sees
only the within-category discrepancy; the phantom bins are never
materialized, the statistic is computed sparsely from the drawn labels.
"""

from __future__ import annotations

import math
from typing import List, Tuple

import numpy as np

from ..core import BudgetExceededError, SampleOracle
from ..l2core import L2TestConfig, _sample_multiplier
from .closeness import closeness_equal
from .common import BudgetTracker, ConditionalOracle, TestVerdict

__all__ = ["hellinger_closeness"]


class _PaddedRestriction(SampleOracle):
    """Base oracle with everything outside ``subset`` diluted into phantoms.

    Draws inside ``subset`` keep their (re-labelled) identity; any other
    draw lands on one of ``n_phantom`` uniformly random phantom labels.
    The restriction of the law to real labels is exactly the base law on
    ``subset``, and no phantom carries more than ``1/n_phantom`` of the
    leftover mass.
    """

    def __init__(
        self,
        base: SampleOracle,
        subset: np.ndarray,
        n_phantom: int,
        rng: np.random.Generator,
    ):
        subset = np.asarray(subset, dtype=np.int64)
        super().__init__(subset.size + n_phantom)
        self._base = base
        self._rng = rng
        self._pos = np.full(base.n, -1, dtype=np.int64)
        self._pos[subset] = np.arange(subset.size)
        self._real = subset.size
        self._n_phantom = int(n_phantom)

    def _draw(self, size: int) -> np.ndarray:
        lab = self._pos[self._base.draw(size)]
        phantom = lab < 0
        n_ph = int(phantom.sum())
        if n_ph:
            lab[phantom] = self._real + self._rng.integers(0, self._n_phantom, size=n_ph)
        return lab

    @property
    def samples_drawn(self) -> int:
        return self._base.samples_drawn


def _sparse_l2_z(sx: np.ndarray, sy: np.ndarray) -> int:
    """The centered collision statistic from raw samples, no dense counts."""
    lab = np.concatenate([sx, sy])
    if lab.size == 0:
        return 0
    uniq, inv = np.unique(lab, return_inverse=True)
    cx = np.bincount(inv[: sx.size], minlength=uniq.size)
    cy = np.bincount(inv[sx.size :], minlength=uniq.size)
    d = cx - cy
    return int(np.sum(d * d - cx - cy))


def _padded_radius_test(
    po: SampleOracle,
    qo: SampleOracle,
    delta_sq: float,
    cfg: L2TestConfig,
    rng: np.random.Generator,
) -> Tuple[bool, dict]:
    """l2 radius test over a huge sparse domain; mirrors the dense one."""
    mult = _sample_multiplier(cfg.fail_prob)
    m = math.ceil(cfg.c_sample * cfg.budget_scale * mult * cfg.b / delta_sq)
    sx = po.draw(int(rng.poisson(m)))
    sy = qo.draw(int(rng.poisson(m)))
    z = _sparse_l2_z(sx, sy)
    frac = 0.25 * (1.0 - cfg.c_thresh) + 1.0 * cfg.c_thresh
    threshold = frac * float(m) ** 2 * delta_sq
    accept = z <= threshold
    return accept, {
        "stage": "padded_radius_test",
        "m_poisson": int(m),
        "z": int(z),
        "threshold": float(threshold),
        "delta_sq": float(delta_sq),
        "b": float(cfg.b),
        "accept": bool(accept),
    }


def hellinger_closeness(
    p: SampleOracle,
    q: SampleOracle,
    n: int,
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_sample: float = 20.0,
    c_norm: float = 30.0,
    c_marg: float = 4.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Distinguish ``p = q`` from ``H^2(p, q) >= eps``.

    When ``n >= eps^-4`` the square-root-of-n l1 tester is no more
    expensive than the Hellinger-specific route, and since
    ``||p - q||_1 >= H^2(p, q)`` it already rejects everything this test
    must reject; the call is simply delegated at distance ``eps``.

    Otherwise ``ceil(n^(3/4) / eps)`` probe draws of ``q`` group bins into
    count levels.  Level masses of ``p`` and ``q`` are compared
    empirically at tolerance ``eps/100`` plus the probe's own noise
    floor; each level is tested by a padded l2 test at squared radius
    ``(level bin mass) * eps / (2 ln m)``; bins the probe never hit are
    compared conditionally in l1 at distance ``eps`` over their mass.
    """
    if p.n != n or q.n != n:
        raise ValueError("both oracles must live on n points")
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must lie in (0, 1] for squared Hellinger distance")
    if not (0.0 < fail_prob < 1.0):
        raise ValueError("fail_prob must lie in (0, 1)")

    tracker = BudgetTracker(p=p, q=q)
    if n >= eps**-4.0:
        sub = closeness_equal(
            p, q, n, eps, rng,
            fail_prob=fail_prob, c_sample=c_sample, c_norm=c_norm,
            budget_scale=budget_scale,
        )
        trace = [{"stage": "l1_delegate", "accept": bool(sub.accept)}] + sub.trace
        return tracker.verdict(sub.accept, trace)

    r_probe, r_pmarg, r_mass, r_tests = rng.spawn(4)
    m_cat = math.ceil(n ** 0.75 / eps * budget_scale)
    counts = np.bincount(q.draw(m_cat), minlength=n)
    seen = counts > 0
    levels = np.floor(np.log2(counts, where=seen, out=np.zeros(n)))
    level_ids = np.unique(levels[seen]).astype(np.int64)
    n_heavy = level_ids.size
    trace: List[dict] = [
        {"stage": "hellinger_categorize", "m_probe": int(m_cat), "levels": n_heavy}
    ]

    # Level masses of p versus q, empirically, with the probe's noise floor
    # added to the nominal eps/100 tolerance.
    p_counts = np.bincount(p.draw(m_cat), minlength=n)
    n_slots = n_heavy + 1
    q_hat = np.empty(n_slots)
    p_hat = np.empty(n_slots)
    for idx, j in enumerate(level_ids):
        sel = seen & (levels == j)
        q_hat[idx] = counts[sel].sum() / m_cat
        p_hat[idx] = p_counts[sel].sum() / m_cat
    q_hat[n_heavy] = counts[~seen].sum() / m_cat
    p_hat[n_heavy] = p_counts[~seen].sum() / m_cat
    marg_stat = float(np.abs(p_hat - q_hat).sum())
    marg_tol = eps / 100.0 + c_marg * math.sqrt(n_slots / m_cat)
    trace.append(
        {
            "stage": "level_mass_check",
            "l1_observed": marg_stat,
            "tolerance": float(marg_tol),
            "accept": marg_stat <= marg_tol,
        }
    )
    if marg_stat > marg_tol:
        return tracker.verdict(False, trace)

    # Padded l2 test per count level.
    n_phantom = math.ceil(1e4 * n)
    delta_cat = fail_prob / (4.0 * max(n_heavy, 1))
    polylog = 2.0 * math.log(max(m_cat, 3))
    for idx, j in enumerate(level_ids):
        bins = np.flatnonzero(seen & (levels == j))
        c_bins = counts[bins].astype(np.float64)
        norm_plug = math.sqrt(max(float((c_bins * (c_bins - 1.0)).sum()), 0.0)) / m_cat
        x_level = 2.0**j / m_cat
        b_j = 2.0 * max(norm_plug, q_hat[idx] / math.sqrt(bins.size))
        delta_sq = x_level * eps / polylog
        cfg = L2TestConfig(
            epsilon=eps,
            b=b_j,
            fail_prob=delta_cat,
            c_sample=c_sample,
            c_norm=c_norm,
            budget_scale=budget_scale,
        )
        rng_pp, rng_pq, rng_t = r_tests.spawn(3)
        po = _PaddedRestriction(p, bins, n_phantom, rng_pp)
        qo = _PaddedRestriction(q, bins, n_phantom, rng_pq)
        accept, rec = _padded_radius_test(po, qo, delta_sq, cfg, rng_t)
        rec["level"] = int(j)
        rec["bins"] = int(bins.size)
        trace.append(rec)
        if not accept:
            return tracker.verdict(False, trace)

    # Conditional l1 test on the part of the domain the probe never saw.
    unseen = np.flatnonzero(~seen)
    if unseen.size:
        m_mass = math.ceil(50.0 / eps)
        hits = np.isin(q.draw(m_mass), unseen, assume_unique=False)
        q_light = float(hits.sum()) / m_mass
        radius = eps / q_light if q_light > 0 else math.inf
        rec = {
            "stage": "light_part",
            "bins": int(unseen.size),
            "mass_estimate": q_light,
            "radius": float(radius),
        }
        trace.append(rec)
        if radius < 2.0:
            rate = max(q_light / 2.0, 1e-12)
            try:
                cond_p = ConditionalOracle(p, unseen, rate, cap_factor=1e3)
                cond_q = ConditionalOracle(q, unseen, rate, cap_factor=1e3)
                sub = closeness_equal(
                    cond_p,
                    cond_q,
                    unseen.size,
                    radius,
                    r_tests.spawn(1)[0],
                    fail_prob=fail_prob / 4.0,
                    c_sample=c_sample,
                    c_norm=c_norm,
                    budget_scale=budget_scale,
                )
                rec["accept"] = bool(sub.accept)
                rec["trace"] = sub.trace
                if not sub.accept:
                    return tracker.verdict(False, trace)
            except BudgetExceededError:
                rec["starved"] = True
                return tracker.verdict(False, trace)
        else:
            rec["skipped_vacuous"] = True
    return tracker.verdict(True, trace)
