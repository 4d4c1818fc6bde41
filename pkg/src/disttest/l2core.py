"""The robust l2 closeness core.

Given Poissonized counts ``X_i ~ Poi(m p_i)`` and ``Y_i ~ Poi(m q_i)``, the
statistic

    z = sum_i (X_i - Y_i)^2 - X_i - Y_i

has expectation exactly ``m^2 * ||p - q||_2^2``; collisions within one count
vector likewise estimate ``||p||_2^2``.  The tests in this module turn those
two facts into:

* :func:`l2_closeness_test` -- accepts when ``||p-q||_2 <= eps/(2 sqrt(n))``
  and rejects when ``||p-q||_2 >= eps/sqrt(n)``, given an a-priori bound
  ``b >= max(||p||_2, ||q||_2)``, using ``O(b n / eps^2)`` samples.
* :func:`l2_norm_estimate` -- factor-2 estimate of ``||p||_2`` from
  ``O(sqrt(n))`` samples, never below ``1/sqrt(n)``.
* :func:`l2_closeness_test_min` -- the same closeness test but with ``b``
  discovered from the *smaller* of the two norms, which is what every
  reduction in this package ultimately calls.

Failure probabilities below the native one-shot level are bought by scaling
the Poissonized sample size (variance contraction), not by majority voting;
``SIGMA_MARGIN`` records the certified margin-to-sigma ratio of the one-shot
test at its decision boundary that the scaling rule assumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np
from scipy.special import ndtri

from .core import SampleOracle, poissonized_counts

__all__ = [
    "L2Statistic",
    "L2TestConfig",
    "l2_statistic",
    "collision_norm_sq_raw",
    "l2_radius_test",
    "l2_closeness_test",
    "l2_norm_estimate",
    "l2_closeness_test_min",
]

#: Certified margin/sigma of the one-shot test at its decision boundary with
#: the default constants; used when converting a failure-probability target
#: into a sample-size multiplier.
SIGMA_MARGIN = 1.5

#: Per-repetition failure budget of one collision-based norm estimate at the
#: default ``c_norm``; certified by a Monte Carlo test over a spread of
#: distribution shapes, with Chebyshev giving the non-quantitative backstop.
NORM_REP_ERR = 0.08

#: Norm estimates this far apart (as a ratio) make the closeness question
#: trivial: report "far" without running the main test.
NORM_MISMATCH_RATIO = 8.0


@dataclass(frozen=True)
class L2Statistic:
    """The integer-exact collision statistic of one Poissonized draw pair."""

    z: int
    m: float

    @property
    def normalized(self) -> float:
        """``z / m^2``, an unbiased estimate of ``||p - q||_2^2``."""
        return self.z / (self.m * self.m)


@dataclass(frozen=True)
class L2TestConfig:
    """Knobs of the l2 core.

    ``epsilon`` is the distance parameter in (0, 2]; ``b`` the caller's bound
    on the relevant l2 norm; ``c_thresh`` places the accept threshold between
    the completeness radius squared (0) and the soundness radius squared (1),
    so the default 1/2 is the midpoint ``(5/8) m^2 eps^2 / n``.
    ``budget_scale`` multiplies every sample-size formula and exists for the
    harness's power/budget sweeps.
    """

    epsilon: float
    b: float
    fail_prob: float = 1.0 / 3.0
    c_sample: float = 20.0
    c_thresh: float = 0.5
    c_norm: float = 30.0
    budget_scale: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 2.0):
            raise ValueError("epsilon must lie in (0, 2]")
        if self.b <= 0:
            raise ValueError("b must be positive")
        if not (0.0 < self.fail_prob < 1.0):
            raise ValueError("fail_prob must lie in (0, 1)")


def l2_statistic(x, y) -> int:
    """``sum_i (x_i - y_i)^2 - x_i - y_i`` in exact integer arithmetic."""
    xa = np.asarray(getattr(x, "counts", x), dtype=np.int64)
    ya = np.asarray(getattr(y, "counts", y), dtype=np.int64)
    if xa.shape != ya.shape:
        raise ValueError("count vectors must have equal length")
    d = xa - ya
    return int((d * d - xa - ya).sum())


def collision_norm_sq_raw(counts, m: float) -> float:
    """``sum_i x_i (x_i - 1) / m^2``: raw collision estimate of ``||p||_2^2``."""
    x = np.asarray(getattr(counts, "counts", counts), dtype=np.int64)
    return int((x * (x - 1)).sum()) / (m * m)


def _sample_multiplier(fail_prob: float) -> float:
    """Sample-size factor that brings the one-shot error down to ``fail_prob``."""
    if fail_prob >= 1.0 / 3.0:
        return 1.0
    return max(1.0, (float(ndtri(1.0 - fail_prob)) / SIGMA_MARGIN) ** 2)


def _median_reps(fail_prob: float, per_rep: float = NORM_REP_ERR) -> int:
    """Smallest odd rep count whose majority-failure is at most ``fail_prob``."""
    if fail_prob >= per_rep:
        return 1
    r = 1
    while r < 501:
        bad = sum(
            math.comb(r, k) * per_rep**k * (1 - per_rep) ** (r - k)
            for k in range((r // 2) + 1, r + 1)
        )
        if bad <= fail_prob:
            return r
        r += 2
    raise ValueError(f"cannot reach failure probability {fail_prob}")


def l2_radius_test(
    p: SampleOracle,
    q: SampleOracle,
    delta_sq: float,
    cfg: L2TestConfig,
    rng: np.random.Generator,
) -> Tuple[bool, dict]:
    """One-shot robust test at an explicit squared-l2 radius.

    Accepts when ``||p-q||_2^2 <= delta_sq / 4`` and rejects when it is at
    least ``delta_sq``, with failure probability ``cfg.fail_prob``, provided
    ``cfg.b`` bounds both norms.  Returns ``(accept, record)``.
    """
    if delta_sq <= 0:
        raise ValueError("delta_sq must be positive")
    mult = _sample_multiplier(cfg.fail_prob)
    m = math.ceil(cfg.c_sample * cfg.budget_scale * mult * cfg.b / delta_sq)
    x = poissonized_counts(p, m, rng)
    y = poissonized_counts(q, m, rng)
    z = l2_statistic(x, y)
    frac = 0.25 * (1.0 - cfg.c_thresh) + 1.0 * cfg.c_thresh
    threshold = frac * (float(m) ** 2) * delta_sq
    accept = z <= threshold
    record = {
        "stage": "l2_radius_test",
        "m_poisson": int(m),
        "z": int(z),
        "threshold": float(threshold),
        "delta_sq": float(delta_sq),
        "b": float(cfg.b),
        "accept": bool(accept),
    }
    return accept, record


def l2_closeness_test(
    p: SampleOracle,
    q: SampleOracle,
    n: int,
    cfg: L2TestConfig,
    rng: np.random.Generator,
) -> Tuple[bool, dict]:
    """Robust closeness on domain size ``n`` at l1 scale ``cfg.epsilon``.

    The radii are ``eps/(2 sqrt(n))`` and ``eps/sqrt(n)``; by Cauchy-Schwarz
    the reject side covers every pair with ``||p-q||_1 >= eps``.  Draws
    ``ceil(c_sample * b * n / eps^2)`` Poissonized samples per oracle (before
    any failure-probability scaling).
    """
    delta_sq = cfg.epsilon * cfg.epsilon / float(n)
    return l2_radius_test(p, q, delta_sq, cfg, rng)


def l2_norm_estimate(
    oracle: SampleOracle,
    n: int,
    cfg: L2TestConfig,
    rng: np.random.Generator,
) -> Tuple[float, dict]:
    """Estimate ``||p||_2`` within a factor 2, never returning below ``1/sqrt(n)``.

    Median of repeated collision estimates on ``Poi(c_norm * sqrt(n))``
    counts; the repetition count follows from ``cfg.fail_prob`` and the
    certified per-repetition error.
    """
    reps = _median_reps(cfg.fail_prob)
    m = math.ceil(cfg.c_norm * cfg.budget_scale * math.sqrt(n))
    floor_sq = 1.0 / float(n)
    vals = []
    for _ in range(reps):
        counts = poissonized_counts(oracle, m, rng)
        raw = collision_norm_sq_raw(counts, m)
        vals.append(math.sqrt(max(raw, floor_sq)))
    est = float(np.median(vals))
    est = max(est, 1.0 / math.sqrt(n))
    record = {
        "stage": "l2_norm_estimate",
        "m_poisson": int(m),
        "reps": int(reps),
        "estimate": float(est),
    }
    return est, record


def l2_closeness_test_min(
    p: SampleOracle,
    q: SampleOracle,
    n: int,
    cfg: L2TestConfig,
    rng: np.random.Generator,
) -> Tuple[bool, list]:
    """Closeness with the norm bound discovered rather than assumed.

    Estimates both norms to a factor 2; wildly mismatched norms (ratio above
    8) already certify distance, otherwise the main test runs with effective
    bound ``4 * min(estimates)``.  Distinguishes ``p = q`` from
    ``||p - q||_1 > eps`` with probability at least ``1 - cfg.fail_prob``.
    """
    trace = []
    norm_cfg = replace(cfg, fail_prob=cfg.fail_prob / 4.0)
    est_p, rec_p = l2_norm_estimate(p, n, norm_cfg, rng)
    rec_p["oracle"] = "p"
    est_q, rec_q = l2_norm_estimate(q, n, norm_cfg, rng)
    rec_q["oracle"] = "q"
    trace += [rec_p, rec_q]
    lo, hi = min(est_p, est_q), max(est_p, est_q)
    if hi > NORM_MISMATCH_RATIO * lo:
        trace.append({"stage": "norm_mismatch", "ratio": hi / lo, "accept": False})
        return False, trace
    b_eff = 4.0 * lo
    main_cfg = replace(cfg, b=b_eff, fail_prob=cfg.fail_prob / 2.0)
    accept, rec = l2_closeness_test(p, q, n, main_cfg, rng)
    trace.append(rec)
    return accept, trace
