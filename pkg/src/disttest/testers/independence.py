"""Independence testing over product domains.

The two-axis tester reduces independence to closeness: the coordinate
shuffle of two joint samples ``(x1, y1), (x2, y2) -> (x1, y2)`` has law
exactly ``marginal1 x marginal2``, so testing whether ``p`` equals the
shuffled law is testing independence.  Both sides are then bin-split, each
axis with its own multiset of marginal samples, which drives the product's
l2 norm down to ``O(1/sqrt(k m))`` and gives the
``O(max(n^{2/3} m^{1/3} / eps^{4/3}, sqrt(nm) / eps^2))`` budget.

For three or more axes, :func:`independence_dd` recurses: either the
largest axis is peeled off and tested against the rest with the two-axis
reduction, or the axes are packed greedily into at most three groups of
roughly balanced size and a grouped product test runs before recursing into
each group.
"""

from __future__ import annotations

import math
from typing import List, Sequence, Tuple

import numpy as np

from ..core import MappedOracle, SampleOracle
from ..l2core import L2TestConfig, l2_closeness_test_min
from ..split import SplitMap, SplitOracle, split_map_from_samples
from .common import BudgetTracker, TestVerdict

__all__ = [
    "CoordinateShuffleOracle",
    "independence_2d",
    "greedy_axis_partition",
    "independence_dd",
]


class CoordinateShuffleOracle(SampleOracle):
    """Samples from the product of the group marginals of a joint oracle.

    One output sample costs ``len(groups)`` draws of the base oracle: the
    g-th group's coordinate is read off the g-th draw, so the coordinates
    are independent by construction while each keeps its marginal law.
    """

    def __init__(self, base: SampleOracle, group_labels: Sequence[np.ndarray],
                 group_sizes: Sequence[int]):
        if len(group_labels) != len(group_sizes) or not group_labels:
            raise ValueError("need one label array per group")
        n_out = 1
        for s in group_sizes:
            n_out *= int(s)
        super().__init__(n_out)
        self._base = base
        self._labels = [np.asarray(g, dtype=np.int64) for g in group_labels]
        self._sizes = [int(s) for s in group_sizes]

    def _draw(self, size: int) -> np.ndarray:
        out = np.zeros(size, dtype=np.int64)
        for labels, width in zip(self._labels, self._sizes):
            out = out * width + labels[self._base.draw(size)]
        return out

    @property
    def samples_drawn(self) -> int:
        return self._base.samples_drawn


def _axis_labels(dims: Sequence[int]) -> List[np.ndarray]:
    """Coordinate of every flat index along each axis (row-major layout)."""
    n_flat = int(np.prod(dims))
    flat = np.arange(n_flat, dtype=np.int64)
    coords = np.unravel_index(flat, tuple(dims))
    return [np.asarray(c, dtype=np.int64) for c in coords]


def _product_split_test(
    p: SampleOracle,
    dims_g: Sequence[int],
    ks: Sequence[int],
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float,
    c_sample: float,
    c_norm: float,
    budget_scale: float,
) -> Tuple[bool, list]:
    """Shared engine: split every group axis, shuffle-sample the product,
    and run the min-norm closeness test on the split pair."""
    labels = _axis_labels(dims_g)
    rng_splits = rng.spawn(len(dims_g))
    mult = []
    split_sizes = []
    for g, (lab, k_g, rng_g) in enumerate(zip(labels, ks, rng_splits)):
        marg = MappedOracle(p, lab, int(dims_g[g]))
        sm_g = split_map_from_samples(marg, k_g, rng_g)
        mult.append(sm_g.a)
        split_sizes.append(int(sm_g.n_split))
    a_flat = mult[0]
    for a_next in mult[1:]:
        a_flat = np.multiply.outer(a_flat, a_next)
    sm = SplitMap.from_multiplicities(a_flat.reshape(-1))
    q = CoordinateShuffleOracle(p, labels, dims_g)
    rng_p, rng_q, rng_main = rng.spawn(3)
    p_split = SplitOracle(p, sm, rng_p)
    q_split = SplitOracle(q, sm, rng_q)
    b = (2.0 ** len(dims_g)) / math.sqrt(float(np.prod(ks)))
    cfg = L2TestConfig(
        epsilon=eps,
        b=b,
        fail_prob=fail_prob,
        c_sample=c_sample,
        c_norm=c_norm,
        budget_scale=budget_scale,
    )
    accept, trace = l2_closeness_test_min(p_split, q_split, sm.n_split, cfg, rng_main)
    trace.insert(
        0,
        {
            "stage": "product_split",
            "dims": [int(d) for d in dims_g],
            "k": [int(k) for k in ks],
            "n_split": int(sm.n_split),
            "axis_split_sizes": split_sizes,
        },
    )
    return accept, trace


def independence_2d(
    p: SampleOracle,
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
    """Test whether a joint distribution over ``[n] x [m]`` is a product.

    ``p`` yields row-major flat samples ``i * m + j`` with ``n >= m``.
    YES when the coordinates are independent; NO when ``p`` is ``eps``-far
    in l1 from every product distribution.
    """
    if m > n:
        raise ValueError("first axis must be the larger one; swap the axes")
    if p.n != n * m:
        raise ValueError("oracle domain does not match n * m")
    if not (0.0 < eps <= 2.0):
        raise ValueError("eps must lie in (0, 2]")
    tracker = BudgetTracker(p=p)
    k = min(n, math.ceil(n ** (2.0 / 3.0) * m ** (1.0 / 3.0) * eps ** (-4.0 / 3.0)))
    k_eff = max(1, round(k * budget_scale))
    m_eff = max(1, round(m * budget_scale))
    accept, trace = _product_split_test(
        p,
        (n, m),
        (k_eff, m_eff),
        eps,
        rng,
        fail_prob=fail_prob,
        c_sample=c_sample,
        c_norm=c_norm,
        budget_scale=budget_scale,
    )
    return tracker.verdict(accept, trace)


def greedy_axis_partition(dims: Sequence[int]) -> List[Tuple[int, int]]:
    """Pack axes, in the given order, into runs whose size product stays
    within ``sqrt(prod(dims))``; returns ``(start, stop)`` index pairs.

    Each run takes at least one axis, so an oversized single axis becomes a
    run by itself.
    """
    n_total = float(np.prod([float(d) for d in dims]))
    limit = math.sqrt(n_total)
    runs: List[Tuple[int, int]] = []
    i = 0
    d = len(dims)
    while i < d:
        j = i + 1
        prod = float(dims[i])
        while j < d and prod * dims[j] <= limit:
            prod *= dims[j]
            j += 1
        runs.append((i, j))
        i = j
    return runs


def independence_dd(
    p: SampleOracle,
    dims: Sequence[int],
    eps: float,
    rng: np.random.Generator,
    *,
    fail_prob: float = 1.0 / 3.0,
    c_sample: float = 20.0,
    c_norm: float = 30.0,
    budget_scale: float = 1.0,
) -> TestVerdict:
    """Test full independence of all coordinates of a d-way joint oracle.

    Size-1 axes are dropped up front.  With one effective axis the answer
    is YES for free; with two it is exactly :func:`independence_2d`.  Above
    that, the cheaper of two strategies is chosen from the dims alone:
    peel the largest axis (test it against the rest, then recurse on the
    rest, both at ``eps/2``), or partition the axes into at most three
    balanced groups, run a grouped product test at ``eps/4``, and recurse
    into each group at ``eps/4``.
    """
    dims = [int(d) for d in dims if int(d) > 1]
    if any(d < 1 for d in dims):
        raise ValueError("axis sizes must be positive")
    knobs = dict(c_sample=c_sample, c_norm=c_norm, budget_scale=budget_scale)
    d = len(dims)
    if d <= 1:
        tracker = BudgetTracker(p=p)
        return tracker.verdict(True, [{"stage": "trivial", "dims": dims}])
    if d == 2:
        n1, n2 = dims
        if n1 >= n2:
            return independence_2d(p, n1, n2, eps, rng, fail_prob=fail_prob, **knobs)
        labels = _axis_labels(dims)
        swapped = MappedOracle(p, labels[1] * n1 + labels[0], n1 * n2)
        return independence_2d(swapped, n2, n1, eps, rng, fail_prob=fail_prob, **knobs)

    tracker = BudgetTracker(p=p)
    n_total = float(np.prod([float(x) for x in dims]))
    a_cost = math.sqrt(n_total) / eps**2
    b_costs = [(x * n_total) ** (1.0 / 3.0) / eps ** (4.0 / 3.0) for x in dims]
    j_star = int(np.argmax(b_costs))
    trace: List[dict] = []

    if b_costs[j_star] >= a_cost:
        # Peel the largest axis: 2D test of (axis j*, rest), then recurse.
        labels = _axis_labels(dims)
        rest_dims = dims[:j_star] + dims[j_star + 1 :]
        n_rest = int(np.prod(rest_dims))
        rest_label = np.zeros(int(n_total), dtype=np.int64)
        for ax, lab in enumerate(labels):
            if ax != j_star:
                rest_label = rest_label * dims[ax] + lab
        n_j = dims[j_star]
        if n_j >= n_rest:
            pair_label = labels[j_star] * n_rest + rest_label
            big, small = n_j, n_rest
        else:
            pair_label = rest_label * n_j + labels[j_star]
            big, small = n_rest, n_j
        rng_pair, rng_rest = rng.spawn(2)
        view = MappedOracle(p, pair_label, big * small)
        sub = independence_2d(
            view, big, small, eps / 2.0, rng_pair, fail_prob=fail_prob / 2.0, **knobs
        )
        trace.append({"stage": "peel_axis", "axis": j_star, "trace": sub.trace})
        if sub.accept:
            rest_view = MappedOracle(p, rest_label, n_rest)
            rec = independence_dd(
                rest_view, rest_dims, eps / 2.0, rng_rest,
                fail_prob=fail_prob / 2.0, **knobs,
            )
            trace.append({"stage": "recurse_rest", "trace": rec.trace})
            accept = rec.accept
        else:
            accept = False
        return tracker.verdict(accept, trace)

    # Grouped branch: contiguous runs keep the row-major flat layout intact,
    # so the grouped joint is the same oracle read with coarser coordinates.
    runs = greedy_axis_partition(dims)
    group_dims = [int(np.prod(dims[i:j])) for i, j in runs]
    heavy = [(i, j) for i, j in runs if j - i >= 2]
    n_subtests = 1 + len(heavy)
    sub_fail = fail_prob / n_subtests
    rng_prod, *rng_groups = rng.spawn(1 + len(heavy))
    ks = []
    g_big = int(np.argmax(group_dims))
    for g, size in enumerate(group_dims):
        if g == g_big and len(group_dims) > 1:
            others = int(np.prod(group_dims)) // size
            k_g = min(
                size,
                math.ceil(
                    size ** (2.0 / 3.0) * others ** (1.0 / 3.0) * (eps / 4.0) ** (-4.0 / 3.0)
                ),
            )
        else:
            k_g = size
        ks.append(max(1, round(k_g * budget_scale)))
    ok, prod_trace = _product_split_test(
        p, group_dims, ks, eps / 4.0, rng_prod,
        fail_prob=sub_fail, **knobs,
    )
    trace.append({"stage": "group_product", "runs": runs, "trace": prod_trace})
    accept = ok
    if accept:
        for (i, j), rng_g in zip(heavy, rng_groups):
            lab = np.zeros(int(n_total), dtype=np.int64)
            labels = _axis_labels(dims)
            for ax in range(i, j):
                lab = lab * dims[ax] + labels[ax]
            sub_view = MappedOracle(p, lab, int(np.prod(dims[i:j])))
            rec = independence_dd(
                sub_view, dims[i:j], eps / 4.0, rng_g,
                fail_prob=sub_fail, **knobs,
            )
            trace.append({"stage": "recurse_group", "run": (i, j), "trace": rec.trace})
            if not rec.accept:
                accept = False
                break
    return tracker.verdict(accept, trace)
