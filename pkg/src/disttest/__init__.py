"""Sample-efficient property testing for discrete distributions.

The package is organized around one statistical engine and a family of
reductions into it:

- :mod:`disttest.core`: distributions, sample oracles, seeding, metrics.
- :mod:`disttest.l2core`: the robust l2 closeness test and norm estimator.
- :mod:`disttest.split`: the sub-bin splitting transform that tames heavy
  bins while preserving l1 distances exactly.
- :mod:`disttest.testers`: closeness, identity, independence, collection,
  histogram, Hellinger, and budget-adaptive testers.
- :mod:`disttest.hard_instances`: certified-far instance generators and
  exact mutual-information computations for the matching lower bounds.
- :mod:`disttest.harness`: power sweeps, exponent fits, calibration.
- :mod:`disttest.formats`: text formats for distributions and samples.
"""

from .core import (
    AliasTable,
    BudgetExceededError,
    CountVector,
    DistributionOracle,
    ExplicitDistribution,
    IntervalPartition,
    JointDistribution,
    MappedOracle,
    MixtureIndexOracle,
    PseudoDistribution,
    ReplayExhaustedError,
    ReplayOracle,
    SampleOracle,
    chi_sq,
    condition,
    hellinger_sq,
    l1_distance,
    l2_norm,
    l23_quasinorm,
    poissonized_counts,
    q_small_mass_profile,
    restrict,
    sample,
    spawn_rng,
)
from .l2core import (
    L2Statistic,
    L2TestConfig,
    collision_norm_sq_raw,
    l2_closeness_test,
    l2_closeness_test_min,
    l2_norm_estimate,
    l2_radius_test,
    l2_statistic,
)
from .split import (
    SplitMap,
    SplitOracle,
    split_explicit,
    split_map_from_known,
    split_map_from_samples,
    split_sample,
)
from .testers import (
    BucketIndex,
    TestVerdict,
    closeness_adaptive,
    closeness_equal,
    closeness_unequal,
    collection_query,
    collection_sampling,
    hellinger_closeness,
    identity_instance_optimal,
    identity_known,
    independence_2d,
    independence_dd,
    k_histogram,
)

__version__ = "0.1.0"
