"""Property testers built on the robust l2 core and the split transform."""

from .adaptive import closeness_adaptive
from .closeness import closeness_equal, closeness_split_size, closeness_unequal
from .collection import collection_query, collection_sampling, query_level_schedule
from .common import (
    BudgetTracker,
    ConditionalOracle,
    TestVerdict,
)
from .hellinger import hellinger_closeness
from .histogram import FlatteningOracle, k_histogram
from .identity import BucketIndex, identity_instance_optimal, identity_known
from .independence import (
    CoordinateShuffleOracle,
    greedy_axis_partition,
    independence_2d,
    independence_dd,
)

__all__ = [
    "TestVerdict",
    "BudgetTracker",
    "ConditionalOracle",
    "closeness_equal",
    "closeness_unequal",
    "closeness_split_size",
    "closeness_adaptive",
    "identity_known",
    "identity_instance_optimal",
    "BucketIndex",
    "independence_2d",
    "independence_dd",
    "greedy_axis_partition",
    "CoordinateShuffleOracle",
    "collection_sampling",
    "collection_query",
    "query_level_schedule",
    "k_histogram",
    "FlatteningOracle",
    "hellinger_closeness",
]
