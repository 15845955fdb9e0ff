"""Statistical unit tests for MCMC and Monte Carlo sampler implementations.

The library checks a sampler against the distribution it claims to target by
turning "is this chain's output distributed correctly?" into ordinary
hypothesis tests with exactly-valid null distributions, wrapped in a
sequential procedure that keeps the overall false-rejection rate below a
configured bound while spending little effort on correct samplers.
"""

__version__ = "0.1.0"

from .rng import RngStream, derive_substream
from .stats import (
    TestOutcome,
    bonferroni_min,
    chi2_two_sample_discrete,
    chi2_uniformity,
    kolmogorov_sf,
    ks_one_sample_uniform01,
    ks_two_sample,
)
from .model import (
    GenerativeModel,
    KernelFamily,
    OrdinalRanking,
    ParamSpace,
    TestFunction,
)
from .sequential import (
    IterationRecord,
    PValueVector,
    SequentialConfig,
    SequentialVerdict,
    expected_extra_effort_uniform,
    extra_effort_bound,
    sequential_test,
)
from .exact import (
    RankConfig,
    TwoSampleConfig,
    check_detailed_balance,
    rank_test,
    two_sample_test,
)

__all__ = [
    "GenerativeModel",
    "IterationRecord",
    "KernelFamily",
    "OrdinalRanking",
    "PValueVector",
    "ParamSpace",
    "RankConfig",
    "RngStream",
    "SequentialConfig",
    "SequentialVerdict",
    "TestFunction",
    "TestOutcome",
    "TwoSampleConfig",
    "__version__",
    "bonferroni_min",
    "check_detailed_balance",
    "chi2_two_sample_discrete",
    "chi2_uniformity",
    "derive_substream",
    "expected_extra_effort_uniform",
    "extra_effort_bound",
    "kolmogorov_sf",
    "ks_one_sample_uniform01",
    "ks_two_sample",
    "rank_test",
    "sequential_test",
    "two_sample_test",
]
