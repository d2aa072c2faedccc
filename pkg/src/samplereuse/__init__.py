"""Sample reuse for Monte Carlo experiments over nested uncertainty sets."""

__version__ = "0.1.0"

from .geometry import (
    Ball,
    Box,
    BoxUnion,
    ChainError,
    Donut,
    NestedChain,
    audit_nestedness,
    build_chain,
    contains,
    volume,
)
from .sampling import make_stream, radial_ks_test, sample_uniform
from .predicates import (
    Constant,
    CountingPredicate,
    Halfspace,
    HurwitzCubic,
    InnerBall,
    Predicate,
    PredicateError,
    UserPredicate,
    analytic_truth,
)
from .engine import ReuseLedger, ReuseResult, SampleRecord, naive_run, run
from .estimation import (
    BELOW_GRID,
    RobustnessCurve,
    binomial_ci,
    curve_infimum,
    donut_estimates,
    donut_reconstruct,
    estimate_curve,
    margin,
    variance_ratio,
)
from .complexity import corollary_bound, expected_fresh, expected_total, theorem_bound, trial_statistics
