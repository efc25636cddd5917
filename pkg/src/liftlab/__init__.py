"""Lift-based privacy leakage and privatization mechanisms for discrete data."""

from .errors import (
    AlphaOutOfRange,
    CapExceeded,
    EmptyPolytope,
    EmptySubset,
    EmptySupport,
    InfeasibleTarget,
    LabelMismatch,
    LiftlabError,
    MalformedR,
    NegativeEntry,
    ParseError,
    SumOutOfTolerance,
    ZeroLift,
)
from .lift import AverageMeasures, Budget, LiftTable, alip_satisfied, avg_measures, ldp_satisfied, lift_table
from .measures import ALIP, LDP, LIP, Measure, MeasureKind, bound_implications, lift_based, lift_inverse
from .prob import (
    Channel,
    JointDistribution,
    Marginal,
    compose_channel,
    entropy,
    marginals,
    mutual_information,
    nmi,
    sample_random_joint,
    validate_joint,
)
from .random_response import aorr, build_polytope, enumerate_vertices, solve_column_lp, srr
from .watchdog import (
    MechanismReport,
    Partition,
    complete_merge_mechanism,
    partition_low_high,
    subset_leakage,
    subset_merge_mechanism,
    subset_merging,
    watchdog_utility,
    x_invariant_channel,
)

__version__ = "0.1.0"
