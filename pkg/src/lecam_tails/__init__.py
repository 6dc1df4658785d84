"""Numerical laboratory for the two-density lower-bound construction in tail-index estimation."""

__version__ = "0.1.0"

from .densities import (
    BaseDensity,
    ClassParams,
    DensityPair,
    PerturbationSchedule,
    PerturbedDensity,
    build_schedule,
    cdf,
    delta_fn,
    pdf,
    quantile,
    solve_constants,
    validate_pair,
)
from .estimators import EstimatorSpec, estimate
from .experiments import (
    AccuracySequence,
    ExperimentConfig,
    ExperimentResult,
    likelihood_ratio_moment,
    run_separation_scan,
    run_two_point,
)
from .sampling import SeedSpec, derive_replication_seed, sample
from .verification import (
    ChiSquareReport,
    MembershipCertificate,
    chi_square,
    chi_square_order_scan,
    membership_certificate,
    membership_scan,
)
