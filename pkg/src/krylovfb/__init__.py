"""Reachable annihilating polynomials under static output feedback."""

from .driver import (
    AlgorithmOneConfig,
    AlgorithmOneOutcome,
    ShiftConfig,
    StabilizationOutcome,
    algorithm_one,
    shift_roots,
    stabilize_by_output_feedback,
)
from .exceptions import *  # noqa: F401,F403
from .feedback import (
    BilinearResult,
    FeedbackSystem,
    RankOneResult,
    ReachabilityVerdict,
    bkc_reachability_check,
    mimo_bilinear_solve,
    rank_one_update,
    state_feedback_from_sigma,
    verify_feedback,
)
from .krylov import (
    KrylovSeq,
    annihilating_from_krylov,
    annihilating_polynomial,
    full_krylov,
    matrix_from_krylov,
    transform_krylov,
)
from .numerics import DEFAULT_TOL, Tolerance, companion_matrix, poly_from_roots, poly_roots
from .sigma import sigma_apply_last_column, sigma_identity, sigma_inv, sigma_mul, sigma_to_toeplitz

__version__ = "0.1.0"
