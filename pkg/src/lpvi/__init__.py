"""Variational inequalities VI(C, B) in finite-dimensional l^p spaces:
duality mappings, metric projections, constant estimators for B, and a
certified projected fixed-point solver."""
from ._accel import backend
from .space import (
    DualFunctional,
    GaugeFunction,
    SpaceMismatch,
    SpacePoint,
    gauge_duality_map,
    normalized_duality_map,
    p_norm,
    pairing,
)
from .sets import (
    Ball,
    Box,
    Halfspace,
    Simplex,
    UnsupportedCombination,
    best_approx_certificate,
    chebyshev_probe,
    contains,
    distance,
    metric_projection,
)
from .mappings import (
    Affine,
    Oracle,
    ResidualOfContraction,
    ScaledIdentity,
    certify_cocoercive,
    check_pc_nonexpansive,
    estimate_constants,
    estimate_lipschitz,
    estimate_strong_monotonicity,
    evaluate,
    feasibility_analysis,
)
from .solver import (
    HypothesisViolated,
    SolverConfig,
    certify_vi_solution,
    contraction_factor,
    solve_vi,
    step_size_window,
    uniqueness_probe,
)
from .lab import check_pairing_inequality, flawed_contraction_factor, pairing_inequality_batch, verify_proof_chain

__version__ = "0.1.0"
