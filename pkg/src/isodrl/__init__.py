"""Worst-case risk evaluation under isotonic density-ratio constraints."""

from .core import (
    BoundsDual,
    BoundsSet,
    ComponentwiseOrder,
    EmpiricalDistribution,
    ExcessRiskSolution,
    KLDivergenceSet,
    KLDualState,
    NumericFailure,
    RiskVector,
    ScoreOrder,
    comparable_pairs,
    expectation,
    make_uniform_distribution,
)
from .drl import (
    UnboundedWeightError,
    monotone_rearrangement_check,
    oracle_max,
    solve,
    solve_bounds,
    solve_kl,
)
from .iso import (
    IsoExcessRiskReport,
    convergence_probe,
    hardness_demo,
    misspecification_gap,
    shift_budget,
    solve_iso,
    solve_iso_recalibration,
)
from .isotonic import ProjectionResult, project_partial_order, project_pava

__version__ = "0.1.0"
