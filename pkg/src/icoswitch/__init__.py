"""Simulation and statistics for geometric-phase estimation with a quantum switch."""

from .estimation import (
    BootstrapResult,
    Estimate,
    PhaseEstimator,
    RmseResult,
    TrialOutcome,
    bootstrap_rmse_std,
    crb,
    fisher_ideal,
    fisher_noisy,
    mle_estimate,
    prior_branch,
    rmse,
)
from .exceptions import (
    ConfigError,
    FitConvergenceError,
    InsufficientDataError,
    InvalidPriorError,
    TruncationError,
)
from .experiment import ExperimentConfig, run_sweep, run_trial, violation_report
from .fitting import FringeFitter, ScalingFitter, fit_fringe, fit_scaling
from .fock import FockState, Order, apply_order, displacement_matrix, oracle_probabilities
from .noise import (
    NoiseParams,
    hl_bound,
    hl_criterion,
    noisy_probabilities,
    resource_account,
    sql_bound,
    sql_criterion,
)
from .switch import (
    DisplacementSequence,
    GeometricPhase,
    OutcomeProbabilities,
    geometric_phase,
    ideal_probabilities,
    total_displacements,
)

__version__ = "0.1.0"
