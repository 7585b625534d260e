"""Sparse network topology identification from stationary diffused signals.

The library solves, in batch or over a stream, the convex program

    minimize  ||S||_1 + (mu / 2) ||S C - C S||_F^2

over symmetric, hollow, non-negative adjacency candidates S with optional
fixed entries, where C is a (streaming) covariance estimate of signals
diffused through the unknown graph.  Diagnostics cover identifiability of the
feasible set, strong convexity of the smooth term, and tracking/regret bounds
for the streaming solver.
"""

from .analysis import (
    BoundInputs,
    ConvexityCertificate,
    FeasibilityReport,
    RegretReport,
    TrackingBoundSeries,
    commutation_operator,
    eigenvector_squares,
    feasibility,
    khatri_rao_self,
    objective_shift_unit,
    regret_bound,
    response_diagnostics,
    strong_convexity,
    tracking_bound,
)
from .config import ExperimentConfig
from .covariance import CovarianceEstimator, power_iteration, sample_covariance, top_eigenpair
from .diffusion import (
    FilterSpec,
    SignalBatch,
    build_filter,
    ensemble_covariance,
    frequency_response,
    generate,
    load_signals_csv,
    save_signals_csv,
)
from .graphs import (
    EdgeConstraints,
    GroundTruth,
    init_sparse_random,
    load_edge_list,
    save_edge_list,
    support,
    validate,
)
from .metrics import RecoveryMetrics, f_measure, resolve_threshold, threshold_sweep, trajectory_compare
from .online import (
    ChangeEvent,
    DriftingStream,
    OnlineConfig,
    OnlineState,
    RunTrace,
    TraceRecord,
    online_step,
    rewire,
    run_stream,
)
from .solver import (
    SolveResult,
    SolverConfig,
    batch_solve,
    gradient,
    is_degenerate_covariance,
    lipschitz_constant,
    objective,
    objective_parts,
    pg_step,
    prox,
)

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "ChangeEvent",
    "ConvexityCertificate",
    "CovarianceEstimator",
    "DriftingStream",
    "EdgeConstraints",
    "ExperimentConfig",
    "FeasibilityReport",
    "FilterSpec",
    "GroundTruth",
    "OnlineConfig",
    "OnlineState",
    "RecoveryMetrics",
    "RegretReport",
    "RunTrace",
    "SignalBatch",
    "SolveResult",
    "SolverConfig",
    "TraceRecord",
    "TrackingBoundSeries",
    "batch_solve",
    "build_filter",
    "commutation_operator",
    "eigenvector_squares",
    "ensemble_covariance",
    "f_measure",
    "feasibility",
    "frequency_response",
    "generate",
    "gradient",
    "is_degenerate_covariance",
    "init_sparse_random",
    "khatri_rao_self",
    "lipschitz_constant",
    "load_edge_list",
    "load_signals_csv",
    "objective",
    "objective_parts",
    "objective_shift_unit",
    "online_step",
    "pg_step",
    "power_iteration",
    "prox",
    "regret_bound",
    "resolve_threshold",
    "response_diagnostics",
    "rewire",
    "run_stream",
    "sample_covariance",
    "save_edge_list",
    "save_signals_csv",
    "strong_convexity",
    "support",
    "threshold_sweep",
    "top_eigenpair",
    "tracking_bound",
    "trajectory_compare",
    "validate",
]
