"""Seedable two-vehicle merging simulator with risk-threshold drivers.

Each driver projects a probabilistic belief of the other vehicle's
future position from noisy perception, reads a collision risk off that
belief, and re-plans a constant-acceleration profile whenever the risk
leaves the band between two personal thresholds.  The package bundles
the simulator, per-trial metrics and aggregate tables, and a grid-search
calibration pipeline that fits the thresholds to recorded trials.
"""

__version__ = "0.1.0"

from .analysis import (
    Rejection,
    TrialMetrics,
    conflict_resolution_time,
    first_crossing,
    gap_at_merge,
    ingest_human_dataset,
    merge_order,
    metrics_frame,
    trial_metrics,
    velocity_deviation_metrics,
)
from .calibration import (
    CalibrationError,
    CalibrationResult,
    GridResponse,
    GridSpec,
    build_grid,
    calibrate,
    load_or_build_grid,
    match_trial,
    synthesize_probe_trials,
)
from .engine import (
    Agent,
    PairParams,
    ParameterError,
    SideLog,
    TrialLog,
    code_version,
    derive_seed,
    load_parameters,
    load_trial_log,
    run_batch,
    run_trial,
    save_parameters,
    save_trial_log,
)
from .params import ModelConstants
from .risk import RiskThresholds, evaluate_thresholds, perceived_risk
from .scenario import (
    ALL_CONDITIONS,
    DEFAULT_CONDITIONS,
    Condition,
    Track,
    VehicleState,
    initial_states,
)

__all__ = [
    "ALL_CONDITIONS",
    "Agent",
    "CalibrationError",
    "CalibrationResult",
    "Condition",
    "DEFAULT_CONDITIONS",
    "GridResponse",
    "GridSpec",
    "ModelConstants",
    "PairParams",
    "ParameterError",
    "Rejection",
    "RiskThresholds",
    "SideLog",
    "Track",
    "TrialLog",
    "TrialMetrics",
    "VehicleState",
    "build_grid",
    "calibrate",
    "code_version",
    "conflict_resolution_time",
    "derive_seed",
    "evaluate_thresholds",
    "first_crossing",
    "gap_at_merge",
    "ingest_human_dataset",
    "initial_states",
    "load_or_build_grid",
    "load_parameters",
    "load_trial_log",
    "match_trial",
    "merge_order",
    "metrics_frame",
    "perceived_risk",
    "run_batch",
    "run_trial",
    "save_parameters",
    "save_trial_log",
    "synthesize_probe_trials",
    "trial_metrics",
    "velocity_deviation_metrics",
    "__version__",
]
