//! Scenario runner and analysis layer: closed-loop runs for the three
//! controller kinds, trajectory CSV export, phase-plane segmentation, run
//! metrics and controller comparisons.

mod compare;
mod metrics;
mod phase;
mod scenario;

pub use compare::{compare_controllers, ComparisonRow, ComparisonTable};
pub use metrics::{
    compute_metrics, overshoot, settling_time, total_variation, RunMetrics, SETTLING_TUBE,
};
pub use phase::{phase_plane_export, PhaseChannel, PhasePoint};
pub use scenario::{
    calibrate_delta, run_scenario, run_scenario_with, sample_initial_state, write_trajectory_csv,
    ControllerKind, DeltaCalibration, DisturbanceSpec, EndReason, InitialCondition,
    ScenarioConfig, ScenarioResult, TrajectoryRow, TRAJECTORY_HEADER,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("comparison inputs mismatched: {0}")]
    Mismatch(String),
    #[error(transparent)]
    FlightDyn(#[from] crate::flightdyn::FlightDynError),
    #[error(transparent)]
    Smc(#[from] crate::smc::SmcError),
    #[error(transparent)]
    Hybrid(#[from] crate::hybrid::HybridError),
    #[error(transparent)]
    Learn(#[from] crate::learner::LearnError),
    #[error("csv error: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
