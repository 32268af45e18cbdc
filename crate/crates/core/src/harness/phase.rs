//! Phase-plane export: (y, y_dot) pairs with high/low-rate tagging.

use serde::{Deserialize, Serialize};

use super::scenario::TrajectoryRow;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseChannel {
    Alpha,
    Beta,
    Mu,
}

impl std::str::FromStr for PhaseChannel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha" => Ok(PhaseChannel::Alpha),
            "beta" => Ok(PhaseChannel::Beta),
            "mu" => Ok(PhaseChannel::Mu),
            other => Err(format!("unknown channel {other}, expected alpha|beta|mu")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub y: f64,
    /// Channel rate from finite differences of the logged series.
    pub y_dot: f64,
    /// ||omega|| exceeds the threshold at this sample.
    pub high_rate: bool,
    pub start: bool,
    pub end: bool,
}

/// Segment a trajectory into phase-plane points for one output channel,
/// tagging each sample by whether the body-rate norm exceeds `threshold`.
pub fn phase_plane_export(
    trajectory: &[TrajectoryRow],
    channel: PhaseChannel,
    threshold: f64,
) -> Result<Vec<PhasePoint>, HarnessError> {
    if trajectory.is_empty() {
        return Err(HarnessError::EmptyTrajectory);
    }
    let y: Vec<f64> = trajectory
        .iter()
        .map(|r| match channel {
            PhaseChannel::Alpha => r.alpha,
            PhaseChannel::Beta => r.beta,
            PhaseChannel::Mu => r.mu,
        })
        .collect();
    let n = y.len();
    let points = (0..n)
        .map(|i| {
            let y_dot = if n == 1 {
                0.0
            } else if i == 0 {
                let dt = trajectory[1].t - trajectory[0].t;
                (y[1] - y[0]) / dt
            } else if i == n - 1 {
                let dt = trajectory[i].t - trajectory[i - 1].t;
                (y[i] - y[i - 1]) / dt
            } else {
                let dt = trajectory[i + 1].t - trajectory[i - 1].t;
                (y[i + 1] - y[i - 1]) / dt
            };
            let r = &trajectory[i];
            let omega = (r.p * r.p + r.q * r.q + r.r * r.r).sqrt();
            PhasePoint {
                t: r.t,
                y: y[i],
                y_dot,
                high_rate: omega > threshold,
                start: i == 0,
                end: i == n - 1,
            }
        })
        .collect();
    Ok(points)
}
