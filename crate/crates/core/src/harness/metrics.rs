//! Run metrics: settling time, overshoot, steady-state error, control
//! total variation, saturation duty, altitude loss.

use serde::{Deserialize, Serialize};

use super::scenario::TrajectoryRow;

/// Error tube matching the attitude bonus tolerance (rad).
pub const SETTLING_TUBE: f64 = 0.017;

/// Metrics over the engaged span of a run. Absent values mean the metric is
/// undefined for the trace (e.g. never settled), not zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Seconds from engagement until the error stays inside the tube, per
    /// (alpha, beta, mu) channel.
    pub settling_time: [Option<f64>; 3],
    /// Peak excursion past the target in the direction of initial approach.
    pub overshoot: [Option<f64>; 3],
    /// Mean |error| over the final 10% of the engaged span.
    pub steady_state_error: [Option<f64>; 3],
    /// Sum of |u_{t+1} - u_t| per surface channel (rad).
    pub control_tv: [f64; 3],
    /// Fraction of engaged steps with any surface at its limit.
    pub saturation_duty: Option<f64>,
    /// Altitude drop from engagement to the trace minimum (ft).
    pub altitude_loss: Option<f64>,
    /// Final cumulative safety-intervention count.
    pub interventions: u64,
    /// Realized engaged span (s).
    pub engaged_duration: f64,
}

/// First time index after which |e| stays within the tube for the rest of
/// the trace; `None` if it never does.
pub fn settling_time(errors: &[f64], dt: f64, tube: f64) -> Option<f64> {
    let mut settle_idx = None;
    for (i, e) in errors.iter().enumerate() {
        if e.abs() <= tube {
            if settle_idx.is_none() {
                settle_idx = Some(i);
            }
        } else {
            settle_idx = None;
        }
    }
    settle_idx.map(|i| i as f64 * dt)
}

/// Peak excursion beyond the target opposite to the sign of the initial
/// error. A trace that starts on target and stays there overshoots by 0.
pub fn overshoot(errors: &[f64]) -> Option<f64> {
    let e0 = errors.iter().copied().find(|e| *e != 0.0);
    match e0 {
        None => {
            if errors.is_empty() {
                None
            } else {
                Some(0.0)
            }
        }
        Some(e0) => {
            let dir = -e0.signum();
            Some(errors.iter().map(|e| (e * dir).max(0.0)).fold(0.0, f64::max))
        }
    }
}

pub fn total_variation(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Metrics over the engaged rows of a trajectory. Returns empty/absent
/// metrics when the controller never engaged.
pub fn compute_metrics(trajectory: &[TrajectoryRow], dt: f64) -> RunMetrics {
    let engaged: Vec<&TrajectoryRow> = trajectory.iter().filter(|r| r.engaged == 1).collect();
    if engaged.is_empty() {
        return RunMetrics {
            settling_time: [None; 3],
            overshoot: [None; 3],
            steady_state_error: [None; 3],
            control_tv: [0.0; 3],
            saturation_duty: None,
            altitude_loss: None,
            interventions: 0,
            engaged_duration: 0.0,
        };
    }

    let errs: [Vec<f64>; 3] = [
        engaged.iter().map(|r| r.e_alpha).collect(),
        engaged.iter().map(|r| r.e_beta).collect(),
        engaged.iter().map(|r| r.e_mu).collect(),
    ];
    let tail = (engaged.len() as f64 * 0.9) as usize;
    let settling = errs.each_ref().map(|e| settling_time(e, dt, SETTLING_TUBE));
    let over = errs.each_ref().map(|e| overshoot(e));
    let sse = errs.each_ref().map(|e| {
        let t = &e[tail.min(e.len() - 1)..];
        Some(t.iter().map(|x| x.abs()).sum::<f64>() / t.len() as f64)
    });

    let de: Vec<f64> = engaged.iter().map(|r| r.delta_e).collect();
    let da: Vec<f64> = engaged.iter().map(|r| r.delta_a).collect();
    let dr: Vec<f64> = engaged.iter().map(|r| r.delta_r).collect();
    let tv = [total_variation(&de), total_variation(&da), total_variation(&dr)];

    let duty = engaged.iter().filter(|r| r.saturated == 1).count() as f64 / engaged.len() as f64;
    let h0 = engaged[0].h;
    let h_min = engaged.iter().map(|r| r.h).fold(f64::INFINITY, f64::min);
    let interventions = engaged.last().unwrap().interventions;

    RunMetrics {
        settling_time: settling,
        overshoot: over,
        steady_state_error: sse,
        control_tv: tv,
        saturation_duty: Some(duty),
        altitude_loss: Some((h0 - h_min).max(0.0)),
        interventions,
        engaged_duration: engaged.len() as f64 * dt,
    }
}
