//! Bounded learned feedforward combined with the sliding-mode feedback via
//! the control-authority factor zeta, plus the safety filter and online
//! Lyapunov margin monitoring.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flightdyn::{wrap_angle, AeroDataset, AircraftState, ControlInput, VehicleParams};
use crate::smc::{lie_derivatives, CoreStep, ReferenceSignal, SmcCore, SmcError, SmcGains};

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("zeta * kappa is zero; boundary radius undefined")]
    UndefinedRho,
    #[error(transparent)]
    Smc(#[from] SmcError),
}

/// Authority scheduling, uncertainty bounds and feedforward caps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HybridConfig {
    /// Tracking-error threshold (rad) above which the feedback gets full
    /// authority (zeta = 1).
    pub error_threshold: f64,
    /// Relaxed authority inside the error tube.
    pub zeta_in: f64,
    /// Hysteresis fraction on the threshold to avoid zeta chattering.
    pub hysteresis: f64,
    /// Assumed bound on the feedforward mismatch |delta(x)|.
    pub delta_bar: f64,
    /// Assumed bound on the external disturbance |d(x,t)|.
    pub d_bar: f64,
    /// Per-channel hard bound on the feedforward deflection (rad).
    pub authority_cap: [f64; 3],
    /// Force zeta = 1 after a negative stability margin is observed.
    pub margin_fallback: bool,
    /// Consecutive-clamp count treated as a policy fault.
    pub clamp_window: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            error_threshold: 0.05,
            zeta_in: 0.3,
            hysteresis: 0.1,
            delta_bar: 0.01,
            d_bar: 0.0,
            authority_cap: [0.1, 0.1, 0.1],
            margin_fallback: true,
            clamp_window: 50,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.zeta_in > 0.0 && self.zeta_in <= 1.0) {
            return Err("zeta_in must be in (0, 1]".into());
        }
        if self.delta_bar < 0.0 || self.d_bar < 0.0 {
            return Err("delta_bar and d_bar must be >= 0".into());
        }
        let max_range = [0.436, 0.436, 0.524];
        for i in 0..3 {
            if !(self.authority_cap[i] >= 0.0 && self.authority_cap[i] <= max_range[i]) {
                return Err(format!("authority_cap[{i}] outside actuator range"));
            }
        }
        Ok(())
    }
}

/// zeta = 1 when any tracking error exceeds the threshold (strictly), the
/// relaxed inside-tube value otherwise.
pub fn authority_factor(errors: &Vector3<f64>, config: &HybridConfig) -> f64 {
    if errors.iter().any(|e| e.abs() > config.error_threshold) {
        1.0
    } else {
        config.zeta_in
    }
}

/// Result of passing a feedforward suggestion through the safety filter.
#[derive(Debug, Clone, Copy)]
pub struct FilterOutcome {
    pub value: Vector3<f64>,
    /// Channels that were clamped to the authority cap.
    pub clamped: [bool; 3],
    /// A non-finite component was replaced by zero.
    pub fault: bool,
}

impl FilterOutcome {
    pub fn interventions(&self) -> u64 {
        self.clamped.iter().filter(|c| **c).count() as u64 + u64::from(self.fault)
    }
}

/// Per-channel clamp of the feedforward to the authority cap; non-finite
/// components are replaced by zero and flagged.
pub fn safety_filter(u_ff: &Vector3<f64>, config: &HybridConfig) -> FilterOutcome {
    let mut value = Vector3::zeros();
    let mut clamped = [false; 3];
    let mut fault = false;
    for i in 0..3 {
        let cap = config.authority_cap[i];
        if !u_ff[i].is_finite() {
            fault = true;
            value[i] = 0.0;
        } else {
            let v = u_ff[i].clamp(-cap, cap);
            clamped[i] = v != u_ff[i];
            value[i] = v;
        }
    }
    FilterOutcome { value, clamped, fault }
}

/// margin = zeta kappa - (delta_bar + d_bar); rho = (delta_bar + d_bar) /
/// (zeta kappa), per axis.
pub fn stability_margin(
    zeta: f64,
    kappa: &Vector3<f64>,
    config: &HybridConfig,
) -> Result<(Vector3<f64>, Vector3<f64>), HybridError> {
    let bound = config.delta_bar + config.d_bar;
    if kappa.iter().any(|k| zeta * k <= 0.0) {
        return Err(HybridError::UndefinedRho);
    }
    let margin = Vector3::from_fn(|i, _| zeta * kappa[i] - bound);
    let rho = Vector3::from_fn(|i, _| bound / (zeta * kappa[i]));
    Ok((margin, rho))
}

/// Pointwise mismatch delta = g(x) (u_ff - u_ideal) in the output
/// acceleration channels. Used for offline delta_bar calibration.
pub fn feedforward_mismatch(
    u_ff: &Vector3<f64>,
    state: &AircraftState,
    u_ideal: &Vector3<f64>,
    eta: f64,
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<Vector3<f64>, SmcError> {
    let lin = lie_derivatives(state, eta, params, aero)?;
    Ok(lin.lg_lf_y * (u_ff - u_ideal))
}

/// Per-step stability telemetry.
#[derive(Debug, Clone)]
pub struct StabilityTelemetry {
    pub phi: Vector3<f64>,
    pub kappa: Vector3<f64>,
    pub zeta: f64,
    pub margin: Vector3<f64>,
    pub rho: Vector3<f64>,
    /// Lyapunov value 0.5 phi^2 per axis.
    pub v_lyap: Vector3<f64>,
    /// Feedforward after the safety filter.
    pub u_ff: Vector3<f64>,
    /// Cumulative safety interventions.
    pub interventions: u64,
    pub fallback_active: bool,
}

/// Hybrid feedforward + sliding-mode controller with safety filtering.
#[derive(Debug, Clone)]
pub struct HybridController {
    pub core: SmcCore,
    pub config: HybridConfig,
    high_authority: bool,
    interventions: u64,
    clamp_streak: usize,
    fallback: bool,
}

impl HybridController {
    pub fn new(
        gains: SmcGains,
        refs: ReferenceSignal,
        config: HybridConfig,
        eta: f64,
        dt: f64,
    ) -> Self {
        Self {
            core: SmcCore::new(gains, refs, eta, dt),
            config,
            high_authority: true,
            interventions: 0,
            clamp_streak: 0,
            fallback: false,
        }
    }

    pub fn set_refs(&mut self, refs: ReferenceSignal) {
        self.core.set_refs(refs);
    }

    pub fn reset(&mut self) {
        self.core.reset();
        self.high_authority = true;
        self.interventions = 0;
        self.clamp_streak = 0;
        self.fallback = false;
    }

    fn tracking_errors(&self, state: &AircraftState) -> Vector3<f64> {
        let refs = &self.core.refs;
        Vector3::new(
            state.alpha - refs.y[0],
            wrap_angle(state.beta - refs.y[1]),
            wrap_angle(state.mu - refs.y[2]),
        )
    }

    /// Authority with hysteresis: re-enter the relaxed regime only once all
    /// errors drop below (1 - hysteresis) * threshold.
    fn scheduled_zeta(&mut self, errors: &Vector3<f64>) -> f64 {
        let hi = self.config.error_threshold;
        let lo = hi * (1.0 - self.config.hysteresis);
        if errors.iter().any(|e| e.abs() > hi) {
            self.high_authority = true;
        } else if errors.iter().all(|e| e.abs() < lo) {
            self.high_authority = false;
        }
        if self.high_authority || self.fallback {
            1.0
        } else {
            self.config.zeta_in
        }
    }

    /// One control evaluation: filter the feedforward, blend with the
    /// sliding-mode feedback, and monitor the stability margin.
    pub fn control(
        &mut self,
        u_ff_raw: &Vector3<f64>,
        state: &AircraftState,
        params: &VehicleParams,
        aero: &AeroDataset,
    ) -> Result<(ControlInput, StabilityTelemetry, CoreStep), HybridError> {
        let outcome = safety_filter(u_ff_raw, &self.config);
        self.interventions += outcome.interventions();
        if outcome.clamped.iter().any(|c| *c) {
            self.clamp_streak += 1;
        } else {
            self.clamp_streak = 0;
        }
        // Policy fault containment: non-finite output or persistent clamping
        // drops the feedforward and falls back to sliding-mode-only control.
        let policy_fault = outcome.fault || self.clamp_streak >= self.config.clamp_window;
        if policy_fault {
            self.fallback = true;
        }
        let u_ff = if policy_fault { Vector3::zeros() } else { outcome.value };

        let errors = self.tracking_errors(state);
        let zeta = self.scheduled_zeta(&errors);

        let step = self.core.step(state, &u_ff, zeta, params, aero)?;
        let (margin, rho) = stability_margin(zeta, &step.kappa, &self.config)?;
        if self.config.margin_fallback && margin.iter().any(|m| *m < 0.0) {
            self.fallback = true;
        }

        let telemetry = StabilityTelemetry {
            phi: step.phi,
            kappa: step.kappa,
            zeta,
            margin,
            rho,
            v_lyap: Vector3::from_fn(|i, _| 0.5 * step.phi[i] * step.phi[i]),
            u_ff,
            interventions: self.interventions,
            fallback_active: self.fallback,
        };
        Ok((step.control, telemetry, step))
    }
}
