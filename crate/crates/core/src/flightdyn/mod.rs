//! Nonlinear 6-DOF rigid-body aircraft dynamics in wind axes.
//!
//! States are (V, alpha, beta, p, q, r, mu, gamma, chi) plus altitude
//! bookkeeping. Forces and moments come from an alpha-tabulated aerodynamic
//! derivative buildup; control surfaces saturate, throttle is held fixed.

mod aero;
mod dynamics;
pub mod surrogate;

pub use aero::{AeroCoefficients, AeroDataset, AeroTable, DERIVATIVE_NAMES};
pub use dynamics::{
    rk4_step, state_derivative, state_derivative_with_accel, step_rk4, step_rk4_with_accel,
    StateDerivative,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Alpha range covered by the aerodynamic dataset (rad).
pub const ALPHA_MIN: f64 = -0.244;
pub const ALPHA_MAX: f64 = 1.571;

/// Actuator deflection limits (rad): elevator, aileron, rudder.
pub const ELEVATOR_LIMITS: (f64, f64) = (-0.436, 0.175);
pub const AILERON_LIMITS: (f64, f64) = (-0.436, 0.436);
pub const RUDDER_LIMITS: (f64, f64) = (-0.524, 0.524);

/// Divide-by-cos tolerance for the beta/gamma singular terms.
pub const COS_SINGULARITY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FlightDynError {
    #[error("missing derivative {0}")]
    MissingDerivative(String),
    #[error("non-monotone alpha grid in table {0}")]
    NonMonotoneGrid(String),
    #[error("table {name} does not cover [{lo}, {hi}] rad", lo = ALPHA_MIN, hi = ALPHA_MAX)]
    InsufficientCoverage { name: String },
    #[error("empty table {0}")]
    EmptyTable(String),
    #[error("alpha {alpha} rad outside aero validity range [{lo}, {hi}]", lo = ALPHA_MIN, hi = ALPHA_MAX)]
    AlphaOutOfRange { alpha: f64 },
    #[error("airspeed must be positive, got {0}")]
    NonPositiveAirspeed(f64),
    #[error("singularity in {equation}: |cos {angle}| below tolerance")]
    Singularity { equation: &'static str, angle: &'static str },
    #[error("aero table parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The nine flight states plus altitude bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    /// Airspeed (ft/s).
    pub v: f64,
    /// Angle of attack (rad).
    pub alpha: f64,
    /// Sideslip (rad).
    pub beta: f64,
    /// Body roll rate (rad/s).
    pub p: f64,
    /// Body pitch rate (rad/s).
    pub q: f64,
    /// Body yaw rate (rad/s).
    pub r: f64,
    /// Wind-axis bank angle (rad).
    pub mu: f64,
    /// Flight-path angle (rad).
    pub gamma: f64,
    /// Heading angle (rad).
    pub chi: f64,
    /// Altitude (ft).
    pub h: f64,
}

impl AircraftState {
    pub fn to_array(&self) -> [f64; 10] {
        [self.v, self.alpha, self.beta, self.p, self.q, self.r, self.mu, self.gamma, self.chi, self.h]
    }

    pub fn from_array(x: &[f64; 10]) -> Self {
        Self {
            v: x[0],
            alpha: x[1],
            beta: x[2],
            p: x[3],
            q: x[4],
            r: x[5],
            mu: x[6],
            gamma: x[7],
            chi: x[8],
            h: x[9],
        }
    }

    /// Wrap beta, mu, chi into (-pi, pi].
    pub fn wrap_angles(&mut self) {
        self.beta = wrap_angle(self.beta);
        self.mu = wrap_angle(self.mu);
        self.chi = wrap_angle(self.chi);
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// True when alpha is inside the aero dataset validity range.
    pub fn alpha_in_envelope(&self) -> bool {
        self.alpha >= ALPHA_MIN && self.alpha <= ALPHA_MAX
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Throttle fraction plus the three surface deflections (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Throttle fraction, held constant during a run.
    pub eta: f64,
    pub delta_e: f64,
    pub delta_a: f64,
    pub delta_r: f64,
}

impl ControlInput {
    pub fn new(eta: f64, delta_e: f64, delta_a: f64, delta_r: f64) -> Self {
        Self { eta, delta_e, delta_a, delta_r }
    }

    pub fn surfaces(&self) -> [f64; 3] {
        [self.delta_e, self.delta_a, self.delta_r]
    }

    pub fn with_surfaces(eta: f64, s: [f64; 3]) -> Self {
        Self { eta, delta_e: s[0], delta_a: s[1], delta_r: s[2] }
    }

    /// True when every surface is strictly inside its limit (no channel pinned).
    pub fn within_limits(&self) -> bool {
        self.delta_e >= ELEVATOR_LIMITS.0
            && self.delta_e <= ELEVATOR_LIMITS.1
            && self.delta_a >= AILERON_LIMITS.0
            && self.delta_a <= AILERON_LIMITS.1
            && self.delta_r >= RUDDER_LIMITS.0
            && self.delta_r <= RUDDER_LIMITS.1
    }
}

/// Per-channel clamp of the surface deflections. Idempotent; throttle is
/// passed through untouched.
pub fn saturate(control: ControlInput) -> ControlInput {
    ControlInput {
        eta: control.eta,
        delta_e: control.delta_e.clamp(ELEVATOR_LIMITS.0, ELEVATOR_LIMITS.1),
        delta_a: control.delta_a.clamp(AILERON_LIMITS.0, AILERON_LIMITS.1),
        delta_r: control.delta_r.clamp(RUDDER_LIMITS.0, RUDDER_LIMITS.1),
    }
}

/// Mass, geometry, inertia and environment constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Mass (slug).
    pub m: f64,
    /// Wing reference area (ft^2).
    pub s: f64,
    /// Span (ft).
    pub b: f64,
    /// Mean aerodynamic chord (ft).
    pub c_bar: f64,
    /// Roll inertia (slug ft^2).
    pub ix: f64,
    /// Pitch inertia (slug ft^2).
    pub iy: f64,
    /// Yaw inertia (slug ft^2).
    pub iz: f64,
    /// Maximum thrust (lbf).
    pub tm: f64,
    /// Air density (slug/ft^3).
    pub rho: f64,
    /// Gravity (ft/s^2).
    pub g: f64,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("m", self.m),
            ("s", self.s),
            ("b", self.b),
            ("c_bar", self.c_bar),
            ("ix", self.ix),
            ("iy", self.iy),
            ("iz", self.iz),
            ("tm", self.tm),
            ("rho", self.rho),
            ("g", self.g),
        ];
        for (name, v) in fields {
            if !(v > 0.0) {
                return Err(format!("vehicle parameter {name} must be strictly positive, got {v}"));
            }
        }
        Ok(())
    }
}
