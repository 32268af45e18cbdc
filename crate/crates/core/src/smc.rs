//! Input-output feedback linearization of the (alpha, beta, mu) channels and
//! the sliding-mode feedback law with square-root reaching dynamics.
//!
//! The linearization drops the control-surface aerodynamic force terms from
//! the drift field, so each output has relative degree 2 and the decoupling
//! matrix comes entirely from the control moments.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flightdyn::{
    saturate, state_derivative, wrap_angle, AeroDataset, AircraftState, ControlInput,
    FlightDynError, VehicleParams,
};

/// Condition-number threshold above which the decoupling matrix is treated as
/// singular.
pub const DECOUPLING_COND_LIMIT: f64 = 1e6;

/// Finite-difference step for gradients of the table-interpolated drift (rad,
/// rad/s); airspeed uses a proportionally larger step.
const GRAD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum SmcError {
    #[error("decoupling matrix near singular (condition {cond:.3e})")]
    NearSingularDecoupling { cond: f64 },
    #[error(transparent)]
    Dynamics(#[from] FlightDynError),
}

/// Per-axis sliding-surface and reaching-law parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SmcGains {
    /// Surface coefficient on the error (1/s), per (alpha, beta, mu) axis.
    pub lambda1: [f64; 3],
    /// Surface coefficient on the error integral (1/s^2), per axis.
    pub lambda2: [f64; 3],
    /// Reaching gain, per axis.
    pub k: [f64; 3],
    /// Small positive residual gain, per axis.
    pub eps_gain: [f64; 3],
    /// Boundary-layer half width for the sign approximation (0 = hard sign).
    pub smoothing_width: f64,
}

impl Default for SmcGains {
    fn default() -> Self {
        Self {
            lambda1: [2.0; 3],
            lambda2: [0.5; 3],
            k: [2.0; 3],
            eps_gain: [0.05; 3],
            smoothing_width: 0.01,
        }
    }
}

impl SmcGains {
    pub fn validate(&self) -> Result<(), String> {
        for i in 0..3 {
            if !(self.lambda1[i] > 0.0) {
                return Err(format!("lambda1[{i}] must be > 0"));
            }
            if !(self.lambda2[i] >= 0.0) {
                return Err(format!("lambda2[{i}] must be >= 0"));
            }
            if !(self.k[i] > 0.0) {
                return Err(format!("k[{i}] must be > 0"));
            }
            if !(self.eps_gain[i] > 0.0) {
                return Err(format!("eps_gain[{i}] must be > 0"));
            }
        }
        if !(self.smoothing_width >= 0.0) {
            return Err("smoothing_width must be >= 0".to_string());
        }
        Ok(())
    }
}

/// Constant attitude references with optional derivative feedforward.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReferenceSignal {
    /// Desired (alpha, beta, mu) (rad).
    pub y: [f64; 3],
    /// First derivative of the reference (rad/s).
    pub y_dot: [f64; 3],
    /// Second derivative of the reference (rad/s^2).
    pub y_ddot: [f64; 3],
}

impl ReferenceSignal {
    /// Constant setpoint: derivative feedforward is zero.
    pub fn setpoint(alpha_d: f64, beta_d: f64, mu_d: f64) -> Self {
        Self { y: [alpha_d, beta_d, mu_d], y_dot: [0.0; 3], y_ddot: [0.0; 3] }
    }
}

/// Lie-derivative outputs of the linearization at one state.
#[derive(Debug, Clone)]
pub struct LinearizationResult {
    /// First Lie derivatives of y = (alpha, beta, mu).
    pub lf_y: Vector3<f64>,
    /// Second Lie derivatives along the drift field.
    pub lf2_y: Vector3<f64>,
    /// Decoupling matrix: sensitivity of y-double-dot to the deflections.
    pub lg_lf_y: Matrix3<f64>,
    /// Gradient of Lf y with respect to the body rates (p, q, r); maps
    /// angular-acceleration disturbances into the output channels.
    pub d_lfy_d_rates: Matrix3<f64>,
    /// 2-norm condition estimate of the decoupling matrix.
    pub condition: f64,
}

impl LinearizationResult {
    pub fn decoupling_ok(&self) -> bool {
        self.condition.is_finite() && self.condition < DECOUPLING_COND_LIMIT
    }
}

fn drift(
    state: &AircraftState,
    eta: f64,
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<[f64; 10], FlightDynError> {
    let u0 = ControlInput::new(eta, 0.0, 0.0, 0.0);
    Ok(state_derivative(state, &u0, params, aero)?.to_array())
}

/// Lf y, Lf^2 y and Lg Lf y at a state, with gradients of the
/// table-interpolated drift taken by central finite differences.
pub fn lie_derivatives(
    state: &AircraftState,
    eta: f64,
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<LinearizationResult, SmcError> {
    let f = drift(state, eta, params, aero)?;
    // Output channels within the state vector: alpha, beta, mu.
    const OUT: [usize; 3] = [1, 2, 6];
    let lf_y = Vector3::new(f[OUT[0]], f[OUT[1]], f[OUT[2]]);

    // Gradient of Lf y with respect to the eight dynamic states.
    let mut grad = [[0.0_f64; 8]; 3];
    let x0 = state.to_array();
    for k in 0..8 {
        let h = if k == 0 { GRAD_STEP * state.v.abs().max(1.0) } else { GRAD_STEP };
        let mut xp = x0;
        let mut xm = x0;
        xp[k] += h;
        xm[k] -= h;
        let fp = drift(&AircraftState::from_array(&xp), eta, params, aero)?;
        let fm = drift(&AircraftState::from_array(&xm), eta, params, aero)?;
        for (i, &oi) in OUT.iter().enumerate() {
            grad[i][k] = (fp[oi] - fm[oi]) / (2.0 * h);
        }
    }

    let lf2_y = Vector3::from_fn(|i, _| (0..8).map(|k| grad[i][k] * f[k]).sum());

    // Control distribution: deflections enter only through the moments.
    let qbar_s = 0.5 * params.rho * state.v * state.v * params.s;
    let d = |n: &str| aero.table(n).lookup(state.alpha).map_err(SmcError::from);
    let g_p = Vector3::new(d("C_lde")?, d("C_lda")?, d("C_ldr")?) * (qbar_s * params.b / params.ix);
    let g_q = Vector3::new(d("C_mde")?, 0.0, 0.0) * (qbar_s * params.c_bar / params.iy);
    let g_r = Vector3::new(d("C_nde")?, d("C_nda")?, d("C_ndr")?) * (qbar_s * params.b / params.iz);

    // Rows of grad restricted to (p, q, r).
    let d_lfy_d_rates = Matrix3::from_fn(|i, j| grad[i][3 + j]);
    let g_rot = Matrix3::from_rows(&[g_p.transpose(), g_q.transpose(), g_r.transpose()]);
    let lg_lf_y = d_lfy_d_rates * g_rot;

    let sv = lg_lf_y.singular_values();
    let condition = if sv[2] > 0.0 { sv[0] / sv[2] } else { f64::INFINITY };

    Ok(LinearizationResult { lf_y, lf2_y, lg_lf_y, d_lfy_d_rates, condition })
}

/// phi = e_dot + lambda1 e + lambda2 integral(e), componentwise.
pub fn sliding_surface(
    e: &Vector3<f64>,
    e_dot: &Vector3<f64>,
    e_int: &Vector3<f64>,
    gains: &SmcGains,
) -> Vector3<f64> {
    Vector3::from_fn(|i, _| e_dot[i] + gains.lambda1[i] * e[i] + gains.lambda2[i] * e_int[i])
}

/// Smoothed sign: hard sign for width 0 (with sgn(0) = 0), saturation ramp
/// inside the boundary layer otherwise.
pub fn smoothed_sign(phi: f64, width: f64) -> f64 {
    if width > 0.0 {
        (phi / width).clamp(-1.0, 1.0)
    } else if phi > 0.0 {
        1.0
    } else if phi < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Square-root reaching term: -(K |phi|^{1/2} + eps) sgn(phi) componentwise.
pub fn reaching_term(phi: &Vector3<f64>, gains: &SmcGains) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        -(gains.k[i] * phi[i].abs().sqrt() + gains.eps_gain[i])
            * smoothed_sign(phi[i], gains.smoothing_width)
    })
}

/// Per-axis kappa = K |phi|^{1/2} + eps.
pub fn kappa(phi: &Vector3<f64>, gains: &SmcGains) -> Vector3<f64> {
    Vector3::from_fn(|i, _| gains.k[i] * phi[i].abs().sqrt() + gains.eps_gain[i])
}

/// One evaluation of the shared control core. The hybrid controller reuses
/// this path with a nonzero feedforward and zeta < 1; pure SMC is the
/// (u_ff = 0, zeta = 1) case, so the reduction identity holds bitwise.
#[derive(Debug, Clone)]
pub struct CoreStep {
    pub control: ControlInput,
    /// Commanded surfaces before saturation.
    pub unsaturated: [f64; 3],
    pub e: Vector3<f64>,
    pub e_dot: Vector3<f64>,
    pub e_int: Vector3<f64>,
    pub phi: Vector3<f64>,
    pub kappa: Vector3<f64>,
    pub u_s: Vector3<f64>,
    pub u_fb: Vector3<f64>,
    pub saturated: bool,
    pub linearization: LinearizationResult,
}

/// Mutable controller core: per-instance error integral with anti-windup.
#[derive(Debug, Clone)]
pub struct SmcCore {
    pub gains: SmcGains,
    pub refs: ReferenceSignal,
    pub eta: f64,
    pub dt: f64,
    e_int: Vector3<f64>,
}

impl SmcCore {
    pub fn new(gains: SmcGains, refs: ReferenceSignal, eta: f64, dt: f64) -> Self {
        Self { gains, refs, eta, dt, e_int: Vector3::zeros() }
    }

    pub fn e_int(&self) -> Vector3<f64> {
        self.e_int
    }

    pub fn set_refs(&mut self, refs: ReferenceSignal) {
        self.refs = refs;
    }

    /// Reset the error integral (new episode / engagement).
    pub fn reset(&mut self) {
        self.e_int = Vector3::zeros();
    }

    /// Compute the control for one step and advance the error integral.
    ///
    /// `u_ff` is the (already filtered) feedforward deflection vector and
    /// `zeta` scales the whole feedback term per the hybrid law
    /// u = sat(u_ff + zeta * u_fb).
    pub fn step(
        &mut self,
        state: &AircraftState,
        u_ff: &Vector3<f64>,
        zeta: f64,
        params: &VehicleParams,
        aero: &AeroDataset,
    ) -> Result<CoreStep, SmcError> {
        let lin = lie_derivatives(state, self.eta, params, aero)?;
        if !lin.decoupling_ok() {
            return Err(SmcError::NearSingularDecoupling { cond: lin.condition });
        }

        let e = Vector3::new(
            state.alpha - self.refs.y[0],
            wrap_angle(state.beta - self.refs.y[1]),
            wrap_angle(state.mu - self.refs.y[2]),
        );
        let e_dot = lin.lf_y - Vector3::from_column_slice(&self.refs.y_dot);
        let phi = sliding_surface(&e, &e_dot, &self.e_int, &self.gains);
        let kap = kappa(&phi, &self.gains);

        // Feedforward-only acceleration of the output channels.
        let x2bar_dot = lin.lf2_y + lin.lg_lf_y * u_ff;

        let u_r = Vector3::from_fn(|i, _| {
            -x2bar_dot[i] + self.refs.y_ddot[i]
                - self.gains.lambda1[i] * e_dot[i]
                - self.gains.lambda2[i] * e[i]
        });
        let u_s = reaching_term(&phi, &self.gains);
        let u_fb = lin
            .lg_lf_y
            .lu()
            .solve(&(u_r + u_s))
            .ok_or(SmcError::NearSingularDecoupling { cond: lin.condition })?;

        let cmd = u_ff + zeta * u_fb;
        let unsaturated = [cmd[0], cmd[1], cmd[2]];
        let control = saturate(ControlInput::with_surfaces(self.eta, unsaturated));
        let saturated = control.surfaces() != unsaturated;

        // Anti-windup: freeze the integral while any channel is clipped.
        let e_int = self.e_int;
        if !saturated {
            self.e_int += self.dt * e;
        }

        Ok(CoreStep {
            control,
            unsaturated,
            e,
            e_dot,
            e_int,
            phi,
            kappa: kap,
            u_s,
            u_fb,
            saturated,
            linearization: lin,
        })
    }
}

/// Pure sliding-mode controller: the shared core with zero feedforward and
/// full feedback authority.
#[derive(Debug, Clone)]
pub struct SmcController {
    pub core: SmcCore,
}

impl SmcController {
    pub fn new(gains: SmcGains, refs: ReferenceSignal, eta: f64, dt: f64) -> Self {
        Self { core: SmcCore::new(gains, refs, eta, dt) }
    }

    pub fn core(&self) -> &SmcCore {
        &self.core
    }

    pub fn set_refs(&mut self, refs: ReferenceSignal) {
        self.core.set_refs(refs);
    }

    pub fn reset(&mut self) {
        self.core.reset();
    }

    pub fn control(
        &mut self,
        state: &AircraftState,
        params: &VehicleParams,
        aero: &AeroDataset,
    ) -> Result<CoreStep, SmcError> {
        self.core.step(state, &Vector3::zeros(), 1.0, params, aero)
    }
}
