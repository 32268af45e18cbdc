//! Governing equations and the fixed-step RK4 integrator.

use super::aero::compute_coefficients;
use super::{
    saturate, AeroDataset, AircraftState, ControlInput, FlightDynError, VehicleParams,
    COS_SINGULARITY_TOL,
};

/// Time derivative of the full state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub v_dot: f64,
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub p_dot: f64,
    pub q_dot: f64,
    pub r_dot: f64,
    pub mu_dot: f64,
    pub gamma_dot: f64,
    pub chi_dot: f64,
    pub h_dot: f64,
}

impl StateDerivative {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.v_dot,
            self.alpha_dot,
            self.beta_dot,
            self.p_dot,
            self.q_dot,
            self.r_dot,
            self.mu_dot,
            self.gamma_dot,
            self.chi_dot,
            self.h_dot,
        ]
    }
}

/// Wind-axis 6-DOF equations of motion. The control is saturated before use.
pub fn state_derivative(
    state: &AircraftState,
    control: &ControlInput,
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<StateDerivative, FlightDynError> {
    state_derivative_with_accel(state, control, [0.0; 3], params, aero)
}

/// Same equations with an additive angular-acceleration disturbance on
/// (p_dot, q_dot, r_dot). Used to inject bounded matched disturbances.
pub fn state_derivative_with_accel(
    state: &AircraftState,
    control: &ControlInput,
    rate_accel_disturbance: [f64; 3],
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<StateDerivative, FlightDynError> {
    if state.v <= 0.0 {
        return Err(FlightDynError::NonPositiveAirspeed(state.v));
    }
    let cos_beta = state.beta.cos();
    if cos_beta.abs() < COS_SINGULARITY_TOL {
        return Err(FlightDynError::Singularity { equation: "alpha_dot/mu_dot", angle: "beta" });
    }
    let cos_gamma = state.gamma.cos();
    if cos_gamma.abs() < COS_SINGULARITY_TOL {
        return Err(FlightDynError::Singularity { equation: "chi_dot", angle: "gamma" });
    }

    let u = saturate(*control);
    let coeffs = compute_coefficients(state, &u, params, aero)?;

    let (sa, ca) = state.alpha.sin_cos();
    let (sb, _) = state.beta.sin_cos();
    let tan_beta = state.beta.tan();
    let (smu, cmu) = state.mu.sin_cos();
    let (sg, cg) = state.gamma.sin_cos();
    let tan_gamma = sg / cg;

    let qbar_s = 0.5 * params.rho * state.v * state.v * params.s;
    let lift = qbar_s * coeffs.cl;
    let drag = qbar_s * coeffs.cd;
    let side = qbar_s * coeffs.cy;
    let thrust = params.tm * u.eta;
    let mw = params.m * params.g;
    let mv = params.m * state.v;

    // Force groupings shared by the mu/gamma/chi equations.
    let fz = lift + thrust * sa;
    let fy = side - thrust * ca * sb;

    let v_dot = (thrust * ca * cos_beta - drag) / params.m - params.g * sg;
    let alpha_dot = state.q - (state.p * ca + state.r * sa) * tan_beta
        + (-fz + mw * cmu * cg) / (mv * cos_beta);
    let beta_dot = state.p * sa - state.r * ca + (fy + mw * smu * cg) / mv;

    let p_dot = (params.iy - params.iz) / params.ix * state.q * state.r
        + qbar_s * params.b * coeffs.c_roll / params.ix
        + rate_accel_disturbance[0];
    let q_dot = (params.iz - params.ix) / params.iy * state.p * state.r
        + qbar_s * params.c_bar * coeffs.c_pitch / params.iy
        + rate_accel_disturbance[1];
    let r_dot = (params.ix - params.iy) / params.iz * state.p * state.q
        + qbar_s * params.b * coeffs.c_yaw / params.iz
        + rate_accel_disturbance[2];

    let mu_dot = (state.p * ca + state.r * sa) / cos_beta
        + (fz * (tan_gamma * smu + tan_beta) + fy * tan_gamma * cmu - mw * cg * cmu * tan_beta)
            / mv;
    let gamma_dot = (fz * cmu - fy * smu - mw * cg) / mv;
    let chi_dot = (fz * smu + fy * cmu) / (mv * cg);
    let h_dot = state.v * sg;

    Ok(StateDerivative {
        v_dot,
        alpha_dot,
        beta_dot,
        p_dot,
        q_dot,
        r_dot,
        mu_dot,
        gamma_dot,
        chi_dot,
        h_dot,
    })
}

/// Classical fourth-order Runge-Kutta advance with zero-order-hold control.
/// Angles are re-wrapped after the step.
pub fn step_rk4(
    state: &AircraftState,
    control: &ControlInput,
    dt: f64,
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<AircraftState, FlightDynError> {
    step_rk4_with_accel(state, control, [0.0; 3], dt, params, aero)
}

pub fn step_rk4_with_accel(
    state: &AircraftState,
    control: &ControlInput,
    rate_accel_disturbance: [f64; 3],
    dt: f64,
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<AircraftState, FlightDynError> {
    if dt == 0.0 {
        return Ok(*state);
    }
    let x0 = state.to_array();
    let x1 = rk4_step(&x0, dt, |x| {
        state_derivative_with_accel(
            &AircraftState::from_array(x),
            control,
            rate_accel_disturbance,
            params,
            aero,
        )
        .map(|d| d.to_array())
    })?;
    let mut next = AircraftState::from_array(&x1);
    next.wrap_angles();
    Ok(next)
}

/// One classical RK4 step for a fixed-size first-order system.
pub fn rk4_step<const N: usize, E>(
    x0: &[f64; N],
    dt: f64,
    mut f: impl FnMut(&[f64; N]) -> Result<[f64; N], E>,
) -> Result<[f64; N], E> {
    let advance = |x: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *x;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = f(x0)?;
    let k2 = f(&advance(x0, &k1, 0.5 * dt))?;
    let k3 = f(&advance(x0, &k2, 0.5 * dt))?;
    let k4 = f(&advance(x0, &k3, dt))?;
    let mut x1 = *x0;
    for i in 0..N {
        x1[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(x1)
}
