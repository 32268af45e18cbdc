//! Closed-loop scenario execution for the three controller kinds, with
//! spin-hold delay, matched disturbance injection, and trajectory logging.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, RunMetrics};
use super::HarnessError;
use crate::env::{EnvAction, InitBounds, Observation};
use crate::flightdyn::{
    step_rk4_with_accel, surrogate, AeroDataset, AircraftState, ControlInput, VehicleParams,
};
use crate::hybrid::{HybridConfig, HybridController};
use crate::learner::{load_weights, PolicyNetwork};
use crate::smc::{lie_derivatives, ReferenceSignal, SmcController, SmcGains};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Rl,
    Smc,
    Hybrid,
}

/// Initial state: explicit, or drawn from the episode-initialization bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    Explicit(AircraftState),
    Random { seed: u64 },
}

/// Matched disturbance on the (alpha, beta, mu) acceleration channels:
/// d(t) = amplitude * sin(2 pi f t), constant when f = 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub amplitude: [f64; 3],
    pub frequency_hz: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self { amplitude: [0.0; 3], frequency_hz: 0.0 }
    }
}

impl DisturbanceSpec {
    pub fn is_zero(&self) -> bool {
        self.amplitude.iter().all(|a| *a == 0.0)
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        let s = if self.frequency_hz == 0.0 {
            1.0
        } else {
            (2.0 * std::f64::consts::PI * self.frequency_hz * t).sin()
        };
        Vector3::new(self.amplitude[0] * s, self.amplitude[1] * s, self.amplitude[2] * s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub initial: InitialCondition,
    /// Desired (alpha, beta, mu) (rad).
    pub targets: [f64; 3],
    pub controller: ControllerKind,
    #[serde(default)]
    pub gains: SmcGains,
    #[serde(default)]
    pub hybrid: HybridConfig,
    /// Policy weight file, required for `rl` and `hybrid`.
    #[serde(default)]
    pub policy_path: Option<PathBuf>,
    /// Total simulated time (s).
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    /// Time (s) before the controller engages.
    #[serde(default)]
    pub spin_hold: f64,
    /// Surfaces held fixed during the spin-hold window (rad).
    #[serde(default)]
    pub hold_controls: [f64; 3],
}

fn default_dt() -> f64 {
    surrogate::DEFAULT_DT
}

fn default_eta() -> f64 {
    surrogate::DEFAULT_ETA
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.duration > 0.0) {
            return Err(HarnessError::InvalidConfig("duration must be > 0".into()));
        }
        if !(self.dt > 0.0) {
            return Err(HarnessError::InvalidConfig("dt must be > 0".into()));
        }
        if self.spin_hold < 0.0 {
            return Err(HarnessError::InvalidConfig("spin_hold must be >= 0".into()));
        }
        self.gains.validate().map_err(HarnessError::InvalidConfig)?;
        self.hybrid.validate().map_err(HarnessError::InvalidConfig)?;
        if matches!(self.controller, ControllerKind::Rl | ControllerKind::Hybrid)
            && self.policy_path.is_none()
        {
            return Err(HarnessError::InvalidConfig(
                "rl and hybrid controllers need policy_path".into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ScenarioConfig =
            serde_json::from_str(&text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn initial_state(&self) -> AircraftState {
        match self.initial {
            InitialCondition::Explicit(s) => s,
            InitialCondition::Random { seed } => sample_initial_state(seed),
        }
    }
}

/// Uniform draw from the episode-initialization bounds (chi = 0, h = 0).
pub fn sample_initial_state(seed: u64) -> AircraftState {
    let b = InitBounds::default();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut s = |r: (f64, f64)| if r.0 == r.1 { r.0 } else { rng.gen_range(r.0..r.1) };
    AircraftState {
        v: s(b.v),
        alpha: s(b.alpha),
        beta: s(b.beta),
        p: s(b.p),
        q: s(b.q),
        r: s(b.r),
        mu: s(b.mu),
        gamma: s(b.gamma),
        chi: 0.0,
        h: 0.0,
    }
}

/// Fixed trajectory CSV column order; changing it breaks downstream
/// consumers and the golden-file test.
pub const TRAJECTORY_HEADER: &str = "t,v,alpha,beta,p,q,r,mu,gamma,chi,h,\
delta_e,delta_a,delta_r,e_alpha,e_beta,e_mu,\
phi_alpha,phi_beta,phi_mu,kappa_alpha,kappa_beta,kappa_mu,\
zeta,margin_min,rho_max,interventions,fallback,saturated,engaged";

/// One logged step: the state at time t and the control applied over
/// [t, t+dt]. Controller telemetry columns are NaN while the controller is
/// disengaged or for the pure-RL law.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub v: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub mu: f64,
    pub gamma: f64,
    pub chi: f64,
    pub h: f64,
    pub delta_e: f64,
    pub delta_a: f64,
    pub delta_r: f64,
    pub e_alpha: f64,
    pub e_beta: f64,
    pub e_mu: f64,
    pub phi_alpha: f64,
    pub phi_beta: f64,
    pub phi_mu: f64,
    pub kappa_alpha: f64,
    pub kappa_beta: f64,
    pub kappa_mu: f64,
    pub zeta: f64,
    pub margin_min: f64,
    pub rho_max: f64,
    pub interventions: u64,
    pub fallback: u8,
    pub saturated: u8,
    pub engaged: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EndReason {
    Completed,
    /// Integration failed (singularity / envelope blow-up) at the given time.
    DynamicsFailure { t: f64 },
    /// Controller could not produce a command at the given time.
    ControllerFailure { t: f64 },
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub initial: AircraftState,
    pub trajectory: Vec<TrajectoryRow>,
    pub metrics: RunMetrics,
    pub end: EndReason,
}

enum Controller {
    Rl(PolicyNetwork),
    Smc(SmcController),
    Hybrid(HybridController, PolicyNetwork),
}

/// Deterministic evaluation action: the policy mean, clipped and scaled
/// onto the actuator ranges.
fn policy_deflections(
    policy: &PolicyNetwork,
    state: &AircraftState,
    targets: &[f64; 3],
) -> Result<[f64; 3], HarnessError> {
    let obs = Observation::from_state(state, targets);
    let (mean, _, _) = policy.forward(&obs.0)?;
    Ok(EnvAction([mean[0], mean[1], mean[2]]).to_deflections())
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    run_scenario_with(config, &surrogate::params(), &surrogate::dataset())
}

pub fn run_scenario_with(
    config: &ScenarioConfig,
    params: &VehicleParams,
    aero: &AeroDataset,
) -> Result<ScenarioResult, HarnessError> {
    config.validate()?;
    let refs = ReferenceSignal::setpoint(config.targets[0], config.targets[1], config.targets[2]);
    let mut controller = match config.controller {
        ControllerKind::Rl => Controller::Rl(load_weights(config.policy_path.as_ref().unwrap())?),
        ControllerKind::Smc => {
            Controller::Smc(SmcController::new(config.gains, refs, config.eta, config.dt))
        }
        ControllerKind::Hybrid => Controller::Hybrid(
            HybridController::new(config.gains, refs, config.hybrid, config.eta, config.dt),
            load_weights(config.policy_path.as_ref().unwrap())?,
        ),
    };

    let initial = config.initial_state();
    let mut state = initial;
    let n_steps = (config.duration / config.dt).round() as usize;
    let mut trajectory = Vec::with_capacity(n_steps);
    let mut end = EndReason::Completed;

    for k in 0..n_steps {
        let t = k as f64 * config.dt;
        let engaged = t >= config.spin_hold;

        let mut row = blank_row(t, &state, config);
        row.engaged = u8::from(engaged);

        let control = if !engaged {
            ControlInput::with_surfaces(config.eta, config.hold_controls)
        } else {
            match &mut controller {
                Controller::Rl(policy) => {
                    let d = policy_deflections(policy, &state, &config.targets)?;
                    let c = ControlInput::with_surfaces(config.eta, d);
                    row.saturated = u8::from(at_any_limit(&d));
                    c
                }
                Controller::Smc(ctl) => match ctl.control(&state, params, aero) {
                    Ok(step) => {
                        fill_core_columns(&mut row, &step, 1.0, f64::NAN, f64::NAN, 0, false);
                        step.control
                    }
                    Err(e) => {
                        end = EndReason::ControllerFailure { t };
                        let _ = e;
                        trajectory.push(row);
                        break;
                    }
                },
                Controller::Hybrid(ctl, policy) => {
                    let d = policy_deflections(policy, &state, &config.targets)?;
                    let u_ff = Vector3::new(d[0], d[1], d[2]);
                    match ctl.control(&u_ff, &state, params, aero) {
                        Ok((control, telemetry, step)) => {
                            fill_core_columns(
                                &mut row,
                                &step,
                                telemetry.zeta,
                                telemetry.margin.min(),
                                telemetry.rho.max(),
                                telemetry.interventions,
                                telemetry.fallback_active,
                            );
                            control
                        }
                        Err(_) => {
                            end = EndReason::ControllerFailure { t };
                            trajectory.push(row);
                            break;
                        }
                    }
                }
            }
        };

        let surfaces = control.surfaces();
        row.delta_e = surfaces[0];
        row.delta_a = surfaces[1];
        row.delta_r = surfaces[2];
        trajectory.push(row);

        // Matched disturbance enters as extra angular acceleration mapped
        // from the output channels through the rate sensitivity.
        let rate_accel = if config.disturbance.is_zero() {
            [0.0; 3]
        } else {
            let lin = lie_derivatives(&state, config.eta, params, aero)?;
            let mapped = lin
                .d_lfy_d_rates
                .lu()
                .solve(&config.disturbance.at(t))
                .ok_or(HarnessError::InvalidConfig(
                    "disturbance mapping singular at current state".into(),
                ))?;
            [mapped[0], mapped[1], mapped[2]]
        };

        match step_rk4_with_accel(&state, &control, rate_accel, config.dt, params, aero) {
            Ok(s) => state = s,
            Err(_) => {
                end = EndReason::DynamicsFailure { t };
                break;
            }
        }
    }

    let metrics = compute_metrics(&trajectory, config.dt);
    Ok(ScenarioResult { config: config.clone(), initial, trajectory, metrics, end })
}

fn blank_row(t: f64, state: &AircraftState, config: &ScenarioConfig) -> TrajectoryRow {
    TrajectoryRow {
        t,
        v: state.v,
        alpha: state.alpha,
        beta: state.beta,
        p: state.p,
        q: state.q,
        r: state.r,
        mu: state.mu,
        gamma: state.gamma,
        chi: state.chi,
        h: state.h,
        delta_e: 0.0,
        delta_a: 0.0,
        delta_r: 0.0,
        e_alpha: state.alpha - config.targets[0],
        e_beta: crate::flightdyn::wrap_angle(state.beta - config.targets[1]),
        e_mu: crate::flightdyn::wrap_angle(state.mu - config.targets[2]),
        phi_alpha: f64::NAN,
        phi_beta: f64::NAN,
        phi_mu: f64::NAN,
        kappa_alpha: f64::NAN,
        kappa_beta: f64::NAN,
        kappa_mu: f64::NAN,
        zeta: f64::NAN,
        margin_min: f64::NAN,
        rho_max: f64::NAN,
        interventions: 0,
        fallback: 0,
        saturated: 0,
        engaged: 0,
    }
}

fn fill_core_columns(
    row: &mut TrajectoryRow,
    step: &crate::smc::CoreStep,
    zeta: f64,
    margin_min: f64,
    rho_max: f64,
    interventions: u64,
    fallback: bool,
) {
    row.phi_alpha = step.phi[0];
    row.phi_beta = step.phi[1];
    row.phi_mu = step.phi[2];
    row.kappa_alpha = step.kappa[0];
    row.kappa_beta = step.kappa[1];
    row.kappa_mu = step.kappa[2];
    row.zeta = zeta;
    row.margin_min = margin_min;
    row.rho_max = rho_max;
    row.interventions = interventions;
    row.fallback = u8::from(fallback);
    row.saturated = u8::from(step.saturated);
}

fn at_any_limit(surfaces: &[f64; 3]) -> bool {
    use crate::flightdyn::{AILERON_LIMITS, ELEVATOR_LIMITS, RUDDER_LIMITS};
    let lims = [ELEVATOR_LIMITS, AILERON_LIMITS, RUDDER_LIMITS];
    surfaces.iter().zip(lims).any(|(s, (lo, hi))| *s <= lo || *s >= hi)
}

pub fn write_trajectory_csv(rows: &[TrajectoryRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Csv(e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Feedforward-mismatch statistics for a policy over randomly sampled
/// in-envelope states; used to pick the uncertainty bound in HybridConfig.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaCalibration {
    pub samples: usize,
    /// Samples skipped because the decoupling matrix was near singular.
    pub skipped: usize,
    pub max_mismatch: f64,
    pub mean_mismatch: f64,
    pub p95_mismatch: f64,
    /// Suggested delta_bar: the 95th percentile with 20% headroom.
    pub suggested_delta_bar: f64,
}

pub fn calibrate_delta(
    policy: &PolicyNetwork,
    gains: &SmcGains,
    eta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DeltaCalibration, HarnessError> {
    let params = surrogate::params();
    let aero = surrogate::dataset();
    let bounds = InitBounds::default();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut mismatches = Vec::with_capacity(n_samples);
    let mut skipped = 0;
    while mismatches.len() < n_samples {
        let state_seed: u64 = rng.gen();
        let state = sample_initial_state(state_seed);
        let alpha_d = rng.gen_range(bounds.alpha_d.0..bounds.alpha_d.1);
        let targets = [alpha_d, 0.0, 0.0];

        let lin = match lie_derivatives(&state, eta, &params, &aero) {
            Ok(l) if l.decoupling_ok() => l,
            _ => {
                skipped += 1;
                continue;
            }
        };
        // Ideal feedforward: invert the model toward the surface-holding
        // acceleration (the equivalent control).
        let e = Vector3::new(
            state.alpha - targets[0],
            crate::flightdyn::wrap_angle(state.beta - targets[1]),
            crate::flightdyn::wrap_angle(state.mu - targets[2]),
        );
        let e_dot = lin.lf_y;
        let nu = Vector3::from_fn(|i, _| {
            -gains.lambda1[i] * e_dot[i] - gains.lambda2[i] * e[i]
        });
        let u_ideal = match lin.lg_lf_y.lu().solve(&(nu - lin.lf2_y)) {
            Some(u) => u,
            None => {
                skipped += 1;
                continue;
            }
        };

        let d = policy_deflections(policy, &state, &targets)?;
        let u_ff = Vector3::new(d[0], d[1], d[2]);
        let mismatch = (lin.lg_lf_y * (u_ff - u_ideal)).norm();
        mismatches.push(mismatch);
    }
    mismatches.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max = *mismatches.last().unwrap();
    let mean = mismatches.iter().sum::<f64>() / mismatches.len() as f64;
    let p95 = mismatches[((mismatches.len() as f64 * 0.95) as usize).min(mismatches.len() - 1)];
    Ok(DeltaCalibration {
        samples: n_samples,
        skipped,
        max_mismatch: max,
        mean_mismatch: mean,
        p95_mismatch: p95,
        suggested_delta_bar: p95 * 1.2,
    })
}
