//! MDP environment wrapping the simulator: clipped observation/action spaces,
//! randomized episode initialization, two-phase blended reward with
//! potential-based shaping, and envelope termination logic.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flightdyn::{
    step_rk4, AeroDataset, AircraftState, ControlInput, VehicleParams, AILERON_LIMITS,
    ALPHA_MAX, ALPHA_MIN, ELEVATOR_LIMITS, RUDDER_LIMITS,
};

pub const EPISODE_STEP_LIMIT: usize = 20_000;
pub const OBS_DIM: usize = 11;
pub const ACTION_DIM: usize = 3;

/// Observation clipping ranges: V, alpha, beta, p, q, r, mu, gamma,
/// alpha_d, beta_d, mu_d.
pub const OBS_RANGES: [(f64, f64); OBS_DIM] = [
    (0.0, 2000.0),
    (ALPHA_MIN, ALPHA_MAX),
    (-PI, PI),
    (-10.0 * PI, 10.0 * PI),
    (-10.0 * PI, 10.0 * PI),
    (-10.0 * PI, 10.0 * PI),
    (-PI, PI),
    (-1.745, 1.745),
    (-0.085, 0.68),
    (0.0, 0.0),
    (0.0, 0.0),
];

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step() called on a finished episode")]
    EpisodeDone,
    #[error("reset() must be called before step()")]
    NotReset,
}

/// 11-component observation in physical units, clipped to `OBS_RANGES`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn from_state(state: &AircraftState, targets: &[f64; 3]) -> Self {
        let raw = [
            state.v,
            state.alpha,
            state.beta,
            state.p,
            state.q,
            state.r,
            state.mu,
            state.gamma,
            targets[0],
            targets[1],
            targets[2],
        ];
        let mut clipped = [0.0; OBS_DIM];
        for i in 0..OBS_DIM {
            clipped[i] = raw[i].clamp(OBS_RANGES[i].0, OBS_RANGES[i].1);
        }
        Observation(clipped)
    }

    pub fn in_ranges(&self) -> bool {
        self.0
            .iter()
            .zip(OBS_RANGES.iter())
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// Normalized 3-vector action in [-1, 1] per channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvAction(pub [f64; ACTION_DIM]);

impl EnvAction {
    pub fn clipped(&self) -> [f64; ACTION_DIM] {
        [
            self.0[0].clamp(-1.0, 1.0),
            self.0[1].clamp(-1.0, 1.0),
            self.0[2].clamp(-1.0, 1.0),
        ]
    }

    /// Affine scale from [-1, 1] onto the actuator deflection ranges.
    pub fn to_deflections(&self) -> [f64; ACTION_DIM] {
        let a = self.clipped();
        let scale = |x: f64, (lo, hi): (f64, f64)| lo + (x + 1.0) * 0.5 * (hi - lo);
        [
            scale(a[0], ELEVATOR_LIMITS),
            scale(a[1], AILERON_LIMITS),
            scale(a[2], RUDDER_LIMITS),
        ]
    }
}

/// Reward weights and shaping constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardConfig {
    pub w_p1: f64,
    pub w_p21: f64,
    pub w_p22: f64,
    /// Logistic gate steepness (s/rad).
    pub k_blend: f64,
    /// Rate threshold for the phase gate (rad/s).
    pub omega_th: f64,
    pub bonus_alpha: f64,
    pub bonus_beta: f64,
    pub bonus_mu: f64,
    /// Attitude bonus tolerance (rad).
    pub bonus_tol: f64,
    /// Coefficient on the squared normalized action penalty.
    pub action_penalty: f64,
    pub terminal_penalty: f64,
    /// Discount used in the shaping term.
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_p1: 0.3,
            w_p21: 0.3,
            w_p22: 0.05,
            k_blend: 10.0,
            omega_th: 0.17,
            bonus_alpha: 5.0,
            bonus_beta: 3.0,
            bonus_mu: 3.0,
            bonus_tol: 0.017,
            action_penalty: 1.0,
            terminal_penalty: -1000.0,
            gamma: 0.99,
        }
    }
}

/// Episode initialization bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InitBounds {
    pub v: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub p: (f64, f64),
    pub q: (f64, f64),
    pub r: (f64, f64),
    pub mu: (f64, f64),
    pub gamma: (f64, f64),
    pub alpha_d: (f64, f64),
}

impl Default for InitBounds {
    fn default() -> Self {
        Self {
            v: (100.0, 1500.0),
            alpha: (-0.175, 1.047),
            beta: (-0.262, 0.262),
            p: (-2.094, 2.094),
            q: (-1.047, 1.047),
            r: (-0.524, 0.524),
            mu: (-3.142, 3.142),
            gamma: (-1.047, 1.047),
            alpha_d: (-0.085, 0.68),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnvConfig {
    pub reward: RewardConfig,
    pub bounds: InitBounds,
    /// Fixed throttle fraction.
    pub eta: f64,
    /// Integration timestep (s).
    pub dt: f64,
    /// Operational airspeed envelope (ft/s) for termination.
    pub v_envelope: (f64, f64),
    pub step_limit: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            reward: RewardConfig::default(),
            bounds: InitBounds::default(),
            eta: crate::flightdyn::surrogate::DEFAULT_ETA,
            dt: crate::flightdyn::surrogate::DEFAULT_DT,
            v_envelope: (50.0, 2000.0),
            step_limit: EPISODE_STEP_LIMIT,
        }
    }
}

/// Why an episode ended. Envelope and singularity exits carry the terminal
/// penalty; the step limit does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoneReason {
    AlphaEnvelope,
    BetaEnvelope,
    SpeedEnvelope,
    RateEnvelope,
    Singularity,
    StepLimit,
}

impl DoneReason {
    pub fn is_envelope_exit(&self) -> bool {
        !matches!(self, DoneReason::StepLimit)
    }
}

/// r_phase1 = -||omega||^2 - w_p1 (|pq| + |qr| + |pr|).
pub fn phase1_reward(p: f64, q: f64, r: f64, cfg: &RewardConfig) -> f64 {
    let omega_sq = p * p + q * q + r * r;
    let coupling = (p * q).abs() + (q * r).abs() + (p * r).abs();
    -omega_sq - cfg.w_p1 * coupling
}

/// r_phase2 = -e_alpha^2 - w_p21 e_alpha q - w_p22 (||omega||^2 + couplings).
/// Discrete bonuses and the action penalty are added in step(), not here.
pub fn phase2_reward(e_alpha: f64, q: f64, p: f64, r: f64, cfg: &RewardConfig) -> f64 {
    let omega_sq = p * p + q * q + r * r;
    let coupling = (p * q).abs() + (q * r).abs() + (p * r).abs();
    -e_alpha * e_alpha - cfg.w_p21 * e_alpha * q - cfg.w_p22 * (omega_sq + coupling)
}

/// Logistic phase gate: 1 / (1 + exp(k_blend (||omega|| - omega_th))).
pub fn blend(omega_norm: f64, cfg: &RewardConfig) -> f64 {
    1.0 / (1.0 + (cfg.k_blend * (omega_norm - cfg.omega_th)).exp())
}

/// Shaping potential sigma = -e_alpha^2 - w_p21 ||omega||^2.
pub fn potential(e_alpha: f64, omega: &[f64; 3], cfg: &RewardConfig) -> f64 {
    let omega_sq = omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2];
    -e_alpha * e_alpha - cfg.w_p21 * omega_sq
}

/// Termination conditions on a (possibly just-integrated) state.
pub fn check_termination(
    state: &AircraftState,
    steps: usize,
    cfg: &EnvConfig,
) -> Option<DoneReason> {
    if !state.is_finite() {
        return Some(DoneReason::Singularity);
    }
    if state.alpha < ALPHA_MIN || state.alpha > ALPHA_MAX {
        return Some(DoneReason::AlphaEnvelope);
    }
    if state.beta.abs() > PI / 2.0 {
        return Some(DoneReason::BetaEnvelope);
    }
    if state.v < cfg.v_envelope.0 || state.v > cfg.v_envelope.1 {
        return Some(DoneReason::SpeedEnvelope);
    }
    if [state.p, state.q, state.r].iter().any(|w| w.abs() > 10.0 * PI) {
        return Some(DoneReason::RateEnvelope);
    }
    if steps >= cfg.step_limit {
        return Some(DoneReason::StepLimit);
    }
    None
}

/// Per-step reward components, logged for telemetry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_phase1: f64,
    pub r_phase2: f64,
    pub blend_eps: f64,
    pub r_raw: f64,
    pub bonuses: f64,
    pub action_penalty: f64,
    pub pbrs: f64,
    pub terminal: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: Option<DoneReason>,
    pub breakdown: RewardBreakdown,
    pub control: ControlInput,
    pub state: AircraftState,
}

#[derive(Debug, Clone)]
struct EpisodeState {
    state: AircraftState,
    targets: [f64; 3],
    steps: usize,
    sigma: f64,
    done: Option<DoneReason>,
}

/// One environment instance; owns its RNG and episode state.
pub struct FlightEnv {
    pub config: EnvConfig,
    params: VehicleParams,
    aero: Arc<AeroDataset>,
    rng: ChaCha20Rng,
    episode: Option<EpisodeState>,
}

impl FlightEnv {
    pub fn new(config: EnvConfig, params: VehicleParams, aero: Arc<AeroDataset>, seed: u64) -> Self {
        Self { config, params, aero, rng: ChaCha20Rng::seed_from_u64(seed), episode: None }
    }

    pub fn with_surrogate(config: EnvConfig, seed: u64) -> Self {
        Self::new(
            config,
            crate::flightdyn::surrogate::params(),
            Arc::new(crate::flightdyn::surrogate::dataset()),
            seed,
        )
    }

    pub fn targets(&self) -> Option<[f64; 3]> {
        self.episode.as_ref().map(|e| e.targets)
    }

    pub fn state(&self) -> Option<&AircraftState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn steps(&self) -> usize {
        self.episode.as_ref().map(|e| e.steps).unwrap_or(0)
    }

    fn sample(&mut self, (lo, hi): (f64, f64)) -> f64 {
        if lo == hi {
            lo
        } else {
            self.rng.gen_range(lo..hi)
        }
    }

    /// Start a new episode: state sampled uniformly in the init bounds,
    /// altitude at 0 ft, targets (alpha_d random, beta_d = mu_d = 0).
    pub fn reset(&mut self) -> Observation {
        let b = self.config.bounds;
        let state = AircraftState {
            v: self.sample(b.v),
            alpha: self.sample(b.alpha),
            beta: self.sample(b.beta),
            p: self.sample(b.p),
            q: self.sample(b.q),
            r: self.sample(b.r),
            mu: self.sample(b.mu),
            gamma: self.sample(b.gamma),
            chi: 0.0,
            h: 0.0,
        };
        let targets = [self.sample(b.alpha_d), 0.0, 0.0];
        let omega = [state.p, state.q, state.r];
        let sigma = potential(state.alpha - targets[0], &omega, &self.config.reward);
        let obs = Observation::from_state(&state, &targets);
        self.episode = Some(EpisodeState { state, targets, steps: 0, sigma, done: None });
        obs
    }

    /// Reseed and reset: identical seeds reproduce identical episodes.
    pub fn reset_with_seed(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha20Rng::seed_from_u64(seed);
        self.reset()
    }

    /// Advance one timestep under a normalized action.
    pub fn step(&mut self, action: &EnvAction) -> Result<StepOutcome, EnvError> {
        let ep = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if ep.done.is_some() {
            return Err(EnvError::EpisodeDone);
        }
        let cfg = &self.config;
        let rcfg = &cfg.reward;
        let a = action.clipped();
        let d = action.to_deflections();
        let control = ControlInput::new(cfg.eta, d[0], d[1], d[2]);

        let (next, singular) = match step_rk4(&ep.state, &control, cfg.dt, &self.params, &self.aero)
        {
            Ok(s) => (s, false),
            Err(_) => (ep.state, true),
        };
        ep.steps += 1;

        let e_alpha = next.alpha - ep.targets[0];
        let e_beta = crate::flightdyn::wrap_angle(next.beta - ep.targets[1]);
        let e_mu = crate::flightdyn::wrap_angle(next.mu - ep.targets[2]);
        let omega = [next.p, next.q, next.r];
        let omega_norm = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();

        let r1 = phase1_reward(next.p, next.q, next.r, rcfg);
        let r2 = phase2_reward(e_alpha, next.q, next.p, next.r, rcfg);
        let eps = blend(omega_norm, rcfg);
        let r_raw = (1.0 - eps) * r1 + eps * r2;

        let mut bonuses = 0.0;
        if e_alpha.abs() < rcfg.bonus_tol {
            bonuses += rcfg.bonus_alpha;
        }
        if e_beta.abs() < rcfg.bonus_tol {
            bonuses += rcfg.bonus_beta;
        }
        if e_mu.abs() < rcfg.bonus_tol {
            bonuses += rcfg.bonus_mu;
        }
        let action_penalty = -rcfg.action_penalty * a.iter().map(|x| x * x).sum::<f64>();

        let sigma_next = potential(e_alpha, &omega, rcfg);
        let pbrs = rcfg.gamma * sigma_next - ep.sigma;

        let done = if singular {
            Some(DoneReason::Singularity)
        } else {
            check_termination(&next, ep.steps, cfg)
        };
        let terminal = match done {
            Some(reason) if reason.is_envelope_exit() => rcfg.terminal_penalty,
            _ => 0.0,
        };

        let total = r_raw + bonuses + action_penalty + pbrs + terminal;
        let breakdown = RewardBreakdown {
            r_phase1: r1,
            r_phase2: r2,
            blend_eps: eps,
            r_raw,
            bonuses,
            action_penalty,
            pbrs,
            terminal,
            total,
        };

        ep.state = next;
        ep.sigma = sigma_next;
        ep.done = done;

        Ok(StepOutcome {
            observation: Observation::from_state(&next, &ep.targets),
            reward: total,
            done,
            breakdown,
            control,
            state: next,
        })
    }
}

#[cfg(test)]
mod tests;
