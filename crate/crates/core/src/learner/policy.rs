//! Diagonal-Gaussian actor-critic over normalized observations, with
//! versioned JSON weight persistence.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpCache};
use super::LearnError;

pub const WEIGHT_FORMAT_VERSION: u32 = 1;

const LN_2PI: f64 = 1.8378770664093453;

/// Actor-critic pair plus the fixed affine observation normalization.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyNetwork {
    pub version: u32,
    pub activation: String,
    /// Observation clipping ranges; the normalizer maps them onto [-1, 1].
    pub obs_lo: Vec<f64>,
    pub obs_hi: Vec<f64>,
    pub actor: Mlp,
    /// State-independent log standard deviations, one per action channel.
    pub log_std: Vec<f64>,
    pub critic: Mlp,
}

impl PolicyNetwork {
    /// Fresh network with the given hidden sizes; the actor output layer is
    /// down-scaled so initial action means sit near zero.
    pub fn new(
        obs_ranges: &[(f64, f64)],
        act_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let obs_dim = obs_ranges.len();
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(act_dim);
        let mut critic_sizes = vec![obs_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        Self {
            version: WEIGHT_FORMAT_VERSION,
            activation: "tanh".into(),
            obs_lo: obs_ranges.iter().map(|r| r.0).collect(),
            obs_hi: obs_ranges.iter().map(|r| r.1).collect(),
            actor: Mlp::new(&actor_sizes, rng, 0.01),
            log_std: vec![init_log_std; act_dim],
            critic: Mlp::new(&critic_sizes, rng, 1.0),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_lo.len()
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.actor.sizes[1..self.actor.sizes.len() - 1]
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.version != WEIGHT_FORMAT_VERSION {
            return Err(LearnError::VersionMismatch {
                found: self.version,
                expected: WEIGHT_FORMAT_VERSION,
            });
        }
        if self.activation != "tanh" {
            return Err(LearnError::ShapeMismatch(format!(
                "unsupported activation {}",
                self.activation
            )));
        }
        self.actor.validate().map_err(LearnError::ShapeMismatch)?;
        self.critic.validate().map_err(LearnError::ShapeMismatch)?;
        if self.obs_lo.len() != self.obs_hi.len()
            || self.actor.sizes[0] != self.obs_dim()
            || self.critic.sizes[0] != self.obs_dim()
            || *self.actor.sizes.last().unwrap() != self.act_dim()
            || *self.critic.sizes.last().unwrap() != 1
        {
            return Err(LearnError::ShapeMismatch("inconsistent layer dimensions".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite()
            && self.critic.is_finite()
            && self.log_std.iter().all(|x| x.is_finite())
    }

    /// Affine map onto [-1, 1] per component; degenerate ranges map to 0.
    pub fn normalize_obs(&self, obs: &[f64]) -> Vec<f64> {
        assert_eq!(obs.len(), self.obs_dim());
        (0..obs.len())
            .map(|i| {
                let span = self.obs_hi[i] - self.obs_lo[i];
                if span == 0.0 {
                    0.0
                } else {
                    2.0 * (obs[i] - self.obs_lo[i]) / span - 1.0
                }
            })
            .collect()
    }

    /// Deterministic forward pass: (action means, log-stds, value).
    pub fn forward(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64), LearnError> {
        if !self.is_finite() {
            return Err(LearnError::NonFinite("network parameters"));
        }
        let x = self.normalize_obs(obs);
        let mean = self.actor.forward(&x);
        let value = self.critic.forward(&x)[0];
        Ok((mean, self.log_std.clone(), value))
    }

    /// Forward pass with caches kept for backprop (input already normalized).
    pub fn forward_cached(&self, x_norm: &[f64]) -> (MlpCache, MlpCache) {
        (self.actor.forward_cached(x_norm), self.critic.forward_cached(x_norm))
    }

    /// Sample an action (pre-clip) and its log-probability.
    pub fn sample_action(&self, mean: &[f64], rng: &mut ChaCha20Rng) -> (Vec<f64>, f64) {
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * standard_normal(rng))
            .collect();
        let logp = gaussian_log_prob(&action, mean, &self.log_std);
        (action, logp)
    }

    pub fn param_count(&self) -> usize {
        self.actor.param_count() + self.log_std.len() + self.critic.param_count()
    }

    /// Flat parameter order: actor layers, log-stds, critic layers.
    pub fn params_to_vec(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        self.actor.flatten_into(&mut flat);
        flat.extend_from_slice(&self.log_std);
        self.critic.flatten_into(&mut flat);
        flat
    }

    pub fn set_params_from_vec(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let off = self.actor.unflatten_from(flat, 0);
        let n = self.log_std.len();
        self.log_std.copy_from_slice(&flat[off..off + n]);
        self.critic.unflatten_from(flat, off + n);
    }
}

/// Marsaglia polar method off a uniform stream; deterministic per RNG state.
fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Diagonal-Gaussian log density.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    let mut logp = 0.0;
    for i in 0..action.len() {
        let std = log_std[i].exp();
        let z = (action[i] - mean[i]) / std;
        logp += -0.5 * z * z - log_std[i] - 0.5 * LN_2PI;
    }
    logp
}

/// Differential entropy of the diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
}

pub fn save_weights(network: &PolicyNetwork, path: &Path) -> Result<(), LearnError> {
    let json = serde_json::to_string(network).map_err(|e| LearnError::Parse(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<PolicyNetwork, LearnError> {
    let text = std::fs::read_to_string(path)?;
    let network: PolicyNetwork =
        serde_json::from_str(&text).map_err(|e| LearnError::Parse(e.to_string()))?;
    network.validate()?;
    Ok(network)
}

/// Load and additionally require specific hidden sizes.
pub fn load_weights_checked(
    path: &Path,
    expected_hidden: &[usize],
) -> Result<PolicyNetwork, LearnError> {
    let network = load_weights(path)?;
    if network.hidden_sizes() != expected_hidden {
        return Err(LearnError::ShapeMismatch(format!(
            "hidden sizes {:?}, expected {:?}",
            network.hidden_sizes(),
            expected_hidden
        )));
    }
    Ok(network)
}
