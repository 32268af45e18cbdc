//! Clipped-surrogate PPO loop with generalized advantage estimation over
//! fixed-length rollouts.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Adam;
use super::policy::{gaussian_entropy, gaussian_log_prob, PolicyNetwork};
use super::LearnError;
use crate::env::{EnvAction, FlightEnv, OBS_RANGES};

/// Minimal episodic-environment interface for the trainer.
pub trait Environment {
    fn obs_ranges(&self) -> Vec<(f64, f64)>;
    fn act_dim(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    /// Returns (next observation, reward, done).
    fn step(&mut self, action: &[f64]) -> (Vec<f64>, f64, bool);
}

impl Environment for FlightEnv {
    fn obs_ranges(&self) -> Vec<(f64, f64)> {
        OBS_RANGES.to_vec()
    }

    fn act_dim(&self) -> usize {
        3
    }

    fn reset(&mut self) -> Vec<f64> {
        FlightEnv::reset(self).0.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> (Vec<f64>, f64, bool) {
        let out = FlightEnv::step(self, &EnvAction([action[0], action[1], action[2]]))
            .expect("trainer steps only live episodes");
        (out.observation.0.to_vec(), out.reward, out.done.is_some())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub learning_rate: f64,
    pub gamma: f64,
    /// Gradient epochs per iteration.
    pub epochs: usize,
    pub minibatch_size: usize,
    pub rollout_len: usize,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub total_timesteps: usize,
    pub normalize_advantages: bool,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            learning_rate: 5e-5,
            gamma: 0.99,
            epochs: 10,
            minibatch_size: 64,
            rollout_len: 2048,
            gae_lambda: 0.95,
            entropy_coef: 0.0,
            value_coef: 0.5,
            total_timesteps: 2_000_000,
            normalize_advantages: true,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err("clip_eps must be in (0, 1)".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("gamma must be in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err("gae_lambda must be in [0, 1]".into());
        }
        if self.rollout_len == 0 || self.minibatch_size == 0 || self.epochs == 0 {
            return Err("rollout_len, minibatch_size and epochs must be positive".into());
        }
        Ok(())
    }
}

/// On-policy batch: one entry per environment step.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            observations: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.dones.clear();
        self.advantages.clear();
        self.returns.clear();
    }
}

/// r_t(theta) = exp(logp_new - logp_old).
pub fn probability_ratio(logp_new: f64, logp_old: f64) -> f64 {
    (logp_new - logp_old).exp()
}

/// Per-sample clipped surrogate: min(r A, clip(r, 1-eps, 1+eps) A).
pub fn clipped_objective(r: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = r.clamp(1.0 - eps, 1.0 + eps);
    (r * advantage).min(clipped * advantage)
}

/// GAE(gamma, lambda) with bootstrapping cut at done flags; `last_value`
/// bootstraps the step after the buffer. Returns (advantages, returns)
/// with returns = advantages + values.
pub fn compute_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let next_v = if t + 1 < n { values[t + 1] } else { last_value };
        let delta = rewards[t] + gamma * next_v * cont - values[t];
        acc = delta + gamma * lambda * cont * acc;
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// Mean PPO loss over a batch slice and its analytic gradient in flat
/// parameter order (actor, log-std, critic). The loss is the negated
/// surrogate plus value_coef * squared value error minus entropy_coef *
/// policy entropy; gradient descent on it maximizes the PPO objective.
#[allow(clippy::too_many_arguments)]
pub fn ppo_loss_and_grad(
    network: &PolicyNetwork,
    observations: &[Vec<f64>],
    actions: &[Vec<f64>],
    logp_old: &[f64],
    advantages: &[f64],
    returns: &[f64],
    config: &PpoConfig,
) -> (f64, Vec<f64>, LossStats) {
    let n = observations.len();
    assert!(n > 0);
    let act_dim = network.act_dim();
    let mut grad_actor = network.actor.zeroed_like();
    let mut grad_critic = network.critic.zeroed_like();
    let mut grad_log_std = vec![0.0; act_dim];
    let inv_n = 1.0 / n as f64;

    let mut pol_loss = 0.0;
    let mut value_loss = 0.0;
    let mut clip_fraction = 0.0;
    for k in 0..n {
        let x = network.normalize_obs(&observations[k]);
        let (actor_cache, critic_cache) = network.forward_cached(&x);
        let mean = actor_cache.acts.last().unwrap().clone();
        let value = critic_cache.acts.last().unwrap()[0];

        let logp = gaussian_log_prob(&actions[k], &mean, &network.log_std);
        let r = probability_ratio(logp, logp_old[k]);
        let a = advantages[k];
        let surrogate = clipped_objective(r, a, config.clip_eps);
        pol_loss -= surrogate * inv_n;
        let unclipped_active = r * a <= r.clamp(1.0 - config.clip_eps, 1.0 + config.clip_eps) * a;
        if (r - 1.0).abs() > config.clip_eps {
            clip_fraction += inv_n;
        }

        // d(loss)/d(logp): only the unclipped branch propagates a gradient.
        let d_logp = if unclipped_active { -r * a * inv_n } else { 0.0 };
        let mut d_mean = vec![0.0; act_dim];
        for i in 0..act_dim {
            let std = network.log_std[i].exp();
            let z = (actions[k][i] - mean[i]) / std;
            d_mean[i] = d_logp * z / std;
            grad_log_std[i] += d_logp * (z * z - 1.0);
        }
        network.actor.backward(&actor_cache, &d_mean, &mut grad_actor);

        let verr = value - returns[k];
        value_loss += verr * verr * inv_n;
        let d_value = [2.0 * config.value_coef * verr * inv_n];
        network.critic.backward(&critic_cache, &d_value, &mut grad_critic);
    }

    let entropy = gaussian_entropy(&network.log_std);
    for g in grad_log_std.iter_mut() {
        *g -= config.entropy_coef;
    }
    let loss = pol_loss + config.value_coef * value_loss - config.entropy_coef * entropy;

    let mut flat = Vec::with_capacity(network.param_count());
    grad_actor.flatten_into(&mut flat);
    flat.extend_from_slice(&grad_log_std);
    grad_critic.flatten_into(&mut flat);
    (loss, flat, LossStats { policy_loss: pol_loss, value_loss, entropy, clip_fraction })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// One row of the training metrics log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub timesteps: usize,
    pub mean_return: f64,
    pub episodes: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<IterationMetrics>,
    pub timesteps: usize,
}

/// On-policy training loop: fixed-length rollouts, GAE, K epochs of
/// shuffled minibatch descent per iteration. Deterministic for a fixed
/// config seed and a deterministic environment.
pub fn train<E: Environment>(
    env: &mut E,
    config: &PpoConfig,
    network: &mut PolicyNetwork,
    metrics_path: Option<&Path>,
) -> Result<TrainOutcome, LearnError> {
    config.validate().map_err(LearnError::ShapeMismatch)?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.learning_rate, network.param_count());
    let mut writer = match metrics_path {
        Some(p) => {
            let new_file = !p.exists();
            let file = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
            Some(csv::WriterBuilder::new().has_headers(new_file).from_writer(file))
        }
        None => None,
    };

    let iterations = config.total_timesteps.div_ceil(config.rollout_len);
    let mut metrics = Vec::with_capacity(iterations);
    let mut timesteps = 0;
    let mut obs = env.reset();
    let mut episode_return = 0.0;
    let mut buffer = RolloutBuffer::with_capacity(config.rollout_len);

    for iteration in 0..iterations {
        buffer.clear();
        let mut episode_returns = Vec::new();
        for _ in 0..config.rollout_len {
            let (mean, _, value) = network.forward(&obs)?;
            let (action, logp) = network.sample_action(&mean, &mut rng);
            let applied: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
            let (next_obs, reward, done) = env.step(&applied);
            episode_return += reward;
            buffer.observations.push(obs);
            buffer.actions.push(action);
            buffer.log_probs.push(logp);
            buffer.rewards.push(reward);
            buffer.values.push(value);
            buffer.dones.push(done);
            timesteps += 1;
            if done {
                episode_returns.push(episode_return);
                episode_return = 0.0;
                obs = env.reset();
            } else {
                obs = next_obs;
            }
        }
        let last_value = if *buffer.dones.last().unwrap() {
            0.0
        } else {
            network.forward(&obs)?.2
        };
        let (mut advantages, returns) = compute_advantages(
            &buffer.rewards,
            &buffer.values,
            &buffer.dones,
            last_value,
            config.gamma,
            config.gae_lambda,
        );
        buffer.returns = returns;
        if config.normalize_advantages {
            normalize_in_place(&mut advantages);
        }
        buffer.advantages = advantages;

        let n = buffer.len();
        let mut indices: Vec<usize> = (0..n).collect();
        let mut stats = LossStats::default();
        let mut params = network.params_to_vec();
        for _ in 0..config.epochs {
            shuffle(&mut indices, &mut rng);
            for chunk in indices.chunks(config.minibatch_size) {
                let obs_mb: Vec<Vec<f64>> =
                    chunk.iter().map(|&i| buffer.observations[i].clone()).collect();
                let act_mb: Vec<Vec<f64>> =
                    chunk.iter().map(|&i| buffer.actions[i].clone()).collect();
                let logp_mb: Vec<f64> = chunk.iter().map(|&i| buffer.log_probs[i]).collect();
                let adv_mb: Vec<f64> = chunk.iter().map(|&i| buffer.advantages[i]).collect();
                let ret_mb: Vec<f64> = chunk.iter().map(|&i| buffer.returns[i]).collect();
                let (loss, grad, s) = ppo_loss_and_grad(
                    network, &obs_mb, &act_mb, &logp_mb, &adv_mb, &ret_mb, config,
                );
                if !loss.is_finite() {
                    return Err(LearnError::NonFinite("loss"));
                }
                stats = s;
                adam.step(&mut params, &grad);
                network.set_params_from_vec(&params);
            }
        }

        let (mean_return, episodes) = if episode_returns.is_empty() {
            (f64::NAN, 0)
        } else {
            (
                episode_returns.iter().sum::<f64>() / episode_returns.len() as f64,
                episode_returns.len(),
            )
        };
        let row = IterationMetrics {
            iteration,
            timesteps,
            mean_return,
            episodes,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
        };
        if let Some(w) = writer.as_mut() {
            w.serialize(&row).map_err(|e| LearnError::Parse(e.to_string()))?;
            w.flush()?;
        }
        metrics.push(row);
    }

    Ok(TrainOutcome { metrics, timesteps })
}

fn normalize_in_place(xs: &mut [f64]) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
}

/// Fisher-Yates off the training RNG stream.
fn shuffle(indices: &mut [usize], rng: &mut ChaCha20Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
}
