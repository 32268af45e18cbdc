//! Desk-scale PPO: tanh multilayer perceptrons with manual backprop, a
//! diagonal-Gaussian policy, generalized advantage estimation, and the
//! clipped-surrogate training loop. No autodiff framework; gradients are
//! verified against finite differences in the tests.

mod mlp;
mod policy;
mod ppo;
pub mod toy;

pub use mlp::{Adam, Mlp, MlpCache};
pub use policy::{
    gaussian_entropy, gaussian_log_prob, load_weights, load_weights_checked, save_weights,
    PolicyNetwork, WEIGHT_FORMAT_VERSION,
};
pub use ppo::{
    clipped_objective, compute_advantages, ppo_loss_and_grad, probability_ratio, train,
    Environment, IterationMetrics, LossStats, PpoConfig, RolloutBuffer, TrainOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("non-finite {0} encountered during training")]
    NonFinite(&'static str),
    #[error("weight file version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("weight shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weight file parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
