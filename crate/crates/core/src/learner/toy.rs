//! 1-D double-integrator regulation task used as a fast learning smoke
//! test for the trainer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::ppo::Environment;

pub const DT: f64 = 0.05;
pub const POSITION_LIMIT: f64 = 5.0;
pub const EPISODE_LEN: usize = 200;

/// State (position, velocity); the action is a bounded acceleration.
/// Reward is a negative quadratic in state and action.
pub struct DoubleIntegratorEnv {
    rng: ChaCha20Rng,
    x: f64,
    v: f64,
    steps: usize,
}

impl DoubleIntegratorEnv {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), x: 0.0, v: 0.0, steps: 0 }
    }

    pub fn state(&self) -> (f64, f64) {
        (self.x, self.v)
    }
}

impl Environment for DoubleIntegratorEnv {
    fn obs_ranges(&self) -> Vec<(f64, f64)> {
        vec![(-POSITION_LIMIT, POSITION_LIMIT), (-POSITION_LIMIT, POSITION_LIMIT)]
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Vec<f64> {
        self.x = self.rng.gen_range(-1.0..1.0);
        self.v = self.rng.gen_range(-1.0..1.0);
        self.steps = 0;
        vec![self.x, self.v]
    }

    fn step(&mut self, action: &[f64]) -> (Vec<f64>, f64, bool) {
        let a = action[0].clamp(-1.0, 1.0);
        self.v += a * DT;
        self.x += self.v * DT;
        self.steps += 1;
        // Scaled down so value targets stay O(10) and the critic converges
        // within a short training budget.
        let reward = -0.05 * (self.x * self.x + 0.1 * self.v * self.v + 0.001 * a * a);
        let done = self.x.abs() > POSITION_LIMIT || self.steps >= EPISODE_LEN;
        (vec![self.x, self.v], reward, done)
    }
}
