//! Flight-control workbench: a nonlinear 6-DOF aircraft simulator with a
//! feedback-linearizing sliding-mode controller, a learned-feedforward hybrid
//! control law with safety filtering and Lyapunov monitoring, an MDP training
//! environment with two-phase shaped rewards, a small on-policy PPO trainer,
//! and a scenario harness for controller comparisons.

pub mod env;
pub mod flightdyn;
pub mod harness;
pub mod hybrid;
pub mod learner;
pub mod smc;
