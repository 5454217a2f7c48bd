//! Environments: finite MRPs plus the puddle-world and cart-pole benchmarks.

mod cart_pole;
mod fourier;
mod mrp;
mod puddle_world;

pub use cart_pole::{CartPole, CartPoleConfig};
pub use fourier::FourierBasis;
pub use mrp::{mrp_sample_episode, random_chain_mrp, FiniteMrp, MrpSampler};
pub use puddle_world::{PuddleWorld, PuddleWorldConfig};

use crate::error::Result;

/// Result of one environment step. The observation is normalized to the
/// unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a finite action set.
pub trait DiscreteActionEnv {
    fn n_actions(&self) -> usize;

    /// Dimension of the normalized observation.
    fn obs_dims(&self) -> usize;

    /// Starts a new episode drawn from `seed`; returns the normalized observation.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Errors if the episode is over or the action is out of range.
    fn step(&mut self, action: usize) -> Result<EnvStep>;

    fn is_done(&self) -> bool;
}

pub(crate) fn to_unit(value: f64, lo: f64, hi: f64) -> f64 {
    ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
}
