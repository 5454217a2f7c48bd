use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DiscreteActionEnv, EnvStep};
use crate::error::{Error, Result};

/// Puddle-world constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PuddleWorldConfig {
    pub step_length: f64,
    pub noise_std: f64,
    pub step_reward: f64,
    pub puddle_penalty: f64,
    pub puddle_radius: f64,
    /// Capsule centerline segments.
    pub puddles: Vec<([f64; 2], [f64; 2])>,
    /// The episode ends once x + y reaches this value.
    pub goal_sum: f64,
    pub max_steps: usize,
}

impl Default for PuddleWorldConfig {
    fn default() -> Self {
        Self {
            step_length: 0.05,
            noise_std: 0.01,
            step_reward: -1.0,
            puddle_penalty: 400.0,
            puddle_radius: 0.1,
            puddles: vec![([0.10, 0.75], [0.45, 0.75]), ([0.45, 0.40], [0.45, 0.80])],
            goal_sum: 1.9 - 0.1,
            max_steps: 1000,
        }
    }
}

/// 2-D navigation in the unit square with two capsule-shaped puddles.
/// Actions: 0 up, 1 down, 2 left, 3 right.
#[derive(Debug, Clone)]
pub struct PuddleWorld {
    config: PuddleWorldConfig,
    position: [f64; 2],
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
}

impl PuddleWorld {
    pub fn new(config: PuddleWorldConfig) -> Result<Self> {
        let noise = Normal::new(0.0, config.noise_std)
            .map_err(|e| Error::InvalidParameter { name: "noise_std", reason: e.to_string() })?;
        Ok(Self { config, position: [0.0, 0.0], steps: 0, done: true, rng: ChaCha8Rng::seed_from_u64(0), noise })
    }

    pub fn config(&self) -> &PuddleWorldConfig {
        &self.config
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    /// Places the agent at `position` and starts a fresh episode from there.
    pub fn set_position(&mut self, position: [f64; 2]) {
        self.position = [position[0].clamp(0.0, 1.0), position[1].clamp(0.0, 1.0)];
        self.steps = 0;
        self.done = false;
    }

    fn at_goal(&self, p: [f64; 2]) -> bool {
        p[0] + p[1] >= self.config.goal_sum
    }

    /// Summed penetration depth into the puddles.
    pub fn puddle_depth(&self, p: [f64; 2]) -> f64 {
        self.config
            .puddles
            .iter()
            .map(|(a, b)| (self.config.puddle_radius - segment_distance(p, *a, *b)).max(0.0))
            .sum()
    }

    /// Reward for arriving at `p` from a non-goal state.
    pub fn reward_at(&self, p: [f64; 2]) -> f64 {
        if self.at_goal(p) {
            0.0
        } else {
            self.config.step_reward - self.config.puddle_penalty * self.puddle_depth(p)
        }
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len_sq > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

impl DiscreteActionEnv for PuddleWorld {
    fn n_actions(&self) -> usize {
        4
    }

    fn obs_dims(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let p = [self.rng.random::<f64>(), self.rng.random::<f64>()];
            if !self.at_goal(p) {
                self.position = p;
                break;
            }
        }
        self.steps = 0;
        self.done = false;
        self.position.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        if self.done {
            return Err(Error::Env("puddle world: step after episode end".into()));
        }
        let delta = match action {
            0 => [0.0, 1.0],
            1 => [0.0, -1.0],
            2 => [-1.0, 0.0],
            3 => [1.0, 0.0],
            _ => return Err(Error::Env(format!("puddle world: invalid action {action}"))),
        };
        for (i, d) in delta.iter().enumerate() {
            let moved = self.position[i] + self.config.step_length * d + self.noise.sample(&mut self.rng);
            self.position[i] = moved.clamp(0.0, 1.0);
        }
        self.steps += 1;
        let reward = self.reward_at(self.position);
        self.done = self.at_goal(self.position) || self.steps >= self.config.max_steps;
        Ok(EnvStep { observation: self.position.to_vec(), reward, done: self.done })
    }

    fn is_done(&self) -> bool {
        self.done
    }
}
