use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{to_unit, DiscreteActionEnv, EnvStep};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CartPoleConfig {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub pole_half_length: f64,
    pub force: f64,
    pub dt: f64,
    pub x_limit: f64,
    pub theta_limit: f64,
    /// Velocity bounds used only to normalize observations.
    pub x_dot_bound: f64,
    pub theta_dot_bound: f64,
    pub init_range: f64,
    pub max_steps: usize,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            force: 10.0,
            dt: 0.02,
            x_limit: 2.4,
            theta_limit: 12.0_f64.to_radians(),
            x_dot_bound: 3.0,
            theta_dot_bound: 3.5,
            init_range: 0.05,
            max_steps: 3000,
        }
    }
}

impl CartPoleConfig {
    /// Time derivative of (x, ẋ, θ, θ̇) under a horizontal force.
    pub fn derivative(&self, s: [f64; 4], force: f64) -> [f64; 4] {
        let [_, x_dot, theta, theta_dot] = s;
        let total_mass = self.cart_mass + self.pole_mass;
        let pole_moment = self.pole_mass * self.pole_half_length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_moment * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (self.gravity * sin - cos * temp)
            / (self.pole_half_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_moment * theta_acc * cos / total_mass;
        [x_dot, x_acc, theta_dot, theta_acc]
    }
}

/// Classic cart-pole balancing, Euler-integrated. Actions: 0 push left, 1 push right.
#[derive(Debug, Clone)]
pub struct CartPole {
    config: CartPoleConfig,
    state: [f64; 4],
    steps: usize,
    done: bool,
}

impl CartPole {
    pub fn new(config: CartPoleConfig) -> Self {
        Self { config, state: [0.0; 4], steps: 0, done: true }
    }

    pub fn config(&self) -> &CartPoleConfig {
        &self.config
    }

    /// Raw (x, ẋ, θ, θ̇).
    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// Starts a fresh episode from `state`.
    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.steps = 0;
        self.done = self.failed();
    }

    fn failed(&self) -> bool {
        self.state[0].abs() > self.config.x_limit || self.state[2].abs() > self.config.theta_limit
    }

    pub fn observation(&self) -> Vec<f64> {
        let c = &self.config;
        let [x, x_dot, theta, theta_dot] = self.state;
        vec![
            to_unit(x, -c.x_limit, c.x_limit),
            to_unit(x_dot, -c.x_dot_bound, c.x_dot_bound),
            to_unit(theta, -c.theta_limit, c.theta_limit),
            to_unit(theta_dot, -c.theta_dot_bound, c.theta_dot_bound),
        ]
    }
}

impl DiscreteActionEnv for CartPole {
    fn n_actions(&self) -> usize {
        2
    }

    fn obs_dims(&self) -> usize {
        4
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.config.init_range;
        self.state = std::array::from_fn(|_| rng.random_range(-r..=r));
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        if self.done {
            return Err(Error::Env("cart-pole: step after episode end".into()));
        }
        let force = match action {
            0 => -self.config.force,
            1 => self.config.force,
            _ => return Err(Error::Env(format!("cart-pole: invalid action {action}"))),
        };
        let ds = self.config.derivative(self.state, force);
        for (s, d) in self.state.iter_mut().zip(ds) {
            *s += self.config.dt * d;
        }
        self.steps += 1;
        let failed = self.failed();
        self.done = failed || self.steps >= self.config.max_steps;
        Ok(EnvStep { observation: self.observation(), reward: if failed { 0.0 } else { 1.0 }, done: self.done })
    }

    fn is_done(&self) -> bool {
        self.done
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rk4(c: &CartPoleConfig, s: [f64; 4], force: f64, h: f64) -> [f64; 4] {
        let add = |a: [f64; 4], b: [f64; 4], k: f64| std::array::from_fn(|i| a[i] + k * b[i]);
        let k1 = c.derivative(s, force);
        let k2 = c.derivative(add(s, k1, h / 2.0), force);
        let k3 = c.derivative(add(s, k2, h / 2.0), force);
        let k4 = c.derivative(add(s, k3, h), force);
        std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }

    #[test]
    fn alternating_forces_track_fine_integration() {
        let mut env = CartPole::new(CartPoleConfig::default());
        env.set_state([0.0; 4]);
        let c = env.config().clone();
        let mut fine = [0.0; 4];
        for t in 0..20 {
            let action = t % 2;
            let force = if action == 0 { -c.force } else { c.force };
            for _ in 0..100 {
                fine = rk4(&c, fine, force, c.dt / 100.0);
            }
            let out = env.step(action).unwrap();
            assert!(!out.done);
            assert_eq!(out.reward, 1.0);
            let theta = env.state()[2];
            assert!(theta.abs() < c.theta_limit);
            // Euler's O(Δt) global error stays an order of magnitude under the failure angle.
            assert!((theta - fine[2]).abs() < 1e-2, "step {t}: euler {theta} vs fine {}", fine[2]);
        }
        assert!(fine[2].abs() < c.theta_limit);
    }

    #[test]
    fn tilt_beyond_limit_fails() {
        let mut env = CartPole::new(CartPoleConfig::default());
        env.set_state([0.0, 0.0, 13.0_f64.to_radians(), 0.0]);
        assert!(env.is_done());
        assert!(env.step(1).is_err());

        env.set_state([0.0, 0.0, 0.205, 0.5]);
        let out = env.step(0).unwrap();
        assert!(out.done);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn seeded_reset_is_deterministic() {
        let mut a = CartPole::new(CartPoleConfig::default());
        let mut b = CartPole::new(CartPoleConfig::default());
        assert_eq!(a.reset(9), b.reset(9));
        assert_eq!(a.state(), b.state());
        assert!(a.state().iter().all(|v| v.abs() <= 0.05));
        assert_ne!(a.reset(10), b.reset(9));
    }

    #[test]
    fn observation_in_unit_box() {
        let mut env = CartPole::new(CartPoleConfig::default());
        env.set_state([2.3, 10.0, -0.1, -20.0]);
        let obs = env.observation();
        assert!(obs.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(obs[1], 1.0);
        assert_eq!(obs[3], 0.0);
    }

    #[test]
    fn invalid_action() {
        let mut env = CartPole::new(CartPoleConfig::default());
        env.reset(1);
        assert!(env.step(2).is_err());
    }
}
