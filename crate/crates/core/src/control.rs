//! SARSA(λ) control over per-action stacked features.
//!
//! The state-action feature of (s, a) places φ(s) in block `a` of a vector
//! of length k·n_actions, so Q(s, a) = wᵀstack(φ(s), a) and either TD learner
//! can be used unchanged as the evaluation step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{DiscreteActionEnv, FourierBasis};
use crate::error::{check_len, Error, Result};
use crate::learners::{TdLearnerState, TdStepRecord, TdVariant};
use crate::seed::mix_seed;
use crate::stepsize::StepSizeSchedule;
use crate::vector::{dot_unchecked, DiscountSpec, FeatureVector, Transition, WeightVector};

pub const DEFAULT_EPSILON: f64 = 0.1;

pub fn stack_features(phi_s: &[f64], action: usize, n_actions: usize) -> Result<FeatureVector> {
    if action >= n_actions {
        return Err(Error::InvalidParameter {
            name: "action",
            reason: format!("{action} out of range for {n_actions} actions"),
        });
    }
    let k = phi_s.len();
    let mut out = vec![0.0; k * n_actions];
    out[action * k..(action + 1) * k].copy_from_slice(phi_s);
    Ok(out.into())
}

/// Greedy action (lowest index on ties) with probability 1−ε, otherwise uniform.
pub fn epsilon_greedy(q_values: &[f64], epsilon: f64, rng: &mut impl Rng) -> Result<usize> {
    if q_values.is_empty() {
        return Err(Error::InvalidParameter { name: "q_values", reason: "empty".into() });
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter { name: "epsilon", reason: format!("must lie in [0,1], got {epsilon}") });
    }
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..q_values.len()));
    }
    let mut best = 0;
    for (i, q) in q_values.iter().enumerate().skip(1) {
        if *q > q_values[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    /// Undiscounted return.
    pub total_return: f64,
    pub steps: usize,
    /// True if the episode reached a terminal state (not cut by a step budget).
    pub finished: bool,
    pub diverged: bool,
}

/// What a step observer sees after each learner update.
#[derive(Debug)]
pub struct StepView<'a> {
    /// Learner step index of this update.
    pub step: u64,
    pub action: usize,
    /// eₜ used by the update.
    pub trace: &'a [f64],
    pub transition: &'a Transition,
    pub alpha: f64,
    pub gamma: f64,
    /// Weights before the update.
    pub weights_before: &'a [f64],
    pub weights_after: &'a [f64],
    pub record: TdStepRecord,
}

#[derive(Debug, Clone)]
pub struct SarsaAgent {
    learner: TdLearnerState,
    variant: TdVariant,
    schedule: StepSizeSchedule,
    epsilon: f64,
    basis: FourierBasis,
    n_actions: usize,
    trace_buf: Vec<f64>,
}

impl SarsaAgent {
    pub fn new(
        variant: TdVariant,
        schedule: StepSizeSchedule,
        basis: FourierBasis,
        n_actions: usize,
        disc: DiscountSpec,
        epsilon: f64,
    ) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::InvalidParameter { name: "n_actions", reason: "must be >= 1".into() });
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must lie in [0,1], got {epsilon}"),
            });
        }
        let dim = basis.len() * n_actions;
        Ok(Self {
            learner: TdLearnerState::new(dim, disc),
            variant,
            schedule,
            epsilon,
            basis,
            n_actions,
            trace_buf: vec![0.0; dim],
        })
    }

    pub fn with_weights(mut self, weights: WeightVector) -> Result<Self> {
        check_len(self.learner.dim(), weights.len())?;
        self.learner = TdLearnerState::with_weights(weights, self.learner.disc());
        Ok(self)
    }

    pub fn learner(&self) -> &TdLearnerState {
        &self.learner
    }

    pub fn variant(&self) -> TdVariant {
        self.variant
    }

    pub fn schedule(&self) -> &StepSizeSchedule {
        &self.schedule
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    pub fn diverged(&self) -> bool {
        self.learner.diverged()
    }

    /// Q(s, a) for every action, reading block `a` of the weights.
    pub fn q_values(&self, phi_s: &[f64]) -> Vec<f64> {
        let k = phi_s.len();
        self.learner.weights().chunks(k).map(|block| dot_unchecked(block, phi_s)).collect()
    }

    fn select(&self, phi_s: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
        epsilon_greedy(&self.q_values(phi_s), self.epsilon, rng)
    }

    /// Runs one episode (or until `max_steps` updates), calling `observer`
    /// after every learner update.
    pub fn run_episode<E>(
        &mut self,
        env: &mut E,
        seed: u64,
        max_steps: Option<usize>,
        observer: &mut dyn FnMut(&StepView<'_>),
    ) -> Result<EpisodeStats>
    where
        E: DiscreteActionEnv + ?Sized,
    {
        let mut stats = EpisodeStats { total_return: 0.0, steps: 0, finished: false, diverged: self.diverged() };
        if stats.diverged || max_steps == Some(0) {
            return Ok(stats);
        }
        if env.n_actions() != self.n_actions || env.obs_dims() != self.basis.dims() {
            return Err(Error::InvalidParameter {
                name: "env",
                reason: format!(
                    "agent expects {} actions over {} dims, env has {} over {}",
                    self.n_actions,
                    self.basis.dims(),
                    env.n_actions(),
                    env.obs_dims()
                ),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5a75a));
        let gamma = self.learner.disc().gamma();
        let decay = self.learner.disc().trace_decay();
        let zeros = vec![0.0; self.learner.dim()];

        self.learner.reset_trace();
        let mut phi_s = self.basis.features(&env.reset(seed))?;
        let mut action = self.select(&phi_s, &mut rng)?;
        loop {
            let out = env.step(action)?;
            stats.total_return += out.reward;
            stats.steps += 1;

            let phi_t = stack_features(&phi_s, action, self.n_actions)?;
            let (phi_next, next) = if out.done {
                (FeatureVector::from(zeros.clone()), None)
            } else {
                let phi_s_next = self.basis.features(&out.observation)?;
                let a_next = self.select(&phi_s_next, &mut rng)?;
                (stack_features(&phi_s_next, a_next, self.n_actions)?, Some((phi_s_next, a_next)))
            };
            let tr = Transition::new(phi_t, out.reward, phi_next, out.done)?;

            for ((b, e), p) in self.trace_buf.iter_mut().zip(self.learner.trace().iter()).zip(tr.phi_t.iter()) {
                *b = decay * e + p;
            }
            let step = self.learner.step_count();
            let alpha = self.schedule.next_alpha(step, &self.trace_buf, &tr.phi_t, &tr.phi_next, gamma)?;
            let before = self.learner.weights().clone();
            let record = self.learner.step(self.variant, &tr, alpha)?;
            observer(&StepView {
                step,
                action,
                trace: &self.trace_buf,
                transition: &tr,
                alpha,
                gamma,
                weights_before: &before,
                weights_after: self.learner.weights(),
                record,
            });

            if self.learner.diverged() {
                stats.diverged = true;
                break;
            }
            match next {
                None => {
                    stats.finished = true;
                    break;
                }
                Some(_) if max_steps.is_some_and(|m| stats.steps >= m) => break,
                Some((p, a)) => {
                    phi_s = p;
                    action = a;
                }
            }
        }
        Ok(stats)
    }
}

/// One full episode with no observer.
pub fn sarsa_episode<E>(agent: &mut SarsaAgent, env: &mut E, seed: u64) -> Result<EpisodeStats>
where
    E: DiscreteActionEnv + ?Sized,
{
    agent.run_episode(env, seed, None, &mut |_| {})
}
