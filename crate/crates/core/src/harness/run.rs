//! Single experiment cells, optionally with per-step stability audits.

use crate::control::SarsaAgent;
use crate::envs::{random_chain_mrp, CartPole, DiscreteActionEnv, FourierBasis, PuddleWorld};
use crate::error::{Error, Result};
use crate::learners::{TdLearnerState, TdStepRecord};
use crate::seed::mix_seed;
use crate::stability::{audit_step, StabilityReport, TransitionGeometry};
use crate::vector::{norm, DiscountSpec, Transition};

use super::config::{Domain, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub domain: Domain,
    pub algorithm: super::Algorithm,
    pub alpha0: f64,
    pub seed: u64,
    pub final_avg_reward: f64,
    pub diverged: bool,
    /// Largest ‖w‖₂ seen during the run.
    pub max_weight_norm: f64,
    pub steps_completed: usize,
    /// `ok`, or `error: ...` for a failed cell.
    pub status: String,
}

/// One audited transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow {
    pub step: u64,
    pub alpha: f64,
    pub report: StabilityReport,
}

/// Tracks per-episode returns and the peak weight norm of a run.
struct Progress {
    steps: usize,
    max_weight_norm: f64,
    /// (step at which the episode ended, return)
    episodes: Vec<(usize, f64)>,
    partial_return: f64,
    diverged: bool,
}

impl Progress {
    fn new(initial_norm: f64) -> Self {
        Self { steps: 0, max_weight_norm: initial_norm, episodes: Vec::new(), partial_return: 0.0, diverged: false }
    }

    fn observe_weights(&mut self, record: &TdStepRecord, weights: &[f64]) {
        let n = if record.applied { norm(weights) } else { f64::MAX };
        if n > self.max_weight_norm {
            self.max_weight_norm = n;
        }
    }

    /// Mean return of episodes that ended inside the last `window` steps; the
    /// running return of the current episode if none did.
    fn final_avg_reward(&self, window: usize) -> f64 {
        let start = self.steps.saturating_sub(window);
        let recent: Vec<f64> = self.episodes.iter().filter(|(end, _)| *end > start).map(|(_, r)| *r).collect();
        if recent.is_empty() {
            self.partial_return
        } else {
            recent.iter().sum::<f64>() / recent.len() as f64
        }
    }
}

fn audit_row(step: u64, trace: &[f64], tr: &Transition, gamma: f64, alpha: f64) -> Result<AuditRow> {
    let g = TransitionGeometry::from_features(trace, &tr.phi_t, &tr.phi_next, gamma, alpha)?;
    Ok(AuditRow { step, alpha, report: audit_step(&g)? })
}

/// Runs one cell for `config.total_steps` environment steps.
pub fn run_cell(config: &ExperimentConfig, alpha0: f64, seed: u64) -> Result<SweepResult> {
    run_cell_with_audit(config, alpha0, seed, None).map(|(r, _)| r)
}

/// Runs one cell, auditing every `sample_every`-th transition.
pub fn stability_audit_run(
    config: &ExperimentConfig,
    alpha0: f64,
    seed: u64,
    sample_every: usize,
) -> Result<(SweepResult, Vec<AuditRow>)> {
    if sample_every == 0 {
        return Err(Error::Config("sample_every must be >= 1".into()));
    }
    run_cell_with_audit(config, alpha0, seed, Some(sample_every))
}

fn run_cell_with_audit(
    config: &ExperimentConfig,
    alpha0: f64,
    seed: u64,
    audit_every: Option<usize>,
) -> Result<(SweepResult, Vec<AuditRow>)> {
    config.validate()?;
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::Config(format!("alpha0 must be positive, got {alpha0}")));
    }
    let disc = DiscountSpec::new(config.gamma, config.lambda).map_err(|e| Error::Config(e.to_string()))?;
    let mut audits = Vec::new();
    let progress = match config.domain {
        Domain::RandomMrp => run_mrp(config, disc, alpha0, seed, audit_every, &mut audits)?,
        Domain::PuddleWorld => {
            let mut env = PuddleWorld::new(config.puddle.clone())?;
            run_env(config, &mut env, disc, alpha0, seed, audit_every, &mut audits)?
        }
        Domain::CartPole => {
            let mut env = CartPole::new(config.cart_pole.clone());
            run_env(config, &mut env, disc, alpha0, seed, audit_every, &mut audits)?
        }
    };
    let result = SweepResult {
        domain: config.domain,
        algorithm: config.algorithm,
        alpha0,
        seed,
        final_avg_reward: progress.final_avg_reward(config.eval_window),
        diverged: progress.diverged,
        max_weight_norm: progress.max_weight_norm,
        steps_completed: progress.steps,
        status: "ok".into(),
    };
    Ok((result, audits))
}

fn run_env<E: DiscreteActionEnv>(
    config: &ExperimentConfig,
    env: &mut E,
    disc: DiscountSpec,
    alpha0: f64,
    seed: u64,
    audit_every: Option<usize>,
    audits: &mut Vec<AuditRow>,
) -> Result<Progress> {
    let basis = FourierBasis::new(config.fourier_order, env.obs_dims())?;
    // TD evaluation runs the uniformly random policy.
    let epsilon = if config.algorithm.is_control() { config.epsilon } else { 1.0 };
    let mut agent = SarsaAgent::new(
        config.algorithm.variant(),
        config.algorithm.schedule(alpha0)?,
        basis,
        env.n_actions(),
        disc,
        epsilon,
    )?;
    let mut progress = Progress::new(0.0);
    let mut audit_error = None;
    let mut episode = 0u64;
    while progress.steps < config.total_steps && !progress.diverged {
        let remaining = config.total_steps - progress.steps;
        let episode_seed = mix_seed(seed, episode);
        episode += 1;
        let stats = agent.run_episode(env, episode_seed, Some(remaining), &mut |v| {
            progress.steps += 1;
            progress.partial_return += v.transition.reward;
            progress.observe_weights(&v.record, v.weights_after);
            if let Some(every) = audit_every {
                if progress.steps.is_multiple_of(every) && audit_error.is_none() {
                    match audit_row(progress.steps as u64, v.trace, v.transition, v.gamma, v.alpha) {
                        Ok(row) => audits.push(row),
                        Err(e) => audit_error = Some(e),
                    }
                }
            }
        })?;
        if let Some(e) = audit_error.take() {
            return Err(e);
        }
        progress.diverged = stats.diverged;
        if stats.finished {
            progress.episodes.push((progress.steps, stats.total_return));
            progress.partial_return = 0.0;
        }
        if stats.steps == 0 && !stats.diverged {
            return Err(Error::Env("episode made no progress".into()));
        }
    }
    Ok(progress)
}

fn run_mrp(
    config: &ExperimentConfig,
    disc: DiscountSpec,
    alpha0: f64,
    seed: u64,
    audit_every: Option<usize>,
    audits: &mut Vec<AuditRow>,
) -> Result<Progress> {
    let mrp = random_chain_mrp(config.mrp_states, config.base_seed, config.mrp_reward_scale)?;
    let mut learner = TdLearnerState::new(mrp.n_features(), disc);
    let mut schedule = config.algorithm.schedule(alpha0)?;
    let variant = config.algorithm.variant();
    let mut progress = Progress::new(0.0);
    let mut rewards = Vec::with_capacity(config.total_steps);
    let mut trace = vec![0.0; learner.dim()];
    for tr in mrp.sampler(seed).take(config.total_steps) {
        for ((b, e), p) in trace.iter_mut().zip(learner.trace().iter()).zip(tr.phi_t.iter()) {
            *b = disc.trace_decay() * e + p;
        }
        let alpha = schedule.next_alpha(learner.step_count(), &trace, &tr.phi_t, &tr.phi_next, disc.gamma())?;
        let record = learner.step(variant, &tr, alpha)?;
        progress.steps += 1;
        rewards.push(tr.reward);
        progress.observe_weights(&record, learner.weights());
        if let Some(every) = audit_every {
            if progress.steps.is_multiple_of(every) {
                audits.push(audit_row(progress.steps as u64, &trace, &tr, disc.gamma(), alpha)?);
            }
        }
        if learner.diverged() {
            progress.diverged = true;
            break;
        }
    }
    let window = &rewards[rewards.len().saturating_sub(config.eval_window)..];
    progress.partial_return = window.iter().sum::<f64>() / window.len().max(1) as f64;
    Ok(progress)
}
