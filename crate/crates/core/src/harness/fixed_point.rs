//! Long-run convergence of both learners to the TD(λ) fixed point.

use nalgebra::{DMatrix, DVector};

use crate::envs::{random_chain_mrp, FiniteMrp};
use crate::error::{Error, Result};
use crate::learners::{td_fixed_point_oracle, TdLearnerState, TdVariant};
use crate::stepsize::StepSizeSchedule;
use crate::vector::{DiscountSpec, WeightVector};

pub const FIXED_POINT_ALPHA0: f64 = 0.5;
pub const FIXED_POINT_EXPONENT: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub w_star: WeightVector,
    pub w_standard: WeightVector,
    pub w_implicit: WeightVector,
    /// ‖w − w*‖∞ for each learner.
    pub err_standard: f64,
    pub err_implicit: f64,
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs both learners on one sampled trajectory with α = 0.5·(t+1)^(−0.7)
/// and compares them to the fixed-point oracle.
pub fn fixed_point_check_mrp(mrp: &FiniteMrp, disc: DiscountSpec, steps: usize, seed: u64) -> Result<FixedPointReport> {
    let w_star = td_fixed_point_oracle(mrp, disc)?;
    let k = mrp.n_features();
    let mut standard = TdLearnerState::new(k, disc);
    let mut implicit = TdLearnerState::new(k, disc);
    let schedule = StepSizeSchedule::polynomial(FIXED_POINT_ALPHA0, FIXED_POINT_EXPONENT)?;
    let mut sched_standard = schedule.clone();
    let mut sched_implicit = schedule;
    for tr in mrp.sampler(seed).take(steps) {
        // The polynomial schedule only reads the step index.
        let a = sched_standard.next_alpha(standard.step_count(), &tr.phi_t, &tr.phi_t, &tr.phi_next, disc.gamma())?;
        standard.step(TdVariant::Standard, &tr, a)?;
        let a = sched_implicit.next_alpha(implicit.step_count(), &tr.phi_t, &tr.phi_t, &tr.phi_next, disc.gamma())?;
        implicit.step(TdVariant::Implicit, &tr, a)?;
    }
    Ok(FixedPointReport {
        err_standard: sup_distance(standard.weights(), &w_star),
        err_implicit: sup_distance(implicit.weights(), &w_star),
        w_standard: standard.weights().clone(),
        w_implicit: implicit.weights().clone(),
        w_star,
    })
}

/// [`fixed_point_check_mrp`] on a tabular `random_chain_mrp(n_states, seed, 1.0)`.
pub fn fixed_point_check(n_states: usize, seed: u64, disc: DiscountSpec, steps: usize) -> Result<FixedPointReport> {
    let mrp = random_chain_mrp(n_states, seed, 1.0)?;
    fixed_point_check_mrp(&mrp, disc, steps, seed)
}

/// Estimates the fixed point from a simulated trajectory by averaging
/// `eₜ(φₜ − γφₜ₊₁)ᵀ` and `eₜrₜ` and solving the averaged system.
pub fn sampled_fixed_point(mrp: &FiniteMrp, disc: DiscountSpec, steps: usize, seed: u64) -> Result<WeightVector> {
    let k = mrp.n_features();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    let mut e = DVector::<f64>::zeros(k);
    for tr in mrp.sampler(seed).take(steps) {
        let phi = DVector::from_column_slice(&tr.phi_t);
        let next = DVector::from_column_slice(&tr.phi_next);
        e = e * disc.trace_decay() + &phi;
        a += &e * (phi - next * disc.gamma()).transpose();
        b += &e * tr.reward;
    }
    let w = a.lu().solve(&b).ok_or_else(|| Error::Singular("sampled fixed-point system".into()))?;
    Ok(w.iter().copied().collect::<Vec<_>>().into())
}
