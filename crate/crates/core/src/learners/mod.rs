//! Standard and implicit TD(λ) with linear function approximation.
//!
//! Both learners keep the weights wₜ and the incoming trace eₜ₋₁. A step
//! first forms eₜ = γλeₜ₋₁ + φₜ and then applies
//!
//! * standard: `w ← w + α[r + γφₜ₊₁ᵀw − φₜᵀw]·eₜ`
//! * implicit: the solution of
//!   `w′ = w + α[r + γφₜ₊₁ᵀw + γλeₜ₋₁ᵀw − eₜᵀw′]·eₜ`, obtained in closed form
//!   with a rank-one inverse so the cost stays linear in k.

mod fixed_point;
mod oracle;

pub use fixed_point::td_fixed_point_oracle;
pub use oracle::td_step_implicit_oracle;

use crate::error::{check_len, Error, Result};
use crate::vector::{dot_unchecked, max_abs, norm, norm_sq, DiscountSpec, EligibilityTrace, Transition, WeightVector};

/// Max-abs weight above which a learner is flagged as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TdVariant {
    Standard,
    Implicit,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TdStepRecord {
    /// The bracketed scalar of the applied update. For the implicit step this
    /// is evaluated at the new weights.
    pub td_error: f64,
    pub alpha_used: f64,
    /// ‖eₜ‖².
    pub trace_norm_sq: f64,
    /// False when the step was a no-op on a diverged learner or was rejected.
    pub applied: bool,
}

#[derive(Debug, Clone)]
pub struct TdLearnerState {
    weights: WeightVector,
    trace: EligibilityTrace,
    disc: DiscountSpec,
    step_count: u64,
    diverged: bool,
    next_weights: Vec<f64>,
    next_trace: Vec<f64>,
}

impl TdLearnerState {
    pub fn new(k: usize, disc: DiscountSpec) -> Self {
        Self::with_weights(WeightVector::zeros(k), disc)
    }

    pub fn with_weights(weights: WeightVector, disc: DiscountSpec) -> Self {
        let k = weights.len();
        Self {
            weights,
            trace: EligibilityTrace::zeros(k),
            disc,
            step_count: 0,
            diverged: false,
            next_weights: vec![0.0; k],
            next_trace: vec![0.0; k],
        }
    }

    /// Overrides the incoming trace eₜ₋₁.
    pub fn with_trace(mut self, trace: EligibilityTrace) -> Result<Self> {
        check_len(self.dim(), trace.len())?;
        self.trace = trace;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// The trace eₜ₋₁ that the next step will decay.
    pub fn trace(&self) -> &EligibilityTrace {
        &self.trace
    }

    pub fn disc(&self) -> DiscountSpec {
        self.disc
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn weight_norm(&self) -> f64 {
        norm(&self.weights)
    }

    /// Zeroes the trace, e.g. at an episode start.
    pub fn reset_trace(&mut self) {
        self.trace.fill(0.0);
    }

    /// The value estimate wᵀφ.
    pub fn value(&self, phi: &[f64]) -> Result<f64> {
        check_len(self.dim(), phi.len())?;
        Ok(dot_unchecked(&self.weights, phi))
    }

    pub fn step(&mut self, variant: TdVariant, tr: &Transition, alpha: f64) -> Result<TdStepRecord> {
        match variant {
            TdVariant::Standard => self.step_standard(tr, alpha),
            TdVariant::Implicit => self.step_implicit(tr, alpha),
        }
    }

    /// wₜ₊₁ = wₜ + α[rₜ + γφₜ₊₁ᵀwₜ − φₜᵀwₜ]eₜ.
    pub fn step_standard(&mut self, tr: &Transition, alpha: f64) -> Result<TdStepRecord> {
        self.validate(tr, alpha)?;
        if self.diverged {
            return Ok(TdStepRecord::default());
        }
        self.load_next_trace(&tr.phi_t);
        let e = &self.next_trace;
        let w = &self.weights;
        let delta = tr.reward + self.bootstrap(tr) - dot_unchecked(&tr.phi_t, w);
        let scale = alpha * delta;
        for ((out, wi), ei) in self.next_weights.iter_mut().zip(w.iter()).zip(e) {
            *out = wi + scale * ei;
        }
        let record = TdStepRecord { td_error: delta, alpha_used: alpha, trace_norm_sq: norm_sq(e), applied: true };
        Ok(self.commit(tr.terminal, record))
    }

    /// Closed-form implicit step:
    ///
    /// `u  = w + α[r + γφₜ₊₁ᵀw + γλeₜ₋₁ᵀw]·eₜ`
    /// `w′ = u − (α/(1 + α‖eₜ‖²))·(eₜᵀu)·eₜ`
    ///
    /// Only inner products and scaled vector additions; no k×k intermediate.
    pub fn step_implicit(&mut self, tr: &Transition, alpha: f64) -> Result<TdStepRecord> {
        self.validate(tr, alpha)?;
        if self.diverged {
            return Ok(TdStepRecord::default());
        }
        let carried = self.disc.trace_decay() * dot_unchecked(&self.trace, &self.weights);
        self.load_next_trace(&tr.phi_t);
        let e = &self.next_trace;
        let target = tr.reward + self.bootstrap(tr) + carried;

        let step = alpha * target;
        let u = &mut self.next_weights;
        for ((ui, wi), ei) in u.iter_mut().zip(self.weights.iter()).zip(e) {
            *ui = wi + step * ei;
        }
        let e_sq = norm_sq(e);
        let shrink = alpha / (1.0 + alpha * e_sq) * dot_unchecked(e, u);
        for (ui, ei) in u.iter_mut().zip(e) {
            *ui -= shrink * ei;
        }
        let td_error = target - dot_unchecked(e, u);
        let record = TdStepRecord { td_error, alpha_used: alpha, trace_norm_sq: e_sq, applied: true };
        Ok(self.commit(tr.terminal, record))
    }

    fn validate(&self, tr: &Transition, alpha: f64) -> Result<()> {
        check_len(self.dim(), tr.phi_t.len())?;
        check_len(self.dim(), tr.phi_next.len())?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be finite and >= 0, got {alpha}"),
            });
        }
        Ok(())
    }

    fn bootstrap(&self, tr: &Transition) -> f64 {
        if tr.terminal {
            0.0
        } else {
            self.disc.gamma() * dot_unchecked(&tr.phi_next, &self.weights)
        }
    }

    fn load_next_trace(&mut self, phi: &[f64]) {
        let decay = self.disc.trace_decay();
        for ((out, ei), pi) in self.next_trace.iter_mut().zip(self.trace.iter()).zip(phi) {
            *out = decay * ei + pi;
        }
    }

    /// Swaps in the candidate weights and trace, or flags divergence.
    fn commit(&mut self, terminal: bool, record: TdStepRecord) -> TdStepRecord {
        let peak = max_abs(&self.next_weights);
        if !peak.is_finite() {
            self.diverged = true;
            return TdStepRecord { applied: false, ..record };
        }
        std::mem::swap(self.weights.vec_mut(), &mut self.next_weights);
        std::mem::swap(self.trace.vec_mut(), &mut self.next_trace);
        if terminal {
            self.reset_trace();
        }
        self.step_count += 1;
        if peak > DIVERGENCE_THRESHOLD {
            self.diverged = true;
        }
        record
    }
}
