use nalgebra::{DMatrix, DVector};

use super::TdLearnerState;
use crate::error::{check_len, Error, Result};
use crate::vector::{dot_unchecked, update_trace, Transition, WeightVector};

/// Solves the implicit update directly as the k×k system
/// `(I + α·eₜeₜᵀ)w′ = w + α[r + γφₜ₊₁ᵀw + γλeₜ₋₁ᵀw]·eₜ` by Cholesky factorization.
///
/// Dense reference for [`TdLearnerState::step_implicit`]; limited to k ≤ 64.
pub fn td_step_implicit_oracle(state: &TdLearnerState, tr: &Transition, alpha: f64) -> Result<WeightVector> {
    let k = state.dim();
    if k > 64 {
        return Err(Error::InvalidParameter { name: "k", reason: format!("dense oracle supports k <= 64, got {k}") });
    }
    check_len(k, tr.phi_t.len())?;
    check_len(k, tr.phi_next.len())?;
    let disc = state.disc();
    let w = state.weights();
    let e_prev = state.trace();
    let e = update_trace(e_prev, &tr.phi_t, disc)?;

    let bootstrap = if tr.terminal { 0.0 } else { disc.gamma() * dot_unchecked(&tr.phi_next, w) };
    let target = tr.reward + bootstrap + disc.trace_decay() * dot_unchecked(e_prev, w);

    let e = DVector::from_column_slice(&e);
    let rhs = DVector::from_column_slice(w) + &e * (alpha * target);
    let system = DMatrix::<f64>::identity(k, k) + (&e * e.transpose()) * alpha;
    let chol = system.cholesky().ok_or_else(|| Error::Singular("I + alpha*e*e^T is not positive definite".into()))?;
    Ok(chol.solve(&rhs).iter().copied().collect::<Vec<_>>().into())
}
