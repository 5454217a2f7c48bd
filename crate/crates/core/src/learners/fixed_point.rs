use nalgebra::{DMatrix, DVector};

use crate::envs::FiniteMrp;
use crate::error::{Error, Result};
use crate::vector::{DiscountSpec, WeightVector};

const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 1_000_000;

/// The TD(λ) fixed point w* of a finite MRP: the solution of `A w* = b` with
///
/// `A = ΦᵀD S (I − γP)Φ`, `b = ΦᵀD S r`, `S = Σ_{m≥0} (γλP)ᵐ`, `D = diag(ξ∞)`,
///
/// i.e. the weights at which `E[(rₜ + γφₜ₊₁ᵀw − φₜᵀw)eₜ]` vanishes under the
/// stationary distribution. S is summed until a term's max-abs drops below 1e-14.
pub fn td_fixed_point_oracle(mrp: &FiniteMrp, disc: DiscountSpec) -> Result<WeightVector> {
    let n = mrp.n_states();
    let p = mrp.transitions();
    let phi = mrp.features();
    let xi = mrp.stationary_distribution()?;

    let decayed = p * disc.trace_decay();
    let mut series = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for _ in 0..SERIES_MAX_TERMS {
        term = &decayed * term;
        if term.amax() < SERIES_TOL {
            break;
        }
        series += &term;
    }

    let weighted = phi.transpose() * DMatrix::from_diagonal(&DVector::from_vec(xi)) * series;
    let a = &weighted * (DMatrix::<f64>::identity(n, n) - p * disc.gamma()) * phi;
    let b = &weighted * DVector::from_column_slice(mrp.rewards());

    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-12) {
        return Err(Error::Singular(format!("fixed-point matrix has condition estimate {:e}", smax / smin)));
    }
    let w = a.lu().solve(&b).ok_or_else(|| Error::Singular("fixed-point matrix".into()))?;
    Ok(w.iter().copied().collect::<Vec<_>>().into())
}
