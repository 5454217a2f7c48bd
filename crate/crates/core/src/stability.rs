//! Per-step stability analysis of the zero-reward TD(λ) gain matrices.
//!
//! With dₜ = φₜ − γφₜ₊₁ and Xₜ = eₜdₜᵀ, one zero-reward step multiplies the
//! weights by the gain matrix `I − αX` (standard) or `I − αQX` (implicit),
//! where `Q = (I + αeeᵀ)⁻¹`. Since `Qe = βe` with `β = 1/(1 + α‖e‖²)`, the
//! implicit gain is the standard one with α replaced by αβ.
//!
//! `M Mᵀ` for either gain has k−2 unit eigenvalues and two eigenvalues
//! λ⁺ ≥ λ⁻ in closed form. λ⁺ is the *squared* spectral norm of the gain:
//! the spectral norm itself is `sqrt(sq_norm)`.
//!
//! Only `βₜ‖eₜ‖² ≤ 1/α` follows from the definition of β (the weaker
//! `βₜ‖eₜ‖ ≤ 1/α` does not hold in general), so the contraction check audits
//! `α·β·‖e‖² < 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::vector::{dot_unchecked, norm_sq};

/// The vectors eₜ, dₜ and the step-size of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGeometry {
    e: Vec<f64>,
    d: Vec<f64>,
    alpha: f64,
}

impl TransitionGeometry {
    pub fn new(e: Vec<f64>, d: Vec<f64>, alpha: f64) -> Result<Self> {
        check_len(e.len(), d.len())?;
        if e.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("geometry needs dimension >= 2, got {}", e.len()),
            });
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be positive and finite, got {alpha}"),
            });
        }
        Ok(Self { e, d, alpha })
    }

    /// Builds the geometry from raw features, with `d = φₜ − γφₜ₊₁`.
    pub fn from_features(e: &[f64], phi_t: &[f64], phi_next: &[f64], gamma: f64, alpha: f64) -> Result<Self> {
        check_len(phi_t.len(), phi_next.len())?;
        let d = phi_t.iter().zip(phi_next).map(|(p, q)| p - gamma * q).collect();
        Self::new(e.to_vec(), d, alpha)
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub beta: f64,
    pub lam_plus: f64,
    pub lam_minus: f64,
    pub lam_im_plus: f64,
    pub lam_im_minus: f64,
    /// ‖I − αX‖₂².
    pub sq_norm_standard: f64,
    /// ‖I − αQX‖₂².
    pub sq_norm_implicit: f64,
    pub e_dot_d: f64,
    /// α·β·‖e‖², always < 1.
    pub shrink: f64,
}

impl StabilityReport {
    pub fn ratio(&self) -> f64 {
        self.sq_norm_implicit / self.sq_norm_standard
    }
}

/// β = 1 − α‖e‖²/(1 + α‖e‖²) = 1/(1 + α‖e‖²).
pub fn compute_beta(alpha: f64, e: &[f64]) -> f64 {
    1.0 / (1.0 + alpha * norm_sq(e))
}

/// The two non-unit eigenvalues of `(I − s·edᵀ)(I − s·edᵀ)ᵀ`, larger first.
///
/// λ± = 1 + [s²‖e‖²‖d‖² − 2s·eᵀd ± s‖e‖‖d‖·√(s²‖e‖²‖d‖² + 4 − 4s·eᵀd)] / 2.
///
/// λ⁻ is evaluated through λ⁺λ⁻ = (1 − s·eᵀd)², which is the same root
/// without the cancellation of the minus branch.
fn gain_gram_eigs(s: f64, e_sq: f64, d_sq: f64, e_dot_d: f64) -> Result<(f64, f64)> {
    let p_sq = e_sq * d_sq;
    let base = s * s * p_sq - 2.0 * s * e_dot_d;
    let discriminant = s * s * p_sq + 4.0 - 4.0 * s * e_dot_d;
    // Cauchy-Schwarz makes the discriminant >= (s|e||d| - 2)^2 >= 0; only
    // rounding can push it below zero.
    let slack = 16.0 * f64::EPSILON * (s * s * p_sq + 4.0 + 4.0 * (s * e_dot_d).abs());
    let discriminant = if discriminant >= 0.0 {
        discriminant
    } else if discriminant >= -slack {
        0.0
    } else {
        return Err(Error::FormulaDomain { discriminant });
    };
    let root = s * p_sq.sqrt() * discriminant.sqrt();
    // base + root cancels when base < 0; rationalize with
    // root² − base² = 4s²(‖e‖²‖d‖² − (eᵀd)²).
    let excess = if base >= 0.0 {
        base + root
    } else {
        let gap = (p_sq - e_dot_d * e_dot_d).max(0.0);
        let denom = root - base;
        if denom > 0.0 {
            4.0 * s * s * gap / denom
        } else {
            0.0
        }
    };
    let lam_plus = 1.0 + 0.5 * excess;
    let det = (1.0 - s * e_dot_d).powi(2);
    let lam_minus = det / lam_plus;
    Ok((lam_plus, lam_minus))
}

/// Non-unit eigenvalues (λ⁺, λ⁻) of `(I − αX)(I − αX)ᵀ`.
pub fn standard_gain_eigs(g: &TransitionGeometry) -> Result<(f64, f64)> {
    gain_gram_eigs(g.alpha, norm_sq(&g.e), norm_sq(&g.d), dot_unchecked(&g.e, &g.d))
}

/// Non-unit eigenvalues (λ^{im,+}, λ^{im,−}) of `(I − αQX)(I − αQX)ᵀ`.
pub fn implicit_gain_eigs(g: &TransitionGeometry) -> Result<(f64, f64)> {
    let beta = compute_beta(g.alpha, &g.e);
    gain_gram_eigs(g.alpha * beta, norm_sq(&g.e), norm_sq(&g.d), dot_unchecked(&g.e, &g.d))
}

/// The two eigenvalues of a rank-two matrix `abᵀ + cdᵀ` outside its null space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rank2Eigs {
    /// Real pair, larger first.
    Real(f64, f64),
    /// Complex-conjugate pair `re ± i·im` with `im > 0`.
    ComplexPair { re: f64, im: f64 },
}

impl Rank2Eigs {
    pub fn sum(&self) -> f64 {
        match *self {
            Rank2Eigs::Real(a, b) => a + b,
            Rank2Eigs::ComplexPair { re, .. } => 2.0 * re,
        }
    }

    pub fn product(&self) -> f64 {
        match *self {
            Rank2Eigs::Real(a, b) => a * b,
            Rank2Eigs::ComplexPair { re, im } => re * re + im * im,
        }
    }
}

/// Eigenvalues of `abᵀ + cdᵀ`:
/// `[aᵀb + cᵀd ± √((aᵀb − cᵀd)² + 4(aᵀd)(bᵀc))] / 2`.
pub fn rank2_eigs(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Rank2Eigs> {
    let k = a.len();
    check_len(k, b.len())?;
    check_len(k, c.len())?;
    check_len(k, d.len())?;
    let ab = dot_unchecked(a, b);
    let cd = dot_unchecked(c, d);
    let ad = dot_unchecked(a, d);
    let bc = dot_unchecked(b, c);
    let sum = ab + cd;
    let product = ab * cd - ad * bc;
    let discriminant = (ab - cd).powi(2) + 4.0 * ad * bc;
    if discriminant < 0.0 {
        return Ok(Rank2Eigs::ComplexPair { re: 0.5 * sum, im: 0.5 * (-discriminant).sqrt() });
    }
    let root = discriminant.sqrt();
    // Take the root that adds magnitudes, then recover the other from the product.
    let big = 0.5 * (sum + root.copysign(sum));
    let small = if big != 0.0 { product / big } else { 0.5 * (sum - root.copysign(sum)) };
    Ok(if big >= small { Rank2Eigs::Real(big, small) } else { Rank2Eigs::Real(small, big) })
}

/// Dense gain matrix `I − αX` or `I − αQX`, with Q from the Sherman–Morrison
/// identity `Q = I − (α/(1 + α‖e‖²))·eeᵀ`.
pub fn gain_matrix_oracle(g: &TransitionGeometry, implicit: bool) -> Result<DMatrix<f64>> {
    let k = g.dim();
    check_dense(k)?;
    let e = DVector::from_column_slice(&g.e);
    let d = DVector::from_column_slice(&g.d);
    let x = &e * d.transpose();
    let identity = DMatrix::<f64>::identity(k, k);
    if implicit {
        let c = g.alpha / (1.0 + g.alpha * e.norm_squared());
        let q = &identity - (&e * e.transpose()) * c;
        Ok(&identity - (q * x) * g.alpha)
    } else {
        Ok(&identity - x * g.alpha)
    }
}

/// All eigenvalues of `MMᵀ`, ascending, by dense symmetric eigendecomposition.
pub fn gram_eigenvalues_oracle(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_dense(m.nrows())?;
    let gram = m * m.transpose();
    let mut values: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// ‖M‖₂², the largest eigenvalue of `MMᵀ`.
pub fn spectral_sq_norm_oracle(m: &DMatrix<f64>) -> Result<f64> {
    Ok(gram_eigenvalues_oracle(m)?.last().copied().unwrap_or(0.0))
}

fn check_dense(k: usize) -> Result<()> {
    if k > 64 {
        return Err(Error::InvalidParameter { name: "k", reason: format!("dense oracles support k <= 64, got {k}") });
    }
    Ok(())
}

/// Closed-form stability report for one step.
pub fn audit_step(g: &TransitionGeometry) -> Result<StabilityReport> {
    let e_sq = norm_sq(&g.e);
    let d_sq = norm_sq(&g.d);
    let e_dot_d = dot_unchecked(&g.e, &g.d);
    let beta = compute_beta(g.alpha, &g.e);
    let (lam_plus, lam_minus) = gain_gram_eigs(g.alpha, e_sq, d_sq, e_dot_d)?;
    let (lam_im_plus, lam_im_minus) = gain_gram_eigs(g.alpha * beta, e_sq, d_sq, e_dot_d)?;
    let a_e_sq = g.alpha * e_sq;
    Ok(StabilityReport {
        beta,
        lam_plus,
        lam_minus,
        lam_im_plus,
        lam_im_minus,
        // λ⁺ ≥ 1, so it dominates the k − 2 unit eigenvalues.
        sq_norm_standard: lam_plus,
        sq_norm_implicit: lam_im_plus,
        e_dot_d,
        shrink: a_e_sq / (1.0 + a_e_sq),
    })
}
