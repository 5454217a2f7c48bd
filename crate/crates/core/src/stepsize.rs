//! Step-size schedules.

use crate::error::{check_len, Error, Result};
use crate::vector::dot_unchecked;

#[derive(Debug, Clone, PartialEq)]
pub enum StepSizeSchedule {
    Constant {
        alpha0: f64,
    },
    /// α₀·(t+1)^(−p) with p ∈ (0.5, 1], so Σα = ∞ and Σα² < ∞.
    Polynomial {
        alpha0: f64,
        exponent: f64,
    },
    /// Shrinks α so that a single update cannot flip the sign of the TD error:
    /// whenever `eᵀ(γφ′ − φ) < 0`, `α ← min(α, 1/|eᵀ(γφ′ − φ)|)`.
    AlphaBound {
        alpha0: f64,
        current: f64,
    },
}

impl StepSizeSchedule {
    pub fn constant(alpha0: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        Ok(Self::Constant { alpha0 })
    }

    pub fn polynomial(alpha0: f64, exponent: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "exponent",
                reason: format!("must lie in (0.5, 1], got {exponent}"),
            });
        }
        Ok(Self::Polynomial { alpha0, exponent })
    }

    pub fn alpha_bound(alpha0: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        Ok(Self::AlphaBound { alpha0, current: alpha0 })
    }

    pub fn alpha0(&self) -> f64 {
        match *self {
            Self::Constant { alpha0 } | Self::Polynomial { alpha0, .. } | Self::AlphaBound { alpha0, .. } => alpha0,
        }
    }

    /// Step-size for step `step_count`, given the current trace eₜ and the
    /// transition's features. Only the alpha-bound rule reads the vectors.
    pub fn next_alpha(
        &mut self,
        step_count: u64,
        e: &[f64],
        phi_t: &[f64],
        phi_next: &[f64],
        gamma: f64,
    ) -> Result<f64> {
        check_len(e.len(), phi_t.len())?;
        check_len(e.len(), phi_next.len())?;
        Ok(match self {
            Self::Constant { alpha0 } => *alpha0,
            Self::Polynomial { alpha0, exponent } => *alpha0 * ((step_count as f64) + 1.0).powf(-*exponent),
            Self::AlphaBound { current, .. } => {
                let curvature = gamma * dot_unchecked(e, phi_next) - dot_unchecked(e, phi_t);
                if curvature < 0.0 {
                    let bound = -1.0 / curvature;
                    if bound.is_finite() && bound > 0.0 && bound < *current {
                        *current = bound;
                    }
                }
                *current
            }
        })
    }
}

fn check_alpha0(alpha0: f64) -> Result<()> {
    if alpha0 > 0.0 && alpha0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "alpha0", reason: format!("must be positive and finite, got {alpha0}") })
    }
}
