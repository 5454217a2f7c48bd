//! Dense vector arithmetic and the value types shared by learners and auditors.

use std::ops::{Deref, DerefMut};

use crate::error::{check_len, Error, Result};

macro_rules! dense_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn zeros(k: usize) -> Self {
                Self(vec![0.0; k])
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            #[allow(dead_code)]
            pub(crate) fn vec_mut(&mut self) -> &mut Vec<f64> {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }

        impl From<&[f64]> for $name {
            fn from(v: &[f64]) -> Self {
                Self(v.to_vec())
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }
    };
}

dense_vector!(
    /// Feature activations φ(x) of one state (or state-action pair).
    FeatureVector
);
dense_vector!(
    /// Linear value-function weights.
    WeightVector
);
dense_vector!(
    /// Accumulating eligibility trace.
    EligibilityTrace
);

/// Discount γ ∈ (0,1) and trace-decay λ ∈ [0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountSpec {
    gamma: f64,
    lambda: f64,
}

impl DiscountSpec {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter { name: "gamma", reason: format!("must lie in (0,1), got {gamma}") });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter { name: "lambda", reason: format!("must lie in [0,1], got {lambda}") });
        }
        Ok(Self { gamma, lambda })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The trace decay factor γλ.
    pub fn trace_decay(&self) -> f64 {
        self.gamma * self.lambda
    }
}

/// One observed step (φₜ, rₜ, φₜ₊₁, terminal).
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub phi_t: FeatureVector,
    pub reward: f64,
    pub phi_next: FeatureVector,
    pub terminal: bool,
}

impl Transition {
    pub fn new(phi_t: FeatureVector, reward: f64, phi_next: FeatureVector, terminal: bool) -> Result<Self> {
        check_len(phi_t.len(), phi_next.len())?;
        if !reward.is_finite() {
            return Err(Error::InvalidParameter { name: "reward", reason: format!("must be finite, got {reward}") });
        }
        Ok(Self { phi_t, reward, phi_next, terminal })
    }

    pub fn dim(&self) -> usize {
        self.phi_t.len()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    dot_unchecked(v, v)
}

pub fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

/// Returns α·x + y.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_len(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(xi, yi)| alpha * xi + yi).collect())
}

/// eₜ = γλ·eₜ₋₁ + φₜ.
pub fn update_trace(e_prev: &EligibilityTrace, phi: &FeatureVector, disc: DiscountSpec) -> Result<EligibilityTrace> {
    let mut e = e_prev.clone();
    update_trace_in_place(&mut e, phi, disc)?;
    Ok(e)
}

pub fn update_trace_in_place(e: &mut [f64], phi: &[f64], disc: DiscountSpec) -> Result<()> {
    check_len(e.len(), phi.len())?;
    let decay = disc.trace_decay();
    for (ei, pi) in e.iter_mut().zip(phi) {
        *ei = decay * *ei + pi;
    }
    Ok(())
}
