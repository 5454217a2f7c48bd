use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::vector::FeatureVector;

/// Fourier cosine basis φᵢ(s) = cos(π·cᵢ·s) over the unit box, with every
/// coefficient vector cᵢ ∈ {0..order}^dims in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBasis {
    order: usize,
    dims: usize,
    coefficients: Vec<Vec<u32>>,
}

impl FourierBasis {
    pub fn new(order: usize, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidParameter { name: "dims", reason: "must be >= 1".into() });
        }
        let base = order + 1;
        let count = base.checked_pow(dims as u32).filter(|c| *c <= 1 << 20).ok_or_else(|| Error::InvalidParameter {
            name: "order",
            reason: format!("(order+1)^dims too large for order {order}, dims {dims}"),
        })?;
        let coefficients = (0..count)
            .map(|mut idx| {
                let mut c = vec![0u32; dims];
                for slot in c.iter_mut().rev() {
                    *slot = (idx % base) as u32;
                    idx /= base;
                }
                c
            })
            .collect();
        Ok(Self { order, dims, coefficients })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of features, (order+1)^dims.
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[Vec<u32>] {
        &self.coefficients
    }

    pub fn features(&self, s: &[f64]) -> Result<FeatureVector> {
        let mut out = vec![0.0; self.len()];
        self.features_into(s, &mut out)?;
        Ok(out.into())
    }

    pub fn features_into(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dims, s.len())?;
        check_len(self.len(), out.len())?;
        debug_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)), "state outside unit box: {s:?}");
        for (o, c) in out.iter_mut().zip(&self.coefficients) {
            let arg: f64 = c.iter().zip(s).map(|(ci, si)| f64::from(*ci) * si).sum();
            *o = (PI * arg).cos();
        }
        Ok(())
    }
}
