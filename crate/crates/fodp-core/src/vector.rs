//! Flat parameter-space vectors.
//!
//! Every quantity the mechanism touches (gradients, sums, releases, model
//! parameters) lives in the same flat `f64` space. Operations are exact
//! elementwise arithmetic in ascending index order, so two runs that perform
//! the same sequence of calls produce bit-identical vectors.

use crate::error::{FodpError, Result};

/// A dense vector in model parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    values: Vec<f64>,
}

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `a * self`, elementwise.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `self / a`, elementwise. Division is kept as a division (not a
    /// reciprocal multiply) so callers that divide and callers that fold the
    /// division into a larger expression agree bit-for-bit.
    pub fn div_scalar(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v / a).collect(),
        }
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// In-place `self += a * other`.
    pub fn add_scaled_assign(&mut self, a: f64, other: &Self) -> Result<()> {
        check_dims(self, other)?;
        for (lhs, rhs) in self.values.iter_mut().zip(&other.values) {
            *lhs += a * rhs;
        }
        Ok(())
    }

    /// Exact bit pattern of every coordinate, for byte-level transcript
    /// comparisons.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// True when both vectors contain bit-identical coordinates.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl From<Vec<f64>> for GradientVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

fn check_dims(a: &GradientVector, b: &GradientVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(FodpError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// `a * x + y`.
pub fn axpy(a: f64, x: &GradientVector, y: &GradientVector) -> Result<GradientVector> {
    check_dims(x, y)?;
    Ok(GradientVector::new(
        x.as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(xi, yi)| a * xi + yi)
            .collect(),
    ))
}
