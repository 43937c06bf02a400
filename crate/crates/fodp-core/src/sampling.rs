//! Poisson subsampling and per-example gradient clipping.

use crate::error::{FodpError, Result};
use crate::rng::StreamRng;
use crate::vector::GradientVector;

/// One realized Poisson inclusion mask over a dataset of N examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoissonMask {
    indicators: Vec<bool>,
}

impl PoissonMask {
    pub fn from_indicators(indicators: Vec<bool>) -> Self {
        Self { indicators }
    }

    pub fn len(&self) -> usize {
        self.indicators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicators.is_empty()
    }

    pub fn includes(&self, index: usize) -> bool {
        self.indicators[index]
    }

    /// Number of sampled examples, |S_t|.
    pub fn sample_count(&self) -> usize {
        self.indicators.iter().filter(|&&b| b).count()
    }

    /// Sampled indices in ascending order.
    pub fn sampled_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.indicators
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

/// Draw N independent Bernoulli(q) inclusion indicators from the mask
/// substream. An empty sample is a legal outcome.
pub fn draw_mask(rng: &mut StreamRng, n: usize, q: f64) -> PoissonMask {
    assert!((0.0..=1.0).contains(&q), "sampling rate must lie in [0, 1]");
    PoissonMask {
        indicators: (0..n).map(|_| rng.bernoulli(q)).collect(),
    }
}

/// Clip a gradient to norm at most `c`: `g / max(1, |g| / c)`.
/// Direction is preserved; inputs with non-finite entries are rejected.
pub fn clip(g: &GradientVector, c: f64) -> Result<GradientVector> {
    assert!(c > 0.0, "clipping norm must be positive");
    if !g.is_finite() {
        return Err(FodpError::NonFinite("gradient passed to clip"));
    }
    let scale = (g.norm2() / c).max(1.0);
    Ok(g.div_scalar(scale))
}

/// Sum of clipped gradients in the iterator's order; callers supply ascending
/// index order so the reduction is bit-reproducible. An empty sample yields
/// the zero vector of dimension `dim`.
pub fn clipped_sum<'a, I>(grads: I, c: f64, dim: usize) -> Result<GradientVector>
where
    I: IntoIterator<Item = &'a GradientVector>,
{
    let mut acc = GradientVector::zeros(dim);
    for g in grads {
        let clipped = clip(g, c)?;
        acc.add_scaled_assign(1.0, &clipped)?;
    }
    Ok(acc)
}
