//! Confidence-aware fractional memory over the private release transcript.
//!
//! The buffer holds the last `K - 1` private sum-level releases plus a causal
//! EMA trend of the whole transcript. At step `t`, each buffered lag `j`
//! receives the raw kernel coefficient
//!
//! ```text
//! a_j = (j + 1)^(alpha - 1) * exp(-(lambda + chi * tau * nu_j) * j)
//! ```
//!
//! where `nu_j` scores how far lag `j`'s release sits from the EMA trend and
//! `chi` gates that tempering by the trend's magnitude. Normalized weights
//! form a convex combination, so the memory state is always inside the hull
//! of the buffered releases.

use std::collections::VecDeque;

use crate::config::{MechanismConfig, MemoryVariant};
use crate::error::{FodpError, Result};
use crate::vector::GradientVector;

/// Sliding window of prior private releases (newest first) plus the EMA trend.
///
/// The same structure backs both the sum-level transcript of the query-level
/// mechanism and the gradient-level transcript of the post-processing
/// baseline; the two are simply instantiated separately.
#[derive(Debug, Clone)]
pub struct ReleaseBuffer {
    releases: VecDeque<GradientVector>,
    ema: Option<GradientVector>,
    capacity: usize,
    dim: usize,
    step: usize,
}

impl ReleaseBuffer {
    /// An empty buffer for memory window `memory_window` over vectors of
    /// dimension `dim`. Capacity is `memory_window - 1`.
    pub fn new(memory_window: usize, dim: usize) -> Self {
        assert!(memory_window >= 1, "memory window must be >= 1");
        Self {
            releases: VecDeque::with_capacity(memory_window.saturating_sub(1)),
            ema: None,
            capacity: memory_window - 1,
            dim,
            step: 0,
        }
    }

    /// Number of buffered releases; equals `min(K - 1, t)` at the start of
    /// step `t`.
    pub fn len(&self) -> usize {
        self.releases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.releases.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Steps absorbed so far, i.e. the current step index t.
    pub fn step(&self) -> usize {
        self.step
    }

    /// The release at lag `j` (1 = newest). Panics if `j` is out of range.
    pub fn release_at_lag(&self, j: usize) -> &GradientVector {
        &self.releases[j - 1]
    }

    /// Buffered releases from lag 1 outward.
    pub fn iter_newest_first(&self) -> impl Iterator<Item = &GradientVector> {
        self.releases.iter()
    }

    /// EMA trend over the absorbed transcript; `None` before the first push.
    pub fn ema(&self) -> Option<&GradientVector> {
        self.ema.as_ref()
    }

    /// Absorb a new release at the end of step t: update the EMA trend
    /// (first release seeds it, afterwards `gamma * new + (1 - gamma) * ema`),
    /// insert the release at the front, and evict beyond capacity. The trend
    /// therefore reflects releases up to and including the newest buffered
    /// one, and at the *next* step it covers exactly the prior transcript.
    pub fn push(&mut self, release: GradientVector, gamma: f64) -> Result<()> {
        assert!(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
        if release.dim() != self.dim {
            return Err(FodpError::DimensionMismatch {
                left: release.dim(),
                right: self.dim,
            });
        }
        self.ema = Some(match self.ema.take() {
            None => release.clone(),
            Some(prev) => {
                let mut next = release.scaled(gamma);
                next.add_scaled_assign(1.0 - gamma, &prev)?;
                next
            }
        });
        self.releases.push_front(release);
        self.releases.truncate(self.capacity);
        self.step += 1;
        Ok(())
    }
}

/// Kernel weights over the buffered lags, plus the scores they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    /// Normalized weights for lags 1..=len; nonnegative, summing to one.
    pub weights: Vec<f64>,
    /// Log-domain raw coefficients (fractional variant only).
    pub raw_log: Option<Vec<f64>>,
    /// Confidence factor chi in [0, 1).
    pub chi: f64,
    /// Inconsistency scores per lag (fractional variant only; empty otherwise).
    pub nu: Vec<f64>,
}

/// Inconsistency of a lagged release against the EMA trend:
/// `|release - ema| / (max(|ema|, kappa) + eps_stab)`. Always finite and >= 0.
pub fn inconsistency(
    release_lag_j: &GradientVector,
    ema: &GradientVector,
    kappa: f64,
    eps_stab: f64,
) -> Result<f64> {
    assert!(kappa > 0.0 && eps_stab > 0.0);
    let deviation = release_lag_j.sub(ema)?.norm2();
    Ok(deviation / (ema.norm2().max(kappa) + eps_stab))
}

/// Confidence factor `|ema| / (|ema| + zeta)`, in [0, 1) and monotone
/// increasing in the trend norm.
pub fn confidence(ema: &GradientVector, zeta: f64) -> f64 {
    assert!(zeta > 0.0);
    let norm = ema.norm2();
    norm / (norm + zeta)
}

/// Log of the raw kernel coefficient at lag `j >= 1`:
/// `(alpha - 1) * ln(j + 1) - (lambda + chi * tau * nu) * j`.
pub fn raw_log_coefficient(
    lag: usize,
    alpha: f64,
    temper_lambda: f64,
    chi: f64,
    tau: f64,
    nu: f64,
) -> f64 {
    let j = lag as f64;
    (alpha - 1.0) * (j + 1.0).ln() - (temper_lambda + chi * tau * nu) * j
}

/// Normalized memory weights for the buffer's current contents under the
/// configured variant. Requires at least one buffered release (callers gate
/// the no-memory case and use the zero memory state instead).
pub fn kernel_weights(buffer: &ReleaseBuffer, cfg: &MechanismConfig) -> Result<KernelWeights> {
    let m = buffer.len();
    if m == 0 {
        return Err(FodpError::EmptyBuffer);
    }
    match cfg.memory_variant {
        MemoryVariant::CurrentOnly => Err(FodpError::InvalidConfig(
            "the current-only variant carries no memory weights".to_string(),
        )),
        MemoryVariant::Uniform => Ok(KernelWeights {
            weights: vec![1.0 / m as f64; m],
            raw_log: None,
            chi: 0.0,
            nu: Vec::new(),
        }),
        MemoryVariant::Exponential { decay } => {
            let raw: Vec<f64> = (1..=m).map(|j| decay.powi(j as i32 - 1)).collect();
            let total: f64 = raw.iter().sum();
            Ok(KernelWeights {
                weights: raw.iter().map(|r| r / total).collect(),
                raw_log: None,
                chi: 0.0,
                nu: Vec::new(),
            })
        }
        MemoryVariant::FractionalCa => {
            let ema = buffer.ema().expect("non-empty buffer always has a trend");
            let chi = confidence(ema, cfg.zeta);
            let mut nu = Vec::with_capacity(m);
            let mut raw_log = Vec::with_capacity(m);
            for j in 1..=m {
                let score =
                    inconsistency(buffer.release_at_lag(j), ema, cfg.kappa, cfg.eps_stab)?;
                nu.push(score);
                raw_log.push(raw_log_coefficient(
                    j,
                    cfg.alpha,
                    cfg.temper_lambda,
                    chi,
                    cfg.tau,
                    score,
                ));
            }
            // Max-subtraction keeps the dominant coefficient at exp(0) = 1, so
            // normalization yields a valid probability vector even when the
            // tempering exponents are large enough to underflow every other lag.
            let max = raw_log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let scaled: Vec<f64> = raw_log.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = scaled.iter().sum();
            Ok(KernelWeights {
                weights: scaled.iter().map(|s| s / total).collect(),
                raw_log: Some(raw_log),
                chi,
                nu,
            })
        }
    }
}

/// Convex combination of buffered releases under the given weights. The
/// no-memory case (`weights = None`, empty buffer) returns the zero vector.
pub fn memory_state(
    buffer: &ReleaseBuffer,
    weights: Option<&KernelWeights>,
) -> Result<GradientVector> {
    match weights {
        None => {
            if buffer.is_empty() {
                Ok(GradientVector::zeros(buffer.dim()))
            } else {
                Err(FodpError::InvalidConfig(
                    "memory weights are required for a non-empty buffer".to_string(),
                ))
            }
        }
        Some(w) => {
            if w.weights.len() != buffer.len() {
                return Err(FodpError::DimensionMismatch {
                    left: w.weights.len(),
                    right: buffer.len(),
                });
            }
            let mut state = GradientVector::zeros(buffer.dim());
            for (j, weight) in w.weights.iter().enumerate() {
                state.add_scaled_assign(*weight, buffer.release_at_lag(j + 1))?;
            }
            Ok(state)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec1(x: f64) -> GradientVector {
        GradientVector::new(vec![x])
    }

    fn buffer_from(releases: &[GradientVector], k: usize, gamma: f64) -> ReleaseBuffer {
        let mut b = ReleaseBuffer::new(k, releases[0].dim());
        for r in releases {
            b.push(r.clone(), gamma).unwrap();
        }
        b
    }

    #[test]
    fn ema_seeds_from_first_release() {
        let mut b = ReleaseBuffer::new(4, 1);
        b.push(vec1(2.0), 0.5).unwrap();
        assert_eq!(b.ema().unwrap().as_slice(), &[2.0]);
    }

    #[test]
    fn ema_full_weight_tracks_newest() {
        let mut b = ReleaseBuffer::new(4, 1);
        for x in [1.0, -3.0, 7.0] {
            b.push(vec1(x), 1.0).unwrap();
        }
        assert_eq!(b.ema().unwrap().as_slice(), &[7.0]);
    }

    #[test]
    fn ema_two_step_hand_recursion() {
        let mut b = ReleaseBuffer::new(4, 1);
        b.push(vec1(2.0), 0.5).unwrap();
        b.push(vec1(4.0), 0.5).unwrap();
        assert!((b.ema().unwrap().as_slice()[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn buffer_evicts_beyond_capacity() {
        let mut b = ReleaseBuffer::new(3, 1);
        for x in [1.0, 2.0, 3.0, 4.0] {
            b.push(vec1(x), 0.5).unwrap();
        }
        assert_eq!(b.len(), 2);
        assert_eq!(b.release_at_lag(1).as_slice(), &[4.0]);
        assert_eq!(b.release_at_lag(2).as_slice(), &[3.0]);
        assert_eq!(b.step(), 4);
    }

    #[test]
    fn inconsistency_zero_deviation() {
        let ema = GradientVector::new(vec![1.0, 2.0]);
        let nu = inconsistency(&ema.clone(), &ema, 1e-3, 1e-8).unwrap();
        assert_eq!(nu, 0.0);
    }

    #[test]
    fn inconsistency_floor_active_when_trend_vanishes() {
        let ema = GradientVector::zeros(1);
        let release = vec1(1e-3);
        let nu = inconsistency(&release, &ema, 1e-3, 1e-8).unwrap();
        assert!((nu - 0.99999).abs() < 1e-4, "nu = {nu}");
    }

    #[test]
    fn inconsistency_direct_formula() {
        // deviation (0.3, 0.4) has norm 0.5; trend norm 2 exceeds kappa.
        let ema = GradientVector::new(vec![2.0, 0.0]);
        let release = GradientVector::new(vec![2.3, 0.4]);
        let nu = inconsistency(&release, &ema, 1e-3, 1e-8).unwrap();
        assert!((nu - 0.25).abs() < 1e-8, "nu = {nu}");
    }

    #[test]
    fn confidence_formula_points() {
        assert_eq!(confidence(&GradientVector::zeros(3), 1.0), 0.0);
        assert!((confidence(&vec1(1.0), 1.0) - 0.5).abs() < 1e-15);
        assert!((confidence(&vec1(9.0), 1.0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn flat_kernel_gives_uniform_weights() {
        let cfg = MechanismConfig::default()
            .with_alpha(1.0)
            .with_temper_lambda(0.0)
            .with_tau(0.0);
        let b = buffer_from(&[vec1(1.0), vec1(5.0), vec1(-2.0)], 4, 0.5);
        let w = kernel_weights(&b, &cfg).unwrap();
        for weight in &w.weights {
            assert!((weight - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn power_law_kernel_matches_direct_exponentiation() {
        let cfg = MechanismConfig::default()
            .with_alpha(0.8)
            .with_temper_lambda(0.0)
            .with_tau(0.0);
        let b = buffer_from(&[vec1(1.0), vec1(2.0)], 3, 0.5);
        let w = kernel_weights(&b, &cfg).unwrap();
        let raw = [2.0_f64.powf(-0.2), 3.0_f64.powf(-0.2)];
        let total = raw[0] + raw[1];
        assert!((w.weights[0] - raw[0] / total).abs() < 1e-14);
        assert!((w.weights[1] - raw[1] / total).abs() < 1e-14);
    }

    #[test]
    fn weights_always_sum_to_one() {
        let cfg = MechanismConfig::default();
        let b = buffer_from(
            &[vec1(10.0), vec1(-40.0), vec1(0.25), vec1(900.0)],
            8,
            0.2,
        );
        let w = kernel_weights(&b, &cfg).unwrap();
        let sum: f64 = w.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(w.weights.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn extreme_tempering_still_normalizes() {
        // Enormous inconsistency drives every non-dominant raw coefficient to
        // underflow; the normalized vector must still be a distribution.
        let cfg = MechanismConfig::default().with_tau(1e6);
        let b = buffer_from(&[vec1(1.0), vec1(1e9), vec1(-1e9)], 8, 0.9);
        let w = kernel_weights(&b, &cfg).unwrap();
        let sum: f64 = w.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(w.weights.iter().all(|&x| x.is_finite() && x >= 0.0));
    }

    #[test]
    fn memory_state_no_memory_case() {
        let b = ReleaseBuffer::new(1, 3);
        let u = memory_state(&b, None).unwrap();
        assert_eq!(u.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn memory_state_single_lag_is_previous_release() {
        let b = buffer_from(&[vec1(4.25)], 2, 0.5);
        let cfg = MechanismConfig::default();
        let w = kernel_weights(&b, &cfg).unwrap();
        assert_eq!(w.weights, vec![1.0]);
        let u = memory_state(&b, Some(&w)).unwrap();
        assert_eq!(u.as_slice(), &[4.25]);
    }

    #[test]
    fn memory_state_convex_combination() {
        let mut b = ReleaseBuffer::new(3, 2);
        // After pushing, lag 1 = (1, 0), lag 2 = (0, 1).
        b.push(GradientVector::new(vec![0.0, 1.0]), 0.5).unwrap();
        b.push(GradientVector::new(vec![1.0, 0.0]), 0.5).unwrap();
        let w = KernelWeights {
            weights: vec![0.6, 0.4],
            raw_log: None,
            chi: 0.0,
            nu: Vec::new(),
        };
        let u = memory_state(&b, Some(&w)).unwrap();
        assert!((u.as_slice()[0] - 0.6).abs() < 1e-15);
        assert!((u.as_slice()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn raw_coefficient_strictly_decreases_in_tau_nu_chi() {
        let base = raw_log_coefficient(2, 0.8, 0.05, 0.5, 1.0, 0.7);
        assert!(raw_log_coefficient(2, 0.8, 0.05, 0.5, 1.5, 0.7) < base);
        assert!(raw_log_coefficient(2, 0.8, 0.05, 0.5, 1.0, 0.9) < base);
        assert!(raw_log_coefficient(2, 0.8, 0.05, 0.7, 1.0, 0.7) < base);
    }

    #[test]
    fn exponential_variant_weights_are_geometric() {
        let cfg = MechanismConfig::default()
            .with_variant(MemoryVariant::Exponential { decay: 0.5 });
        let b = buffer_from(&[vec1(1.0), vec1(2.0), vec1(3.0)], 4, 0.5);
        let w = kernel_weights(&b, &cfg).unwrap();
        let total = 1.0 + 0.5 + 0.25;
        assert!((w.weights[0] - 1.0 / total).abs() < 1e-14);
        assert!((w.weights[1] - 0.5 / total).abs() < 1e-14);
        assert!((w.weights[2] - 0.25 / total).abs() < 1e-14);
    }

    #[test]
    fn current_only_has_no_weights() {
        let cfg = MechanismConfig::default().with_variant(MemoryVariant::CurrentOnly);
        let b = buffer_from(&[vec1(1.0)], 4, 0.5);
        assert!(kernel_weights(&b, &cfg).is_err());
    }
}
