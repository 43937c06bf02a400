//! Validated mechanism and privacy hyperparameters.

use crate::error::{FodpError, Result};

/// How the memory state over prior releases is weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemoryVariant {
    /// Power-law kernel tempered by baseline decay and confidence-gated
    /// inconsistency scores.
    FractionalCa,
    /// Equal weight on every buffered release.
    Uniform,
    /// Geometric decay with the given ratio in (0, 1).
    Exponential { decay: f64 },
    /// No memory at all; the query is the plain beta-scaled clipped sum.
    CurrentOnly,
}

/// Hyperparameters of the fractional-memory release mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismConfig {
    /// Mixing coefficient on the current clipped sum, in (0, 1].
    pub beta: f64,
    /// Fractional order of the power-law kernel, in (0, 1].
    pub alpha: f64,
    /// Memory window K; up to K-1 prior releases participate.
    pub memory_window: usize,
    /// Baseline exponential tempering rate, >= 0.
    pub temper_lambda: f64,
    /// Inconsistency-aware tempering coefficient, >= 0.
    pub tau: f64,
    /// EMA coefficient for the private trend, in (0, 1].
    pub gamma: f64,
    /// Minimum normalization scale for inconsistency scores, > 0.
    pub kappa: f64,
    /// Confidence scale: chi = |ema| / (|ema| + zeta), > 0.
    pub zeta: f64,
    /// Numerical stability constant in the inconsistency denominator, > 0.
    pub eps_stab: f64,
    /// Memory weighting rule.
    pub memory_variant: MemoryVariant,
}

impl Default for MechanismConfig {
    /// The main memory-active configuration: beta 0.90, alpha 0.80, K 8.
    /// The tempering/trend constants (lambda, tau, gamma, kappa, zeta,
    /// eps_stab) have no canonical values; these defaults are project choices
    /// and every one is configurable.
    fn default() -> Self {
        Self {
            beta: 0.90,
            alpha: 0.80,
            memory_window: 8,
            temper_lambda: 0.05,
            tau: 1.0,
            gamma: 0.2,
            kappa: 1e-3,
            zeta: 1.0,
            eps_stab: 1e-8,
            memory_variant: MemoryVariant::FractionalCa,
        }
    }
}

impl MechanismConfig {
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_memory_window(mut self, k: usize) -> Self {
        self.memory_window = k;
        self
    }

    pub fn with_variant(mut self, variant: MemoryVariant) -> Self {
        self.memory_variant = variant;
        self
    }

    pub fn with_temper_lambda(mut self, temper_lambda: f64) -> Self {
        self.temper_lambda = temper_lambda;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, what: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(FodpError::InvalidConfig(what.to_string()))
            }
        }
        check(
            self.beta > 0.0 && self.beta <= 1.0,
            "beta must lie in (0, 1]",
        )?;
        check(
            self.alpha > 0.0 && self.alpha <= 1.0,
            "alpha must lie in (0, 1]",
        )?;
        check(self.memory_window >= 1, "memory_window must be >= 1")?;
        check(
            self.temper_lambda >= 0.0 && self.temper_lambda.is_finite(),
            "temper_lambda must be >= 0",
        )?;
        check(self.tau >= 0.0 && self.tau.is_finite(), "tau must be >= 0")?;
        check(
            self.gamma > 0.0 && self.gamma <= 1.0,
            "gamma must lie in (0, 1]",
        )?;
        check(self.kappa > 0.0, "kappa must be > 0")?;
        check(self.zeta > 0.0, "zeta must be > 0")?;
        check(self.eps_stab > 0.0, "eps_stab must be > 0")?;
        if let MemoryVariant::Exponential { decay } = self.memory_variant {
            check(
                decay > 0.0 && decay < 1.0,
                "exponential decay must lie in (0, 1)",
            )?;
        }
        Ok(())
    }
}

/// Privacy parameters of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyConfig {
    /// Per-example clipping norm C, > 0.
    pub clip_c: f64,
    /// Noise multiplier sigma; release noise std is sigma * C at sum level.
    pub sigma: f64,
    /// Poisson sampling rate q, in (0, 1].
    pub q: f64,
    /// Target delta for the (epsilon, delta) conversion, in (0, 1).
    pub delta: f64,
    /// Number of release steps to account for.
    pub steps_t: u64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            clip_c: 1.0,
            sigma: 1.1,
            q: 0.04,
            delta: 1e-5,
            steps_t: 1500,
        }
    }
}

impl PrivacyConfig {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, what: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(FodpError::InvalidConfig(what.to_string()))
            }
        }
        check(
            self.clip_c > 0.0 && self.clip_c.is_finite(),
            "clip_c must be > 0",
        )?;
        check(
            self.sigma > 0.0 && self.sigma.is_finite(),
            "sigma must be > 0",
        )?;
        check(self.q > 0.0 && self.q <= 1.0, "q must lie in (0, 1]")?;
        check(
            self.delta > 0.0 && self.delta < 1.0,
            "delta must lie in (0, 1)",
        )?;
        check(self.steps_t >= 1, "steps_t must be >= 1")?;
        Ok(())
    }
}
