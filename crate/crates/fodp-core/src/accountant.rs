//! Renyi DP accounting for the Poisson-subsampled Gaussian mechanism.
//!
//! Per step, the release is a Poisson-subsampled Gaussian query whose
//! noise-to-sensitivity ratio is `rho = sigma / beta`: the query's
//! history-conditioned sensitivity is `beta * C` while the noise std is
//! `sigma * C`. Per-step costs compose additively across steps, and the
//! accumulated curve converts to (epsilon, delta)-DP by minimizing
//! `eps_tot(order) + ln(1/delta) / (order - 1)` over the grid.
//!
//! The per-step bound is the integer-order binomial expansion
//!
//! ```text
//! eps(order) = ln( sum_{k=0}^{order} C(order, k) (1-q)^(order-k) q^k
//!                  * exp(k (k-1) / (2 rho^2)) ) / (order - 1)
//! ```
//!
//! evaluated in log space with max-subtraction. `q = 0` and `q = 1` are exact
//! special cases (0 and `order / (2 rho^2)` respectively).

use crate::error::{FodpError, Result};

/// Accumulated RDP cost at each tracked integer order.
#[derive(Debug, Clone, PartialEq)]
pub struct RdpCurve {
    orders: Vec<u64>,
    eps_at_order: Vec<f64>,
    steps_composed: u64,
}

/// Result of converting an RDP curve to (epsilon, delta)-DP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvertedBudget {
    pub epsilon: f64,
    pub best_order: f64,
}

impl RdpCurve {
    /// The default accounting grid: integer orders 2..=64 plus 128 and 256.
    pub fn default_grid() -> Self {
        let mut orders: Vec<u64> = (2..=64).collect();
        orders.push(128);
        orders.push(256);
        Self::with_orders(orders).expect("default grid is valid")
    }

    /// A curve over custom integer orders; they must be strictly increasing
    /// and all greater than one.
    pub fn with_orders(orders: Vec<u64>) -> Result<Self> {
        if orders.is_empty() {
            return Err(FodpError::EmptyGrid);
        }
        for (i, &o) in orders.iter().enumerate() {
            if o < 2 {
                return Err(FodpError::InvalidOrder(o as f64));
            }
            if i > 0 && orders[i - 1] >= o {
                return Err(FodpError::InvalidConfig(
                    "orders must be strictly increasing".to_string(),
                ));
            }
        }
        let n = orders.len();
        Ok(Self {
            orders,
            eps_at_order: vec![0.0; n],
            steps_composed: 0,
        })
    }

    pub fn orders(&self) -> &[u64] {
        &self.orders
    }

    pub fn eps_at_order(&self) -> &[f64] {
        &self.eps_at_order
    }

    pub fn steps_composed(&self) -> u64 {
        self.steps_composed
    }

    /// Per-order cost of one step at sampling rate `q` and ratio `rho`.
    pub fn per_step_costs(&self, q: f64, rho: f64) -> Result<Vec<f64>> {
        self.orders
            .iter()
            .map(|&order| rdp_subsampled_gaussian(order, q, rho))
            .collect()
    }

    /// Add `steps` repetitions of the given per-order step costs.
    /// Heterogeneous `(q_t, rho_t)` streams compose by repeated calls.
    pub fn compose(&mut self, per_step: &[f64], steps: u64) -> Result<()> {
        if per_step.len() != self.orders.len() {
            return Err(FodpError::GridMismatch {
                left: per_step.len(),
                right: self.orders.len(),
            });
        }
        for (acc, step) in self.eps_at_order.iter_mut().zip(per_step) {
            *acc += steps as f64 * step;
        }
        self.steps_composed += steps;
        Ok(())
    }

    /// Compose `steps` homogeneous subsampled-Gaussian steps.
    pub fn compose_subsampled_gaussian(&mut self, q: f64, rho: f64, steps: u64) -> Result<()> {
        let per_step = self.per_step_costs(q, rho)?;
        self.compose(&per_step, steps)
    }

    /// Convert to (epsilon, delta)-DP: minimize
    /// `eps_tot(order) + ln(1/delta) / (order - 1)` over the grid.
    pub fn to_eps_delta(&self, delta: f64) -> Result<ConvertedBudget> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(FodpError::InvalidConfig(
                "delta must lie in (0, 1)".to_string(),
            ));
        }
        let log_inv_delta = (1.0 / delta).ln();
        let mut best = ConvertedBudget {
            epsilon: f64::INFINITY,
            best_order: f64::NAN,
        };
        for (&order, &eps) in self.orders.iter().zip(&self.eps_at_order) {
            let candidate = eps + log_inv_delta / (order as f64 - 1.0);
            if candidate < best.epsilon {
                best = ConvertedBudget {
                    epsilon: candidate,
                    best_order: order as f64,
                };
            }
        }
        Ok(best)
    }
}

/// RDP upper bound of the Poisson-subsampled Gaussian mechanism at an integer
/// order, sampling rate `q`, and noise-to-sensitivity ratio `rho`.
pub fn rdp_subsampled_gaussian(order: u64, q: f64, rho: f64) -> Result<f64> {
    if order < 2 {
        return Err(FodpError::InvalidOrder(order as f64));
    }
    if !(rho > 0.0) {
        return Err(FodpError::InvalidConfig(
            "noise-to-sensitivity ratio must be > 0".to_string(),
        ));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(FodpError::InvalidConfig(
            "sampling rate must lie in [0, 1]".to_string(),
        ));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let lam = order as f64;
    if q == 1.0 {
        return Ok(lam / (2.0 * rho * rho));
    }

    // log of each expansion term; the log-binomial follows the recurrence
    // ln C(n, k+1) = ln C(n, k) + ln(n - k) - ln(k + 1).
    let log_q = q.ln();
    let log_1mq = (1.0 - q).ln();
    let inv_two_rho2 = 1.0 / (2.0 * rho * rho);
    let mut log_terms = Vec::with_capacity(order as usize + 1);
    let mut log_binom = 0.0;
    for k in 0..=order {
        let kf = k as f64;
        log_terms.push(log_binom + (lam - kf) * log_1mq + kf * log_q + kf * (kf - 1.0) * inv_two_rho2);
        if k < order {
            log_binom += (lam - kf).ln() - (kf + 1.0).ln();
        }
    }
    let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_terms.iter().map(|l| (l - max).exp()).sum();
    Ok((max + sum.ln()) / (lam - 1.0))
}
