//! Fractional-memory differentially private SGD.
//!
//! The private release at each step mixes the current clipped subsampled
//! gradient sum with a normalized fractional-memory aggregate of previously
//! released private sums, *before* Gaussian perturbation. Because the memory
//! state is a deterministic function of the prior release transcript, the
//! per-step sensitivity of the mixed query is `beta * C`, and privacy is
//! accounted with a Poisson-subsampled Gaussian RDP bound at
//! noise-to-sensitivity ratio `sigma / beta`.
//!
//! Modules:
//! - [`vector`]: flat parameter-space vectors and exact elementwise arithmetic
//! - [`rng`]: seeded, named-substream ChaCha8 randomness with inverse-CDF Gaussians
//! - [`config`]: validated mechanism and privacy hyperparameters
//! - [`sampling`]: Poisson masks, per-example clipping, clipped subsampled sums
//! - [`kernel`]: EMA trend, inconsistency/confidence tempering, memory kernels
//! - [`mechanism`]: the recursive release loop and its ablation variants
//! - [`accountant`]: integer-order RDP accounting and (epsilon, delta) conversion
//! - [`model`]: the tanh MLP with hand-derived per-example backprop
//! - [`data`]: synthetic blob generation and CIFAR-10 binary ingestion
//! - [`oracle`]: independent brute-force verifiers for the provable properties

pub mod accountant;
pub mod config;
pub mod data;
pub mod error;
pub mod kernel;
pub mod mechanism;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod vector;

pub use config::{MechanismConfig, MemoryVariant, PrivacyConfig};
pub use error::{FodpError, Result};
pub use vector::GradientVector;
