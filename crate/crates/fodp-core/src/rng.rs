//! Deterministic, seedable randomness with named substreams.
//!
//! The generator is ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`), keyed
//! from a 64-bit master seed. Each named substream selects a distinct ChaCha
//! stream number, so the mask, noise, init, and data streams are mutually
//! independent and drawing from one never perturbs another. The same
//! `(seed, substream)` pair replays the same sequence on every platform.
//!
//! Uniform doubles take the top 53 bits of one ChaCha word pair:
//! `u = (next_u64 >> 11) * 2^-53`, giving values in `[0, 1)`.
//!
//! Gaussian draws use the inverse-CDF transform: one uniform per normal,
//! mapped through Wichura's AS 241 rational approximation of the standard
//! normal quantile (PPND16, accurate to about 1e-16 in the argument range
//! used here). This transform is part of the reproducibility contract and
//! must not be swapped out silently; exact replay of noise sequences is relied
//! on by the mechanism-equivalence checks.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vector::GradientVector;

/// Named substreams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    /// Poisson inclusion indicators.
    Mask,
    /// Gaussian release noise.
    Noise,
    /// Model parameter initialization.
    Init,
    /// Dataset synthesis.
    Data,
}

impl Substream {
    fn stream_number(self) -> u64 {
        match self {
            Substream::Mask => 1,
            Substream::Noise => 2,
            Substream::Init => 3,
            Substream::Data => 4,
        }
    }
}

/// Factory for the named substreams of one master seed.
#[derive(Debug, Clone, Copy)]
pub struct SeededRng {
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream for the given name. Streams with distinct names
    /// never share state; calling this twice with the same name restarts the
    /// stream from its beginning.
    pub fn substream(&self, name: Substream) -> StreamRng {
        let mut chacha = ChaCha8Rng::seed_from_u64(self.seed);
        chacha.set_stream(name.stream_number());
        StreamRng { chacha }
    }
}

/// One sequential random stream. Not shareable between concurrent workers;
/// derive a fresh substream per worker instead.
#[derive(Debug, Clone)]
pub struct StreamRng {
    chacha: ChaCha8Rng,
}

impl StreamRng {
    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / ((1u64 << 53) as f64);
        (self.chacha.next_u64() >> 11) as f64 * SCALE
    }

    /// Bernoulli indicator with success probability `q`.
    pub fn bernoulli(&mut self, q: f64) -> bool {
        self.next_uniform() < q
    }

    /// One zero-mean Gaussian draw with standard deviation `std`, via the
    /// inverse-CDF transform. A uniform of exactly zero (probability 2^-53)
    /// is nudged to 2^-54 so the quantile stays finite.
    pub fn next_gaussian(&mut self, std: f64) -> f64 {
        let mut u = self.next_uniform();
        if u == 0.0 {
            u = 0.5 / ((1u64 << 53) as f64);
        }
        std * standard_normal_quantile(u)
    }
}

/// `dim` i.i.d. draws from N(0, std^2). `std = 0` returns the zero vector
/// without consuming any stream state.
pub fn gaussian_vector(rng: &mut StreamRng, dim: usize, std: f64) -> GradientVector {
    assert!(std >= 0.0, "gaussian_vector requires std >= 0");
    if std == 0.0 {
        return GradientVector::zeros(dim);
    }
    GradientVector::new((0..dim).map(|_| rng.next_gaussian(std)).collect())
}

/// Standard normal quantile (inverse CDF) for `p` in (0, 1).
///
/// Wichura's algorithm AS 241, PPND16 variant: three rational minimax
/// approximations covering the central region and both tails.
pub fn standard_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0, "quantile requires p in (0, 1)");

    const A: [f64; 8] = [
        3.3871328727963666080e0,
        1.3314166789178437745e2,
        1.9715909503065514427e3,
        1.3731693765509461125e4,
        4.5921953931549871457e4,
        6.7265770927008700853e4,
        3.3430575583588128105e4,
        2.5090809287301226727e3,
    ];
    const B: [f64; 7] = [
        4.2313330701600911252e1,
        6.8718700749205790830e2,
        5.3941960214247511077e3,
        2.1213794301586595867e4,
        3.9307895800092710610e4,
        2.8729085735721942674e4,
        5.2264952788528545610e3,
    ];
    const C: [f64; 8] = [
        1.42343711074968357734e0,
        4.63033784615654529590e0,
        5.76949722146069140550e0,
        3.64784832476320460504e0,
        1.27045825245236838258e0,
        2.41780725177450611770e-1,
        2.27238449892691845833e-2,
        7.74545014278341407640e-4,
    ];
    const D: [f64; 7] = [
        2.05319162663775882187e0,
        1.67638483018380384940e0,
        6.89767334985100004550e-1,
        1.48103976427480074590e-1,
        1.51986665636164571966e-2,
        5.47593808499534494600e-4,
        1.05075007164441684324e-9,
    ];
    const E: [f64; 8] = [
        6.65790464350110377720e0,
        5.46378491116411436990e0,
        1.78482653991729133580e0,
        2.96560571828504891230e-1,
        2.65321895265761230930e-2,
        1.24266094738807843860e-3,
        2.71155556874348757815e-5,
        2.01033439929228813265e-7,
    ];
    const F: [f64; 7] = [
        5.99832206555887937690e-1,
        1.36929880922735805310e-1,
        1.48753612908506148525e-2,
        7.86869131145613259100e-4,
        1.84631831751005468180e-5,
        1.42151175831644588870e-7,
        2.04426310338993978564e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * rational(&A, &B, r);
    }

    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        rational(&C, &D, r - 1.6)
    } else {
        rational(&E, &F, r - 5.0)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Ratio of two Horner-evaluated polynomials; the denominator has an implicit
/// leading coefficient of one.
fn rational(num: &[f64; 8], den: &[f64; 7], r: f64) -> f64 {
    let mut n = num[7];
    for c in num[..7].iter().rev() {
        n = n * r + c;
    }
    let mut d = den[6];
    for c in den[..6].iter().rev() {
        d = d * r + c;
    }
    d = d * r + 1.0;
    n / d
}
