//! The recursive private release loop and its ablation variants.
//!
//! Query-level variants form `r_t = beta * s_t + (1 - beta) * u_{t-1}` from
//! the current clipped subsampled sum and a memory state over *prior
//! sum-level releases*, then add Gaussian noise: `s~_t = r_t + Z_t` with
//! `Z_t ~ N(0, sigma^2 C^2 I)`. The update is `theta -= eta * s~_t / L`.
//!
//! The post-processing baseline instead releases the standard clipped-sum
//! query first (`s~_t = s_t + Z_t`, `g~_t = s~_t / L`) and applies the same
//! memory rule to the already-private gradient-level history:
//! `v_t = beta * g~_t + (1 - beta) * sum_j a_j g~_{t-j}`.
//!
//! Noise is drawn even when the Poisson sample is empty, so the number of
//! released queries always equals the number of steps the accountant charges.

use crate::config::{MechanismConfig, MemoryVariant, PrivacyConfig};
use crate::data::Dataset;
use crate::error::{FodpError, Result};
use crate::kernel::{kernel_weights, memory_state, KernelWeights, ReleaseBuffer};
use crate::model::{GradScratch, MlpParams, MlpShape};
use crate::rng::{gaussian_vector, SeededRng, StreamRng, Substream};
use crate::sampling::draw_mask;
use crate::vector::{axpy, GradientVector};

/// Whether a run retains the privacy-sensitive intermediates.
///
/// `Released` keeps only what the mechanism actually publishes (the noisy
/// release and the derived update); `Full` additionally retains the
/// pre-noise query, the clipped sum, and the noise draw for the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLevel {
    Released,
    Full,
}

/// Where the memory enters the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Memory is mixed into the sum-level query before noise.
    QueryLevel,
    /// Memory filters the already-noisy gradient releases.
    PostProcessing,
}

/// Everything recorded about one step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    /// |S_t|, the realized Poisson sample size.
    pub sample_count: usize,
    /// The noisy sum-level release s~_t.
    pub release: GradientVector,
    /// The applied update direction (g~_t, or v_t for post-processing).
    pub update: GradientVector,
    /// Kernel weights snapshot when a memory state was formed.
    pub weights: Option<KernelWeights>,
    /// Pre-noise query r_t; retained only under a full trace.
    pub query: Option<GradientVector>,
    /// Clipped subsampled sum s_t; retained only under a full trace.
    pub clipped_sum: Option<GradientVector>,
    /// Noise draw Z_t; retained only under a full trace.
    pub noise: Option<GradientVector>,
}

impl StepRecord {
    /// Byte-exact encoding of the mechanism outputs (everything except the
    /// kernel-weights snapshot, which is derived metadata).
    pub fn core_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.step as u64).to_le_bytes());
        out.extend_from_slice(&(self.sample_count as u64).to_le_bytes());
        out.extend_from_slice(&self.release.to_le_bytes());
        out.extend_from_slice(&self.update.to_le_bytes());
        for field in [&self.query, &self.clipped_sum, &self.noise] {
            match field {
                Some(v) => {
                    out.push(1);
                    out.extend_from_slice(&v.to_le_bytes());
                }
                None => out.push(0),
            }
        }
        out
    }
}

/// A full run: replayable from (seed, configs) bit-for-bit.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub records: Vec<StepRecord>,
    pub mech: MechanismConfig,
    pub privacy: PrivacyConfig,
    pub seed: u64,
    /// Final parameters after the last recorded step.
    pub final_theta: GradientVector,
}

impl Transcript {
    /// Byte-exact encoding of the released trajectory, for equivalence
    /// checks between runs.
    pub fn core_bytes(&self) -> Vec<u8> {
        let mut out = self.seed.to_le_bytes().to_vec();
        for record in &self.records {
            out.extend_from_slice(&record.core_bytes());
        }
        out.extend_from_slice(&self.final_theta.to_le_bytes());
        out
    }
}

/// `beta * s + (1 - beta) * u`. At `beta = 1` the memory term vanishes and
/// the result is exactly the current sum, bit-for-bit.
pub fn recursive_query(
    s: &GradientVector,
    u_mem: &GradientVector,
    beta: f64,
) -> Result<GradientVector> {
    assert!(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
    if beta == 1.0 {
        if s.dim() != u_mem.dim() {
            return Err(FodpError::DimensionMismatch {
                left: s.dim(),
                right: u_mem.dim(),
            });
        }
        return Ok(s.clone());
    }
    axpy(1.0 - beta, u_mem, &s.scaled(beta))
}

/// Add `N(0, sigma^2 C^2 I)` noise from the noise substream. Returns the
/// release and the noise draw itself.
pub fn release(
    query: &GradientVector,
    sigma: f64,
    clip_c: f64,
    rng: &mut StreamRng,
) -> (GradientVector, GradientVector) {
    assert!(sigma >= 0.0, "sigma must be >= 0");
    let noise = gaussian_vector(rng, query.dim(), sigma * clip_c);
    let released = query
        .add(&noise)
        .expect("noise is drawn at the query's dimension");
    (released, noise)
}

/// `theta - eta * (release / lot)`.
pub fn sgd_update(
    theta: &GradientVector,
    release: &GradientVector,
    eta: f64,
    lot: f64,
) -> Result<GradientVector> {
    assert!(lot > 0.0, "expected lot size must be > 0");
    assert!(eta >= 0.0, "learning rate must be >= 0");
    if theta.dim() != release.dim() {
        return Err(FodpError::DimensionMismatch {
            left: theta.dim(),
            right: release.dim(),
        });
    }
    Ok(GradientVector::new(
        theta
            .as_slice()
            .iter()
            .zip(release.as_slice())
            .map(|(t, r)| t - eta * (r / lot))
            .collect(),
    ))
}

/// Sequential training loop for one seed. Each release feeds the next query,
/// so steps cannot be reordered; the per-example gradients inside one step
/// are the only parallelizable part.
pub struct Trainer<'a> {
    dataset: &'a Dataset,
    shape: MlpShape,
    mech: MechanismConfig,
    privacy: PrivacyConfig,
    rule: UpdateRule,
    eta: f64,
    eta_post: f64,
    trace: TraceLevel,
    theta: GradientVector,
    buffer: ReleaseBuffer,
    step: usize,
    seed: u64,
    mask_rng: StreamRng,
    noise_rng: StreamRng,
    scratch: GradScratch,
}

impl<'a> Trainer<'a> {
    /// A trainer with explicit initial parameters (shared across algorithm
    /// variants so comparisons start from the same point).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dataset: &'a Dataset,
        shape: MlpShape,
        mech: MechanismConfig,
        privacy: PrivacyConfig,
        rule: UpdateRule,
        eta: f64,
        eta_post: f64,
        trace: TraceLevel,
        master: &SeededRng,
        theta0: GradientVector,
    ) -> Result<Self> {
        mech.validate()?;
        privacy.validate()?;
        if dataset.is_empty() {
            return Err(FodpError::EmptyDataset);
        }
        let d = shape.param_count();
        if theta0.dim() != d {
            return Err(FodpError::DimensionMismatch {
                left: theta0.dim(),
                right: d,
            });
        }
        if dataset.dim != shape.input {
            return Err(FodpError::DimensionMismatch {
                left: dataset.dim,
                right: shape.input,
            });
        }
        Ok(Self {
            dataset,
            shape,
            buffer: ReleaseBuffer::new(mech.memory_window, d),
            mech,
            privacy,
            rule,
            eta,
            eta_post,
            trace,
            theta: theta0,
            step: 0,
            seed: master.seed(),
            mask_rng: master.substream(Substream::Mask),
            noise_rng: master.substream(Substream::Noise),
            scratch: GradScratch::new(&shape),
        })
    }

    /// A trainer whose parameters are drawn from the init substream.
    #[allow(clippy::too_many_arguments)]
    pub fn with_fresh_init(
        dataset: &'a Dataset,
        shape: MlpShape,
        mech: MechanismConfig,
        privacy: PrivacyConfig,
        rule: UpdateRule,
        eta: f64,
        eta_post: f64,
        trace: TraceLevel,
        master: &SeededRng,
    ) -> Result<Self> {
        let theta0 = MlpParams::init(shape, &mut master.substream(Substream::Init)).to_flat();
        Self::new(
            dataset, shape, mech, privacy, rule, eta, eta_post, trace, master, theta0,
        )
    }

    pub fn theta(&self) -> &GradientVector {
        &self.theta
    }

    pub fn params(&self) -> MlpParams {
        MlpParams::from_flat(self.shape, &self.theta).expect("theta matches the shape")
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// One release step: mask, per-example gradients, clip, sum, memory gate,
    /// query, noise, update, buffer absorb — in that order.
    pub fn step(&mut self) -> Result<StepRecord> {
        let t = self.step;
        let q = self.privacy.q;
        let c = self.privacy.clip_c;
        let d = self.shape.param_count();
        let lot = self.dataset.expected_lot(q);

        let mask = draw_mask(&mut self.mask_rng, self.dataset.len(), q);
        let params = MlpParams::from_flat(self.shape, &self.theta)?;
        // Clip-and-accumulate in ascending index order, exactly the
        // clip(g) = g / max(1, |g| / C) rule followed by the running sum.
        let mut s = GradientVector::zeros(d);
        for i in mask.sampled_indices() {
            params.per_example_grad_into(&self.dataset.examples[i], &mut self.scratch)?;
            let grad = &self.scratch.grad;
            let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(FodpError::NonFinite("per-example gradient"));
            }
            let scale = (norm / c).max(1.0);
            for (acc, g) in s.as_mut_slice().iter_mut().zip(grad) {
                *acc += g / scale;
            }
        }

        let full = self.trace == TraceLevel::Full;
        let record = match self.rule {
            UpdateRule::QueryLevel => {
                let (weights, u_mem) = self.memory_terms()?;
                let r = match &u_mem {
                    None => s.scaled(self.mech.beta),
                    Some(u) => recursive_query(&s, u, self.mech.beta)?,
                };
                let (released, noise) = release(&r, self.privacy.sigma, c, &mut self.noise_rng);
                let update = released.div_scalar(lot);
                self.theta = sgd_update(&self.theta, &released, self.eta, lot)?;
                self.buffer.push(released.clone(), self.mech.gamma)?;
                StepRecord {
                    step: t,
                    sample_count: mask.sample_count(),
                    release: released,
                    update,
                    weights,
                    query: full.then(|| r.clone()),
                    clipped_sum: full.then(|| s.clone()),
                    noise: full.then_some(noise),
                }
            }
            UpdateRule::PostProcessing => {
                let (released, noise) = release(&s, self.privacy.sigma, c, &mut self.noise_rng);
                let gradient_release = released.div_scalar(lot);
                let (weights, u_mem) = self.memory_terms()?;
                let update = match &u_mem {
                    None => gradient_release.scaled(self.mech.beta),
                    Some(u) => recursive_query(&gradient_release, u, self.mech.beta)?,
                };
                self.theta = axpy(-self.eta_post, &update, &self.theta)?;
                self.buffer
                    .push(gradient_release.clone(), self.mech.gamma)?;
                StepRecord {
                    step: t,
                    sample_count: mask.sample_count(),
                    release: released,
                    update,
                    weights,
                    query: full.then(|| s.clone()),
                    clipped_sum: full.then_some(s),
                    noise: full.then_some(noise),
                }
            }
        };
        self.step += 1;
        Ok(record)
    }

    /// Kernel weights and memory state for the current buffer, or `None`
    /// for the no-memory gate (first step, window 1, or current-only).
    fn memory_terms(&self) -> Result<(Option<KernelWeights>, Option<GradientVector>)> {
        if matches!(self.mech.memory_variant, MemoryVariant::CurrentOnly) || self.buffer.is_empty()
        {
            return Ok((None, None));
        }
        let weights = kernel_weights(&self.buffer, &self.mech)?;
        let state = memory_state(&self.buffer, Some(&weights))?;
        Ok((Some(weights), Some(state)))
    }

    /// Run `steps` consecutive steps and package the transcript.
    pub fn run(&mut self, steps: usize) -> Result<Transcript> {
        let mut records = Vec::with_capacity(steps);
        for _ in 0..steps {
            records.push(self.step()?);
        }
        Ok(Transcript {
            records,
            mech: self.mech.clone(),
            privacy: self.privacy,
            seed: self.seed,
            final_theta: self.theta.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::rng::SeededRng;

    fn small_dataset(seed: u64) -> Dataset {
        let spec = SyntheticSpec {
            num_classes: 3,
            dim: 4,
            train_per_class: 8,
            test_per_class: 2,
            cluster_std: 0.5,
            center_scale: 1.0,
        };
        let master = SeededRng::new(seed);
        generate_synthetic(&spec, &mut master.substream(Substream::Data))
            .unwrap()
            .0
    }

    fn small_shape() -> MlpShape {
        MlpShape::new(4, 5, 4, 3)
    }

    fn trainer_for<'a>(
        dataset: &'a Dataset,
        mech: MechanismConfig,
        rule: UpdateRule,
        seed: u64,
    ) -> Trainer<'a> {
        let privacy = PrivacyConfig {
            q: 0.3,
            steps_t: 100,
            ..PrivacyConfig::default()
        };
        Trainer::with_fresh_init(
            dataset,
            small_shape(),
            mech,
            privacy,
            rule,
            0.5,
            0.5,
            TraceLevel::Full,
            &SeededRng::new(seed),
        )
        .unwrap()
    }

    #[test]
    fn recursive_query_hand_arithmetic() {
        let s = GradientVector::new(vec![10.0, 0.0]);
        let u = GradientVector::new(vec![0.0, 10.0]);
        let r = recursive_query(&s, &u, 0.9).unwrap();
        assert!((r.as_slice()[0] - 9.0).abs() < 1e-12);
        assert!((r.as_slice()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recursive_query_beta_one_is_bitwise_current_sum() {
        let s = GradientVector::new(vec![1.25, -0.0, 3.5]);
        let u = GradientVector::new(vec![100.0, 100.0, 100.0]);
        assert!(recursive_query(&s, &u, 1.0).unwrap().bit_eq(&s));
    }

    #[test]
    fn release_with_zero_sigma_is_identity() {
        let mut rng = SeededRng::new(1).substream(Substream::Noise);
        let r = GradientVector::new(vec![1.0, -2.0]);
        let (released, noise) = release(&r, 0.0, 1.0, &mut rng);
        assert!(released.bit_eq(&r));
        assert_eq!(noise.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn release_noise_variance_matches_sigma_c() {
        let mut rng = SeededRng::new(2).substream(Substream::Noise);
        let r = GradientVector::zeros(100_000);
        let (released, _) = release(&r, 2.0, 1.0, &mut rng);
        let n = released.dim() as f64;
        let mean = released.as_slice().iter().sum::<f64>() / n;
        let var = released
            .as_slice()
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / n;
        assert!((var - 4.0).abs() < 0.2, "variance {var}");
    }

    #[test]
    fn sgd_update_hand_arithmetic() {
        let theta = GradientVector::new(vec![1.0, 1.0]);
        let rel = GradientVector::new(vec![2.0, -2.0]);
        let next = sgd_update(&theta, &rel, 0.5, 2.0).unwrap();
        assert_eq!(next.as_slice(), &[0.5, 1.5]);

        let frozen = sgd_update(&theta, &rel, 0.0, 2.0).unwrap();
        assert!(frozen.bit_eq(&theta));
    }

    #[test]
    fn first_step_seeds_buffer_and_trend() {
        let dataset = small_dataset(3);
        let mut trainer = trainer_for(&dataset, MechanismConfig::default(), UpdateRule::QueryLevel, 3);
        let record = trainer.step().unwrap();
        assert_eq!(record.step, 0);
        assert!(record.weights.is_none());
        // r_0 = beta * s_0 because the memory gate is closed at t = 0.
        let expected = record.clipped_sum.as_ref().unwrap().scaled(0.9);
        assert!(record.query.as_ref().unwrap().bit_eq(&expected));
        assert_eq!(trainer.buffer.len(), 1);
        assert!(trainer
            .buffer
            .ema()
            .unwrap()
            .bit_eq(trainer.buffer.release_at_lag(1)));
    }

    #[test]
    fn window_one_never_opens_the_memory_gate() {
        let dataset = small_dataset(4);
        let mech = MechanismConfig::default().with_memory_window(1).with_beta(0.7);
        let mut trainer = trainer_for(&dataset, mech, UpdateRule::QueryLevel, 4);
        for _ in 0..6 {
            let record = trainer.step().unwrap();
            assert!(record.weights.is_none());
            let expected = record.clipped_sum.as_ref().unwrap().scaled(0.7);
            assert!(record.query.as_ref().unwrap().bit_eq(&expected));
        }
    }

    #[test]
    fn beta_one_matches_current_only_bit_for_bit() {
        let dataset = small_dataset(5);
        let fo = trainer_for(
            &dataset,
            MechanismConfig::default().with_beta(1.0),
            UpdateRule::QueryLevel,
            5,
        )
        .run(20)
        .unwrap();
        let dp = trainer_for(
            &dataset,
            MechanismConfig::default()
                .with_beta(1.0)
                .with_variant(MemoryVariant::CurrentOnly),
            UpdateRule::QueryLevel,
            5,
        )
        .run(20)
        .unwrap();
        assert_eq!(fo.core_bytes(), dp.core_bytes());
    }

    #[test]
    fn replay_reproduces_transcript_exactly() {
        let dataset = small_dataset(6);
        let a = trainer_for(&dataset, MechanismConfig::default(), UpdateRule::QueryLevel, 6)
            .run(10)
            .unwrap();
        let b = trainer_for(&dataset, MechanismConfig::default(), UpdateRule::QueryLevel, 6)
            .run(10)
            .unwrap();
        assert_eq!(a.core_bytes(), b.core_bytes());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.weights == rb.weights, true);
        }
    }

    #[test]
    fn memory_gate_opens_at_step_one() {
        let dataset = small_dataset(7);
        let mut trainer = trainer_for(&dataset, MechanismConfig::default(), UpdateRule::QueryLevel, 7);
        trainer.step().unwrap();
        let record = trainer.step().unwrap();
        let weights = record.weights.as_ref().unwrap();
        assert_eq!(weights.weights.len(), 1);
        assert!((weights.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn post_fm_beta_one_matches_dp_sgd_trajectory() {
        let dataset = small_dataset(8);
        let post = trainer_for(
            &dataset,
            MechanismConfig::default().with_beta(1.0),
            UpdateRule::PostProcessing,
            8,
        )
        .run(15)
        .unwrap();
        let dp = trainer_for(
            &dataset,
            MechanismConfig::default()
                .with_beta(1.0)
                .with_variant(MemoryVariant::CurrentOnly),
            UpdateRule::QueryLevel,
            8,
        )
        .run(15)
        .unwrap();
        assert_eq!(post.core_bytes(), dp.core_bytes());
    }

    #[test]
    fn post_fm_single_lag_update_is_convex_mix_of_gradient_releases() {
        let dataset = small_dataset(9);
        let mech = MechanismConfig::default().with_beta(0.8).with_memory_window(2);
        let mut trainer = trainer_for(&dataset, mech, UpdateRule::PostProcessing, 9);
        let lot = dataset.expected_lot(0.3);
        let first = trainer.step().unwrap();
        // K_t = 1: pure scaling of the standard DP-SGD direction.
        let g0 = first.release.div_scalar(lot);
        assert!(first.update.bit_eq(&g0.scaled(0.8)));

        let second = trainer.step().unwrap();
        // K_t = 2: the single lag weight is 1 by normalization, so
        // v_1 = beta * g~_1 + (1 - beta) * g~_0.
        let g1 = second.release.div_scalar(lot);
        let expected = axpy(1.0 - 0.8, &g0, &g1.scaled(0.8)).unwrap();
        assert!(second.update.bit_eq(&expected));
    }

    #[test]
    fn empty_sample_still_releases_noise() {
        let dataset = small_dataset(10);
        let privacy = PrivacyConfig {
            q: 1e-12,
            steps_t: 10,
            ..PrivacyConfig::default()
        };
        let mut trainer = Trainer::with_fresh_init(
            &dataset,
            small_shape(),
            MechanismConfig::default(),
            privacy,
            UpdateRule::QueryLevel,
            0.5,
            0.5,
            TraceLevel::Full,
            &SeededRng::new(10),
        )
        .unwrap();
        let before = trainer.theta().clone();
        let record = trainer.step().unwrap();
        assert_eq!(record.sample_count, 0);
        assert_eq!(record.clipped_sum.as_ref().unwrap().norm2(), 0.0);
        assert!(record.release.norm2() > 0.0);
        assert!(!trainer.theta().bit_eq(&before));
    }

    #[test]
    fn released_trace_withholds_query_and_noise() {
        let dataset = small_dataset(11);
        let privacy = PrivacyConfig {
            q: 0.3,
            steps_t: 100,
            ..PrivacyConfig::default()
        };
        let mut trainer = Trainer::with_fresh_init(
            &dataset,
            small_shape(),
            MechanismConfig::default(),
            privacy,
            UpdateRule::QueryLevel,
            0.5,
            0.5,
            TraceLevel::Released,
            &SeededRng::new(11),
        )
        .unwrap();
        let record = trainer.step().unwrap();
        assert!(record.query.is_none());
        assert!(record.noise.is_none());
        assert!(record.clipped_sum.is_none());
    }
}
