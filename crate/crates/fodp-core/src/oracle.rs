//! Independent brute-force verifiers for the mechanism's provable properties.
//!
//! Everything here re-derives the trend, kernel, memory, and query formulas
//! from scratch (direct exponentiation instead of the log-domain route, sums
//! recomputed from the definition instead of incrementally), sharing only the
//! core vector/RNG/model plumbing with the mechanism. Agreement between the
//! two codepaths is therefore evidence rather than tautology.

use crate::config::{MechanismConfig, MemoryVariant, PrivacyConfig};
use crate::error::{FodpError, Result};
use crate::kernel::{kernel_weights, ReleaseBuffer};
use crate::mechanism::{Trainer, Transcript, TraceLevel, UpdateRule};
use crate::model::{MlpParams, MlpShape};
use crate::rng::{gaussian_vector, SeededRng, Substream};
use crate::sampling::PoissonMask;
use crate::vector::GradientVector;

/// Largest dataset the adjacency enumeration accepts.
pub const ENUMERATION_LIMIT: usize = 12;

/// One enumerated neighbor and the query distance it produced.
#[derive(Debug, Clone)]
pub struct Witness {
    pub edit: String,
    pub observed: f64,
}

/// Outcome of enumerating every add-one/remove-one neighbor.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub max_observed: f64,
    /// The theoretical bound beta * C.
    pub bound: f64,
    pub witnesses: Vec<Witness>,
    /// True when some neighbor exceeded the bound beyond 1e-10.
    pub violation: bool,
}

/// Result of one limiting-regime equivalence check.
#[derive(Debug, Clone)]
pub struct ReductionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

// ---------------------------------------------------------------------------
// Re-derived formulas (deliberately duplicated from the library modules).
// ---------------------------------------------------------------------------

fn oracle_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn oracle_clip(g: &GradientVector, c: f64) -> GradientVector {
    let scale = (oracle_norm(g.as_slice()) / c).max(1.0);
    GradientVector::new(g.as_slice().iter().map(|x| x / scale).collect())
}

/// Replay the EMA recursion over a transcript given oldest-first.
fn oracle_ema(releases: &[GradientVector], gamma: f64) -> Option<GradientVector> {
    let mut ema: Option<Vec<f64>> = None;
    for release in releases {
        ema = Some(match ema {
            None => release.as_slice().to_vec(),
            Some(prev) => release
                .as_slice()
                .iter()
                .zip(&prev)
                .map(|(new, old)| gamma * new + (1.0 - gamma) * old)
                .collect(),
        });
    }
    ema.map(GradientVector::new)
}

/// Normalized memory weights for the lags `1..=m` of a transcript, computed
/// by direct exponentiation of the kernel definition.
fn oracle_weights(
    lags_newest_first: &[&GradientVector],
    ema: &GradientVector,
    mech: &MechanismConfig,
) -> Vec<f64> {
    let m = lags_newest_first.len();
    match mech.memory_variant {
        MemoryVariant::CurrentOnly => Vec::new(),
        MemoryVariant::Uniform => vec![1.0 / m as f64; m],
        MemoryVariant::Exponential { decay } => {
            let raw: Vec<f64> = (1..=m).map(|j| decay.powi(j as i32 - 1)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect()
        }
        MemoryVariant::FractionalCa => {
            let ema_norm = oracle_norm(ema.as_slice());
            let chi = ema_norm / (ema_norm + mech.zeta);
            let raw: Vec<f64> = lags_newest_first
                .iter()
                .enumerate()
                .map(|(idx, release)| {
                    let j = (idx + 1) as f64;
                    let deviation: f64 = release
                        .as_slice()
                        .iter()
                        .zip(ema.as_slice())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    let nu = deviation / (ema_norm.max(mech.kappa) + mech.eps_stab);
                    (j + 1.0).powf(mech.alpha - 1.0)
                        * (-(mech.temper_lambda + chi * mech.tau * nu) * j).exp()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect()
        }
    }
}

/// Memory state of a transcript prefix (oldest first) under the configured
/// window, recomputed from the definitions.
fn oracle_memory_state(
    transcript_prefix: &[GradientVector],
    mech: &MechanismConfig,
    dim: usize,
) -> GradientVector {
    let k_t = mech.memory_window.min(transcript_prefix.len() + 1);
    let m = k_t - 1;
    if m == 0 || matches!(mech.memory_variant, MemoryVariant::CurrentOnly) {
        return GradientVector::zeros(dim);
    }
    let lags: Vec<&GradientVector> = transcript_prefix.iter().rev().take(m).collect();
    let ema = oracle_ema(transcript_prefix, mech.gamma).expect("non-empty prefix");
    let weights = oracle_weights(&lags, &ema, mech);
    let mut state = vec![0.0; dim];
    for (w, release) in weights.iter().zip(&lags) {
        for (acc, x) in state.iter_mut().zip(release.as_slice()) {
            *acc += w * x;
        }
    }
    GradientVector::new(state)
}

/// The recursive query recomputed from its definition.
fn oracle_query(s: &GradientVector, u: &GradientVector, beta: f64) -> GradientVector {
    GradientVector::new(
        s.as_slice()
            .iter()
            .zip(u.as_slice())
            .map(|(si, ui)| beta * si + (1.0 - beta) * ui)
            .collect(),
    )
}

/// Clipped masked sum recomputed from scratch for a base dataset, an optional
/// removal, and an optional appended (always-included) example.
fn oracle_masked_sum(
    dataset: &[GradientVector],
    mask: &PoissonMask,
    removed: Option<usize>,
    added: Option<&GradientVector>,
    c: f64,
    dim: usize,
) -> GradientVector {
    let mut acc = vec![0.0; dim];
    for (i, g) in dataset.iter().enumerate() {
        if Some(i) == removed || !mask.includes(i) {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(oracle_clip(g, c).as_slice()) {
            *a += x;
        }
    }
    if let Some(g) = added {
        for (a, x) in acc.iter_mut().zip(oracle_clip(g, c).as_slice()) {
            *a += x;
        }
    }
    GradientVector::new(acc)
}

// ---------------------------------------------------------------------------
// Public checks.
// ---------------------------------------------------------------------------

/// Enumerate every add-one/remove-one neighbor of a small gradient dataset
/// under a fixed mask and fixed transcript prefix, and report the largest
/// recursive-query distance against the bound `beta * C`.
///
/// The probe pool for additions contains gradients of norm exactly `C` along
/// the unit axes and the current sum direction plus an over-length probe, so
/// a tight instance is always witnessed.
pub fn brute_force_sensitivity(
    dataset: &[GradientVector],
    mask: &PoissonMask,
    transcript_prefix: &[GradientVector],
    mech: &MechanismConfig,
    clip_c: f64,
) -> Result<SensitivityReport> {
    mech.validate()?;
    if dataset.is_empty() {
        return Err(FodpError::EmptyDataset);
    }
    if dataset.len() > ENUMERATION_LIMIT {
        return Err(FodpError::EnumerationTooLarge {
            n: dataset.len(),
            limit: ENUMERATION_LIMIT,
        });
    }
    if mask.len() != dataset.len() {
        return Err(FodpError::DimensionMismatch {
            left: mask.len(),
            right: dataset.len(),
        });
    }
    let dim = dataset[0].dim();
    let beta = mech.beta;
    let u = oracle_memory_state(transcript_prefix, mech, dim);
    let base_sum = oracle_masked_sum(dataset, mask, None, None, clip_c, dim);
    let base_query = oracle_query(&base_sum, &u, beta);

    let mut witnesses = Vec::new();
    let mut observe = |edit: String, neighbor_sum: GradientVector| {
        let neighbor_query = oracle_query(&neighbor_sum, &u, beta);
        let observed = oracle_norm(
            base_query
                .sub(&neighbor_query)
                .expect("dimensions agree")
                .as_slice(),
        );
        witnesses.push(Witness { edit, observed });
    };

    for i in 0..dataset.len() {
        let sum = oracle_masked_sum(dataset, mask, Some(i), None, clip_c, dim);
        observe(format!("remove[{i}]"), sum);
    }
    for (label, probe) in addition_probes(&base_sum, clip_c, dim) {
        let sum = oracle_masked_sum(dataset, mask, None, Some(&probe), clip_c, dim);
        observe(label, sum);
    }

    let max_observed = witnesses
        .iter()
        .map(|w| w.observed)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound = beta * clip_c;
    Ok(SensitivityReport {
        max_observed,
        bound,
        violation: max_observed > bound + 1e-10,
        witnesses,
    })
}

fn addition_probes(base_sum: &GradientVector, c: f64, dim: usize) -> Vec<(String, GradientVector)> {
    let mut probes = Vec::new();
    for axis in 0..dim.min(4) {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[axis] = sign * c;
            probes.push((
                format!("add axis[{axis}] sign {sign}"),
                GradientVector::new(v),
            ));
        }
    }
    let norm = base_sum.norm2();
    if norm > 0.0 {
        probes.push((
            "add aligned with current sum, norm C".to_string(),
            base_sum.scaled(c / norm),
        ));
        probes.push((
            "add aligned with current sum, norm 2C".to_string(),
            base_sum.scaled(2.0 * c / norm),
        ));
    }
    let diag = GradientVector::new(vec![c / (dim as f64).sqrt(); dim]);
    probes.push(("add diagonal, norm C".to_string(), diag));
    probes
}

/// Recompute the signal/memory/noise split of every step of a full-trace
/// transcript and return the largest relative error of
/// `r_t = beta s_t + M_rec + M_noise`.
pub fn check_decomposition(transcript: &Transcript) -> Result<f64> {
    let beta = transcript.mech.beta;
    let mut releases: Vec<GradientVector> = Vec::new();
    let mut queries: Vec<GradientVector> = Vec::new();
    let mut noises: Vec<GradientVector> = Vec::new();
    let mut max_rel = 0.0_f64;

    for record in &transcript.records {
        let (query, clipped, noise) = match (&record.query, &record.clipped_sum, &record.noise) {
            (Some(q), Some(s), Some(z)) => (q, s, z),
            _ => return Err(FodpError::TranscriptNotFull),
        };
        let k_t = transcript.mech.memory_window.min(record.step + 1);
        let m = if matches!(transcript.mech.memory_variant, MemoryVariant::CurrentOnly) {
            0
        } else {
            k_t - 1
        };

        let mut expected: Vec<f64> = clipped.as_slice().iter().map(|x| beta * x).collect();
        if m > 0 {
            let lags: Vec<&GradientVector> = releases.iter().rev().take(m).collect();
            let ema = oracle_ema(&releases, transcript.mech.gamma).expect("prior releases exist");
            let weights = oracle_weights(&lags, &ema, &transcript.mech);
            // M_rec over prior queries, M_noise over prior noise draws.
            for (idx, w) in weights.iter().enumerate() {
                let lag = idx + 1;
                let prior_query = &queries[record.step - lag];
                let prior_noise = &noises[record.step - lag];
                for ((e, rq), rz) in expected
                    .iter_mut()
                    .zip(prior_query.as_slice())
                    .zip(prior_noise.as_slice())
                {
                    *e += (1.0 - beta) * w * rq + (1.0 - beta) * w * rz;
                }
            }
        }
        let diff: f64 = expected
            .iter()
            .zip(query.as_slice())
            .map(|(e, r)| (e - r) * (e - r))
            .sum::<f64>()
            .sqrt();
        let rel = diff / oracle_norm(query.as_slice()).max(1e-30);
        max_rel = max_rel.max(rel);

        releases.push(record.release.clone());
        queries.push(query.clone());
        noises.push(noise.clone());
    }
    Ok(max_rel)
}

// ---------------------------------------------------------------------------
// Limiting-regime equivalences.
// ---------------------------------------------------------------------------

/// Run the five limiting-regime checks with a shared seed:
/// 1. beta = 1 trajectory equals the current-only trajectory bit-for-bit;
/// 2. tau = 0 weights equal the tempered power-law form;
/// 3. alpha = 1 weights equal the pure exponential-tempering form;
/// 4. window 1 trajectory equals an independently re-implemented
///    beta-scaled-query loop bit-for-bit;
/// 5. alpha = 1, lambda = 0, tau = 0 weights equal the uniform variant's.
pub fn check_reductions(
    seed: u64,
    mech: &MechanismConfig,
    privacy: &PrivacyConfig,
) -> Result<Vec<ReductionCheck>> {
    mech.validate()?;
    privacy.validate()?;
    let master = SeededRng::new(seed);
    let spec = crate::data::SyntheticSpec {
        num_classes: 3,
        dim: 5,
        train_per_class: 10,
        test_per_class: 2,
        cluster_std: 0.6,
        center_scale: 1.0,
    };
    let (dataset, _) = crate::data::generate_synthetic(&spec, &mut master.substream(Substream::Data))?;
    let shape = MlpShape::new(5, 6, 4, 3);
    let privacy = PrivacyConfig {
        q: 0.3,
        ..*privacy
    };
    let eta = 0.5;
    let mut checks = Vec::new();

    // (1) beta = 1 vs current-only, 20 steps.
    {
        let run = |variant: MemoryVariant| -> Result<Transcript> {
            Trainer::with_fresh_init(
                &dataset,
                shape,
                mech.clone().with_beta(1.0).with_variant(variant),
                privacy,
                UpdateRule::QueryLevel,
                eta,
                eta,
                TraceLevel::Full,
                &master,
            )?
            .run(20)
        };
        let fo = run(MemoryVariant::FractionalCa)?;
        let current = run(MemoryVariant::CurrentOnly)?;
        let passed = fo.core_bytes() == current.core_bytes();
        checks.push(ReductionCheck {
            name: "beta=1 equals current-only",
            passed,
            detail: format!("{} steps compared byte-for-byte", fo.records.len()),
        });
    }

    // Shared random reachable buffer for the weight-form checks.
    let make_buffer = |count: usize, gamma: f64| -> Result<(ReleaseBuffer, Vec<GradientVector>)> {
        let mut data_rng = master.substream(Substream::Data);
        let mut buffer = ReleaseBuffer::new(mech.memory_window.max(6), 4);
        let mut history = Vec::new();
        for _ in 0..count {
            let v = gaussian_vector(&mut data_rng, 4, 1.0);
            buffer.push(v.clone(), gamma)?;
            history.push(v);
        }
        Ok((buffer, history))
    };

    // (2) tau = 0: weights follow (j+1)^(alpha-1) e^(-lambda j).
    {
        let cfg = mech
            .clone()
            .with_alpha(0.8)
            .with_tau(0.0)
            .with_temper_lambda(0.3)
            .with_memory_window(6);
        let (buffer, _) = make_buffer(5, cfg.gamma)?;
        let computed = kernel_weights(&buffer, &cfg)?;
        let raw: Vec<f64> = (1..=buffer.len())
            .map(|j| ((j + 1) as f64).powf(cfg.alpha - 1.0) * (-cfg.temper_lambda * j as f64).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let max_err = computed
            .weights
            .iter()
            .zip(&raw)
            .map(|(w, r)| (w - r / total).abs())
            .fold(0.0, f64::max);
        checks.push(ReductionCheck {
            name: "tau=0 equals tempered power law",
            passed: max_err < 1e-12,
            detail: format!("max weight deviation {max_err:.3e}"),
        });
    }

    // (3) alpha = 1: weights follow exp(-(lambda + chi tau nu_j) j).
    {
        let cfg = mech
            .clone()
            .with_alpha(1.0)
            .with_tau(1.5)
            .with_temper_lambda(0.1)
            .with_memory_window(6);
        let (buffer, history) = make_buffer(5, cfg.gamma)?;
        let computed = kernel_weights(&buffer, &cfg)?;
        let lags: Vec<&GradientVector> = history.iter().rev().take(buffer.len()).collect();
        let ema = oracle_ema(&history, cfg.gamma).expect("history non-empty");
        let ema_norm = oracle_norm(ema.as_slice());
        let chi = ema_norm / (ema_norm + cfg.zeta);
        let raw: Vec<f64> = lags
            .iter()
            .enumerate()
            .map(|(idx, release)| {
                let j = (idx + 1) as f64;
                let deviation =
                    oracle_norm(release.sub(&ema).expect("dims agree").as_slice());
                let nu = deviation / (ema_norm.max(cfg.kappa) + cfg.eps_stab);
                (-(cfg.temper_lambda + chi * cfg.tau * nu) * j).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let max_err = computed
            .weights
            .iter()
            .zip(&raw)
            .map(|(w, r)| (w - r / total).abs())
            .fold(0.0, f64::max);
        checks.push(ReductionCheck {
            name: "alpha=1 equals pure exponential tempering",
            passed: max_err < 1e-12,
            detail: format!("max weight deviation {max_err:.3e}"),
        });
    }

    // (4) window 1 vs independently re-implemented beta-scaled-query loop.
    {
        let cfg = mech.clone().with_memory_window(1).with_beta(0.7);
        let theta0 = MlpParams::init(shape, &mut master.substream(Substream::Init)).to_flat();
        let mechanism_run = Trainer::new(
            &dataset,
            shape,
            cfg.clone(),
            privacy,
            UpdateRule::QueryLevel,
            eta,
            eta,
            TraceLevel::Released,
            &master,
            theta0.clone(),
        )?
        .run(15)?;

        // Independent loop: same substream discipline, formulas re-derived.
        let mut mask_rng = master.substream(Substream::Mask);
        let mut noise_rng = master.substream(Substream::Noise);
        let mut theta = theta0;
        let lot = dataset.expected_lot(privacy.q);
        let mut identical = true;
        for record in &mechanism_run.records {
            let indicators: Vec<bool> = (0..dataset.len())
                .map(|_| mask_rng.next_uniform() < privacy.q)
                .collect();
            let params = MlpParams::from_flat(shape, &theta)?;
            let mut sum = vec![0.0; shape.param_count()];
            for (i, included) in indicators.iter().enumerate() {
                if !included {
                    continue;
                }
                let g = params.per_example_grad(&dataset.examples[i])?;
                for (a, x) in sum.iter_mut().zip(oracle_clip(&g, privacy.clip_c).as_slice()) {
                    *a += x;
                }
            }
            let query: Vec<f64> = sum.iter().map(|x| cfg.beta * x).collect();
            let noise = gaussian_vector(
                &mut noise_rng,
                shape.param_count(),
                privacy.sigma * privacy.clip_c,
            );
            let released: Vec<f64> = query
                .iter()
                .zip(noise.as_slice())
                .map(|(r, z)| r + z)
                .collect();
            theta = GradientVector::new(
                theta
                    .as_slice()
                    .iter()
                    .zip(&released)
                    .map(|(t, s)| t - eta * (s / lot))
                    .collect(),
            );
            identical &= record.release.bit_eq(&GradientVector::new(released));
        }
        identical &= mechanism_run.final_theta.bit_eq(&theta);
        checks.push(ReductionCheck {
            name: "window=1 equals beta-scaled query loop",
            passed: identical,
            detail: "releases and final parameters compared bit-for-bit".to_string(),
        });
    }

    // (5) alpha = 1, lambda = 0, tau = 0 equals the uniform variant.
    {
        let flat = mech
            .clone()
            .with_alpha(1.0)
            .with_temper_lambda(0.0)
            .with_tau(0.0)
            .with_memory_window(6);
        let uniform = flat.clone().with_variant(MemoryVariant::Uniform);
        let (buffer, _) = make_buffer(5, flat.gamma)?;
        let a = kernel_weights(&buffer, &flat)?;
        let b = kernel_weights(&buffer, &uniform)?;
        let max_err = a
            .weights
            .iter()
            .zip(&b.weights)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        checks.push(ReductionCheck {
            name: "alpha=1, lambda=0, tau=0 equals uniform weights",
            passed: max_err < 1e-14,
            detail: format!("max weight deviation {max_err:.3e}"),
        });
    }

    Ok(checks)
}
