//! Run configuration: the TOML file schema and its resolution into the
//! core mechanism/privacy configs.
//!
//! Parsing is fail-closed: unknown keys anywhere in the file are errors.
//! One training epoch is defined as `ceil(1 / q)` steps (one expected pass
//! over the data under Poisson sampling), and the accounted step count is
//! always `epochs * steps_per_epoch`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use fodp_core::config::{MechanismConfig, MemoryVariant, PrivacyConfig};
use fodp_core::data::{generate_synthetic, load_cifar10_binary, Dataset, Normalization, SyntheticSpec};
use fodp_core::mechanism::UpdateRule;
use fodp_core::rng::{SeededRng, Substream};

/// Which training algorithm a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Query-level confidence-aware fractional memory.
    FoDpSgd,
    /// Standard DP-SGD: the current-only query at full mixing (beta = 1).
    DpSgd,
    /// Post-processing fractional memory over noisy gradient releases.
    PostFm,
    /// Query-level memory with uniform lag weights.
    UniformMem,
    /// Query-level memory with geometric lag weights.
    ExponentialMem,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::FoDpSgd => "fo_dp_sgd",
            Algorithm::DpSgd => "dp_sgd",
            Algorithm::PostFm => "post_fm",
            Algorithm::UniformMem => "uniform_mem",
            Algorithm::ExponentialMem => "exponential_mem",
        }
    }

    pub fn parse(name: &str) -> anyhow::Result<Self> {
        match name {
            "fo_dp_sgd" => Ok(Algorithm::FoDpSgd),
            "dp_sgd" => Ok(Algorithm::DpSgd),
            "post_fm" => Ok(Algorithm::PostFm),
            "uniform_mem" => Ok(Algorithm::UniformMem),
            "exponential_mem" => Ok(Algorithm::ExponentialMem),
            other => anyhow::bail!("unknown algorithm `{other}`"),
        }
    }
}

/// Top-level run configuration, mirroring the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mechanism: MechanismSection,
    #[serde(default)]
    pub privacy: PrivacySection,
    pub train: TrainSection,
    pub dataset: DatasetSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanismSection {
    pub beta: f64,
    pub alpha: f64,
    pub memory_window: usize,
    pub temper_lambda: f64,
    pub tau: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub eps_stab: f64,
    /// Decay ratio used only by the exponential-memory algorithm.
    pub exp_decay: f64,
}

impl Default for MechanismSection {
    fn default() -> Self {
        let base = MechanismConfig::default();
        Self {
            beta: base.beta,
            alpha: base.alpha,
            memory_window: base.memory_window,
            temper_lambda: base.temper_lambda,
            tau: base.tau,
            gamma: base.gamma,
            kappa: base.kappa,
            zeta: base.zeta,
            eps_stab: base.eps_stab,
            exp_decay: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrivacySection {
    pub clip_c: f64,
    pub sigma: f64,
    pub q: f64,
    pub delta: f64,
}

impl Default for PrivacySection {
    fn default() -> Self {
        let base = PrivacyConfig::default();
        Self {
            clip_c: base.clip_c,
            sigma: base.sigma,
            q: base.q,
            delta: base.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub epochs: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    /// Post-processing learning rate; defaults to `eta`.
    #[serde(default)]
    pub eta_post: Option<f64>,
}

fn default_eta() -> f64 {
    0.8
}

fn default_eval_every() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSection {
    Synthetic {
        #[serde(default = "default_classes")]
        num_classes: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_train_per_class")]
        train_per_class: usize,
        #[serde(default = "default_test_per_class")]
        test_per_class: usize,
        #[serde(default = "default_cluster_std")]
        cluster_std: f64,
        #[serde(default = "default_center_scale")]
        center_scale: f64,
        /// Seed of the generator that materializes the split. Kept separate
        /// from the run seeds so every run trains on the same fixed subset;
        /// run seeds vary only initialization, sampling, and noise.
        #[serde(default = "default_data_seed")]
        data_seed: u64,
    },
    Cifar10Binary {
        path: PathBuf,
        #[serde(default = "default_train_count")]
        train_count: usize,
        #[serde(default = "default_test_count")]
        test_count: usize,
        #[serde(default)]
        normalization: NormalizationSection,
    },
}

fn default_classes() -> usize {
    10
}
fn default_dim() -> usize {
    64
}
fn default_train_per_class() -> usize {
    500
}
fn default_test_per_class() -> usize {
    200
}
fn default_cluster_std() -> f64 {
    1.0
}
fn default_center_scale() -> f64 {
    1.0
}
fn default_train_count() -> usize {
    5000
}
fn default_test_count() -> usize {
    2000
}
fn default_data_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationSection {
    #[default]
    Standardize,
    MinMax,
}

/// Everything the runner needs once the file-level config is checked.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub algorithm: Algorithm,
    pub mech: MechanismConfig,
    pub privacy: PrivacyConfig,
    pub rule: UpdateRule,
    /// The mixing coefficient the accountant charges for: the config beta
    /// for query-level memory variants, and 1 for the standard-release
    /// algorithms (dp_sgd, post_fm) whose query sensitivity is the full C.
    pub accounting_beta: f64,
    pub eta: f64,
    pub eta_post: f64,
    pub epochs: u64,
    pub eval_every: u64,
    pub steps_per_epoch: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.resolve()?;
        Ok(config)
    }

    /// Validate and translate the file schema into core configs.
    pub fn resolve(&self) -> anyhow::Result<ResolvedRun> {
        if self.seeds.is_empty() {
            anyhow::bail!("at least one seed is required");
        }
        if self.train.epochs > 0 && self.train.eval_every == 0 {
            anyhow::bail!("eval_every must be >= 1");
        }
        let m = &self.mechanism;
        let (variant, rule, beta, accounting_beta) = match self.algorithm {
            Algorithm::FoDpSgd => (
                MemoryVariant::FractionalCa,
                UpdateRule::QueryLevel,
                m.beta,
                m.beta,
            ),
            // Standard DP-SGD releases the plain clipped sum: the current-only
            // query at beta = 1, accounted at sensitivity C.
            Algorithm::DpSgd => (MemoryVariant::CurrentOnly, UpdateRule::QueryLevel, 1.0, 1.0),
            // Post-processing memory does not change the released query, so
            // accounting stays at the standard sensitivity C.
            Algorithm::PostFm => (
                MemoryVariant::FractionalCa,
                UpdateRule::PostProcessing,
                m.beta,
                1.0,
            ),
            Algorithm::UniformMem => (
                MemoryVariant::Uniform,
                UpdateRule::QueryLevel,
                m.beta,
                m.beta,
            ),
            Algorithm::ExponentialMem => (
                MemoryVariant::Exponential { decay: m.exp_decay },
                UpdateRule::QueryLevel,
                m.beta,
                m.beta,
            ),
        };
        let mech = MechanismConfig {
            beta,
            alpha: m.alpha,
            memory_window: m.memory_window,
            temper_lambda: m.temper_lambda,
            tau: m.tau,
            gamma: m.gamma,
            kappa: m.kappa,
            zeta: m.zeta,
            eps_stab: m.eps_stab,
            memory_variant: variant,
        };
        let steps_per_epoch = (1.0 / self.privacy.q).ceil() as u64;
        let privacy = PrivacyConfig {
            clip_c: self.privacy.clip_c,
            sigma: self.privacy.sigma,
            q: self.privacy.q,
            delta: self.privacy.delta,
            steps_t: (self.train.epochs * steps_per_epoch).max(1),
        };
        mech.validate()?;
        privacy.validate()?;
        self.validate_dataset()?;
        Ok(ResolvedRun {
            algorithm: self.algorithm,
            mech,
            privacy,
            rule,
            accounting_beta,
            eta: self.train.eta,
            eta_post: self.train.eta_post.unwrap_or(self.train.eta),
            epochs: self.train.epochs,
            eval_every: self.train.eval_every.max(1),
            steps_per_epoch,
        })
    }

    fn validate_dataset(&self) -> anyhow::Result<()> {
        if let DatasetSection::Synthetic { .. } = &self.dataset {
            self.dataset.synthetic_spec().expect("checked").validate()?;
        }
        Ok(())
    }

    /// Materialize the fixed train/test split. The split is shared by every
    /// run: synthetic data is generated from the dataset's own `data_seed`,
    /// and file-based data is inherently run-independent.
    pub fn build_dataset(&self) -> anyhow::Result<(Dataset, Dataset)> {
        match &self.dataset {
            DatasetSection::Synthetic { data_seed, .. } => {
                let spec = self.dataset.synthetic_spec().expect("checked");
                let data_master = SeededRng::new(*data_seed);
                Ok(generate_synthetic(
                    &spec,
                    &mut data_master.substream(Substream::Data),
                )?)
            }
            DatasetSection::Cifar10Binary {
                path,
                train_count,
                test_count,
                normalization,
            } => {
                let norm = match normalization {
                    NormalizationSection::Standardize => Normalization::Standardize,
                    NormalizationSection::MinMax => Normalization::MinMax,
                };
                Ok(load_cifar10_binary(path, *train_count, *test_count, norm)?)
            }
        }
    }
}

impl DatasetSection {
    fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        match self {
            DatasetSection::Synthetic {
                num_classes,
                dim,
                train_per_class,
                test_per_class,
                cluster_std,
                center_scale,
                ..
            } => Some(SyntheticSpec {
                num_classes: *num_classes,
                dim: *dim,
                train_per_class: *train_per_class,
                test_per_class: *test_per_class,
                cluster_std: *cluster_std,
                center_scale: *center_scale,
            }),
            DatasetSection::Cifar10Binary { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
algorithm = "fo_dp_sgd"
seeds = [1, 2]
output_dir = "out"

[train]
epochs = 3

[dataset]
source = "synthetic"
num_classes = 3
dim = 8
train_per_class = 20
test_per_class = 5
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.mech.beta, 0.9);
        assert_eq!(resolved.mech.memory_window, 8);
        assert_eq!(resolved.privacy.q, 0.04);
        assert_eq!(resolved.steps_per_epoch, 25);
        assert_eq!(resolved.privacy.steps_t, 75);
        assert_eq!(resolved.eta, 0.8);
        assert_eq!(resolved.eta_post, 0.8);
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        let text = format!("{MINIMAL}\nunexpected = 1\n");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn unknown_section_key_is_rejected() {
        let text = format!("{MINIMAL}\n[mechanism]\nbeta = 0.9\nbogus = 2\n");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn unknown_dataset_key_is_rejected() {
        let text = MINIMAL.replace(
            "test_per_class = 5",
            "test_per_class = 5\nmystery_knob = 3",
        );
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn dp_sgd_forces_full_mixing_and_no_memory() {
        let text = MINIMAL.replace("fo_dp_sgd", "dp_sgd");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.mech.beta, 1.0);
        assert_eq!(resolved.mech.memory_variant, MemoryVariant::CurrentOnly);
        assert_eq!(resolved.accounting_beta, 1.0);
    }

    #[test]
    fn post_fm_accounts_at_full_sensitivity() {
        let text = MINIMAL.replace("fo_dp_sgd", "post_fm");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.mech.beta, 0.9);
        assert_eq!(resolved.accounting_beta, 1.0);
        assert_eq!(resolved.rule, UpdateRule::PostProcessing);
    }

    #[test]
    fn invalid_mechanism_values_fail_resolution() {
        let text = format!("{MINIMAL}\n[mechanism]\nbeta = 1.5\n");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn exponential_algorithm_uses_the_decay_knob() {
        let text = format!(
            "{}\n[mechanism]\nexp_decay = 0.25\n",
            MINIMAL.replace("fo_dp_sgd", "exponential_mem")
        );
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(
            resolved.mech.memory_variant,
            MemoryVariant::Exponential { decay: 0.25 }
        );
    }
}
