//! Ablation sweeps: rerun the base configuration while varying one axis,
//! one subdirectory of run logs per value, plus a long-format
//! privacy-utility table for plotting.

use std::collections::BTreeMap;
use std::fs;
use std::str::FromStr;

use crate::config::{Algorithm, RunConfig};
use crate::runner::{run_all, RunOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Beta,
    Alpha,
    MemoryWindow,
    Variant,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Beta => "beta",
            SweepAxis::Alpha => "alpha",
            SweepAxis::MemoryWindow => "k",
            SweepAxis::Variant => "variant",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "beta" => Ok(SweepAxis::Beta),
            "alpha" => Ok(SweepAxis::Alpha),
            "k" | "memory_window" => Ok(SweepAxis::MemoryWindow),
            "variant" => Ok(SweepAxis::Variant),
            other => anyhow::bail!("unknown sweep axis `{other}` (beta|alpha|k|variant)"),
        }
    }
}

fn apply_axis(config: &mut RunConfig, axis: SweepAxis, value: &str) -> anyhow::Result<()> {
    match axis {
        SweepAxis::Beta => config.mechanism.beta = value.parse()?,
        SweepAxis::Alpha => config.mechanism.alpha = value.parse()?,
        SweepAxis::MemoryWindow => config.mechanism.memory_window = value.parse()?,
        SweepAxis::Variant => config.algorithm = Algorithm::parse(value)?,
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub value: String,
    pub runs: Vec<RunOutput>,
}

/// Run the sweep. Logs for value `v` land in `<output_dir>/<axis>=<v>/`, and
/// `<output_dir>/privacy_utility.csv` collects `(value, epoch, mean accuracy,
/// epsilon)` rows across all values.
pub fn run_sweep(
    base: &RunConfig,
    axis: SweepAxis,
    values: &[String],
) -> anyhow::Result<Vec<SweepOutput>> {
    if values.is_empty() {
        anyhow::bail!("sweep requires at least one value");
    }
    let mut outputs = Vec::new();
    for value in values {
        let mut config = base.clone();
        apply_axis(&mut config, axis, value)?;
        config.output_dir = base.output_dir.join(format!("{}={}", axis.name(), value));
        config.resolve()?;
        let runs = run_all(&config)?;
        outputs.push(SweepOutput {
            value: value.clone(),
            runs,
        });
    }

    let mut table = String::from("value,epoch,test_accuracy,epsilon\n");
    for output in &outputs {
        // Mean accuracy across seeds per epoch; epsilon is seed-independent.
        let mut per_epoch: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
        for run in &output.runs {
            for row in &run.epoch_rows {
                let entry = per_epoch.entry(row.epoch).or_insert((0.0, 0.0, 0));
                entry.0 += row.test_accuracy;
                entry.1 += row.epsilon;
                entry.2 += 1;
            }
        }
        for (epoch, (acc, eps, n)) in per_epoch {
            table.push_str(&format!(
                "{},{},{},{}\n",
                output.value,
                epoch,
                acc / n as f64,
                eps / n as f64
            ));
        }
    }
    fs::create_dir_all(&base.output_dir)?;
    fs::write(base.output_dir.join("privacy_utility.csv"), table)?;
    Ok(outputs)
}
