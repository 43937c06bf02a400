//! `fodp`: train, sweep, account, verify, report, and summarize.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use fodp_core::accountant::RdpCurve;
use fodp_harness::config::RunConfig;
use fodp_harness::logio::read_final_log;
use fodp_harness::report::generate_report;
use fodp_harness::runner::run_all;
use fodp_harness::stats::{summarize, summary_csv};
use fodp_harness::sweep::{run_sweep, SweepAxis};
use fodp_harness::verify::run_verification;

#[derive(Parser)]
#[command(
    name = "fodp",
    about = "Differentially private SGD with fractional query-level memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured seed of one algorithm and write run logs.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rerun the config across one axis (beta | alpha | k | variant).
    Sweep {
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the accumulated RDP curve and the converted (epsilon, delta).
    Account {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        delta: f64,
    },
    /// Run the brute-force verification suite; exits nonzero on violation.
    Verify {
        /// Random adjacency instances per mixing coefficient.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Aggregate run logs into plot-ready CSV bundles.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-algorithm multi-seed summary statistics as CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train { config } => {
            let config = RunConfig::load(&config)?;
            let outputs = run_all(&config)?;
            for output in &outputs {
                let row = &output.final_row;
                println!(
                    "{} seed {}: final accuracy {:.4}, best {:.4}, final epsilon {:.4} ({:.1}s) -> {}",
                    row.algorithm,
                    row.seed,
                    row.final_accuracy,
                    row.best_accuracy,
                    row.final_epsilon,
                    row.runtime_seconds,
                    output.epoch_path.display()
                );
            }
        }
        Command::Sweep {
            axis,
            values,
            config,
        } => {
            let config = RunConfig::load(&config)?;
            let axis: SweepAxis = axis.parse()?;
            let values: Vec<String> = values
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            let outputs = run_sweep(&config, axis, &values)?;
            for output in &outputs {
                let mean: f64 = output
                    .runs
                    .iter()
                    .map(|r| r.final_row.final_accuracy)
                    .sum::<f64>()
                    / output.runs.len() as f64;
                println!(
                    "{}={}: {} seeds, mean final accuracy {:.4}",
                    axis.name(),
                    output.value,
                    output.runs.len(),
                    mean
                );
            }
            println!(
                "privacy-utility table: {}",
                config.output_dir.join("privacy_utility.csv").display()
            );
        }
        Command::Account {
            q,
            sigma,
            beta,
            steps,
            delta,
        } => {
            if !(beta > 0.0 && beta <= 1.0) {
                anyhow::bail!("beta must lie in (0, 1]");
            }
            let mut curve = RdpCurve::default_grid();
            curve.compose_subsampled_gaussian(q, sigma / beta, steps)?;
            println!("# per-order accumulated RDP after {steps} steps (q={q}, sigma={sigma}, beta={beta})");
            for (order, eps) in curve.orders().iter().zip(curve.eps_at_order()) {
                println!("order={order} rdp_epsilon={eps}");
            }
            let converted = curve.to_eps_delta(delta)?;
            println!(
                "epsilon={} delta={delta} best_order={}",
                converted.epsilon, converted.best_order
            );
        }
        Command::Verify { trials, seed } => {
            let ok = run_verification(trials, seed)?;
            if !ok {
                anyhow::bail!("verification failed");
            }
            println!("all checks passed");
        }
        Command::Report { input, out } => {
            generate_report(&input, &out)?;
            println!("report written to {}", out.display());
        }
        Command::Summarize { input } => {
            let mut finals = Vec::new();
            for entry in std::fs::read_dir(&input)
                .with_context(|| format!("reading {}", input.display()))?
            {
                let path = entry?.path();
                if path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with("_final.csv"))
                {
                    finals.extend(read_final_log(&path)?);
                }
            }
            finals.sort_by(|a, b| (a.algorithm.clone(), a.seed).cmp(&(b.algorithm.clone(), b.seed)));
            print!("{}", summary_csv(&summarize(&finals)));
        }
    }
    Ok(())
}
