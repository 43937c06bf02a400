//! Multi-seed experiment execution: one sequential release loop per seed,
//! privacy accounted per step, evaluation on an epoch schedule, and one pair
//! of log files per (algorithm, seed).

use std::path::PathBuf;
use std::time::Instant;

use fodp_core::accountant::RdpCurve;
use fodp_core::mechanism::{TraceLevel, Trainer};
use fodp_core::model::{evaluate, MlpShape};
use fodp_core::rng::SeededRng;

use crate::config::RunConfig;
use crate::logio::{write_epoch_log, write_final_log, EpochRow, FinalRow};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub epoch_rows: Vec<EpochRow>,
    pub final_row: FinalRow,
    pub epoch_path: PathBuf,
    pub final_path: PathBuf,
}

/// Execute one (algorithm, seed) run and write its two log files.
pub fn run_single(config: &RunConfig, seed: u64) -> anyhow::Result<RunOutput> {
    let resolved = config.resolve()?;
    let master = SeededRng::new(seed);
    let (train_set, test_set) = config.build_dataset()?;
    let shape = MlpShape::classifier(train_set.dim, train_set.num_classes);

    let mut trainer = Trainer::with_fresh_init(
        &train_set,
        shape,
        resolved.mech.clone(),
        resolved.privacy,
        resolved.rule,
        resolved.eta,
        resolved.eta_post,
        TraceLevel::Released,
        &master,
    )?;

    let mut curve = RdpCurve::default_grid();
    let per_step = curve.per_step_costs(
        resolved.privacy.q,
        resolved.privacy.sigma / resolved.accounting_beta,
    )?;

    let algorithm = resolved.algorithm.name().to_string();
    let start = Instant::now();
    let mut rows = Vec::new();

    // Initialization row: nothing released yet, so the spent budget is zero.
    let init_eval = evaluate(&trainer.params(), &test_set.examples)?;
    rows.push(EpochRow {
        algorithm: algorithm.clone(),
        seed,
        epoch: 0,
        test_accuracy: init_eval.accuracy,
        mean_loss: init_eval.mean_loss,
        epsilon: 0.0,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    });

    for epoch in 1..=resolved.epochs {
        for _ in 0..resolved.steps_per_epoch {
            trainer.step()?;
        }
        curve.compose(&per_step, resolved.steps_per_epoch)?;
        if epoch % resolved.eval_every == 0 || epoch == resolved.epochs {
            let eval = evaluate(&trainer.params(), &test_set.examples)?;
            let epsilon = curve.to_eps_delta(resolved.privacy.delta)?.epsilon;
            rows.push(EpochRow {
                algorithm: algorithm.clone(),
                seed,
                epoch,
                test_accuracy: eval.accuracy,
                mean_loss: eval.mean_loss,
                epsilon,
                elapsed_seconds: start.elapsed().as_secs_f64(),
            });
        }
    }

    let last = rows.last().expect("the init row always exists");
    let best_accuracy = rows
        .iter()
        .map(|r| r.test_accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    let final_row = FinalRow {
        algorithm: algorithm.clone(),
        seed,
        final_accuracy: last.test_accuracy,
        best_accuracy,
        final_loss: last.mean_loss,
        final_epsilon: last.epsilon,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };

    std::fs::create_dir_all(&config.output_dir)?;
    let stem = format!("{algorithm}_seed{seed}");
    let epoch_path = config.output_dir.join(format!("{stem}_epochs.csv"));
    let final_path = config.output_dir.join(format!("{stem}_final.csv"));
    write_epoch_log(&epoch_path, &rows)?;
    write_final_log(&final_path, &final_row)?;

    Ok(RunOutput {
        epoch_rows: rows,
        final_row,
        epoch_path,
        final_path,
    })
}

/// Run every configured seed. Seeds are fully independent jobs (separate
/// substreams, separate log files), so they execute on worker threads;
/// results come back in seed order regardless of completion order.
pub fn run_all(config: &RunConfig) -> anyhow::Result<Vec<RunOutput>> {
    config.resolve()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| scope.spawn(move || run_single(config, seed)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("runner thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Algorithm, DatasetSection, TrainSection};

    fn tiny_config(dir: &std::path::Path, algorithm: Algorithm, epochs: u64) -> RunConfig {
        RunConfig {
            algorithm,
            seeds: vec![11, 12],
            output_dir: dir.to_path_buf(),
            mechanism: Default::default(),
            privacy: crate::config::PrivacySection {
                q: 0.2,
                ..Default::default()
            },
            train: TrainSection {
                eta: 0.5,
                epochs,
                eval_every: 1,
                eta_post: None,
            },
            dataset: DatasetSection::Synthetic {
                num_classes: 3,
                dim: 6,
                train_per_class: 15,
                test_per_class: 5,
                cluster_std: 0.5,
                center_scale: 1.0,
                data_seed: 42,
            },
        }
    }

    #[test]
    fn zero_epochs_logs_only_the_init_row() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path(), Algorithm::FoDpSgd, 0);
        let out = run_single(&cfg, 11).unwrap();
        assert_eq!(out.epoch_rows.len(), 1);
        assert_eq!(out.epoch_rows[0].epoch, 0);
        assert_eq!(out.epoch_rows[0].epsilon, 0.0);
        assert_eq!(out.final_row.final_epsilon, 0.0);
    }

    #[test]
    fn epsilon_is_nondecreasing_within_a_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path(), Algorithm::FoDpSgd, 4);
        let out = run_single(&cfg, 11).unwrap();
        assert_eq!(out.epoch_rows.len(), 5);
        for pair in out.epoch_rows.windows(2) {
            assert!(pair[1].epsilon >= pair[0].epsilon);
        }
        assert!(out.final_row.final_epsilon > 0.0);
        assert!(out.final_row.best_accuracy >= out.final_row.final_accuracy);
    }

    #[test]
    fn beta_one_fo_run_matches_dp_sgd_rows() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut fo = tiny_config(dir_a.path(), Algorithm::FoDpSgd, 3);
        fo.mechanism.beta = 1.0;
        let dp = tiny_config(dir_b.path(), Algorithm::DpSgd, 3);

        let a = run_single(&fo, 11).unwrap();
        let b = run_single(&dp, 11).unwrap();
        assert_eq!(a.epoch_rows.len(), b.epoch_rows.len());
        for (ra, rb) in a.epoch_rows.iter().zip(&b.epoch_rows) {
            assert_eq!(ra.test_accuracy.to_bits(), rb.test_accuracy.to_bits());
            assert_eq!(ra.mean_loss.to_bits(), rb.mean_loss.to_bits());
            assert_eq!(ra.epsilon.to_bits(), rb.epsilon.to_bits());
        }
    }

    #[test]
    fn reruns_are_identical_except_timing() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = run_single(&tiny_config(dir_a.path(), Algorithm::PostFm, 2), 12).unwrap();
        let b = run_single(&tiny_config(dir_b.path(), Algorithm::PostFm, 2), 12).unwrap();
        for (ra, rb) in a.epoch_rows.iter().zip(&b.epoch_rows) {
            assert_eq!(ra.test_accuracy.to_bits(), rb.test_accuracy.to_bits());
            assert_eq!(ra.mean_loss.to_bits(), rb.mean_loss.to_bits());
            assert_eq!(ra.epsilon.to_bits(), rb.epsilon.to_bits());
        }
    }
}
