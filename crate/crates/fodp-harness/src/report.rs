//! Plot-ready CSV bundles derived from run logs: accuracy versus epoch,
//! accuracy versus spent budget, and budget versus epoch, one series per
//! algorithm (prefixed by the sweep subdirectory when present).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::logio::read_epoch_log;

/// Collect `*_epochs.csv` files under `dir`, recursively.
fn collect_epoch_logs(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in fs::read_dir(&current)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with("_epochs.csv"))
            {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

fn series_name(root: &Path, log_path: &Path, algorithm: &str) -> String {
    let rel = log_path
        .parent()
        .and_then(|p| p.strip_prefix(root).ok())
        .map(|p| p.to_string_lossy().replace('\\', "/"))
        .unwrap_or_default();
    if rel.is_empty() {
        algorithm.to_string()
    } else {
        format!("{rel}/{algorithm}")
    }
}

/// Aggregated point: per (series, epoch), accuracy and epsilon averaged over
/// seeds (epsilon is seed-independent by construction, so its mean equals
/// any single run's value).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub series: String,
    pub epoch: u64,
    pub test_accuracy: f64,
    pub epsilon: f64,
}

pub fn aggregate_series(in_dir: &Path) -> anyhow::Result<Vec<SeriesPoint>> {
    let mut acc: BTreeMap<(String, u64), (f64, f64, usize)> = BTreeMap::new();
    for log in collect_epoch_logs(in_dir)? {
        for row in read_epoch_log(&log)? {
            let series = series_name(in_dir, &log, &row.algorithm);
            let entry = acc.entry((series, row.epoch)).or_insert((0.0, 0.0, 0));
            entry.0 += row.test_accuracy;
            entry.1 += row.epsilon;
            entry.2 += 1;
        }
    }
    Ok(acc
        .into_iter()
        .map(|((series, epoch), (acc_sum, eps_sum, n))| SeriesPoint {
            series,
            epoch,
            test_accuracy: acc_sum / n as f64,
            epsilon: eps_sum / n as f64,
        })
        .collect())
}

/// Emit the three plot CSVs into `out_dir`. Rows are sorted by
/// (series, epoch); an empty input directory yields header-only files.
pub fn generate_report(in_dir: &Path, out_dir: &Path) -> anyhow::Result<()> {
    let points = aggregate_series(in_dir)?;
    fs::create_dir_all(out_dir)?;

    let mut acc_epoch = String::from("series,epoch,test_accuracy\n");
    let mut acc_eps = String::from("series,epsilon,test_accuracy\n");
    let mut eps_epoch = String::from("series,epoch,epsilon\n");
    for p in &points {
        acc_epoch.push_str(&format!("{},{},{}\n", p.series, p.epoch, p.test_accuracy));
        acc_eps.push_str(&format!("{},{},{}\n", p.series, p.epsilon, p.test_accuracy));
        eps_epoch.push_str(&format!("{},{},{}\n", p.series, p.epoch, p.epsilon));
    }
    fs::write(out_dir.join("accuracy_vs_epoch.csv"), acc_epoch)?;
    fs::write(out_dir.join("accuracy_vs_epsilon.csv"), acc_eps)?;
    fs::write(out_dir.join("epsilon_vs_epoch.csv"), eps_epoch)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logio::{write_epoch_log, EpochRow};

    fn row(algorithm: &str, seed: u64, epoch: u64, acc: f64, eps: f64) -> EpochRow {
        EpochRow {
            algorithm: algorithm.to_string(),
            seed,
            epoch,
            test_accuracy: acc,
            mean_loss: 1.0,
            epsilon: eps,
            elapsed_seconds: 0.0,
        }
    }

    #[test]
    fn empty_input_yields_header_only_files() {
        let in_dir = tempfile::tempdir().unwrap();
        let out_dir = tempfile::tempdir().unwrap();
        generate_report(in_dir.path(), out_dir.path()).unwrap();
        let text = fs::read_to_string(out_dir.path().join("accuracy_vs_epoch.csv")).unwrap();
        assert_eq!(text, "series,epoch,test_accuracy\n");
    }

    #[test]
    fn seeds_average_and_subdirectories_become_series_prefixes() {
        let in_dir = tempfile::tempdir().unwrap();
        let sub = in_dir.path().join("beta=0.9");
        fs::create_dir_all(&sub).unwrap();
        write_epoch_log(
            &sub.join("fo_dp_sgd_seed1_epochs.csv"),
            &[row("fo_dp_sgd", 1, 0, 0.2, 0.0), row("fo_dp_sgd", 1, 1, 0.4, 1.0)],
        )
        .unwrap();
        write_epoch_log(
            &sub.join("fo_dp_sgd_seed2_epochs.csv"),
            &[row("fo_dp_sgd", 2, 0, 0.4, 0.0), row("fo_dp_sgd", 2, 1, 0.6, 1.0)],
        )
        .unwrap();

        let points = aggregate_series(in_dir.path()).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].series, "beta=0.9/fo_dp_sgd");
        assert!((points[0].test_accuracy - 0.3).abs() < 1e-12);
        assert!((points[1].test_accuracy - 0.5).abs() < 1e-12);
        assert!((points[1].epsilon - 1.0).abs() < 1e-12);

        let out_dir = tempfile::tempdir().unwrap();
        generate_report(in_dir.path(), out_dir.path()).unwrap();
        let text = fs::read_to_string(out_dir.path().join("accuracy_vs_epsilon.csv")).unwrap();
        assert!(text.starts_with("series,epsilon,test_accuracy\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn rows_are_sorted_by_series_then_epoch() {
        let in_dir = tempfile::tempdir().unwrap();
        write_epoch_log(
            &in_dir.path().join("b_seed1_epochs.csv"),
            &[row("b_alg", 1, 1, 0.1, 1.0), row("b_alg", 1, 0, 0.1, 0.0)],
        )
        .unwrap();
        write_epoch_log(
            &in_dir.path().join("a_seed1_epochs.csv"),
            &[row("a_alg", 1, 0, 0.2, 0.0)],
        )
        .unwrap();
        let points = aggregate_series(in_dir.path()).unwrap();
        let order: Vec<(String, u64)> = points.iter().map(|p| (p.series.clone(), p.epoch)).collect();
        assert_eq!(
            order,
            vec![
                ("a_alg".to_string(), 0),
                ("b_alg".to_string(), 0),
                ("b_alg".to_string(), 1)
            ]
        );
    }
}
