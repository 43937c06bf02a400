//! Run-log CSV schemas and their readers/writers.
//!
//! Two fixed schemas, one file per (algorithm, seed):
//! per-epoch rows and one final-summary row. Values are written with Rust's
//! shortest round-trip float formatting, so rereading a file reproduces the
//! numbers bit-exactly and reruns of the same config produce byte-identical
//! files except for the timing column.

use std::fs;
use std::path::Path;

use anyhow::Context;

pub const EPOCH_HEADER: &str =
    "algorithm,seed,epoch,test_accuracy,mean_loss,epsilon,elapsed_seconds";
pub const FINAL_HEADER: &str =
    "algorithm,seed,final_accuracy,best_accuracy,final_loss,final_epsilon,runtime_seconds";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub algorithm: String,
    pub seed: u64,
    pub epoch: u64,
    pub test_accuracy: f64,
    pub mean_loss: f64,
    pub epsilon: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalRow {
    pub algorithm: String,
    pub seed: u64,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub final_loss: f64,
    pub final_epsilon: f64,
    pub runtime_seconds: f64,
}

pub fn write_epoch_log(path: &Path, rows: &[EpochRow]) -> anyhow::Result<()> {
    let mut out = String::from(EPOCH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm, r.seed, r.epoch, r.test_accuracy, r.mean_loss, r.epsilon, r.elapsed_seconds
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_final_log(path: &Path, row: &FinalRow) -> anyhow::Result<()> {
    let out = format!(
        "{FINAL_HEADER}\n{},{},{},{},{},{},{}\n",
        row.algorithm,
        row.seed,
        row.final_accuracy,
        row.best_accuracy,
        row.final_loss,
        row.final_epsilon,
        row.runtime_seconds
    );
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_epoch_log(path: &Path) -> anyhow::Result<Vec<EpochRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != EPOCH_HEADER {
        anyhow::bail!("{}: unexpected header `{header}`", path.display());
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f = split_fields(line, 7, path)?;
            Ok(EpochRow {
                algorithm: f[0].to_string(),
                seed: f[1].parse()?,
                epoch: f[2].parse()?,
                test_accuracy: f[3].parse()?,
                mean_loss: f[4].parse()?,
                epsilon: f[5].parse()?,
                elapsed_seconds: f[6].parse()?,
            })
        })
        .collect()
}

pub fn read_final_log(path: &Path) -> anyhow::Result<Vec<FinalRow>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != FINAL_HEADER {
        anyhow::bail!("{}: unexpected header `{header}`", path.display());
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f = split_fields(line, 7, path)?;
            Ok(FinalRow {
                algorithm: f[0].to_string(),
                seed: f[1].parse()?,
                final_accuracy: f[2].parse()?,
                best_accuracy: f[3].parse()?,
                final_loss: f[4].parse()?,
                final_epsilon: f[5].parse()?,
                runtime_seconds: f[6].parse()?,
            })
        })
        .collect()
}

fn split_fields<'a>(line: &'a str, expected: usize, path: &Path) -> anyhow::Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != expected {
        anyhow::bail!(
            "{}: expected {expected} fields, found {} in `{line}`",
            path.display(),
            fields.len()
        );
    }
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_log_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x_epochs.csv");
        let rows = vec![
            EpochRow {
                algorithm: "fo_dp_sgd".into(),
                seed: 3,
                epoch: 0,
                test_accuracy: 0.1,
                mean_loss: 2.302585092994046,
                epsilon: 0.0,
                elapsed_seconds: 0.001,
            },
            EpochRow {
                algorithm: "fo_dp_sgd".into(),
                seed: 3,
                epoch: 1,
                test_accuracy: 0.71234567890123,
                mean_loss: 1.5,
                epsilon: 0.3333333333333333,
                elapsed_seconds: 1.25,
            },
        ];
        write_epoch_log(&path, &rows).unwrap();
        assert_eq!(read_epoch_log(&path).unwrap(), rows);
    }

    #[test]
    fn final_log_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x_final.csv");
        let row = FinalRow {
            algorithm: "dp_sgd".into(),
            seed: 9,
            final_accuracy: 0.3654,
            best_accuracy: 0.3891,
            final_loss: 1.9,
            final_epsilon: 4.75,
            runtime_seconds: 12.5,
        };
        write_final_log(&path, &row).unwrap();
        assert_eq!(read_final_log(&path).unwrap(), vec![row]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b,c\n").unwrap();
        assert!(read_epoch_log(&path).is_err());
        assert!(read_final_log(&path).is_err());
    }
}
