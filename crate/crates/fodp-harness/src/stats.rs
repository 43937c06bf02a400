//! Multi-seed summary statistics: mean, sample standard deviation, and the
//! Student's-t 95% confidence interval `mean +- t_{0.975, n-1} * s / sqrt(n)`.
//!
//! The t quantile comes from the inverse CDF of the Student's-t distribution
//! (statrs). With fewer than two seeds the interval is undefined; those rows
//! carry the mean only and a warning is emitted.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::logio::FinalRow;

pub const SUMMARY_HEADER: &str = "algorithm,metric,n,mean,std,ci_low,ci_high";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub metric: &'static str,
    pub n: usize,
    pub mean: f64,
    pub std: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Two-sided 95% Student's-t quantile for `df` degrees of freedom.
pub fn student_t_quantile(p: f64, df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("valid degrees of freedom")
        .inverse_cdf(p)
}

/// Mean / sample std / t-interval of a sample. Returns `(mean, None, None)`
/// when the sample has fewer than two points.
pub fn t_interval(values: &[f64]) -> (f64, Option<f64>, Option<(f64, f64)>) {
    assert!(!values.is_empty(), "t_interval needs at least one value");
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let t = student_t_quantile(0.975, n - 1);
    let half_width = t * std / (n as f64).sqrt();
    (mean, Some(std), Some((mean - half_width, mean + half_width)))
}

/// Per-algorithm summaries of the final-row metrics, sorted by algorithm
/// name. Output is a pure function of the input rows.
pub fn summarize(finals: &[FinalRow]) -> Vec<SummaryRow> {
    let mut algorithms: Vec<String> = finals.iter().map(|r| r.algorithm.clone()).collect();
    algorithms.sort();
    algorithms.dedup();

    let metrics: [(&'static str, fn(&FinalRow) -> f64); 4] = [
        ("final_accuracy", |r| r.final_accuracy),
        ("best_accuracy", |r| r.best_accuracy),
        ("final_loss", |r| r.final_loss),
        ("final_epsilon", |r| r.final_epsilon),
    ];

    let mut rows = Vec::new();
    for algorithm in &algorithms {
        let group: Vec<&FinalRow> = finals
            .iter()
            .filter(|r| &r.algorithm == algorithm)
            .collect();
        for (metric, extract) in metrics {
            let values: Vec<f64> = group.iter().map(|r| extract(r)).collect();
            let (mean, std, ci) = t_interval(&values);
            if std.is_none() {
                eprintln!(
                    "warning: {algorithm}/{metric} has {} seed(s); confidence interval omitted",
                    values.len()
                );
            }
            rows.push(SummaryRow {
                algorithm: algorithm.clone(),
                metric,
                n: values.len(),
                mean,
                std,
                ci_low: ci.map(|c| c.0),
                ci_high: ci.map(|c| c.1),
            });
        }
    }
    rows
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm,
            r.metric,
            r.n,
            r.mean,
            fmt(r.std),
            fmt(r.ci_low),
            fmt(r.ci_high)
        ));
    }
    out
}
