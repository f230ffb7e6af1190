//! Aggregation and formatting of experiment results.

use std::fmt::Write;

use super::data::DOMAIN_NAMES;
use super::train::Metrics;

pub const METRICS_CSV_HEADER: &str = "config,seed,held_out_domain,accuracy";
pub const ABLATION_CSV_HEADER: &str = "config,mean,std,seeds";

/// Mean and sample standard deviation of per-seed mean held-out accuracy.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub config: String,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
    /// Mean accuracy per held-out domain, averaged over seeds.
    pub per_domain: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Groups metrics by configuration name, keeping first-seen order.
pub fn ablation_rows(metrics: &[Metrics]) -> Vec<AblationRow> {
    let mut names: Vec<&str> = vec![];
    for m in metrics {
        if !names.contains(&m.config.as_str()) {
            names.push(&m.config);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let runs: Vec<&Metrics> = metrics.iter().filter(|m| m.config == name).collect();
            let per_seed: Vec<f64> = runs.iter().map(|m| m.mean_held_out_accuracy()).collect();
            let (mean, std) = mean_std(&per_seed);
            let domains = runs.iter().map(|m| m.folds.len()).max().unwrap_or(0);
            let per_domain = (0..domains)
                .map(|d| {
                    let vals: Vec<f64> = runs
                        .iter()
                        .flat_map(|m| m.folds.iter().filter(|f| f.held_out_domain == d))
                        .map(|f| f.held_out_accuracy)
                        .collect();
                    mean_std(&vals).0
                })
                .collect();
            AblationRow {
                config: name.to_string(),
                mean,
                std,
                seeds: runs.len(),
                per_domain,
            }
        })
        .collect()
}

/// One line per fold: `config,seed,held_out_domain,accuracy`.
pub fn metrics_csv(metrics: &[Metrics]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for m in metrics {
        for f in &m.folds {
            let _ = writeln!(
                out,
                "{},{},{},{:.6}",
                m.config, m.seed, DOMAIN_NAMES[f.held_out_domain], f.held_out_accuracy
            );
        }
    }
    out
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(ABLATION_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6},{}", r.config, r.mean, r.std, r.seeds);
    }
    out
}

/// Fixed-width table in percent, one column per held-out domain.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = format!("{:<10}", "config");
    for name in DOMAIN_NAMES {
        let _ = write!(out, " {name:>9}");
    }
    let _ = writeln!(out, " {:>16}", "avg (mean±std)");
    for r in rows {
        let _ = write!(out, "{:<10}", r.config);
        for v in &r.per_domain {
            let _ = write!(out, " {:>9.2}", 100.0 * v);
        }
        let _ = writeln!(out, " {:>9.2} ± {:<4.2}", 100.0 * r.mean, 100.0 * r.std);
    }
    out
}
