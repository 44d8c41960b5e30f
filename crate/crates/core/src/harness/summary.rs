use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Result;

pub const SUMMARY_COLUMNS: [&str; 9] = ["variant", "budget", "T", "seed", "dev", "test", "f", "cum_mi", "wallclock"];

/// One line of a summary CSV. Pooled rows carry `mean` or `std` as the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    /// Total MI budget; empty for variants without one.
    pub budget: Option<f64>,
    #[serde(rename = "T")]
    pub steps: usize,
    pub seed: String,
    pub dev: f64,
    pub test: f64,
    pub f: f64,
    pub cum_mi: f64,
    pub wallclock: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample standard deviation (`n − 1` denominator) over `rows`.
pub fn pooled_rows(rows: &[SummaryRow]) -> [SummaryRow; 2] {
    let first = &rows[0];
    let stat = |f: fn(&SummaryRow) -> f64| mean_std(rows.iter().map(f));
    let (dev, test, frac, mi, wall) =
        (stat(|r| r.dev), stat(|r| r.test), stat(|r| r.f), stat(|r| r.cum_mi), stat(|r| r.wallclock));
    let make = |seed: &str, pick: fn((f64, f64)) -> f64| SummaryRow {
        variant: first.variant.clone(),
        budget: first.budget,
        steps: first.steps,
        seed: seed.to_string(),
        dev: pick(dev),
        test: pick(test),
        f: pick(frac),
        cum_mi: pick(mi),
        wallclock: pick(wall),
    };
    [make("mean", |s| s.0), make("std", |s| s.1)]
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(SUMMARY_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
