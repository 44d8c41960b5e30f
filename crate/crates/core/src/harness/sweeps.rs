use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{execute_on, pooled_rows, seeded, write_summary, ExperimentConfig, SummaryRow};
use crate::accounting::validate_transcript;
use crate::mechanism::{MechanismSpec, SurrogateMode, Variant};
use crate::transcript::Branch;
use crate::zo::{LossTask, TrainConfig};
use crate::{Error, Result};

pub const DEFAULT_MI_BUDGETS: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 0.33, 0.68];
pub const DEFAULT_T_RUNGS: [usize; 3] = [500, 1000, 2000];
const DECOMPOSITION_BUDGET: f64 = 0.33;

/// Seed-averaged results of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: String,
    pub budget: Option<f64>,
    pub steps: usize,
    pub dev: f64,
    pub test: f64,
    pub f: f64,
    /// Largest cumulative MI over the cell's seeds.
    pub cum_mi_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub name: String,
    pub cells: Vec<CellSummary>,
    /// Per-seed rows, followed by pooled mean and std rows per cell when there
    /// is more than one seed.
    pub rows: Vec<SummaryRow>,
    /// First transcript that failed validation, as `cell/seed: invariant`.
    pub failure: Option<String>,
}

impl SweepTable {
    /// `max − min` of the seed-averaged test metric across cells.
    pub fn spread(&self) -> f64 {
        let tests = self.cells.iter().map(|c| c.test);
        tests.clone().fold(f64::NEG_INFINITY, f64::max) - tests.fold(f64::INFINITY, f64::min)
    }

    /// Index of the cell with the best seed-averaged dev metric (earliest on ties).
    pub fn best_cell(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, c) in self.cells.iter().enumerate() {
            if best.is_none_or(|b| c.dev > self.cells[b].dev) {
                best = Some(i);
            }
        }
        best
    }

    /// Test metric of every cell minus that of the best-dev cell.
    pub fn drift_from_best(&self) -> Vec<f64> {
        match self.best_cell() {
            Some(b) => self.cells.iter().map(|c| c.test - self.cells[b].test).collect(),
            None => Vec::new(),
        }
    }

    pub fn cell(&self, label: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.label == label)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_summary(path, &self.rows)
    }
}

struct Cell {
    label: String,
    spec: MechanismSpec,
    train: TrainConfig,
}

fn summarize(label: &str, rows: &[SummaryRow]) -> CellSummary {
    let n = rows.len() as f64;
    let mean = |f: fn(&SummaryRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    CellSummary {
        label: label.to_string(),
        budget: rows[0].budget,
        steps: rows[0].steps,
        dev: mean(|r| r.dev),
        test: mean(|r| r.test),
        f: mean(|r| r.f),
        cum_mi_max: rows.iter().map(|r| r.cum_mi).fold(0.0, f64::max),
    }
}

fn assemble(name: &str, labels: &[String], grouped: Vec<Vec<SummaryRow>>, failure: Option<String>) -> SweepTable {
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (label, group) in labels.iter().zip(grouped) {
        cells.push(summarize(label, &group));
        let pooled = (group.len() > 1).then(|| pooled_rows(&group));
        rows.extend(group);
        rows.extend(pooled.into_iter().flatten());
    }
    SweepTable { name: name.to_string(), cells, rows, failure }
}

fn run_cells(name: &str, config: &ExperimentConfig, cells: Vec<Cell>, dir: Option<&Path>) -> Result<SweepTable> {
    config.validate()?;
    let task = config.task.build()?;
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| config.seeds.iter().map(move |&s| (c, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(c, seed)| -> Result<(SummaryRow, Option<String>)> {
            let cell = &cells[c];
            let train = seeded(&cell.train, seed);
            let run = execute_on(task.as_ref(), &config.task, &train, &cell.spec, seed, &mut |_, _| {})?;
            if let Some(dir) = dir {
                let sub = dir.join(&cell.label);
                std::fs::create_dir_all(&sub)?;
                run.transcript.save(&sub.join(format!("transcript-seed{seed}.jsonl")))?;
            }
            let report = validate_transcript(&run.transcript);
            let failure = report.violation.map(|v| format!("{}/seed{seed}: {}", cell.label, v.invariant));
            let mut row = run.summary_row(seed);
            row.variant = cell.label.clone();
            Ok((row, failure))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_cell = config.seeds.len();
    let failure = results.iter().find_map(|(_, f)| f.clone());
    let grouped: Vec<Vec<SummaryRow>> =
        results.chunks(per_cell).map(|chunk| chunk.iter().map(|(r, _)| r.clone()).collect()).collect();
    let labels: Vec<String> = cells.iter().map(|c| c.label.clone()).collect();
    let table = assemble(name, &labels, grouped, failure);
    if let Some(dir) = dir {
        table.write_csv(&dir.join("summary.csv"))?;
    }
    Ok(table)
}

fn with_variant(base: &MechanismSpec, variant: Variant) -> MechanismSpec {
    MechanismSpec { variant, ..*base }
}

/// The same recipe at each total MI budget.
pub fn sweep_mi_plateau(config: &ExperimentConfig, budgets: &[f64], dir: Option<&Path>) -> Result<SweepTable> {
    if budgets.is_empty() {
        return Err(Error::config("budgets", "at least one budget is required"));
    }
    let cells = budgets
        .iter()
        .map(|&b| Cell {
            label: format!("paczero_mi@{b}"),
            spec: with_variant(&config.mechanism, Variant::PaczeroMi { mi_total: b }),
            train: config.train.clone(),
        })
        .collect();
    run_cells("sweep-mi", config, cells, dir)
}

/// The configured variant with `k` directions per step, for each `k`.
pub fn sweep_k(config: &ExperimentConfig, ks: &[usize], dir: Option<&Path>) -> Result<SweepTable> {
    if ks.is_empty() {
        return Err(Error::config("k", "at least one value is required"));
    }
    let label = config.mechanism.variant.label();
    let cells = ks
        .iter()
        .map(|&k| Cell { label: format!("{label}@k{k}"), spec: config.mechanism.with_k(k), train: config.train.clone() })
        .collect();
    run_cells("sweep-k", config, cells, dir)
}

/// All five surrogates, the MI variant and the ZPL variant on one recipe.
///
/// The MI row uses the configured budget when the config names the MI
/// variant, and 0.33 nats otherwise.
pub fn sweep_decomposition(config: &ExperimentConfig, dir: Option<&Path>) -> Result<SweepTable> {
    let budget = match config.mechanism.variant {
        Variant::PaczeroMi { mi_total } => mi_total,
        _ => DECOMPOSITION_BUDGET,
    };
    let mut variants: Vec<Variant> = SurrogateMode::ALL.iter().map(|&mode| Variant::Surrogate { mode }).collect();
    variants.push(Variant::PaczeroMi { mi_total: budget });
    variants.push(Variant::PaczeroZpl);
    let cells = variants
        .into_iter()
        .map(|v| Cell { label: v.label(), spec: with_variant(&config.mechanism, v), train: config.train.clone() })
        .collect();
    run_cells("sweep-decomp", config, cells, dir)
}

/// Evaluates one trajectory per seed at each rung.
///
/// Variants without a budget do not depend on `T`, so a single run of the
/// largest rung is observed at every rung. The MI variant spreads its budget
/// over `T` and is rerun per rung.
pub fn sweep_t_ladder(config: &ExperimentConfig, rungs: &[usize], dir: Option<&Path>) -> Result<SweepTable> {
    if rungs.is_empty() || rungs.windows(2).any(|w| w[0] >= w[1]) || rungs[0] == 0 {
        return Err(Error::config("rungs", "must be a nonempty strictly ascending list of positive step counts"));
    }
    if let Variant::PaczeroMi { .. } = config.mechanism.variant {
        let cells = rungs
            .iter()
            .map(|&t| Cell {
                label: format!("T{t}"),
                spec: config.mechanism,
                train: TrainConfig { steps: t, ..config.train.clone() },
            })
            .collect();
        return run_cells("sweep-t", config, cells, dir);
    }

    config.validate()?;
    let task = config.task.build()?;
    let longest = *rungs.last().expect("nonempty");
    let train = TrainConfig { steps: longest, ..config.train.clone() };
    let per_seed = config
        .seeds
        .par_iter()
        .map(|&seed| -> Result<(Vec<SummaryRow>, Option<String>)> {
            let train = seeded(&train, seed);
            let start = Instant::now();
            let mut snapshots = Vec::new();
            let task_ref: &dyn LossTask = task.as_ref();
            let run = execute_on(task_ref, &config.task, &train, &config.mechanism, seed, &mut |t, theta| {
                if rungs.contains(&t) {
                    let point = (t, task_ref.dev_metric(theta), task_ref.eval_metric(theta), start.elapsed());
                    snapshots.push(point);
                }
            })?;
            if let Some(dir) = dir {
                std::fs::create_dir_all(dir)?;
                run.transcript.save(&dir.join(format!("transcript-seed{seed}.jsonl")))?;
            }
            let failure = validate_transcript(&run.transcript)
                .violation
                .map(|v| format!("T{longest}/seed{seed}: {}", v.invariant));
            let k = config.mechanism.k;
            let rows = snapshots
                .into_iter()
                .map(|(t, dev, test, elapsed)| {
                    let prefix = &run.transcript.records[..t * k];
                    let free = prefix.iter().filter(|r| r.branch == Branch::Unanimity).count();
                    SummaryRow {
                        variant: format!("T{t}"),
                        budget: None,
                        steps: t,
                        seed: seed.to_string(),
                        dev,
                        test,
                        f: free as f64 / prefix.len() as f64,
                        cum_mi: prefix.last().map_or(0.0, |r| r.cumulative_mi),
                        wallclock: elapsed.as_secs_f64(),
                    }
                })
                .collect();
            Ok((rows, failure))
        })
        .collect::<Result<Vec<_>>>()?;

    let failure = per_seed.iter().find_map(|(_, f)| f.clone());
    let grouped: Vec<Vec<SummaryRow>> =
        (0..rungs.len()).map(|i| per_seed.iter().map(|(rows, _)| rows[i].clone()).collect()).collect();
    let labels: Vec<String> = rungs.iter().map(|t| format!("T{t}")).collect();
    let table = assemble("sweep-t", &labels, grouped, failure);
    if let Some(dir) = dir {
        table.write_csv(&dir.join("summary.csv"))?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zo::TaskSpec;

    fn small(spec: MechanismSpec) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            TaskSpec::SeparableBlobs { seed: 0, records: 32 },
            spec.with_subsets(8),
            TrainConfig { steps: 20, ..Default::default() },
        );
        c.seeds = vec![0, 1];
        c
    }

    #[test]
    fn decomposition_has_seven_rows() {
        let t = sweep_decomposition(&small(MechanismSpec::paczero_zpl()), None).unwrap();
        assert_eq!(t.cells.len(), 7);
        assert_eq!(t.rows.len(), 7 * 4);
        assert!(t.cell("random_sign").is_some());
        assert_eq!(t.cell("paczero_mi").unwrap().budget, Some(0.33));
        assert!(t.failure.is_none());
    }

    #[test]
    fn single_budget_matches_a_plain_run() {
        let config = small(MechanismSpec::paczero_mi(0.1));
        let t = sweep_mi_plateau(&config, &[0.1], None).unwrap();
        assert_eq!(t.cells.len(), 1);
        let run = super::super::execute(&config.task, &seeded(&config.train, 0), &config.mechanism, 0).unwrap();
        assert_eq!(t.rows[0].test, run.output.test_metric());
        assert_eq!(t.rows[0].cum_mi, run.transcript.cumulative_mi());
        assert_eq!(t.spread(), 0.0);
    }

    #[test]
    fn ladder_reads_one_trajectory() {
        let config = small(MechanismSpec::paczero_zpl());
        let t = sweep_t_ladder(&config, &[5, 10, 20], None).unwrap();
        assert_eq!(t.cells.iter().map(|c| c.steps).collect::<Vec<_>>(), vec![5, 10, 20]);
        let single = sweep_t_ladder(&config, &[20], None).unwrap();
        assert_eq!(single.cells[0].test, t.cells[2].test);
        assert!(sweep_t_ladder(&config, &[10, 5], None).is_err());
        assert_eq!(t.drift_from_best()[t.best_cell().unwrap()], 0.0);
    }

    #[test]
    fn ladder_reruns_the_budgeted_variant() {
        let t = sweep_t_ladder(&small(MechanismSpec::paczero_mi(0.2)), &[5, 10], None).unwrap();
        assert_eq!(t.cells.len(), 2);
        assert!(t.cells.iter().all(|c| c.cum_mi_max <= 0.2));
    }

    #[test]
    fn k_sweep_labels() {
        let t = sweep_k(&small(MechanismSpec::paczero_mi(0.1)), &[1, 2], None).unwrap();
        assert_eq!(t.cells[1].label, "paczero_mi@k2");
        assert!(t.failure.is_none());
    }
}
