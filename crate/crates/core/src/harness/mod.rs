//! Experiment driver: configuration, single runs, sweeps and reports.
//!
//! Every run writes its transcript as line-delimited JSON, a validator report,
//! and one row of a summary CSV. Output goes under the configured directory,
//! or under `$PACZERO_OUTPUT_ROOT` when that variable is set.

mod bounds;
mod config;
mod summary;
mod sweeps;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use bounds::{report_bounds, BoundsRow, BoundsTable, DISCLAIMER};
pub use config::ExperimentConfig;
pub use summary::{pooled_rows, write_summary, SummaryRow, SUMMARY_COLUMNS};
pub use sweeps::{
    sweep_decomposition, sweep_k, sweep_mi_plateau, sweep_t_ladder, SweepTable, DEFAULT_MI_BUDGETS, DEFAULT_T_RUNGS,
};

use crate::accounting::{validate_transcript, ValidationReport};
use crate::mechanism::{build_balanced_design, sample_secret, MechanismSpec, SubsetDesign};
use crate::transcript::{Transcript, TranscriptHeader, FORMAT};
use crate::zo::{train_observed, LossTask, ParameterVector, TaskSpec, TrainConfig, TrainOutput};
use crate::Result;

/// Environment variable that replaces the output root of every command.
pub const OUTPUT_ROOT_ENV: &str = "PACZERO_OUTPUT_ROOT";

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub transcript: Transcript,
    pub output: TrainOutput,
    pub design: SubsetDesign,
    pub secret: usize,
    pub wallclock: f64,
}

impl RunArtifacts {
    pub fn summary_row(&self, seed: u64) -> SummaryRow {
        let header = &self.transcript.header;
        SummaryRow {
            variant: header.mechanism.variant.label(),
            budget: header.mechanism.variant.mi_total(),
            steps: header.train.steps,
            seed: seed.to_string(),
            dev: self.output.dev_metric(),
            test: self.output.test_metric(),
            f: self.transcript.unanimity_fraction(),
            cum_mi: self.transcript.cumulative_mi(),
            wallclock: self.wallclock,
        }
    }
}

/// Trains once on a fresh design drawn from `design_seed`.
pub fn execute(task: &TaskSpec, train: &TrainConfig, spec: &MechanismSpec, design_seed: u64) -> Result<RunArtifacts> {
    let built = task.build()?;
    execute_on(built.as_ref(), task, train, spec, design_seed, &mut |_, _| {})
}

/// [`execute`] on an already built task, with a per-step observer.
pub fn execute_on(
    task: &dyn LossTask,
    task_spec: &TaskSpec,
    train: &TrainConfig,
    spec: &MechanismSpec,
    design_seed: u64,
    observer: &mut dyn FnMut(usize, &ParameterVector),
) -> Result<RunArtifacts> {
    spec.validate()?;
    let start = Instant::now();
    let m = spec.num_subsets();
    let design = build_balanced_design(task.num_records(), m, design_seed)?;
    let secret = sample_secret(m, design_seed);
    let output = train_observed(task, train, spec, &design, secret, observer)?;
    let header = TranscriptHeader {
        format: FORMAT.to_string(),
        task: task_spec.clone(),
        mechanism: *spec,
        train: train.clone(),
        design_seed,
        design_hash: design.content_hash(),
        num_records: design.num_records(),
        num_subsets: m,
        private: spec.variant.is_private(),
    };
    let transcript = Transcript::new(header, output.records.clone());
    Ok(RunArtifacts { transcript, output, design, secret, wallclock: start.elapsed().as_secs_f64() })
}

/// The output directory: `$PACZERO_OUTPUT_ROOT` if set, else `configured`,
/// else `runs`.
pub fn output_root(configured: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root),
        _ => configured.map_or_else(|| PathBuf::from("runs"), Path::to_path_buf),
    }
}

/// One replication of a [`run`].
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub transcript_path: PathBuf,
    pub row: SummaryRow,
    pub validation: ValidationReport,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub seeds: Vec<SeedOutcome>,
    pub rows: Vec<SummaryRow>,
}

impl RunReport {
    /// The first replication whose transcript failed validation.
    pub fn first_failure(&self) -> Option<&SeedOutcome> {
        self.seeds.iter().find(|s| !s.validation.passed())
    }
}

/// Per-seed configuration: the seed drives directions, mechanism noise and
/// the design; the task data stay fixed.
pub(crate) fn seeded(train: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..train.clone() }
}

/// Runs every replication, writing transcripts, validator reports and
/// `summary.csv` (with pooled mean and std rows) into `dir`.
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    config.validate()?;
    std::fs::create_dir_all(dir)?;
    let task = config.task.build()?;
    let label = config.mechanism.variant.label();
    let seeds = config
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedOutcome> {
            let train = seeded(&config.train, seed);
            let run = execute_on(task.as_ref(), &config.task, &train, &config.mechanism, seed, &mut |_, _| {})?;
            let transcript_path = dir.join(format!("transcript-{label}-seed{seed}.jsonl"));
            run.transcript.save(&transcript_path)?;
            let validation = validate_transcript(&run.transcript);
            std::fs::write(dir.join(format!("validation-{label}-seed{seed}.txt")), format!("{validation}\n"))?;
            std::fs::write(dir.join(format!("validation-{label}-seed{seed}.json")), validation.to_json())?;
            Ok(SeedOutcome { seed, transcript_path, row: run.summary_row(seed), validation })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<SummaryRow> = seeds.iter().map(|s| s.row.clone()).collect();
    if rows.len() > 1 {
        rows.extend(pooled_rows(&rows));
    }
    write_summary(&dir.join("summary.csv"), &rows)?;
    Ok(RunReport { dir: dir.to_path_buf(), seeds, rows })
}
