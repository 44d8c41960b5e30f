//! `paczero` command-line driver.
//!
//! Exit status is 0 on success, 1 on an error, and 2 when a run completes but
//! an invariant fails; the failed invariant is named on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use paczero::accounting::validate_transcript;
use paczero::adversary::empirical_mia_experiment;
use paczero::harness::{
    self, output_root, report_bounds, ExperimentConfig, SweepTable, DEFAULT_MI_BUDGETS, DEFAULT_T_RUNGS,
};
use paczero::mechanism::{MechanismSpec, SurrogateMode, Variant};
use paczero::transcript::Transcript;
use paczero::zo::{LrSchedule, TaskSpec};

#[derive(Parser)]
#[command(name = "paczero", version, about = "PAC-private zeroth-order training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once per seed; write transcripts, validator reports and summary.csv.
    Run(Common),
    /// The MI variant at several total budgets.
    SweepMi {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<f64>>,
    },
    /// Dev/test metrics at several step counts.
    SweepT {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        rungs: Option<Vec<usize>>,
    },
    /// Five surrogates, the MI variant and ZPL on one recipe.
    SweepDecomp(Common),
    /// Several directions per step.
    SweepK {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        ks: Vec<usize>,
    },
    /// Empirical membership inference against the analytic bound.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        attack_seed: u64,
    },
    /// Re-derive budgets and branches of saved transcripts.
    Validate {
        #[arg(required = true)]
        transcripts: Vec<PathBuf>,
        /// Print the machine-readable report.
        #[arg(long)]
        json: bool,
    },
    /// MI, attack-success and DP-ε reference table.
    Bounds {
        #[arg(long, value_delimiter = ',', default_value = "0,0.0078125,0.25,0.33,0.68")]
        mi: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,2,6")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long)]
        json: bool,
    },
}

/// Config file plus flag overrides shared by the experiment commands.
#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment config.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and the environment.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// separable-blobs, xor-mlp or quadratic.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    records: Option<usize>,
    #[arg(long)]
    task_seed: Option<u64>,
    /// paczero_mi, paczero_zpl, or a surrogate (raw_full, quant_full, raw_half, quant_half, random_sign).
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    mi_total: Option<f64>,
    #[arg(long)]
    subsets: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long)]
    dev_eval_interval: Option<usize>,
    #[arg(long)]
    linear_decay: bool,
    #[arg(long, alias = "pac_load_best_dev", alias = "pac-load-best-dev")]
    load_best_dev: bool,
}

fn parse_variant(name: &str, mi_total: Option<f64>) -> Result<Variant> {
    Ok(match name {
        "paczero_mi" | "paczero-mi" | "mi" => Variant::PaczeroMi { mi_total: mi_total.unwrap_or(0.33) },
        "paczero_zpl" | "paczero-zpl" | "zpl" => Variant::PaczeroZpl,
        other => match SurrogateMode::ALL.iter().find(|m| m.name() == other) {
            Some(&mode) => Variant::Surrogate { mode },
            None => bail!("unknown variant `{other}`"),
        },
    })
}

fn parse_task(name: &str, seed: u64, records: usize) -> Result<TaskSpec> {
    Ok(match name {
        "separable-blobs" => TaskSpec::SeparableBlobs { seed, records },
        "xor-mlp" => TaskSpec::XorMlp { seed, records },
        "quadratic" => TaskSpec::Quadratic { seed, records, dim: 10 },
        other => bail!("unknown task `{other}`"),
    })
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => {
                ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))?
            }
            None => ExperimentConfig::new(TaskSpec::default(), MechanismSpec::paczero_zpl(), Default::default()),
        };
        if self.task.is_some() || self.records.is_some() || self.task_seed.is_some() {
            let name = self.task.clone().unwrap_or_else(|| c.task.name().to_string());
            let seed = self.task_seed.unwrap_or(0);
            c.task = parse_task(&name, seed, self.records.unwrap_or(c.task.num_records()))?;
        }
        if let Some(v) = &self.variant {
            c.mechanism.variant = parse_variant(v, self.mi_total)?;
        } else if let Some(b) = self.mi_total {
            c.mechanism.variant = Variant::PaczeroMi { mi_total: b };
        }
        if let Some(m) = self.subsets {
            c.mechanism.subsets = Some(m);
        }
        if let Some(k) = self.k {
            c.mechanism.k = k;
        }
        if let Some(clip) = self.clip {
            c.mechanism = c.mechanism.with_clip(clip);
        }
        let t = &mut c.train;
        if let Some(v) = self.steps {
            t.steps = v;
        }
        if let Some(v) = self.learning_rate {
            t.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            t.weight_decay = v;
        }
        if let Some(v) = self.smoothing {
            t.smoothing = v;
        }
        if let Some(v) = self.dev_eval_interval {
            t.dev_eval_interval = v;
        }
        if self.linear_decay {
            t.lr_schedule = LrSchedule::Linear;
        }
        if self.load_best_dev {
            t.load_best_dev = true;
        }
        if let Some(s) = &self.seeds {
            c.seeds = s.clone();
        }
        c.validate()?;
        Ok(c)
    }

    fn dir(&self, config: &ExperimentConfig, leaf: &str) -> PathBuf {
        match &self.out {
            Some(out) => out.clone(),
            None => output_root(config.output_dir.as_deref()).join(leaf),
        }
    }
}

enum Outcome {
    Pass,
    Fail(String),
}

fn print_sweep(table: &SweepTable, dir: &Path) -> Outcome {
    println!("{:<22} {:>10} {:>6} {:>7} {:>7} {:>7} {:>10}", "cell", "budget", "T", "dev", "test", "f", "max_cum_mi");
    for c in &table.cells {
        let budget = c.budget.map_or_else(|| "-".to_string(), |b| format!("{b}"));
        println!(
            "{:<22} {:>10} {:>6} {:>7.4} {:>7.4} {:>7.4} {:>10.4e}",
            c.label, budget, c.steps, c.dev, c.test, c.f, c.cum_mi_max
        );
    }
    println!("test spread: {:.4}", table.spread());
    println!("summary: {}", dir.join("summary.csv").display());
    match &table.failure {
        Some(f) => Outcome::Fail(f.clone()),
        None => Outcome::Pass,
    }
}

fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Run(common) => {
            let config = common.config()?;
            let dir = common.dir(&config, &format!("run-{}", config.mechanism.variant.label()));
            let report = harness::run(&config, &dir)?;
            for s in &report.seeds {
                println!(
                    "seed {:>4}: test {:.4} dev {:.4} f {:.4} cum_mi {:.6e} [{}]",
                    s.seed,
                    s.row.test,
                    s.row.dev,
                    s.row.f,
                    s.row.cum_mi,
                    if s.validation.passed() { "valid" } else { "INVALID" }
                );
            }
            println!("summary: {}", dir.join("summary.csv").display());
            Ok(match report.first_failure() {
                Some(s) => {
                    let v = s.validation.violation.as_ref().expect("failed report has a violation");
                    Outcome::Fail(format!("{} (seed {}, t={})", v.invariant, s.seed, v.t))
                }
                None => Outcome::Pass,
            })
        }
        Command::SweepMi { common, budgets } => {
            let config = common.config()?;
            let dir = common.dir(&config, "sweep-mi");
            let budgets = budgets.unwrap_or_else(|| DEFAULT_MI_BUDGETS.to_vec());
            let table = harness::sweep_mi_plateau(&config, &budgets, Some(&dir))?;
            Ok(print_sweep(&table, &dir))
        }
        Command::SweepT { common, rungs } => {
            let config = common.config()?;
            let dir = common.dir(&config, "sweep-t");
            let rungs = rungs.unwrap_or_else(|| DEFAULT_T_RUNGS.to_vec());
            let table = harness::sweep_t_ladder(&config, &rungs, Some(&dir))?;
            let outcome = print_sweep(&table, &dir);
            if let Some(best) = table.best_cell() {
                println!("best rung: {}", table.cells[best].label);
                for (c, d) in table.cells.iter().zip(table.drift_from_best()) {
                    println!("  drift {:<8} {:+.4}", c.label, d);
                }
            }
            Ok(outcome)
        }
        Command::SweepDecomp(common) => {
            let config = common.config()?;
            let dir = common.dir(&config, "sweep-decomp");
            let table = harness::sweep_decomposition(&config, Some(&dir))?;
            Ok(print_sweep(&table, &dir))
        }
        Command::SweepK { common, ks } => {
            let config = common.config()?;
            let dir = common.dir(&config, "sweep-k");
            let table = harness::sweep_k(&config, &ks, Some(&dir))?;
            Ok(print_sweep(&table, &dir))
        }
        Command::Attack { common, trials, attack_seed } => {
            let config = common.config()?;
            let dir = common.dir(&config, "attack");
            let (report, _) =
                empirical_mia_experiment(&config.mechanism, &config.task, &config.train, trials, attack_seed)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("attack.json"), serde_json::to_string_pretty(&report)?)?;
            println!(
                "{}: rate {:.4} over {} trials, bound {:.4}, threshold {:.4}",
                report.variant, report.empirical_rate, report.trials, report.bound, report.threshold
            );
            if !report.passed {
                return Ok(Outcome::Fail("bound-soundness".into()));
            }
            if matches!(config.mechanism.variant, Variant::PaczeroZpl)
                && (report.empirical_rate - 0.5).abs() > 3.0 * report.standard_error
            {
                return Ok(Outcome::Fail("zpl-prior-collapse".into()));
            }
            Ok(Outcome::Pass)
        }
        Command::Validate { transcripts, json } => {
            let mut first = None;
            for path in &transcripts {
                let t = Transcript::load(path).with_context(|| format!("reading {}", path.display()))?;
                let report = validate_transcript(&t);
                println!("== {}", path.display());
                if json {
                    println!("{}", report.to_json());
                } else {
                    println!("{report}");
                }
                if let (None, Some(v)) = (&first, &report.violation) {
                    first = Some(format!("{} ({}, t={})", v.invariant, path.display(), v.t));
                }
            }
            Ok(first.map_or(Outcome::Pass, Outcome::Fail))
        }
        Command::Bounds { mi, eps, delta, json } => {
            let table = report_bounds(&mi, &eps, delta)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                println!("{table}");
            }
            Ok(Outcome::Pass)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1 so that 2 always means a failed invariant.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(invariant)) => {
            eprintln!("invariant failed: {invariant}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
