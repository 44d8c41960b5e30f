//! A Bayes-optimal membership-inference adversary.
//!
//! The adversary knows the task, the design and the public seed. It replays
//! the run from the transcript: directions are regenerated, the parameter
//! trajectory follows from the released values, and every noisy
//! disagreement release updates its posterior over the secret subset exactly
//! as the mechanism did. It observes the unquantized value `ỹ`, which is the
//! strongest view the guarantee covers.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::mia_posterior_bound;
use crate::harness::execute_on;
use crate::mechanism::{agreement_probability, subset_signs, Posterior, SubsetDesign, Variant};
use crate::rng::{self, Stream};
use crate::transcript::{Branch, Transcript};
use crate::zo::{per_sample_scalars, step_directions, update_params, LossTask, ParameterVector, TaskSpec, TrainConfig};
use crate::{Error, Result};

/// `P(i ∈ S_{j*})` within this of 1/2 counts as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;
pub const MIN_TRIALS: usize = 100;

/// The adversary's view at the end of a transcript.
#[derive(Debug, Clone)]
pub struct Replay {
    pub posterior: Posterior,
    pub params: ParameterVector,
    /// Largest `|q⁺|` gap between the replay and the transcript.
    pub max_q_gap: f64,
}

/// Rebuilds the task named in the header and replays the transcript.
pub fn replay_posterior(transcript: &Transcript, design: &SubsetDesign) -> Result<Replay> {
    let task = transcript.header.task.build()?;
    replay_on(task.as_ref(), transcript, design)
}

/// [`replay_posterior`] on an already built task.
pub fn replay_on(task: &dyn LossTask, transcript: &Transcript, design: &SubsetDesign) -> Result<Replay> {
    let header = &transcript.header;
    if design.content_hash() != header.design_hash {
        return Err(Error::Schema("design does not match the transcript's design hash".into()));
    }
    if design.num_records() != task.num_records() {
        return Err(Error::Dimension { expected: task.num_records(), got: design.num_records() });
    }
    let k_total = header.mechanism.k;
    let records = &transcript.records;
    if records.len() % k_total != 0 || records.len() > header.train.steps * k_total {
        return Err(Error::Schema(format!("{} records do not form whole steps of {k_total}", records.len())));
    }
    let clip = header.mechanism.clip_value();
    let seed = header.train.seed;
    let mut posterior = Posterior::uniform(design.num_subsets());
    let mut theta = task.initial_params();
    let mut max_q_gap: f64 = 0.0;

    for (step, chunk) in records.chunks(k_total).enumerate() {
        let t = step + 1;
        let directions = step_directions(seed, k_total, t, task.dim());
        let mut values = Vec::with_capacity(k_total);
        for (z, r) in directions.iter().zip(chunk) {
            if (r.t, r.k) != (t, values.len()) {
                return Err(Error::Schema(format!("record (t={}, k={}) out of order", r.t, r.k)));
            }
            let scalars = per_sample_scalars(task, &theta, z, header.train.smoothing)?;
            let signs = subset_signs(&scalars, design, clip)?;
            max_q_gap = max_q_gap.max((agreement_probability(&posterior, &signs) - r.q_plus).abs());
            if r.branch == Branch::Disagreement {
                let (Some(y), Some(sigma)) = (r.pre_quant_release, r.sigma) else {
                    return Err(Error::Schema(format!("step {t} lacks the noisy release or its noise level")));
                };
                posterior.observe_gaussian(&signs, y, sigma);
            }
            values.push(r.release);
        }
        theta = update_params(&theta, &header.train, t, &values, &directions)?;
    }
    Ok(Replay { posterior, params: theta, max_q_gap })
}

/// `P(i ∈ S_{j*})` under `posterior`.
pub fn membership_probability(posterior: &Posterior, design: &SubsetDesign, target: usize) -> f64 {
    design.memberships(target).iter().map(|&m| posterior.weights()[m]).sum()
}

/// Guesses "member" iff `P(i ∈ S_{j*}) ≥ 1/2`; ties count as members.
pub fn membership_attack(posterior: &Posterior, design: &SubsetDesign, target: usize) -> bool {
    membership_probability(posterior, design, target) >= 0.5 - TIE_TOLERANCE
}

/// One attack on one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrial {
    pub target: usize,
    pub true_membership: bool,
    pub adversary_guess: bool,
    pub membership_probability: f64,
    /// Largest coordinate gap between replayed and mechanism posteriors.
    pub replay_gap: f64,
}

impl AttackTrial {
    pub fn success(&self) -> bool {
        self.true_membership == self.adversary_guess
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaExperiment {
    pub variant: String,
    pub mi_total: Option<f64>,
    pub trials: usize,
    pub successes: usize,
    pub empirical_rate: f64,
    /// `sqrt(0.25 / trials)`, the binomial standard error at rate 1/2.
    pub standard_error: f64,
    pub bound: f64,
    /// `bound + 3·standard_error`.
    pub threshold: f64,
    pub passed: bool,
    pub max_replay_gap: f64,
}

/// The analytic bound on attack success at prior 1/2 for a mechanism.
pub fn variant_bound(variant: &Variant) -> Result<f64> {
    match variant {
        Variant::PaczeroMi { mi_total } => mia_posterior_bound(*mi_total, 0.5),
        Variant::PaczeroZpl => Ok(0.5),
        Variant::Surrogate { .. } => Ok(1.0),
    }
}

/// Runs `trials` independent (design, secret, run, target) draws and attacks each.
pub fn empirical_mia_experiment(
    spec: &crate::mechanism::MechanismSpec,
    task_spec: &TaskSpec,
    train: &TrainConfig,
    trials: usize,
    seed: u64,
) -> Result<(MiaExperiment, Vec<AttackTrial>)> {
    if trials < MIN_TRIALS {
        return Err(Error::Precondition(format!("at least {MIN_TRIALS} trials are needed, got {trials}")));
    }
    spec.validate()?;
    train.validate()?;
    let task = task_spec.build()?;
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|trial| attack_once(task.as_ref(), task_spec, spec, train, seed, trial))
        .collect::<Result<Vec<_>>>()?;

    let successes = outcomes.iter().filter(|t| t.success()).count();
    let empirical_rate = successes as f64 / trials as f64;
    let standard_error = (0.25 / trials as f64).sqrt();
    let bound = variant_bound(&spec.variant)?;
    let threshold = bound + 3.0 * standard_error;
    let report = MiaExperiment {
        variant: spec.variant.label(),
        mi_total: spec.variant.mi_total(),
        trials,
        successes,
        empirical_rate,
        standard_error,
        bound,
        threshold,
        passed: empirical_rate <= threshold,
        max_replay_gap: outcomes.iter().map(|t| t.replay_gap).fold(0.0, f64::max),
    };
    Ok((report, outcomes))
}

fn attack_once(
    task: &dyn LossTask,
    task_spec: &TaskSpec,
    spec: &crate::mechanism::MechanismSpec,
    train: &TrainConfig,
    seed: u64,
    trial: u64,
) -> Result<AttackTrial> {
    let mut draw = rng::keyed(seed, Stream::Experiment, trial, 0);
    let design_seed: u64 = draw.random();
    let run_seed: u64 = draw.random();
    let target = draw.random_range(0..task.num_records());
    let config = TrainConfig { seed: run_seed, ..train.clone() };
    let run = execute_on(task, task_spec, &config, spec, design_seed, &mut |_, _| {})?;
    let replay = replay_on(task, &run.transcript, &run.design)?;
    let membership_probability = membership_probability(&replay.posterior, &run.design, target);
    Ok(AttackTrial {
        target,
        true_membership: run.design.contains(run.secret, target),
        adversary_guess: membership_attack(&replay.posterior, &run.design, target),
        membership_probability,
        replay_gap: replay.posterior.max_abs_diff(&run.output.posterior),
    })
}
