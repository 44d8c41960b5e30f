//! The outer loop shared by every mechanism variant.

use serde::{Deserialize, Serialize};

use super::{apply_update, per_sample_scalars, LossTask, ParameterVector, TrainConfig};
use crate::mechanism::{BudgetLedger, Mechanism, MechanismSpec, Posterior, SubsetDesign};
use crate::rng;
use crate::transcript::StepRecord;
use crate::{Error, Result};

/// One development-set evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevPoint {
    pub step: usize,
    pub dev: f64,
    pub test: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Dev-best parameters under `load_best_dev`, the final ones otherwise.
    pub params: ParameterVector,
    pub final_params: ParameterVector,
    pub records: Vec<StepRecord>,
    pub posterior: Posterior,
    pub ledger: BudgetLedger,
    pub evaluations: Vec<DevPoint>,
    pub best: Option<DevPoint>,
}

impl TrainOutput {
    /// Test metric of the returned parameters.
    pub fn test_metric(&self) -> f64 {
        match (self.best, self.evaluations.last()) {
            (Some(best), _) if self.params != self.final_params => best.test,
            (_, Some(last)) => last.test,
            _ => f64::NAN,
        }
    }

    pub fn dev_metric(&self) -> f64 {
        match (self.best, self.evaluations.last()) {
            (Some(best), _) if self.params != self.final_params => best.dev,
            (_, Some(last)) => last.dev,
            _ => f64::NAN,
        }
    }
}

/// The `K` public directions of step `t`.
pub(crate) fn step_directions(seed: u64, k: usize, t: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..k).map(|j| rng::direction(seed, t, j, dim)).collect()
}

/// `θ ← (1 − η_tλ)θ − η_t·Σ_k (y_k/K)·z_k`.
pub(crate) fn update_params(
    theta: &ParameterVector,
    config: &TrainConfig,
    t: usize,
    values: &[f64],
    directions: &[Vec<f64>],
) -> Result<ParameterVector> {
    let eta = config.learning_rate_at(t);
    if let ([y], [z]) = (values, directions) {
        return apply_update(theta, eta, config.weight_decay, *y, z);
    }
    if values.len() != directions.len() || values.is_empty() {
        return Err(Error::Dimension { expected: directions.len(), got: values.len() });
    }
    let k = values.len() as f64;
    let mut v = vec![0.0; theta.dim()];
    for (y, z) in values.iter().zip(directions) {
        for (acc, zi) in v.iter_mut().zip(z) {
            *acc += y / k * zi;
        }
    }
    apply_update(theta, eta, config.weight_decay, 1.0, &v)
}

/// Runs `config.steps` private steps against the secret candidate `secret`.
pub fn train(
    task: &dyn LossTask,
    config: &TrainConfig,
    spec: &MechanismSpec,
    design: &SubsetDesign,
    secret: usize,
) -> Result<TrainOutput> {
    train_observed(task, config, spec, design, secret, &mut |_, _| {})
}

/// [`train`], calling `observer(t, θ_t)` after every update.
pub fn train_observed(
    task: &dyn LossTask,
    config: &TrainConfig,
    spec: &MechanismSpec,
    design: &SubsetDesign,
    secret: usize,
    observer: &mut dyn FnMut(usize, &ParameterVector),
) -> Result<TrainOutput> {
    config.validate()?;
    if design.num_records() != task.num_records() {
        return Err(Error::Dimension { expected: task.num_records(), got: design.num_records() });
    }
    let mut mechanism = Mechanism::new(*spec, design, secret, config.seed)?;
    let total = config.steps;
    let dim = task.dim();
    let mut theta = task.initial_params();
    let mut evaluations = Vec::new();
    let mut best: Option<(DevPoint, ParameterVector)> = None;

    for t in 1..=total {
        let directions = step_directions(config.seed, spec.k, t, dim);
        let scalars = directions
            .iter()
            .map(|z| per_sample_scalars(task, &theta, z, config.smoothing))
            .collect::<Result<Vec<_>>>()?;
        let values = mechanism.release(t, total, &scalars)?;
        theta = update_params(&theta, config, t, &values, &directions)?;
        observer(t, &theta);

        if t % config.dev_eval_interval == 0 || t == total {
            let point = DevPoint { step: t, dev: task.dev_metric(&theta), test: task.eval_metric(&theta) };
            evaluations.push(point);
            if best.as_ref().is_none_or(|(b, _)| point.dev > b.dev) {
                best = Some((point, theta.clone()));
            }
        }
    }

    let (records, posterior, ledger) = mechanism.into_records();
    let best_point = best.as_ref().map(|(p, _)| *p);
    let params = match best {
        Some((_, p)) if config.load_best_dev => p,
        _ => theta.clone(),
    };
    Ok(TrainOutput { params, final_params: theta, records, posterior, ledger, evaluations, best: best_point })
}
