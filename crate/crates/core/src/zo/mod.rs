//! Zeroth-order machinery: two-point estimates, parameter updates, toy tasks
//! and the training loop.

mod tasks;
mod train;

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use tasks::{Quadratic, SeparableBlobs, TaskSpec, XorMlp};
pub use train::{train, train_observed, DevPoint, TrainOutput};
pub(crate) use train::{step_directions, update_params};

/// Trainable parameters; every entry is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("parameter vector must have positive dimension".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("parameter {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "parameter vector must have positive dimension");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A per-record loss over a finite universe of records.
///
/// Implementations must be deterministic in `(theta, i)`.
pub trait LossTask: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn num_records(&self) -> usize;

    fn per_sample_loss(&self, theta: &[f64], i: usize) -> f64;

    /// Held-out test metric in `[0, 1]`, higher is better.
    fn eval_metric(&self, theta: &[f64]) -> f64;

    /// Metric on the development split used for checkpoint selection.
    fn dev_metric(&self, theta: &[f64]) -> f64;

    fn initial_params(&self) -> ParameterVector;
}

/// `[ℓ_i(θ+μz) − ℓ_i(θ−μz)] / 2μ`.
pub fn two_point_scalar(task: &dyn LossTask, theta: &ParameterVector, z: &[f64], mu: f64, i: usize) -> Result<f64> {
    if i >= task.num_records() {
        return Err(Error::Domain(format!("record {i} out of range")));
    }
    let (plus, minus) = probe_points(theta, z, mu)?;
    scalar_at(task, &plus, &minus, mu, i, theta)
}

/// The two-point scalar of every record along `z`, in record order.
pub fn per_sample_scalars(task: &dyn LossTask, theta: &ParameterVector, z: &[f64], mu: f64) -> Result<Vec<f64>> {
    let (plus, minus) = probe_points(theta, z, mu)?;
    (0..task.num_records()).map(|i| scalar_at(task, &plus, &minus, mu, i, theta)).collect()
}

fn probe_points(theta: &ParameterVector, z: &[f64], mu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if z.len() != theta.dim() {
        return Err(Error::Dimension { expected: theta.dim(), got: z.len() });
    }
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("smoothing must be positive, got {mu}")));
    }
    let plus = theta.iter().zip(z).map(|(t, z)| t + mu * z).collect();
    let minus = theta.iter().zip(z).map(|(t, z)| t - mu * z).collect();
    Ok((plus, minus))
}

fn scalar_at(task: &dyn LossTask, plus: &[f64], minus: &[f64], mu: f64, i: usize, theta: &ParameterVector) -> Result<f64> {
    let g = (task.per_sample_loss(plus, i) - task.per_sample_loss(minus, i)) / (2.0 * mu);
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::NonFiniteLoss { record: i, theta_norm: theta.norm() })
    }
}

/// `sign(g)·min(|g|, c)`; the identity for `c = ∞`.
pub fn clip_scalar(g: f64, c: f64) -> f64 {
    g.clamp(-c, c)
}

/// `(1 − ηλ)·θ − η·y·z`, leaving `theta` untouched.
pub fn apply_update(theta: &ParameterVector, eta: f64, lambda: f64, y: f64, z: &[f64]) -> Result<ParameterVector> {
    if z.len() != theta.dim() {
        return Err(Error::Dimension { expected: theta.dim(), got: z.len() });
    }
    let decay = 1.0 - eta * lambda;
    let next = theta.iter().zip(z).map(|(t, z)| decay * t - eta * y * z).collect();
    ParameterVector::new(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `η_t = η·(1 − (t−1)/T)`.
    Linear,
}

fn default_smoothing() -> f64 {
    1e-3
}

fn default_dev_interval() -> usize {
    25
}

/// Optimizer settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    /// Master seed of the direction and mechanism streams.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub load_best_dev: bool,
    #[serde(default = "default_dev_interval")]
    pub dev_eval_interval: usize,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 0.05,
            weight_decay: 0.0,
            smoothing: default_smoothing(),
            seed: 0,
            load_best_dev: false,
            dev_eval_interval: default_dev_interval(),
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("train.steps", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("train.weight_decay", "must be nonnegative"));
        }
        if !(self.smoothing > 0.0) {
            return Err(Error::config("train.smoothing", "must be positive"));
        }
        if self.dev_eval_interval == 0 {
            return Err(Error::config("train.dev_eval_interval", "must be at least 1"));
        }
        Ok(())
    }

    /// Learning rate of step `t ∈ 1..=T`.
    pub fn learning_rate_at(&self, t: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Linear => self.learning_rate * (1.0 - (t - 1) as f64 / self.steps as f64),
        }
    }
}
