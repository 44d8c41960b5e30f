//! Toy loss tasks.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LossTask, ParameterVector};
use crate::rng::{self, Stream};
use crate::{Error, Result};

const FEATURES: usize = 10;

// Split sub-seeds under the task-data stream.
const TRAIN: u64 = 0;
const DEV: u64 = 1;
const TEST: u64 = 2;
const INIT: u64 = 3;

fn default_records() -> usize {
    128
}

fn default_dim() -> usize {
    10
}

/// A task name plus its parameters, as it appears in configs and transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    SeparableBlobs {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_records")]
        records: usize,
    },
    XorMlp {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_records")]
        records: usize,
    },
    Quadratic {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_records")]
        records: usize,
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self::SeparableBlobs { seed: 0, records: default_records() }
    }
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SeparableBlobs { .. } => SeparableBlobs::NAME,
            Self::XorMlp { .. } => XorMlp::NAME,
            Self::Quadratic { .. } => Quadratic::NAME,
        }
    }

    pub fn num_records(&self) -> usize {
        match *self {
            Self::SeparableBlobs { records, .. } | Self::XorMlp { records, .. } | Self::Quadratic { records, .. } => {
                records
            }
        }
    }

    /// Same task family and size, data drawn from another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::SeparableBlobs { seed: s, .. } | Self::XorMlp { seed: s, .. } | Self::Quadratic { seed: s, .. } => {
                *s = seed
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_records() < 2 {
            return Err(Error::config("task.records", "need at least 2 records"));
        }
        if let Self::Quadratic { dim: 0, .. } = self {
            return Err(Error::config("task.dim", "must be positive"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn LossTask>> {
        self.validate()?;
        Ok(match *self {
            Self::SeparableBlobs { seed, records } => Box::new(SeparableBlobs::new(seed, records)),
            Self::XorMlp { seed, records } => Box::new(XorMlp::new(seed, records)),
            Self::Quadratic { seed, records, dim } => Box::new(Quadratic::new(records, dim, seed)),
        })
    }
}

#[derive(Debug, Clone)]
struct Labeled {
    x: Vec<[f64; FEATURES]>,
    y: Vec<f64>,
}

impl Labeled {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn accuracy(&self, score: impl Fn(&[f64; FEATURES]) -> f64) -> f64 {
        let hits = self.x.iter().zip(&self.y).filter(|(x, &y)| predict(score(x)) == y).count();
        hits as f64 / self.len() as f64
    }
}

fn predict(score: f64) -> f64 {
    if score >= 0.0 { 1.0 } else { -1.0 }
}

/// `ln(1 + e^s)` without overflow.
fn softplus(s: f64) -> f64 {
    if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 { 1.0 / (1.0 + (-s).exp()) } else { s.exp() / (1.0 + s.exp()) }
}

fn alternating_label(i: usize) -> f64 {
    if i % 2 == 0 { 1.0 } else { -1.0 }
}

/// Binary logistic regression on two clusters in ℝ¹⁰ with a bias term.
///
/// The first coordinate carries the class: `y·c` with `c ~ N(1, 0.5²)`
/// truncated to `c ≥ 0.3`, so the classes are separated by a margin along
/// `e₁`. The other nine coordinates are `N(0, 3²)` clutter, which keeps a
/// random direction near chance and makes subset signs disagree often.
#[derive(Debug, Clone)]
pub struct SeparableBlobs {
    train: Labeled,
    dev: Labeled,
    test: Labeled,
}

impl SeparableBlobs {
    pub const NAME: &'static str = "separable-blobs";
    pub const SIGNAL_MEAN: f64 = 1.0;
    pub const SIGNAL_STD: f64 = 0.5;
    pub const CLUTTER_STD: f64 = 3.0;
    pub const MARGIN: f64 = 0.3;

    pub fn new(seed: u64, records: usize) -> Self {
        Self {
            train: Self::sample(seed, TRAIN, records),
            dev: Self::sample(seed, DEV, (records / 4).max(2)),
            test: Self::sample(seed, TEST, 4 * records),
        }
    }

    fn sample(seed: u64, split: u64, n: usize) -> Labeled {
        let mut rng = rng::keyed(seed, Stream::TaskData, split, 0);
        let signal = Normal::new(Self::SIGNAL_MEAN, Self::SIGNAL_STD).expect("valid normal");
        let mut x = Vec::with_capacity(n);
        let y: Vec<f64> = (0..n).map(alternating_label).collect();
        for &label in &y {
            let c = loop {
                let c = signal.sample(&mut rng);
                if c >= Self::MARGIN {
                    break c;
                }
            };
            let mut row = [0.0; FEATURES];
            for v in row.iter_mut().skip(1) {
                *v = Self::CLUTTER_STD * rng.sample::<f64, _>(StandardNormal);
            }
            row[0] = label * c;
            x.push(row);
        }
        Labeled { x, y }
    }

    fn score(theta: &[f64], x: &[f64; FEATURES]) -> f64 {
        theta[..FEATURES].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + theta[FEATURES]
    }

    pub fn features(&self, i: usize) -> (&[f64; FEATURES], f64) {
        (&self.train.x[i], self.train.y[i])
    }

    /// Analytic `∇ℓ_i(θ)`.
    pub fn loss_gradient(&self, theta: &[f64], i: usize) -> Vec<f64> {
        let (x, y) = self.features(i);
        let w = -y * sigmoid(-y * Self::score(theta, x));
        x.iter().map(|v| w * v).chain(std::iter::once(w)).collect()
    }
}

impl LossTask for SeparableBlobs {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn dim(&self) -> usize {
        FEATURES + 1
    }

    fn num_records(&self) -> usize {
        self.train.len()
    }

    fn per_sample_loss(&self, theta: &[f64], i: usize) -> f64 {
        let (x, y) = self.features(i);
        softplus(-y * Self::score(theta, x))
    }

    fn eval_metric(&self, theta: &[f64]) -> f64 {
        self.test.accuracy(|x| Self::score(theta, x))
    }

    fn dev_metric(&self, theta: &[f64]) -> f64 {
        self.dev.accuracy(|x| Self::score(theta, x))
    }

    fn initial_params(&self) -> ParameterVector {
        ParameterVector::zeros(self.dim())
    }
}

const HIDDEN: usize = 16;

/// A 10→16→1 tanh network with logistic loss on a noisy XOR layout.
///
/// Coordinates 0 and 1 sit near one of the four corners `(±1, ±1)` with
/// `N(0, 0.25²)` jitter; the label is the product of the corner signs. The
/// remaining coordinates are `N(0, 0.5²)` distractors.
#[derive(Debug, Clone)]
pub struct XorMlp {
    train: Labeled,
    dev: Labeled,
    test: Labeled,
    init: Vec<f64>,
}

impl XorMlp {
    pub const NAME: &'static str = "xor-mlp";
    pub const JITTER: f64 = 0.25;
    pub const DISTRACTOR_STD: f64 = 0.5;
    pub const DIM: usize = HIDDEN * FEATURES + HIDDEN + HIDDEN + 1;

    pub fn new(seed: u64, records: usize) -> Self {
        let mut rng = rng::keyed(seed, Stream::TaskData, INIT, 0);
        let mut init = Vec::with_capacity(Self::DIM);
        let first = (1.0 / FEATURES as f64).sqrt();
        let second = (1.0 / HIDDEN as f64).sqrt();
        init.extend((0..HIDDEN * FEATURES).map(|_| first * rng.sample::<f64, _>(StandardNormal)));
        init.extend(std::iter::repeat_n(0.0, HIDDEN));
        init.extend((0..HIDDEN).map(|_| second * rng.sample::<f64, _>(StandardNormal)));
        init.push(0.0);
        Self {
            train: Self::sample(seed, TRAIN, records),
            dev: Self::sample(seed, DEV, (records / 4).max(2)),
            test: Self::sample(seed, TEST, 4 * records),
            init,
        }
    }

    fn sample(seed: u64, split: u64, n: usize) -> Labeled {
        let mut rng = rng::keyed(seed, Stream::TaskData, split, 0);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            // Cycle through the corners so the classes stay balanced.
            let a = if i % 2 == 0 { 1.0 } else { -1.0 };
            let b = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let mut row = [0.0; FEATURES];
            row[0] = a + Self::JITTER * rng.sample::<f64, _>(StandardNormal);
            row[1] = b + Self::JITTER * rng.sample::<f64, _>(StandardNormal);
            for v in row.iter_mut().skip(2) {
                *v = Self::DISTRACTOR_STD * rng.sample::<f64, _>(StandardNormal);
            }
            x.push(row);
            y.push(a * b);
        }
        Labeled { x, y }
    }

    fn score(theta: &[f64], x: &[f64; FEATURES]) -> f64 {
        let (w1, rest) = theta.split_at(HIDDEN * FEATURES);
        let (b1, rest) = rest.split_at(HIDDEN);
        let (w2, b2) = rest.split_at(HIDDEN);
        let mut out = b2[0];
        for h in 0..HIDDEN {
            let row = &w1[h * FEATURES..(h + 1) * FEATURES];
            let pre: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[h];
            out += w2[h] * pre.tanh();
        }
        out
    }
}

impl LossTask for XorMlp {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn dim(&self) -> usize {
        Self::DIM
    }

    fn num_records(&self) -> usize {
        self.train.len()
    }

    fn per_sample_loss(&self, theta: &[f64], i: usize) -> f64 {
        softplus(-self.train.y[i] * Self::score(theta, &self.train.x[i]))
    }

    fn eval_metric(&self, theta: &[f64]) -> f64 {
        self.test.accuracy(|x| Self::score(theta, x))
    }

    fn dev_metric(&self, theta: &[f64]) -> f64 {
        self.dev.accuracy(|x| Self::score(theta, x))
    }

    fn initial_params(&self) -> ParameterVector {
        ParameterVector::new(self.init.clone()).expect("finite initialisation")
    }
}

/// `ℓ_i(θ) = ½‖θ − a_i‖²` with standard normal centres.
///
/// The metric is `1/(1 + ‖θ − ā‖²)`, which reaches 1 at the minimiser.
#[derive(Debug, Clone)]
pub struct Quadratic {
    centers: Vec<Vec<f64>>,
    mean: Vec<f64>,
}

impl Quadratic {
    pub const NAME: &'static str = "quadratic";

    pub fn new(records: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng::keyed(seed, Stream::TaskData, TRAIN, 0);
        let centers = (0..records)
            .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Self::from_centers(centers)
    }

    /// One record centred at the origin: `ℓ(θ) = ½‖θ‖²`.
    pub fn centered(dim: usize) -> Self {
        Self::from_centers(vec![vec![0.0; dim]])
    }

    /// Every record shares the same centre, so all candidate subsets agree.
    pub fn identical(records: usize, center: Vec<f64>) -> Self {
        Self::from_centers(vec![center; records])
    }

    fn from_centers(centers: Vec<Vec<f64>>) -> Self {
        let dim = centers[0].len();
        let n = centers.len() as f64;
        let mut mean = vec![0.0; dim];
        for c in &centers {
            for (m, v) in mean.iter_mut().zip(c) {
                *m += v / n;
            }
        }
        Self { centers, mean }
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i]
    }

    fn metric(&self, theta: &[f64]) -> f64 {
        let d2: f64 = theta.iter().zip(&self.mean).map(|(t, m)| (t - m) * (t - m)).sum();
        1.0 / (1.0 + d2)
    }
}

impl LossTask for Quadratic {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn num_records(&self) -> usize {
        self.centers.len()
    }

    fn per_sample_loss(&self, theta: &[f64], i: usize) -> f64 {
        0.5 * theta.iter().zip(&self.centers[i]).map(|(t, a)| (t - a) * (t - a)).sum::<f64>()
    }

    fn eval_metric(&self, theta: &[f64]) -> f64 {
        self.metric(theta)
    }

    fn dev_metric(&self, theta: &[f64]) -> f64 {
        self.metric(theta)
    }

    fn initial_params(&self) -> ParameterVector {
        ParameterVector::zeros(self.dim())
    }
}
