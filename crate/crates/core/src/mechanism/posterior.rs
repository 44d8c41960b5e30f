use serde::{Deserialize, Serialize};

use super::Sign;
use crate::{Error, Result};

/// Belief over the secret subset index, kept as normalized log-probabilities.
///
/// A candidate whose probability underflows keeps a finite log-weight, so
/// later evidence can still revive it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Repr", from = "Repr")]
pub struct Posterior {
    log_weights: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Repr {
    log_weights: Vec<f64>,
}

impl From<Posterior> for Repr {
    fn from(p: Posterior) -> Self {
        Repr { log_weights: p.log_weights }
    }
}

impl From<Repr> for Posterior {
    fn from(r: Repr) -> Self {
        Posterior::from_normalized(r.log_weights)
    }
}

impl Posterior {
    pub fn uniform(num_candidates: usize) -> Self {
        assert!(num_candidates > 0, "posterior support cannot be empty");
        let lw = -(num_candidates as f64).ln();
        Self::from_normalized(vec![lw; num_candidates])
    }

    /// From arbitrary nonnegative weights; they are normalized.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("posterior weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("posterior weights sum to zero".into()));
        }
        let lw: Vec<f64> = weights.iter().map(|w| (w / total).ln()).collect();
        Ok(Self::from_normalized(lw))
    }

    fn from_normalized(log_weights: Vec<f64>) -> Self {
        let weights = log_weights.iter().map(|l| l.exp()).collect();
        Self { log_weights, weights }
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Bayes update on a release `ỹ = s_{j*} + N(0, σ²)`.
    pub fn observe_gaussian(&mut self, signs: &[Sign], release: f64, sigma: f64) {
        debug_assert_eq!(signs.len(), self.len());
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut lw: Vec<f64> = self
            .log_weights
            .iter()
            .zip(signs)
            .map(|(l, s)| {
                let r = release - s.value();
                l - r * r * inv
            })
            .collect();
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm = max + lw.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        for l in &mut lw {
            *l -= norm;
        }
        *self = Self::from_normalized(lw);
    }

    /// The largest coordinate difference to another posterior.
    pub fn max_abs_diff(&self, other: &Posterior) -> f64 {
        self.weights.iter().zip(other.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}
