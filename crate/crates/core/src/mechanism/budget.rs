//! Adaptive allocation of a total mutual-information budget across steps.

use serde::{Deserialize, Serialize};

use crate::channel::entropy;
use crate::transcript::Branch;
use crate::{Error, Result};

/// Fraction of `h(q⁺)` a single release may target.
pub const ENTROPY_CAP_FACTOR: f64 = 0.999;

/// Budgets at or below this are treated as exhausted: the disagreement branch
/// releases a fair coin instead of calibrating noise.
pub const MIN_CALIBRATED_BUDGET: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: usize,
    pub k: usize,
    pub beta: f64,
    pub beta_used: f64,
    pub branch: Branch,
    pub sigma: Option<f64>,
}

/// Running account of the information released so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    mi_total: f64,
    mi_used: f64,
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new(mi_total: f64) -> Result<Self> {
        if !(mi_total >= 0.0) || !mi_total.is_finite() {
            return Err(Error::Domain(format!("total budget must be finite and nonnegative, got {mi_total}")));
        }
        Ok(Self { mi_total, mi_used: 0.0, entries: Vec::new() })
    }

    pub fn mi_total(&self) -> f64 {
        self.mi_total
    }

    pub fn mi_used(&self) -> f64 {
        self.mi_used
    }

    pub fn remaining(&self) -> f64 {
        (self.mi_total - self.mi_used).max(0.0)
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Appends a release, enforcing `β_used ∈ {0, β}` and the total cap.
    pub fn record(&mut self, entry: LedgerEntry) -> Result<()> {
        if entry.beta_used != 0.0 && entry.beta_used != entry.beta {
            return Err(Error::Internal(format!(
                "step {} consumed {} nats of an allocation of {}",
                entry.t, entry.beta_used, entry.beta
            )));
        }
        let used = self.mi_used + entry.beta_used;
        if used > self.mi_total {
            return Err(Error::Internal(format!(
                "step {} would raise consumption to {used} nats, above the total {}",
                entry.t, self.mi_total
            )));
        }
        self.mi_used = used;
        self.entries.push(entry);
        Ok(())
    }

    /// Largest budget `≤ beta` whose addition keeps the ledger within its total.
    pub(crate) fn fit(&self, beta: f64) -> f64 {
        fit_within(self.mi_used, self.mi_total, beta)
    }
}

pub(crate) fn fit_within(used: f64, total: f64, mut beta: f64) -> f64 {
    while beta > 0.0 && used + beta > total {
        beta = f64::from_bits(beta.to_bits() - 1);
    }
    beta.max(0.0)
}

/// The uncapped share for step `t` of `T`: the unspent budget divided evenly
/// over the remaining steps, `max(0, total − used) / (T − t + 1)`.
pub fn step_allocation(ledger: &BudgetLedger, t: usize, total_steps: usize) -> f64 {
    debug_assert!(t >= 1 && t <= total_steps);
    ledger.remaining() / (total_steps - t + 1) as f64
}

/// `min(h(q⁺)·0.999, β)`: a single bit cannot carry more than `h(q⁺)`.
pub fn entropy_cap(beta: f64, q_plus: f64) -> f64 {
    beta.min(ENTROPY_CAP_FACTOR * entropy(q_plus))
}

/// The budget of step `t` for a release whose agreement probability is `q_plus`.
pub fn adaptive_budget(ledger: &BudgetLedger, t: usize, total_steps: usize, q_plus: f64) -> f64 {
    ledger.fit(entropy_cap(step_allocation(ledger, t, total_steps), q_plus))
}
