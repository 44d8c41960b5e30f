//! The per-step private release.
//!
//! Each step reduces the per-record scalars to one sign per candidate subset,
//! measures how much posterior mass agrees on `+1`, and releases one bit about
//! the secret subset's sign:
//!
//! * **unanimity**: every plausible candidate agrees, so the agreed sign is
//!   released for free;
//! * **disagreement, MI variant**: the secret sign plus Gaussian noise
//!   calibrated to the step's budget; the posterior absorbs the noisy value;
//! * **disagreement, ZPL variant**: a fair coin.
//!
//! [`Mechanism`] threads the posterior, the budget ledger and the step records
//! through a run; the free functions in this module are the individual steps.

mod budget;
mod design;
mod posterior;
mod release;
mod spec;

use serde::{Deserialize, Serialize};

pub use budget::{
    adaptive_budget, entropy_cap, step_allocation, BudgetLedger, LedgerEntry, ENTROPY_CAP_FACTOR,
    MIN_CALIBRATED_BUDGET,
};
pub use design::{build_balanced_design, sample_secret, SubsetDesign, MAX_DESIGN_ATTEMPTS};
pub use posterior::Posterior;
pub use release::{
    agreement_probability, is_unanimous, k_aggregate_step, mi_step, subset_signs, surrogate_release, zpl_step,
    BitRelease, BitVariant,
};
pub use spec::{
    MechanismSpec, SurrogateMode, Variant, DEFAULT_SUBSETS_MI, DEFAULT_SUBSETS_ZPL, DEFAULT_UNANIMITY_TOLERANCE,
};

use crate::rng::{self, Stream, StreamRng};
use crate::transcript::{Branch, StepRecord};
use crate::{Error, Result};

/// A sign in `{−1, +1}`, with `sign(0) = +1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x >= 0.0 || x.is_nan() {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// Mechanism state for one run: posterior, ledger, noise stream and records.
#[derive(Debug)]
pub struct Mechanism<'d> {
    spec: MechanismSpec,
    design: &'d SubsetDesign,
    secret: usize,
    posterior: Posterior,
    ledger: BudgetLedger,
    rng: StreamRng,
    unanimity_count: usize,
    records: Vec<StepRecord>,
}

impl<'d> Mechanism<'d> {
    /// `seed` keys the mechanism's own noise stream; it is independent of the
    /// public direction stream of the same seed.
    pub fn new(spec: MechanismSpec, design: &'d SubsetDesign, secret: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if design.num_subsets() != spec.num_subsets() {
            return Err(Error::config(
                "mechanism.subsets",
                format!("design has {} subsets, spec asks for {}", design.num_subsets(), spec.num_subsets()),
            ));
        }
        if secret >= design.num_subsets() {
            return Err(Error::Domain(format!("secret index {secret} out of range")));
        }
        Ok(Self {
            spec,
            design,
            secret,
            posterior: Posterior::uniform(design.num_subsets()),
            ledger: BudgetLedger::new(spec.variant.mi_total().unwrap_or(0.0))?,
            rng: rng::stream(seed, Stream::Mechanism),
            unanimity_count: 0,
            records: Vec::new(),
        })
    }

    /// Performs the releases of step `t ∈ 1..=T`, one per direction, given the
    /// per-record scalars along each direction. Returns the released values.
    pub fn release(&mut self, t: usize, total_steps: usize, scalars: &[Vec<f64>]) -> Result<Vec<f64>> {
        if scalars.len() != self.spec.k {
            return Err(Error::Dimension { expected: self.spec.k, got: scalars.len() });
        }
        if t == 0 || t > total_steps {
            return Err(Error::Domain(format!("step {t} outside 1..={total_steps}")));
        }
        let clip = self.spec.clip_value();
        let signs = scalars
            .iter()
            .map(|g| subset_signs(g, self.design, clip))
            .collect::<Result<Vec<_>>>()?;

        let releases: Vec<BitRelease> = match self.spec.variant {
            Variant::Surrogate { mode } => {
                let mut out = Vec::with_capacity(scalars.len());
                for (g, s) in scalars.iter().zip(&signs) {
                    let value = surrogate_release(mode, g, self.design, self.secret, clip, &mut self.rng)?;
                    out.push(BitRelease {
                        branch: Branch::Surrogate,
                        q_plus: agreement_probability(&self.posterior, s),
                        beta: 0.0,
                        sigma: None,
                        bit: Sign::of(value),
                        pre_quant: Some(value),
                        beta_used: 0.0,
                    });
                }
                out
            }
            Variant::PaczeroMi { .. } | Variant::PaczeroZpl => {
                let variant = if matches!(self.spec.variant, Variant::PaczeroZpl) { BitVariant::Zpl } else { BitVariant::Mi };
                let allocation = step_allocation(&self.ledger, t, total_steps);
                k_aggregate_step(
                    variant,
                    &mut self.posterior,
                    &mut self.ledger,
                    t,
                    &signs,
                    self.secret,
                    allocation,
                    self.spec.unanimity_tolerance,
                    &mut self.rng,
                )?
            }
        };

        let mut cumulative = self.records.last().map_or(0.0, |r| r.cumulative_mi);
        let mut values = Vec::with_capacity(releases.len());
        for (k, r) in releases.into_iter().enumerate() {
            if r.branch == Branch::Unanimity {
                self.unanimity_count += 1;
            }
            cumulative += r.beta_used;
            let value = match r.branch {
                Branch::Surrogate => r.pre_quant.unwrap_or(r.bit.value()),
                _ => r.bit.value(),
            };
            self.records.push(StepRecord {
                t,
                k,
                branch: r.branch,
                q_plus: r.q_plus,
                beta: r.beta,
                sigma: r.sigma,
                released_bit: r.bit.as_i8(),
                release: value,
                pre_quant_release: if r.branch == Branch::Disagreement { r.pre_quant } else { None },
                beta_used: r.beta_used,
                cumulative_mi: cumulative,
                unanimity_count_so_far: self.unanimity_count,
            });
            values.push(value);
        }
        Ok(values)
    }

    pub fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    pub fn posterior(&self) -> &Posterior {
        &self.posterior
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn into_records(self) -> (Vec<StepRecord>, Posterior, BudgetLedger) {
        (self.records, self.posterior, self.ledger)
    }
}

#[cfg(test)]
mod tests;
