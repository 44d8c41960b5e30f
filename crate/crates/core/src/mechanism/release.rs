//! The per-step release operations.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::budget::{entropy_cap, BudgetLedger, LedgerEntry, MIN_CALIBRATED_BUDGET};
use super::{Posterior, Sign, SubsetDesign, SurrogateMode};
use crate::channel::invert_channel_mi;
use crate::transcript::Branch;
use crate::zo::clip_scalar;
use crate::{Error, Result};

/// Outcome of one single-bit release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitRelease {
    pub branch: Branch,
    pub q_plus: f64,
    /// Budget offered to this release (zero on ZPL).
    pub beta: f64,
    pub sigma: Option<f64>,
    pub bit: Sign,
    /// `ỹ` before quantization, disagreement branch only.
    pub pre_quant: Option<f64>,
    pub beta_used: f64,
}

/// Which single-bit release runs on disagreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitVariant {
    Mi,
    Zpl,
}

/// Clips every scalar to `c` and returns the sign of each subset mean.
///
/// Means are summed over members in ascending record order, so the result
/// does not depend on how the scalars were computed.
pub fn subset_signs(scalars: &[f64], design: &SubsetDesign, clip: f64) -> Result<Vec<Sign>> {
    if scalars.len() != design.num_records() {
        return Err(Error::Dimension { expected: design.num_records(), got: scalars.len() });
    }
    let clipped: Vec<f64> = scalars.iter().map(|&g| clip_scalar(g, clip)).collect();
    Ok((0..design.num_subsets()).map(|m| Sign::of(subset_mean(&clipped, design.members(m)))).collect())
}

fn subset_mean(values: &[f64], members: &[usize]) -> f64 {
    let sum: f64 = members.iter().map(|&i| values[i]).sum();
    sum / members.len() as f64
}

/// `q⁺ = Σ_m p[m]·1[s_m = +1]`.
pub fn agreement_probability(posterior: &Posterior, signs: &[Sign]) -> f64 {
    posterior.weights().iter().zip(signs).filter(|(_, s)| **s == Sign::Plus).map(|(p, _)| p).sum::<f64>().min(1.0)
}

pub fn is_unanimous(q_plus: f64, tolerance: f64) -> bool {
    q_plus <= tolerance || q_plus >= 1.0 - tolerance
}

fn unanimity(q_plus: f64, beta: f64) -> BitRelease {
    // With a positive tolerance the minority side may hold mass below it; the
    // agreed sign is still the one released.
    let bit = if q_plus >= 0.5 { Sign::Plus } else { Sign::Minus };
    BitRelease { branch: Branch::Unanimity, q_plus, beta, sigma: None, bit, pre_quant: None, beta_used: 0.0 }
}

fn coin<R: Rng + ?Sized>(q_plus: f64, beta: f64, rng: &mut R) -> BitRelease {
    let bit = if rng.random::<bool>() { Sign::Plus } else { Sign::Minus };
    BitRelease { branch: Branch::ZplCoin, q_plus, beta, sigma: None, bit, pre_quant: None, beta_used: 0.0 }
}

/// One release of the MI-budgeted mechanism with budget `beta`.
///
/// Unanimous steps release the agreed sign for free. Otherwise the secret
/// subset's sign is released through Gaussian noise calibrated so that it
/// carries exactly `beta` nats, and the posterior is updated on the
/// unquantized value. A budget at or below [`MIN_CALIBRATED_BUDGET`] releases
/// a fair coin instead.
pub fn mi_step<R: Rng + ?Sized>(
    posterior: &mut Posterior,
    signs: &[Sign],
    j_star: usize,
    beta: f64,
    tolerance: f64,
    rng: &mut R,
) -> Result<BitRelease> {
    let q = agreement_probability(posterior, signs);
    if is_unanimous(q, tolerance) {
        return Ok(unanimity(q, beta));
    }
    if beta <= MIN_CALIBRATED_BUDGET {
        return Ok(coin(q, beta, rng));
    }
    let sigma = invert_channel_mi(q, beta)
        .map_err(|e| Error::Internal(format!("calibration failed after the entropy cap: {e}")))?;
    let noise: f64 = StandardNormal.sample(rng);
    let released = signs[j_star].value() + sigma * noise;
    posterior.observe_gaussian(signs, released, sigma);
    Ok(BitRelease {
        branch: Branch::Disagreement,
        q_plus: q,
        beta,
        sigma: Some(sigma),
        bit: Sign::of(released),
        pre_quant: Some(released),
        beta_used: beta,
    })
}

/// One release of the zero-privacy-loss mechanism. The disagreement branch
/// flips a fair coin that never looks at `j_star`.
pub fn zpl_step<R: Rng + ?Sized>(posterior: &Posterior, signs: &[Sign], tolerance: f64, rng: &mut R) -> BitRelease {
    let q = agreement_probability(posterior, signs);
    if is_unanimous(q, tolerance) {
        unanimity(q, 0.0)
    } else {
        coin(q, 0.0, rng)
    }
}

/// A non-private surrogate release; real-valued for the `raw_*` modes.
pub fn surrogate_release<R: Rng + ?Sized>(
    mode: SurrogateMode,
    scalars: &[f64],
    design: &SubsetDesign,
    j_star: usize,
    clip: f64,
    rng: &mut R,
) -> Result<f64> {
    if scalars.len() != design.num_records() {
        return Err(Error::Dimension { expected: design.num_records(), got: scalars.len() });
    }
    let clipped: Vec<f64> = scalars.iter().map(|&g| clip_scalar(g, clip)).collect();
    let full = || clipped.iter().sum::<f64>() / clipped.len() as f64;
    let half = || subset_mean(&clipped, design.members(j_star));
    Ok(match mode {
        SurrogateMode::RawFull => full(),
        SurrogateMode::QuantFull => Sign::of(full()).value(),
        SurrogateMode::RawHalf => half(),
        SurrogateMode::QuantHalf => Sign::of(half()).value(),
        SurrogateMode::RandomSign => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
    })
}

/// `K` single-bit releases for one step, one per direction.
///
/// The releases share one posterior, updated in direction order, and one step
/// allocation: bit `k` is offered `allocation / K`, capped at `0.999·h(q⁺_k)`.
/// Every release is entered in `ledger` under step `t`.
#[allow(clippy::too_many_arguments)]
pub fn k_aggregate_step<R: Rng + ?Sized>(
    variant: BitVariant,
    posterior: &mut Posterior,
    ledger: &mut BudgetLedger,
    t: usize,
    signs: &[Vec<Sign>],
    j_star: usize,
    allocation: f64,
    tolerance: f64,
    rng: &mut R,
) -> Result<Vec<BitRelease>> {
    let k_total = signs.len();
    if k_total == 0 {
        return Err(Error::Domain("at least one direction is needed".into()));
    }
    let share = allocation / k_total as f64;
    let mut out = Vec::with_capacity(k_total);
    for (k, s) in signs.iter().enumerate() {
        let release = match variant {
            BitVariant::Mi => {
                let q = agreement_probability(posterior, s);
                let beta = ledger.fit(entropy_cap(share, q));
                mi_step(posterior, s, j_star, beta, tolerance, rng)?
            }
            BitVariant::Zpl => zpl_step(posterior, s, tolerance, rng),
        };
        ledger.record(LedgerEntry {
            t,
            k,
            beta: release.beta,
            beta_used: release.beta_used,
            branch: release.branch,
            sigma: release.sigma,
        })?;
        out.push(release);
    }
    Ok(out)
}
