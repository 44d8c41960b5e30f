//! Guarantee arithmetic: binary KL inversion for membership-inference bounds,
//! DP reference annotations, and an independent transcript validator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{binary_entropy, channel_mi, ChannelQuery};
use crate::mechanism::{Variant, ENTROPY_CAP_FACTOR, MIN_CALIBRATED_BUDGET};
use crate::transcript::{Branch, StepRecord, Transcript};
use crate::{Error, Result};

/// Upper end of the bisection interval for [`mia_posterior_bound`].
pub const POSTERIOR_CEILING: f64 = 1.0 - 1e-15;
/// Absolute tolerance on the probability argument of the KL inversion.
pub const KL_INVERSION_TOLERANCE: f64 = 1e-12;

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn xlogy(x: f64, ratio: f64) -> f64 {
    if x == 0.0 { 0.0 } else { x * ratio.ln() }
}

/// `KL(p ‖ q)` between Bernoulli laws, in nats, with `0·ln 0 = 0`.
///
/// When `q ∈ {0, 1}` and `p ≠ q` the divergence is infinite and
/// `f64::INFINITY` is returned.
pub fn kl_binary(p: f64, q: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    if (q == 0.0 || q == 1.0) && p != q {
        return Ok(f64::INFINITY);
    }
    if p == q {
        return Ok(0.0);
    }
    Ok((xlogy(p, p / q) + xlogy(1.0 - p, (1.0 - p) / (1.0 - q))).max(0.0))
}

/// The largest attack success `p ≥ prior` with `KL(p ‖ prior) ≤ mi`.
///
/// Returns 1 once `mi` exceeds `KL(1 − 10⁻¹⁵ ‖ prior)`.
pub fn mia_posterior_bound(mi: f64, prior: f64) -> Result<f64> {
    if !(mi >= 0.0) {
        return Err(Error::Domain(format!("MI must be nonnegative, got {mi}")));
    }
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::Domain(format!("prior must lie in (0, 1), got {prior}")));
    }
    if mi == 0.0 {
        return Ok(prior);
    }
    if mi > kl_binary(POSTERIOR_CEILING, prior)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (prior, POSTERIOR_CEILING);
    while hi - lo > KL_INVERSION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if kl_binary(mid, prior)? <= mi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `e^ε/(1 + e^ε) + δ`, clamped to 1.
pub fn dp_eps_to_mia_bound(eps: f64, delta: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be nonnegative, got {eps}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Domain(format!("delta must lie in [0, 1), got {delta}")));
    }
    Ok((1.0 / (1.0 + (-eps).exp()) + delta).min(1.0))
}

/// The MI budget whose posterior bound equals the DP bound at `(ε, δ)`.
///
/// Infinite when the DP bound reaches 1: a vacuous DP guarantee has no
/// matching budget.
pub fn matched_mi_for_dp(eps: f64, delta: f64, prior: f64) -> Result<f64> {
    let bound = dp_eps_to_mia_bound(eps, delta)?;
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::Domain(format!("prior must lie in (0, 1), got {prior}")));
    }
    if bound >= 1.0 {
        return Ok(f64::INFINITY);
    }
    kl_binary(bound, prior)
}

/// A prior, a budget and the resulting bound on attack success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiaBound {
    pub prior: f64,
    pub mi_budget: f64,
    pub posterior_bound: f64,
}

impl MiaBound {
    pub fn new(mi_budget: f64, prior: f64) -> Result<Self> {
        Ok(Self { prior, mi_budget, posterior_bound: mia_posterior_bound(mi_budget, prior)? })
    }
}

/// The property a transcript failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Invariant {
    RecordOrder,
    BudgetRederivation,
    BranchRederivation,
    BetaUsedDichotomy,
    NoiseCalibration,
    ReleaseConsistency,
    CumulativeMi,
    MiTotal,
    ZplZeroMi,
    UnanimityCount,
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::RecordOrder => "record-order",
            Self::BudgetRederivation => "budget-rederivation",
            Self::BranchRederivation => "branch-rederivation",
            Self::BetaUsedDichotomy => "beta-used-dichotomy",
            Self::NoiseCalibration => "noise-calibration",
            Self::ReleaseConsistency => "release-consistency",
            Self::CumulativeMi => "cumulative-mi",
            Self::MiTotal => "mi-total",
            Self::ZplZeroMi => "zpl-zero-mi",
            Self::UnanimityCount => "unanimity-count",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: Invariant,
    pub t: usize,
    pub k: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub variant: String,
    pub steps: usize,
    pub releases: usize,
    pub mi_total: Option<f64>,
    pub cumulative_mi: f64,
    pub unanimity_count: usize,
    pub unanimity_fraction: f64,
    /// `Σ h(min(q⁺, 1 − q⁺))` over unanimity releases. Informational: it is
    /// at most `h(τ)` per release and is not added to `cumulative_mi`.
    pub tolerance_residual: f64,
    pub violation: Option<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant: {}", self.variant)?;
        writeln!(f, "steps: {} ({} releases)", self.steps, self.releases)?;
        match self.mi_total {
            Some(total) => writeln!(f, "cumulative MI: {:.6e} of {:.6e} nats", self.cumulative_mi, total)?,
            None => writeln!(f, "cumulative MI: {:.6e} nats", self.cumulative_mi)?,
        }
        writeln!(f, "unanimity: {} ({:.4})", self.unanimity_count, self.unanimity_fraction)?;
        writeln!(f, "tolerance residual (informational): {:.3e} nats", self.tolerance_residual)?;
        match &self.violation {
            None => write!(f, "result: PASS"),
            Some(v) => write!(f, "result: FAIL [{}] at t={} k={}: {}", v.invariant, v.t, v.k, v.message),
        }
    }
}

// Slack on floating-point comparisons against quantities the validator
// re-derives with its own arithmetic.
const REL_SLACK: f64 = 1e-12;
const MI_SLACK: f64 = 1e-9;

/// Re-derives every budget and branch from the transcript's public prefix
/// and checks the accounting, stopping at the first violation.
pub fn validate_transcript(transcript: &Transcript) -> ValidationReport {
    let header = &transcript.header;
    let records = &transcript.records;
    let mut report = ValidationReport {
        variant: header.mechanism.variant.label(),
        steps: header.train.steps,
        releases: records.len(),
        mi_total: header.mechanism.variant.mi_total(),
        cumulative_mi: transcript.cumulative_mi(),
        unanimity_count: transcript.unanimity_count(),
        unanimity_fraction: transcript.unanimity_fraction(),
        tolerance_residual: 0.0,
        violation: None,
    };
    if let Err(v) = check(transcript, &mut report.tolerance_residual) {
        report.violation = Some(v);
    }
    report
}

fn fail(invariant: Invariant, r: &StepRecord, message: impl Into<String>) -> Violation {
    Violation { invariant, t: r.t, k: r.k, message: message.into() }
}

fn check(transcript: &Transcript, residual: &mut f64) -> std::result::Result<(), Violation> {
    let header = &transcript.header;
    let records = &transcript.records;
    let steps = header.train.steps;
    let k_total = header.mechanism.k;
    let tol = header.mechanism.unanimity_tolerance;
    let variant = header.mechanism.variant;

    if records.len() != steps * k_total {
        return Err(Violation {
            invariant: Invariant::RecordOrder,
            t: 0,
            k: 0,
            message: format!("expected {} records, found {}", steps * k_total, records.len()),
        });
    }

    let total = variant.mi_total().unwrap_or(0.0);
    let mut used = 0.0;
    let mut start = 0.0;
    let mut free = 0usize;
    for (idx, r) in records.iter().enumerate() {
        let (t, k) = (idx / k_total + 1, idx % k_total);
        if (r.t, r.k) != (t, k) {
            return Err(fail(Invariant::RecordOrder, r, format!("expected (t={t}, k={k})")));
        }
        if !(0.0..=1.0).contains(&r.q_plus) {
            return Err(fail(Invariant::BranchRederivation, r, format!("q+ = {} is not a probability", r.q_plus)));
        }
        let unanimous = r.q_plus <= tol || r.q_plus >= 1.0 - tol;

        match variant {
            Variant::PaczeroMi { .. } => {
                // The allocation is fixed at the start of the step.
                if k == 0 {
                    start = used;
                }
                let share = (total - start).max(0.0) / (steps - t + 1) as f64 / k_total as f64;
                let cap = ENTROPY_CAP_FACTOR * binary_entropy(r.q_plus).unwrap_or(0.0);
                let expected = share.min(cap);
                let floor = expected * (1.0 - REL_SLACK);
                if !(r.beta <= expected && r.beta >= floor) {
                    return Err(fail(
                        Invariant::BudgetRederivation,
                        r,
                        format!("recorded beta {} but the public prefix gives {expected}", r.beta),
                    ));
                }
                let branch = if unanimous {
                    Branch::Unanimity
                } else if r.beta <= MIN_CALIBRATED_BUDGET {
                    Branch::ZplCoin
                } else {
                    Branch::Disagreement
                };
                if r.branch != branch {
                    return Err(fail(
                        Invariant::BranchRederivation,
                        r,
                        format!("recorded {:?}, re-derived {branch:?}", r.branch),
                    ));
                }
                let expected_used = if branch == Branch::Disagreement { r.beta } else { 0.0 };
                if r.beta_used != expected_used {
                    return Err(fail(
                        Invariant::BetaUsedDichotomy,
                        r,
                        format!("beta_used {} on a {branch:?} step with beta {}", r.beta_used, r.beta),
                    ));
                }
                if branch == Branch::Disagreement {
                    check_calibration(r)?;
                }
            }
            Variant::PaczeroZpl => {
                let branch = if unanimous { Branch::Unanimity } else { Branch::ZplCoin };
                if r.branch != branch {
                    return Err(fail(
                        Invariant::BranchRederivation,
                        r,
                        format!("recorded {:?}, re-derived {branch:?}", r.branch),
                    ));
                }
                if r.beta_used != 0.0 || r.beta != 0.0 || r.cumulative_mi != 0.0 {
                    return Err(fail(Invariant::ZplZeroMi, r, format!("cumulative MI {}", r.cumulative_mi)));
                }
            }
            Variant::Surrogate { .. } => {
                if r.branch != Branch::Surrogate {
                    return Err(fail(Invariant::BranchRederivation, r, "surrogate run with a private branch"));
                }
                if r.beta_used != 0.0 {
                    return Err(fail(Invariant::BetaUsedDichotomy, r, "surrogate releases are not accounted"));
                }
            }
        }

        if r.branch == Branch::Unanimity {
            free += 1;
            *residual += binary_entropy(r.q_plus.min(1.0 - r.q_plus)).unwrap_or(0.0);
        }
        if r.unanimity_count_so_far != free {
            return Err(fail(Invariant::UnanimityCount, r, format!("expected {free}")));
        }
        if r.branch != Branch::Surrogate {
            check_release(r)?;
        }
        used += r.beta_used;
        if r.cumulative_mi != used {
            return Err(fail(
                Invariant::CumulativeMi,
                r,
                format!("recorded {} but the releases sum to {used}", r.cumulative_mi),
            ));
        }
        if used > total {
            return Err(fail(Invariant::MiTotal, r, format!("{used} nats exceeds the total {total}")));
        }
    }
    Ok(())
}

fn check_calibration(r: &StepRecord) -> std::result::Result<(), Violation> {
    let Some(sigma) = r.sigma else {
        return Err(fail(Invariant::NoiseCalibration, r, "disagreement step without a noise level"));
    };
    let leaked = ChannelQuery::new(r.q_plus, sigma).map(|q| channel_mi(&q));
    match leaked {
        Ok(mi) if mi <= r.beta * (1.0 + MI_SLACK) + f64::MIN_POSITIVE => Ok(()),
        Ok(mi) => Err(fail(
            Invariant::NoiseCalibration,
            r,
            format!("sigma {sigma} leaks {mi} nats, above the budget {}", r.beta),
        )),
        Err(e) => Err(fail(Invariant::NoiseCalibration, r, e.to_string())),
    }
}

fn check_release(r: &StepRecord) -> std::result::Result<(), Violation> {
    if r.released_bit != 1 && r.released_bit != -1 {
        return Err(fail(Invariant::ReleaseConsistency, r, format!("bit {}", r.released_bit)));
    }
    if r.release != f64::from(r.released_bit) {
        return Err(fail(Invariant::ReleaseConsistency, r, "release differs from the released bit"));
    }
    match (r.branch, r.pre_quant_release) {
        (Branch::Disagreement, Some(y)) => {
            let bit = if y >= 0.0 { 1 } else { -1 };
            if bit != r.released_bit {
                return Err(fail(Invariant::ReleaseConsistency, r, "released bit is not the sign of the noisy value"));
            }
            Ok(())
        }
        (Branch::Disagreement, None) => Err(fail(Invariant::ReleaseConsistency, r, "missing noisy value")),
        (_, Some(_)) => Err(fail(Invariant::ReleaseConsistency, r, "noisy value on a noiseless branch")),
        _ => Ok(()),
    }
}
