//! Mutual information of a binary input observed through Gaussian noise.
//!
//! The input `ξ ∈ {−1, +1}` has `P(ξ = +1) = q⁺` and is observed as
//! `Ỹ = ξ + N(0, σ²)`. [`channel_mi`] evaluates `I(ξ; Ỹ)` exactly (up to
//! quadrature error) and [`invert_channel_mi`] finds the `σ` that makes the
//! information equal to a requested budget.
//!
//! Substituting `y = s + σ√2·x` in the conditional expectation for each input
//! `s` turns the log-likelihood ratio into a softplus of an affine function of
//! `x`, which is integrated against `e^{−x²}` by a 60-node Gauss-Hermite rule:
//!
//! ```text
//! I = (1/√π) Σ_x w(x) [ q⁺ ·L(q⁺,     a + b·x)
//!                     + (1−q⁺)·L(1−q⁺, a − b·x) ],   a = 2/σ², b = 2√2/σ,
//! L(p, u) = −ln(p + (1−p)·e^{−u})
//! ```

mod oracle;
pub mod quadrature;

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::{Error, Result};

pub use oracle::channel_mi_oracle;

/// Below this noise level the channel is treated as noiseless.
pub const NOISELESS_SIGMA: f64 = 1e-10;

/// Initial noise bracket for calibration; expanded by factors of ten up to
/// [`SIGMA_LIMITS`] when the budget falls outside it.
pub const SIGMA_BRACKET: (f64, f64) = (1e-6, 1e6);
pub const SIGMA_LIMITS: (f64, f64) = (1e-12, 1e12);

/// Bisection stops once the bracket is this narrow in `ln σ`.
pub const LOG_SIGMA_TOLERANCE: f64 = 1e-12;

/// Relative early-exit tolerance on the information gap.
pub const MI_RELATIVE_TOLERANCE: f64 = 1e-10;

/// A binary-input Gaussian channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelQuery {
    q_plus: f64,
    sigma: f64,
}

impl ChannelQuery {
    pub fn new(q_plus: f64, sigma: f64) -> Result<Self> {
        check_probability(q_plus)?;
        if !(sigma >= 0.0) {
            return Err(Error::Domain(format!("sigma must be nonnegative, got {sigma}")));
        }
        Ok(Self { q_plus, sigma })
    }

    pub fn q_plus(&self) -> f64 {
        self.q_plus
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

fn check_probability(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability must lie in [0, 1], got {q}")))
    }
}

/// Binary entropy in nats, with `0·ln 0 = 0`.
pub fn binary_entropy(q: f64) -> Result<f64> {
    check_probability(q)?;
    Ok(entropy(q))
}

pub(crate) fn entropy(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    let h = -q * q.ln() - (1.0 - q) * (-q).ln_1p();
    h.clamp(0.0, LN_2)
}

/// `I(ξ; ξ + N(0, σ²))` in nats.
pub fn channel_mi(query: &ChannelQuery) -> f64 {
    mi_unchecked(query.q_plus, query.sigma)
}

pub(crate) fn mi_unchecked(q: f64, sigma: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    if sigma < NOISELESS_SIGMA {
        return entropy(q);
    }
    let rule = quadrature::channel_rule();
    let a = 2.0 / (sigma * sigma);
    let b = 2.0 * SQRT_2 / sigma;
    let (ln_q, ln_r) = (q.ln(), (-q).ln_1p());
    let (mut plus, mut minus) = (0.0, 0.0);
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        plus += w * neg_log_mixture(q, ln_q, ln_r, a + b * x);
        minus += w * neg_log_mixture(1.0 - q, ln_r, ln_q, a - b * x);
    }
    let mi = (q * plus + (1.0 - q) * minus) / PI.sqrt();
    mi.clamp(0.0, entropy(q))
}

/// `−ln(p + (1−p)·e^{−u})`, given `ln p` and `ln(1−p)`.
#[inline]
fn neg_log_mixture(p: f64, ln_p: f64, ln_rest: f64, u: f64) -> f64 {
    if u.abs() < 0.5 {
        // close to ln 1: the log-sum-exp form would cancel
        -((1.0 - p) * (-u).exp_m1()).ln_1p()
    } else {
        -log_sum_exp(ln_p, ln_rest - u)
    }
}

#[inline]
pub(crate) fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// The noise level at which the channel carries exactly `beta` nats.
///
/// Bisects in `ln σ` over [`SIGMA_BRACKET`], widening it towards
/// [`SIGMA_LIMITS`] when needed. The returned `σ` never undershoots: its
/// information is at most `beta`, and within `beta·1e-10` or one bisection
/// step of it.
pub fn invert_channel_mi(q_plus: f64, beta: f64) -> Result<f64> {
    check_probability(q_plus)?;
    if q_plus == 0.0 || q_plus == 1.0 {
        return Err(Error::Unanimous(q_plus));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("budget must be positive, got {beta}")));
    }
    let h = entropy(q_plus);
    if beta >= h {
        return Err(Error::InfeasibleBudget { q_plus, beta, entropy: h });
    }

    let (mut lo, mut hi) = SIGMA_BRACKET;
    while mi_unchecked(q_plus, lo) <= beta {
        if lo <= SIGMA_LIMITS.0 {
            return Err(Error::CalibrationFailed { q_plus, beta, lo, hi });
        }
        lo *= 0.1;
    }
    while mi_unchecked(q_plus, hi) > beta {
        if hi >= SIGMA_LIMITS.1 {
            return Err(Error::CalibrationFailed { q_plus, beta, lo, hi });
        }
        hi *= 10.0;
    }

    let (mut ln_lo, mut ln_hi) = (lo.ln(), hi.ln());
    while ln_hi - ln_lo >= LOG_SIGMA_TOLERANCE {
        let ln_mid = 0.5 * (ln_lo + ln_hi);
        let mid = ln_mid.exp();
        let mi = mi_unchecked(q_plus, mid);
        if mi > beta {
            ln_lo = ln_mid;
        } else {
            if beta - mi <= MI_RELATIVE_TOLERANCE * beta {
                return Ok(mid);
            }
            ln_hi = ln_mid;
        }
    }
    Ok(ln_hi.exp())
}
