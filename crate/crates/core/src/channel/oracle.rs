use std::f64::consts::PI;

use super::{entropy, log_sum_exp, ChannelQuery};
use crate::{Error, Result};

/// Reference value of the channel information by the composite trapezoid rule.
///
/// Integrates `Σ_s P(s)·φ_σ(y−s)·ln(φ_σ(y−s)/m(y))` directly in `y` over
/// `[−halfwidth, halfwidth]`. It shares no code path with the quadrature in
/// [`channel_mi`](super::channel_mi) beyond the mixture's log-sum-exp, and is
/// far slower; it exists to check the fast path.
pub fn channel_mi_oracle(query: &ChannelQuery, halfwidth: f64, points: usize) -> Result<f64> {
    let (q, sigma) = (query.q_plus(), query.sigma());
    if !(halfwidth >= 1.0 + 8.0 * sigma) {
        return Err(Error::Precondition(format!(
            "grid half-width {halfwidth} must be at least 1 + 8·sigma = {}",
            1.0 + 8.0 * sigma
        )));
    }
    if points < 10_000 {
        return Err(Error::Precondition(format!("need at least 10^4 grid points, got {points}")));
    }
    if q == 0.0 || q == 1.0 {
        return Ok(0.0);
    }
    if sigma == 0.0 {
        return Ok(entropy(q));
    }
    let ln_norm = -(sigma * (2.0 * PI).sqrt()).ln();
    let log_phi = |u: f64| ln_norm - u * u / (2.0 * sigma * sigma);
    let (ln_q, ln_r) = (q.ln(), (1.0 - q).ln());
    let h = 2.0 * halfwidth / (points - 1) as f64;
    let mut total = 0.0;
    for k in 0..points {
        let y = -halfwidth + k as f64 * h;
        let lp = log_phi(y - 1.0);
        let lm = log_phi(y + 1.0);
        let mix = log_sum_exp(ln_q + lp, ln_r + lm);
        let f = q * lp.exp() * (lp - mix) + (1.0 - q) * lm.exp() * (lm - mix);
        total += if k == 0 || k == points - 1 { 0.5 * f } else { f };
    }
    Ok(total * h)
}
