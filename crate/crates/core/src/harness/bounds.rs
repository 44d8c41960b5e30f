use std::fmt;

use serde::{Deserialize, Serialize};

use crate::accounting::{dp_eps_to_mia_bound, matched_mi_for_dp, mia_posterior_bound};
use crate::Result;

pub const DISCLAIMER: &str = "DP epsilon values are reference annotations matched on the membership-inference \
success bound at prior 1/2. They are not (epsilon, delta)-DP guarantees for these mechanisms.";

const PRIOR: f64 = 0.5;

/// One line of the MI / attack-success / DP-ε correspondence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    /// `mi` when the row starts from a budget, `dp` when it starts from ε.
    pub source: String,
    pub mi: f64,
    pub eps: f64,
    pub delta: f64,
    pub mia_bound: f64,
    pub annotation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    pub rows: Vec<BoundsRow>,
    pub disclaimer: String,
}

/// The ε with `e^ε/(1+e^ε) + δ = bound`, floored at 0.
fn matched_eps(bound: f64, delta: f64) -> f64 {
    let p = bound - delta;
    if p >= 1.0 {
        return f64::INFINITY;
    }
    (p / (1.0 - p)).ln().max(0.0)
}

/// Rows for each MI budget in `budgets` and each ε in `epsilons`, all at `delta`.
pub fn report_bounds(budgets: &[f64], epsilons: &[f64], delta: f64) -> Result<BoundsTable> {
    let mut rows = Vec::new();
    for &mi in budgets {
        let bound = mia_posterior_bound(mi, PRIOR)?;
        let eps = matched_eps(bound, delta);
        rows.push(BoundsRow {
            source: "mi".into(),
            mi,
            eps,
            delta,
            mia_bound: bound,
            annotation: format!("DP eps={} reference", display_eps(eps)),
        });
    }
    for &eps in epsilons {
        let bound = dp_eps_to_mia_bound(eps, delta)?;
        let mi = matched_mi_for_dp(eps, delta, PRIOR)?;
        rows.push(BoundsRow {
            source: "dp".into(),
            mi,
            eps,
            delta,
            mia_bound: bound,
            annotation: format!("matched MI {mi:.2} nats"),
        });
    }
    Ok(BoundsTable { rows, disclaimer: DISCLAIMER.into() })
}

fn display_eps(eps: f64) -> String {
    if eps == 0.0 { "0".into() } else { format!("{eps:.3}") }
}

impl fmt::Display for BoundsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:>10} {:>8} {:>8} {:>8}  annotation", "source", "MI", "eps", "delta", "MIA")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<6} {:>10.6} {:>8.3} {:>8.0e} {:>8.4}  {}",
                r.source, r.mi, r.eps, r.delta, r.mia_bound, r.annotation
            )?;
        }
        write!(f, "\nNote: {}", self.disclaimer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rows() {
        let t = report_bounds(&[0.0], &[2.0, 6.0], 1e-5).unwrap();
        assert_eq!(t.rows[0].mia_bound, 0.5);
        assert_eq!(t.rows[0].annotation, "DP eps=0 reference");
        assert!((t.rows[1].mia_bound - 0.8808).abs() < 5e-5);
        assert!((t.rows[1].mi - 0.33).abs() < 0.01);
        assert!((t.rows[2].mi - 0.68).abs() < 0.01);
        let text = t.to_string();
        assert!(text.contains("not (epsilon, delta)-DP guarantees"));
    }

    #[test]
    fn matched_eps_inverts_the_dp_bound() {
        for eps in [0.1, 1.0, 2.0, 6.0] {
            let b = dp_eps_to_mia_bound(eps, 1e-5).unwrap();
            assert!((matched_eps(b, 1e-5) - eps).abs() < 1e-9);
        }
    }
}
