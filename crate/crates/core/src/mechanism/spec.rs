use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_UNANIMITY_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_SUBSETS_MI: usize = 128;
pub const DEFAULT_SUBSETS_ZPL: usize = 126;

/// A deterministic non-private replacement for the per-step release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMode {
    /// Clipped mean over the whole universe.
    RawFull,
    /// Sign of the clipped universe mean.
    QuantFull,
    /// Clipped mean over the secret subset.
    RawHalf,
    /// Sign of the clipped secret-subset mean.
    QuantHalf,
    /// A fair coin, ignoring the data.
    RandomSign,
}

impl SurrogateMode {
    pub const ALL: [SurrogateMode; 5] =
        [Self::RawFull, Self::QuantFull, Self::RawHalf, Self::QuantHalf, Self::RandomSign];

    pub fn name(self) -> &'static str {
        match self {
            Self::RawFull => "raw_full",
            Self::QuantFull => "quant_full",
            Self::RawHalf => "raw_half",
            Self::QuantHalf => "quant_half",
            Self::RandomSign => "random_sign",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Variant {
    /// Gaussian-noised release calibrated to an adaptive MI budget.
    PaczeroMi { mi_total: f64 },
    /// Fair coin on every disagreement step.
    PaczeroZpl,
    /// Non-private surrogate release; no accounting.
    Surrogate { mode: SurrogateMode },
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::PaczeroMi { .. } => "paczero_mi".into(),
            Variant::PaczeroZpl => "paczero_zpl".into(),
            Variant::Surrogate { mode } => mode.name().into(),
        }
    }

    pub fn is_private(&self) -> bool {
        !matches!(self, Variant::Surrogate { .. })
    }

    /// Total budget for accounting; zero for ZPL, `None` for surrogates.
    pub fn mi_total(&self) -> Option<f64> {
        match *self {
            Variant::PaczeroMi { mi_total } => Some(mi_total),
            Variant::PaczeroZpl => Some(0.0),
            Variant::Surrogate { .. } => None,
        }
    }
}

fn default_k() -> usize {
    1
}

fn default_tolerance() -> f64 {
    DEFAULT_UNANIMITY_TOLERANCE
}

/// Which release the mechanism performs and with what parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    pub variant: Variant,
    /// Number of candidate subsets `M`; defaults by variant when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<usize>,
    /// Directions per step; `1` is the plain mechanism.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Per-sample clip; absent means no clipping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub unanimity_tolerance: f64,
}

impl MechanismSpec {
    pub fn new(variant: Variant) -> Self {
        Self { variant, subsets: None, k: 1, clip: None, unanimity_tolerance: DEFAULT_UNANIMITY_TOLERANCE }
    }

    pub fn paczero_mi(mi_total: f64) -> Self {
        Self::new(Variant::PaczeroMi { mi_total })
    }

    pub fn paczero_zpl() -> Self {
        Self::new(Variant::PaczeroZpl)
    }

    pub fn surrogate(mode: SurrogateMode) -> Self {
        Self::new(Variant::Surrogate { mode })
    }

    pub fn with_subsets(mut self, m: usize) -> Self {
        self.subsets = Some(m);
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip = if clip.is_finite() { Some(clip) } else { None };
        self
    }

    pub fn num_subsets(&self) -> usize {
        self.subsets.unwrap_or(match self.variant {
            Variant::PaczeroZpl => DEFAULT_SUBSETS_ZPL,
            _ => DEFAULT_SUBSETS_MI,
        })
    }

    /// The clip as a magnitude, `∞` when unclipped.
    pub fn clip_value(&self) -> f64 {
        self.clip.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if let Variant::PaczeroMi { mi_total } = self.variant {
            if !(mi_total >= 0.0) || !mi_total.is_finite() {
                return Err(Error::config("mechanism.variant.mi_total", "must be finite and nonnegative"));
            }
        }
        let m = self.num_subsets();
        if m < 2 || m % 2 != 0 {
            return Err(Error::config("mechanism.subsets", format!("must be even and at least 2, got {m}")));
        }
        if self.k == 0 {
            return Err(Error::config("mechanism.k", "must be at least 1"));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::config("mechanism.clip", format!("must be positive, got {c}")));
            }
        }
        if !(0.0..0.5).contains(&self.unanimity_tolerance) {
            return Err(Error::config("mechanism.unanimity_tolerance", "must lie in [0, 0.5)"));
        }
        Ok(())
    }
}
