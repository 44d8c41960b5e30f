use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("budget of {beta} nats is infeasible at q+ = {q_plus} (binary entropy {entropy})")]
    InfeasibleBudget { q_plus: f64, beta: f64, entropy: f64 },

    #[error("q+ = {0} is unanimous; no calibration is needed")]
    Unanimous(f64),

    #[error("no noise level in [{lo:e}, {hi:e}] reaches {beta} nats at q+ = {q_plus}")]
    CalibrationFailed { q_plus: f64, beta: f64, lo: f64, hi: f64 },

    #[error("non-finite loss at record {record} (|theta| = {theta_norm})")]
    NonFiniteLoss { record: usize, theta_norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("transcript schema error: {0}")]
    Schema(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}
