use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("matrix is singular (|det| = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("network {index} cannot be combined: {reason}")]
    Incompatible { index: usize, reason: String },

    #[error("weight {weight} lies outside [-{bound}, {bound}]")]
    WeightOutOfRange { weight: f64, bound: f64 },

    #[error("weight {weight} is not on the 2^-{fractional_bits} grid")]
    OffGrid { weight: f64, fractional_bits: u32 },

    #[error("no fractional width up to {max_f} reaches sup error {target:e} (best achieved {achieved:e})")]
    QuantizationFailed {
        target: f64,
        achieved: f64,
        max_f: u32,
    },

    #[error("network is not normalized: {0}")]
    NotNormalized(String),

    #[error("decode error at bit {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("requested {requested} atoms but only {available} are available")]
    NotEnoughAtoms { requested: usize, available: usize },

    #[error("stage `{stage}` missed its budget: achieved {achieved:e}, allowed {budget:e}")]
    BudgetMissed {
        stage: &'static str,
        achieved: f64,
        budget: f64,
    },

    #[error("non-finite loss at epoch {epoch} (try a smaller learning rate)")]
    NonFiniteLoss { epoch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of a numerical target rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuantizationFailed { .. }
                | Error::BudgetMissed { .. }
                | Error::NonFiniteLoss { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
