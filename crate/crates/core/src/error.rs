use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("singular least-squares system: column {column} is numerically dependent (|R_kk| = {pivot:e})")]
    Singular { column: usize, pivot: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model file: bad magic {found:?}")]
    BadMagic { found: [u8; 8] },

    #[error("model file: truncated stream, need {needed} bytes but only {available} available")]
    Truncated { needed: usize, available: usize },

    #[error("model file: CRC mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("model file: {0}")]
    Format(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("exhaustive search refused: C({n}, {k}) = {subsets} exceeds the limit of {limit} subsets")]
    TooManySubsets {
        n: usize,
        k: usize,
        subsets: u128,
        limit: u128,
    },

    #[error("internal consistency: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
