use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} is outside the representable fixed-point range (|v| < {bound})")]
    Overflow { value: f64, bound: f64 },

    #[error("protocol needs at least 2 parties, got {0}")]
    ProtocolArity(usize),

    #[error("share mismatch: {0}")]
    ShareMismatch(String),

    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("beaver triple {0} was already consumed")]
    TripleReuse(u64),

    #[error("protocol desync: {0}")]
    Desync(String),

    #[error("matrix is singular (reciprocal condition {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("could not sample a well-conditioned perturbation matrix after {0} attempts")]
    PerturbationRejected(usize),

    #[error("series has zero variance")]
    DegenerateVariance,

    #[error("series too short: need at least {needed} values, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("insufficient history: {len} rows but the polynomial needs more than {maxlag}")]
    InsufficientHistory { len: usize, maxlag: usize },

    #[error("column `{0}` is constant and cannot be min-max scaled")]
    ConstantColumn(String),

    #[error("gradient descent diverged at iteration {0}")]
    Divergence(usize),

    #[error("forecast horizon must be at least 1")]
    InvalidHorizon,

    #[error("reconstruction outside audit mode is not allowed")]
    AuditDisabled,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the CLI: 2 configuration, 3 protocol, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::SeriesTooShort { .. }
            | Error::InsufficientHistory { .. }
            | Error::ConstantColumn(_)
            | Error::InvalidHorizon
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::ProtocolArity(_)
            | Error::ShareMismatch(_)
            | Error::DimensionMismatch { .. }
            | Error::TripleReuse(_)
            | Error::Desync(_)
            | Error::AuditDisabled => 3,
            Error::Overflow { .. }
            | Error::Singular { .. }
            | Error::PerturbationRejected(_)
            | Error::DegenerateVariance
            | Error::Divergence(_) => 4,
        }
    }
}
