use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Fock truncation d={dim} too small: tail population {population:.3e} exceeds 1e-3")]
    TruncationTail { dim: usize, population: f64 },

    #[error("a Markov delta kernel has no pointwise value; use it only through its rate")]
    PointwiseDelta,

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{what} did not converge (achieved error {achieved:.3e})")]
    NonConvergence { what: &'static str, achieved: f64 },

    #[error(
        "fixed-point iteration failed at t={t}: residual {residual:.3e} after {sweeps} sweeps \
         (memory coupling too strong for this grid)"
    )]
    FixedPoint { t: f64, residual: f64, sweeps: usize },

    #[error("memory budget exceeded: {required_bytes} bytes required, budget {budget_bytes}")]
    MemoryBudget {
        required_bytes: usize,
        budget_bytes: usize,
    },

    #[error("trajectory {trajectory} norm {norm:.3e} overflowed at t={t}; reduce the step size")]
    NormOverflow { trajectory: u64, t: f64, norm: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("empty trajectory ensemble")]
    EmptyEnsemble,

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for problems with the user's input rather than the numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
