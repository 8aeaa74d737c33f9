use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are deliberately specific: callers (and the CLI, which prints
/// them as machine-readable JSON) can tell a capacity problem in a pilot
/// layout from a numerically indefinite covariance matrix.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file could not be parsed; the message carries the location
    /// (line or key) when one is known.
    #[error("parse error: {0}")]
    Parse(String),

    /// Configuration validation failed. The message lists every violated
    /// rule, one per line, so a bad config surfaces all problems at once.
    #[error("invalid configuration:\n{0}")]
    InvalidConfig(String),

    #[error("unsupported modulation order Q={0} (supported: 2, 4, 6)")]
    UnsupportedModulation(usize),

    #[error("pilot layout error: {0}")]
    PilotLayout(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix that must be positive semidefinite has an eigenvalue below
    /// the negativity tolerance.
    #[error("matrix not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    /// A per-stream degeneracy: zero diagonal after equalization, zero
    /// precoder row, vanishing main channel coefficient, and the like.
    #[error("stream {stream} degenerate: {reason}")]
    StreamDegenerate { stream: usize, reason: String },

    #[error("maximum-likelihood search space too large: {bits} label bits exceeds limit {limit}")]
    SearchSpaceTooLarge { bits: usize, limit: usize },

    #[error("rank-deficient channel: {0}")]
    RankDeficient(String),

    /// A numerical method failed to converge (adaptive quadrature hitting
    /// its depth limit, for instance).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Catch-all for argument preconditions (negative variance, empty
    /// batch, out-of-range index) that have no richer variant.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable tag for each variant, used by the CLI's
    /// JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
            Error::InvalidConfig(_) => "invalid-config",
            Error::UnsupportedModulation(_) => "unsupported-modulation",
            Error::PilotLayout(_) => "pilot-layout",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::NotPsd(_) => "not-psd",
            Error::Singular(_) => "singular",
            Error::StreamDegenerate { .. } => "stream-degenerate",
            Error::SearchSpaceTooLarge { .. } => "search-space-too-large",
            Error::RankDeficient(_) => "rank-deficient",
            Error::Numerical(_) => "numerical",
            Error::InvalidInput(_) => "invalid-input",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
